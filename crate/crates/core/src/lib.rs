//! Event-driven simulation of uniform transport processes and their
//! strip-partitioned sums, which strongly approximate the Brownian sheet and
//! the d-parameter Wiener process, together with a Skorokhod-embedding
//! coupling laboratory for measuring the approximation error on joint
//! realizations.
//!
//! The crate splits into:
//! - [`transport`]: exact sampling and evaluation of single transport paths;
//! - [`sheet`]: the strip-partitioned field on the unit cube;
//! - [`gaussian`]: direct Gaussian references (Brownian motion, Wiener grids);
//! - [`coupling`]: exit-time embeddings, stopping schedules, coupled
//!   realizations and their sup-error;
//! - [`stats`]: the statistical verification kernel;
//! - [`verify`]: the seeded pass/fail verification suite;
//! - [`grid_io`]: CSV/JSON artifacts.

pub mod coupling;
pub mod error;
pub mod gaussian;
pub mod grid_io;
pub mod rng;
pub mod sheet;
pub mod stats;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
pub use sheet::{GridSpec, LambdaMode, SheetApproximation, SheetParams};
pub use transport::{PoissonJumpStream, TransportPath};
