//! Exact sampling and evaluation of uniform transport processes.
//!
//! A path of index `n` is the scaled signed area
//! `X_n(t) = n^{-1/2} * sign0 * integral_0^{tn} (-1)^{N(u)} du`
//! of a rate-1 Poisson sign flip `N` started at +1. The integrand is piecewise
//! constant, so integration is event-driven: a sum of signed segment lengths
//! with the sign flipping at each jump. There is no quadrature error anywhere;
//! segment sums use compensated accumulation because up to `n` terms of
//! magnitude O(1) are added.

use crate::error::{require, Result};
use crate::rng::{exp_draw, sign_draw};
use rand::RngCore;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(self) -> f64 {
        self.sum + self.comp
    }
}

/// Exact integrator state for a piecewise-constant sign process.
///
/// `value_at` never mutates, so a sweep can snapshot the integral at grid
/// points between jumps; the result is bitwise identical to a fresh scalar
/// evaluation because both perform the same operation sequence.
#[derive(Debug, Clone, Copy)]
pub struct SignedAreaAccumulator {
    area: CompensatedSum,
    sign: f64,
    last_event: f64,
}

impl SignedAreaAccumulator {
    pub fn new(sign0: f64) -> Self {
        debug_assert!(sign0 == 1.0 || sign0 == -1.0);
        SignedAreaAccumulator {
            area: CompensatedSum::default(),
            sign: sign0,
            last_event: 0.0,
        }
    }

    /// Closes the segment ending at `u` and flips the sign.
    #[inline]
    pub fn flip_at(&mut self, u: f64) {
        debug_assert!(u >= self.last_event);
        self.area.add(self.sign * (u - self.last_event));
        self.sign = -self.sign;
        self.last_event = u;
    }

    /// Integral up to `u`, including the open partial segment.
    #[inline]
    pub fn value_at(&self, u: f64) -> f64 {
        debug_assert!(u >= self.last_event);
        let mut area = self.area;
        area.add(self.sign * (u - self.last_event));
        area.value()
    }
}

/// Ascending jump times of a Poisson process on a finite horizon.
#[derive(Debug, Clone)]
pub struct PoissonJumpStream {
    rate: f64,
    horizon: f64,
    jumps: Vec<f64>,
}

/// Appends a jump, cancelling equal-time pairs (two sign flips at one instant
/// are a no-op and would break strict ascent).
#[inline]
fn push_jump(jumps: &mut Vec<f64>, t: f64) {
    if jumps.last() == Some(&t) {
        jumps.pop();
    } else {
        jumps.push(t);
    }
}

/// Samples jump times as partial sums of iid Exp(rate) gaps, truncated at the
/// horizon. Deterministic given the generator state.
pub fn sample_jump_stream(
    rate: f64,
    horizon: f64,
    rng: &mut impl RngCore,
) -> Result<PoissonJumpStream> {
    require(
        rate.is_finite() && rate > 0.0,
        "rate",
        format!("must be positive and finite, got {rate}"),
    )?;
    require(
        horizon.is_finite() && horizon >= 0.0,
        "horizon",
        format!("must be nonnegative and finite, got {horizon}"),
    )?;
    let expected = rate * horizon;
    let mut jumps = Vec::with_capacity((expected + 4.0 * expected.sqrt()).min(1e8) as usize + 8);
    let mut clock = 0.0;
    loop {
        clock += exp_draw(rng, rate);
        if clock > horizon {
            break;
        }
        push_jump(&mut jumps, clock);
    }
    Ok(PoissonJumpStream {
        rate,
        horizon,
        jumps,
    })
}

impl PoissonJumpStream {
    /// Builds a stream from explicit jump times, validating the invariants.
    pub fn from_parts(rate: f64, horizon: f64, jumps: Vec<f64>) -> Result<Self> {
        require(rate.is_finite() && rate > 0.0, "rate", "must be positive")?;
        require(horizon.is_finite() && horizon >= 0.0, "horizon", "must be nonnegative")?;
        for pair in jumps.windows(2) {
            require(
                pair[0] < pair[1],
                "jumps",
                format!("not strictly increasing at {} -> {}", pair[0], pair[1]),
            )?;
        }
        if let (Some(first), Some(last)) = (jumps.first(), jumps.last()) {
            require(*first > 0.0, "jumps", "first jump must be positive")?;
            require(*last <= horizon, "jumps", "last jump exceeds horizon")?;
        }
        Ok(PoissonJumpStream { rate, horizon, jumps })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    /// Inter-arrival gaps, including the first jump measured from 0.
    pub fn gaps(&self) -> Vec<f64> {
        let mut gaps = Vec::with_capacity(self.jumps.len());
        let mut prev = 0.0;
        for &j in &self.jumps {
            gaps.push(j - prev);
            prev = j;
        }
        gaps
    }
}

/// One uniform transport process, evaluable exactly at any `t` in [0, 1].
///
/// Immutable after construction; safe to share read-only across workers.
#[derive(Debug, Clone)]
pub struct TransportPath {
    n: u64,
    sign0: i8,
    stream: PoissonJumpStream,
}

impl TransportPath {
    /// Samples a path of index `n`. The initial sign is one fair bit drawn
    /// before the jump stream; this draw order is part of the
    /// reproducibility contract.
    pub fn sample(n: u64, rng: &mut impl RngCore) -> Result<Self> {
        require(n >= 1, "n", "must be a positive integer")?;
        let sign0 = sign_draw(rng);
        let stream = sample_jump_stream(1.0, n as f64, rng)?;
        Ok(TransportPath { n, sign0, stream })
    }

    /// Builds a path from explicit parts (rate must be 1, horizon >= n).
    pub fn from_parts(n: u64, sign0: i8, stream: PoissonJumpStream) -> Result<Self> {
        require(n >= 1, "n", "must be a positive integer")?;
        require(sign0 == 1 || sign0 == -1, "sign0", "must be +1 or -1")?;
        require(stream.rate == 1.0, "stream", "transport paths use rate-1 streams")?;
        require(
            stream.horizon >= n as f64,
            "stream",
            format!("horizon {} shorter than n = {n}", stream.horizon),
        )?;
        Ok(TransportPath { n, sign0, stream })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn sign0(&self) -> i8 {
        self.sign0
    }

    pub fn stream(&self) -> &PoissonJumpStream {
        &self.stream
    }

    /// The unscaled signed area `sign0 * integral_0^{tn} (-1)^{N(u)} du`.
    pub fn raw_integral(&self, t: f64) -> Result<f64> {
        check_unit_time(t)?;
        let cutoff = t * self.n as f64;
        let mut acc = SignedAreaAccumulator::new(self.sign0 as f64);
        for &u in &self.stream.jumps {
            if u < cutoff {
                acc.flip_at(u);
            } else {
                break;
            }
        }
        Ok(acc.value_at(cutoff))
    }

    /// `X_n(t)`; continuous, piecewise linear in `t` with slope magnitude
    /// sqrt(n) between kinks, and |value| <= t sqrt(n).
    pub fn value(&self, t: f64) -> Result<f64> {
        Ok(self.raw_integral(t)? / (self.n as f64).sqrt())
    }

    /// Unscaled signed areas at every grid point in one sweep over the merged
    /// jump/grid events; bitwise identical to per-point scalar evaluation.
    pub fn raw_integrals_on_grid(&self, grid: &[f64]) -> Result<Vec<f64>> {
        check_grid(grid)?;
        let nf = self.n as f64;
        let mut acc = SignedAreaAccumulator::new(self.sign0 as f64);
        let mut j = 0;
        let mut out = Vec::with_capacity(grid.len());
        for &t in grid {
            let cutoff = t * nf;
            while j < self.stream.jumps.len() && self.stream.jumps[j] < cutoff {
                acc.flip_at(self.stream.jumps[j]);
                j += 1;
            }
            out.push(acc.value_at(cutoff));
        }
        Ok(out)
    }

    /// `X_n` at every grid point, in one sweep.
    pub fn values_on_grid(&self, grid: &[f64]) -> Result<Vec<f64>> {
        let scale = (self.n as f64).sqrt();
        Ok(self
            .raw_integrals_on_grid(grid)?
            .into_iter()
            .map(|raw| raw / scale)
            .collect())
    }
}

fn check_unit_time(t: f64) -> Result<()> {
    require(
        t.is_finite() && (0.0..=1.0).contains(&t),
        "t",
        format!("must lie in [0, 1], got {t}"),
    )
}

fn check_grid(grid: &[f64]) -> Result<()> {
    for &t in grid {
        check_unit_time(t)?;
    }
    for pair in grid.windows(2) {
        require(
            pair[0] <= pair[1],
            "grid",
            format!("not ascending at {} -> {}", pair[0], pair[1]),
        )?;
    }
    Ok(())
}

/// Streaming evaluation: regenerates the gap stream from the generator
/// instead of storing jump times, producing values bitwise identical to
/// sampling a stored path with the same generator state. Keeps evaluation
/// total for indices far beyond what fits in memory.
pub fn streaming_raw_integrals_on_grid(
    n: u64,
    rng: &mut impl RngCore,
    grid: &[f64],
) -> Result<Vec<f64>> {
    require(n >= 1, "n", "must be a positive integer")?;
    check_grid(grid)?;
    let nf = n as f64;
    let sign0 = sign_draw(rng) as f64;
    let mut acc = SignedAreaAccumulator::new(sign0);
    let mut out = Vec::with_capacity(grid.len());

    // One-jump lookahead reproduces the equal-time cancellation of the stored
    // sampler: a candidate is only emitted once a strictly later jump appears.
    let mut clock = 0.0;
    let mut candidate: Option<f64> = None;
    let mut exhausted = false;
    let mut pending: Option<f64> = None;
    let mut next_jump = move || -> Option<f64> {
        if exhausted {
            return None;
        }
        loop {
            clock += exp_draw(rng, 1.0);
            if clock > nf {
                exhausted = true;
                return candidate.take();
            }
            match candidate {
                None => candidate = Some(clock),
                Some(c) if clock == c => candidate = None,
                Some(c) => {
                    candidate = Some(clock);
                    return Some(c);
                }
            }
        }
    };

    for &t in grid {
        let cutoff = t * nf;
        loop {
            let jump = match pending.take() {
                Some(u) => Some(u),
                None => next_jump(),
            };
            match jump {
                Some(u) if u < cutoff => acc.flip_at(u),
                Some(u) => {
                    pending = Some(u);
                    break;
                }
                None => break,
            }
        }
        out.push(acc.value_at(cutoff));
    }
    Ok(out)
}

/// Streaming `X_n(t)` for a single time.
pub fn streaming_transport_value(n: u64, rng: &mut impl RngCore, t: f64) -> Result<f64> {
    let raw = streaming_raw_integrals_on_grid(n, rng, std::slice::from_ref(&t))?[0];
    Ok(raw / (n as f64).sqrt())
}

/// Closed form of `Var X_n(t) = t - (1 - e^{-2nt}) / (2n)`, derived from the
/// sign autocovariance `E[(-1)^{N(u)}(-1)^{N(v)}] = e^{-2|u-v|}`.
pub fn transport_variance_exact(n: u64, t: f64) -> Result<f64> {
    require(n >= 1, "n", "must be a positive integer")?;
    check_unit_time(t)?;
    let nf = n as f64;
    Ok(t - (-(-2.0 * nf * t).exp_m1()) / (2.0 * nf))
}
