//! Strip-partitioned approximation of the Brownian sheet and its d-parameter
//! generalization.
//!
//! The unit cube splits into `floor(n^lambda)` strips of width `n^-lambda`
//! per spatial axis (the last axis is time). Each strip carries one
//! independent transport path of index `n`; the field value is the scaled
//! partial sum of strip integrals, with the fractional strip entering through
//! a multilinear (tensor-product) weight. Beyond the last full strip boundary
//! the field is constant in that coordinate.

use crate::error::{require, Error, Result};
use crate::rng::derive_rng;
use crate::transport::TransportPath;

/// Parameter regime for the scaling exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaMode {
    /// `lambda` restricted to (0, 1/(5(d-1))), the range with a proven
    /// almost-sure uniform convergence guarantee.
    Theorem,
    /// Any `lambda` in (0, 1); the process is well defined there and this
    /// mode supports convergence-rate studies outside the proven range.
    Exploratory,
}

/// Index, exponent and dimension of a sheet approximation.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SheetParams {
    n: u64,
    lambda: f64,
    d: u32,
    mode: LambdaMode,
}

/// Snaps `x` to the nearest integer when within one ulp, so strip counts do
/// not straddle platforms that round `powf` differently.
pub(crate) fn snap_to_integer(x: f64) -> f64 {
    let nearest = x.round();
    if nearest > 0.0 && (x - nearest).abs() <= x * f64::EPSILON {
        nearest
    } else {
        x
    }
}

impl SheetParams {
    pub fn new(n: u64, lambda: f64, d: u32, mode: LambdaMode) -> Result<Self> {
        require(n >= 1, "n", "must be a positive integer")?;
        require(d >= 2, "d", format!("must be at least 2, got {d}"))?;
        require(
            lambda.is_finite() && lambda > 0.0,
            "lambda",
            format!("must be positive, got {lambda}"),
        )?;
        match mode {
            LambdaMode::Theorem => require(
                lambda < Self::theorem_lambda_sup(d),
                "lambda",
                format!(
                    "theorem mode requires lambda in (0, {:.6}) for d = {d}, got {lambda}",
                    Self::theorem_lambda_sup(d)
                ),
            )?,
            LambdaMode::Exploratory => require(
                lambda < 1.0,
                "lambda",
                format!("exploratory mode requires lambda in (0, 1), got {lambda}"),
            )?,
        }
        Ok(SheetParams { n, lambda, d, mode })
    }

    /// Upper end of the proven-convergence range, 1/(5(d-1)).
    pub fn theorem_lambda_sup(d: u32) -> f64 {
        1.0 / (5.0 * (d as f64 - 1.0))
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn mode(&self) -> LambdaMode {
        self.mode
    }

    /// `n^lambda` with the one-ulp integer guard applied.
    pub fn pow_n_lambda(&self) -> f64 {
        snap_to_integer((self.n as f64).powf(self.lambda))
    }

    /// Strips per spatial axis, `floor(n^lambda)`; at least 1 for any n >= 1.
    pub fn strips_per_axis(&self) -> u64 {
        self.pow_n_lambda().floor() as u64
    }

    /// Total number of independent strip paths, `strips^(d-1)`.
    pub fn strip_count(&self) -> Result<u64> {
        self.strips_per_axis()
            .checked_pow(self.d - 1)
            .filter(|c| *c <= 100_000_000)
            .ok_or_else(|| Error::invalid("params", "strip family too large to materialize"))
    }

    /// Amplitude applied to strip integrals: `n^{-(1+(d-1) lambda)/2}`.
    pub fn scale(&self) -> f64 {
        (self.n as f64).powf(-(1.0 + (self.d - 1) as f64 * self.lambda) / 2.0)
    }
}

/// Position of a coordinate relative to the strip partition: the number of
/// complete strips below it and the fractional weight on the next one.
/// Coordinates at or beyond the last full strip boundary sit on the plateau
/// (`base = strips`, zero fraction).
#[derive(Debug, Clone, Copy)]
struct AxisPosition {
    base: u64,
    frac: f64,
}

fn axis_position(coord: f64, pow_n_lambda: f64, strips: u64) -> AxisPosition {
    let x = coord * pow_n_lambda;
    if x >= strips as f64 {
        AxisPosition {
            base: strips,
            frac: 0.0,
        }
    } else {
        let base = x.floor();
        AxisPosition {
            base: base as u64,
            frac: x - base,
        }
    }
}

/// The strip family of one sheet approximation, evaluable anywhere on the
/// unit cube. Immutable after construction; concurrent read-only evaluation
/// is fine.
#[derive(Debug, Clone)]
pub struct SheetApproximation {
    params: SheetParams,
    master_seed: u64,
    strips: Vec<TransportPath>,
}

/// Builds the strip family. Strip (k_1, ..., k_{d-1}) draws its path from the
/// generator keyed by (master_seed, "strip", k), so strips are independent
/// and the build is reproducible regardless of evaluation order.
pub fn build_sheet(params: SheetParams, master_seed: u64) -> Result<SheetApproximation> {
    let strips_per_axis = params.strips_per_axis();
    require(strips_per_axis >= 1, "params", "strip count must be at least 1")?;
    let count = params.strip_count()?;
    let spatial_axes = (params.d - 1) as usize;
    let mut strips = Vec::with_capacity(count as usize);
    let mut multi = vec![1u64; spatial_axes];
    for flat in 0..count {
        decode_multi_index(flat, strips_per_axis, &mut multi);
        let mut rng = derive_rng(master_seed, "strip", &multi);
        strips.push(TransportPath::sample(params.n, &mut rng)?);
    }
    Ok(SheetApproximation {
        params,
        master_seed,
        strips,
    })
}

/// Writes the 1-based multi-index of `flat` (row-major, last axis fastest).
fn decode_multi_index(flat: u64, strips_per_axis: u64, multi: &mut [u64]) {
    let mut rem = flat;
    for slot in multi.iter_mut().rev() {
        *slot = 1 + rem % strips_per_axis;
        rem /= strips_per_axis;
    }
}

impl SheetApproximation {
    pub fn params(&self) -> &SheetParams {
        &self.params
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// The transport path of strip `multi` (1-based multi-index).
    pub fn strip(&self, multi: &[u64]) -> &TransportPath {
        &self.strips[self.flat_index(multi)]
    }

    fn flat_index(&self, multi: &[u64]) -> usize {
        let m = self.params.strips_per_axis();
        debug_assert_eq!(multi.len(), (self.params.d - 1) as usize);
        let mut flat = 0u64;
        for &k in multi {
            debug_assert!((1..=m).contains(&k));
            flat = flat * m + (k - 1);
        }
        flat as usize
    }

    /// Sheet value at `(s, t)`; only for d = 2.
    pub fn value(&self, s: f64, t: f64) -> Result<f64> {
        require(
            self.params.d == 2,
            "d",
            format!("value(s, t) needs d = 2, this sheet has d = {}", self.params.d),
        )?;
        self.value_at(&[s, t])
    }

    /// Sheet value at a point of the unit cube; the last coordinate is time.
    pub fn value_at(&self, x: &[f64]) -> Result<f64> {
        let d = self.params.d as usize;
        require(
            x.len() == d,
            "x",
            format!("expected {d} coordinates, got {}", x.len()),
        )?;
        for &c in x {
            require(
                c.is_finite() && (0.0..=1.0).contains(&c),
                "x",
                format!("coordinate {c} escapes [0, 1]"),
            )?;
        }
        let t = x[d - 1];
        let positions = self.positions(&x[..d - 1]);
        Ok(self.combine(&positions, |flat| {
            self.strips[flat].raw_integral(t).expect("t validated above")
        }))
    }

    fn positions(&self, spatial: &[f64]) -> Vec<AxisPosition> {
        let pow = self.params.pow_n_lambda();
        let strips = self.params.strips_per_axis();
        spatial
            .iter()
            .map(|&c| axis_position(c, pow, strips))
            .collect()
    }

    /// Evaluates the multilinear blend as the base-corner nested sum plus
    /// fractional rectangle increments: for every subset J of spatial axes
    /// with nonzero fractions, the product of fractions times the sum of
    /// strip integrals over the box with k_i = base_i + 1 on J and
    /// k_i <= base_i elsewhere. For d = 2 this reduces operation-for-
    /// operation to `sum_{k <= floor(s n^lambda)} + frac * next strip`.
    fn combine(&self, positions: &[AxisPosition], mut strip_raw: impl FnMut(usize) -> f64) -> f64 {
        let axes = positions.len();
        let mut total = 0.0;
        let mut multi = vec![0u64; axes];
        'subsets: for mask in 0u32..(1u32 << axes) {
            let mut weight = 1.0;
            for (i, pos) in positions.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    if pos.frac == 0.0 {
                        continue 'subsets;
                    }
                    weight *= pos.frac;
                } else if pos.base == 0 {
                    continue 'subsets; // empty box
                }
            }
            total += weight * self.sum_box(mask, positions, &mut multi, &mut strip_raw);
        }
        total * self.params.scale()
    }

    /// Sums strip integrals over one box, last axis fastest, ascending.
    fn sum_box(
        &self,
        mask: u32,
        positions: &[AxisPosition],
        multi: &mut [u64],
        strip_raw: &mut impl FnMut(usize) -> f64,
    ) -> f64 {
        let axes = positions.len();
        for (i, pos) in positions.iter().enumerate() {
            multi[i] = if mask & (1 << i) != 0 { pos.base + 1 } else { 1 };
        }
        if axes == 0 {
            // d = 1 never occurs (d >= 2), but keep the sum total.
            return 0.0;
        }
        let mut sum = 0.0;
        loop {
            sum += strip_raw(self.flat_index(multi));
            let mut axis = axes as i64 - 1;
            while axis >= 0 {
                let i = axis as usize;
                if mask & (1 << i) == 0 {
                    if multi[i] < positions[i].base {
                        multi[i] += 1;
                        break;
                    }
                    multi[i] = 1;
                }
                axis -= 1;
            }
            if axis < 0 {
                return sum;
            }
        }
    }

    /// Values on a full grid, row-major with the time axis fastest. Strip
    /// integrals are swept once per strip over the time grid, then combined
    /// per point with exactly the same operations as `value_at`, so exported
    /// tables reproduce in-memory evaluations bitwise.
    pub fn values_on_grid(&self, grid: &GridSpec) -> Result<Vec<f64>> {
        let d = self.params.d as usize;
        require(
            grid.axes().len() == d,
            "grid",
            format!("expected {d} axes, got {}", grid.axes().len()),
        )?;
        let t_grid = &grid.axes()[d - 1];
        let cache: Vec<Vec<f64>> = self
            .strips
            .iter()
            .map(|p| p.raw_integrals_on_grid(t_grid))
            .collect::<Result<_>>()?;

        let spatial_axes = &grid.axes()[..d - 1];
        let spatial_points: usize = spatial_axes.iter().map(|a| a.len()).product();
        let mut out = Vec::with_capacity(spatial_points * t_grid.len());
        let mut spatial_index = vec![0usize; d - 1];
        for _ in 0..spatial_points {
            let coords: Vec<f64> = spatial_index
                .iter()
                .zip(spatial_axes)
                .map(|(&i, axis)| axis[i])
                .collect();
            let positions = self.positions(&coords);
            for ti in 0..t_grid.len() {
                out.push(self.combine(&positions, |flat| cache[flat][ti]));
            }
            // advance spatial odometer, last spatial axis fastest
            for axis in (0..d - 1).rev() {
                spatial_index[axis] += 1;
                if spatial_index[axis] < spatial_axes[axis].len() {
                    break;
                }
                spatial_index[axis] = 0;
            }
        }
        Ok(out)
    }
}

/// Per-axis ascending evaluation points inside the unit cube.
#[derive(Debug, Clone, serde::Serialize)]
pub struct GridSpec {
    axes: Vec<Vec<f64>>,
}

impl GridSpec {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        require(!axes.is_empty(), "grid", "need at least one axis")?;
        for axis in &axes {
            require(!axis.is_empty(), "grid", "axes must be non-empty")?;
            for &v in axis {
                require(
                    v.is_finite() && (0.0..=1.0).contains(&v),
                    "grid",
                    format!("point {v} escapes [0, 1]"),
                )?;
            }
            for pair in axis.windows(2) {
                require(
                    pair[0] <= pair[1],
                    "grid",
                    format!("axis not ascending at {} -> {}", pair[0], pair[1]),
                )?;
            }
        }
        Ok(GridSpec { axes })
    }

    /// Uniform grids including both endpoints; a single point sits at 0.
    pub fn uniform(points_per_axis: &[usize]) -> Result<Self> {
        let axes = points_per_axis
            .iter()
            .map(|&m| {
                require(m >= 1, "grid", "need at least one point per axis")?;
                Ok(if m == 1 {
                    vec![0.0]
                } else {
                    (0..m).map(|i| i as f64 / (m - 1) as f64).collect()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        GridSpec::new(axes)
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn point_count(&self) -> usize {
        self.axes.iter().map(|a| a.len()).product()
    }
}
