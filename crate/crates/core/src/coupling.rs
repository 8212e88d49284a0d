//! Skorokhod-embedding coupling of the sheet approximation with the sheet
//! itself.
//!
//! Each strip embeds 2n^2 symmetric exponential increments into its Brownian
//! motion: an increment of law (fair sign) * Exp(2n) is realized as the exit
//! value of the Brownian increment from a randomized two-sided barrier pair,
//! exit detected on a fine time grid with a Brownian-bridge crossing
//! correction between grid points. The stopping lengths sigma, the exit
//! values, and the surrogate clocks gamma = |increment| / n make up an
//! [`EmbeddingSchedule`]; pinning the piecewise-linear reconstruction to the
//! embedded values at the partial sums of gamma yields the approximating
//! strip, while the Brownian path itself yields the target strip. Both
//! processes are measurable functions of the same path and the same auxiliary
//! randomness, so their sup-distance is a simulatable random variable.

use crate::error::{require, Error, Result};
use crate::gaussian::{simulate_bm_path, BrownianPath};
use crate::rng::{derive_rng, derive_seed64, exp_draw, uniform_open01};
use crate::sheet::{LambdaMode, SheetParams};
use crate::stats::{exp_cdf, ks_test, LogLogFit};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Horizons tried for strip Brownian paths: the schedule's total stopping
/// time concentrates near 1, so 1.5 almost always suffices; one extension to
/// 2.0 is attempted before giving up.
pub const HORIZON_SCHEDULE: [f64; 2] = [1.5, 2.0];

/// Exit barriers around 0. Strictly two-sided: a zero barrier would stop the
/// embedding instantly with a degenerate exit, so it is rejected here.
#[derive(Debug, Clone, Copy)]
pub struct BarrierPair {
    alpha: f64,
    beta: f64,
}

impl BarrierPair {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        require(
            alpha.is_finite() && alpha < 0.0,
            "alpha",
            format!("must be strictly negative, got {alpha}"),
        )?;
        require(
            beta.is_finite() && beta > 0.0,
            "beta",
            format!("must be strictly positive, got {beta}"),
        )?;
        Ok(BarrierPair { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Draws a barrier pair from the Skorokhod randomization for the symmetric
/// +/-Exp(2n) target: joint density proportional to
/// (beta - alpha) f(-alpha) f(beta) with f the Exp(2n) density. Sampled as a
/// size-biased mixture: one side Gamma(2, 2n), the other Exp(2n), each with
/// probability 1/2.
pub fn sample_barrier_pair(n: u64, rng: &mut impl rand::RngCore) -> Result<BarrierPair> {
    require(n >= 1, "n", "must be a positive integer")?;
    let rate = 2.0 * n as f64;
    let pick = uniform_open01(rng);
    let e1 = exp_draw(rng, rate);
    let e2 = exp_draw(rng, rate);
    let e3 = exp_draw(rng, rate);
    let (alpha, beta) = if pick < 0.5 {
        (-e3, e1 + e2)
    } else {
        (-(e1 + e2), e3)
    };
    BarrierPair::new(alpha, beta)
}

#[derive(Debug, Clone, Copy)]
struct ExitEvent {
    steps: usize,
    exit_value: f64,
}

/// Walks the path from `start_index` until the increment leaves
/// (alpha, beta); between grid points a Brownian-bridge correction fires with
/// probability exp(-2 (b - x0)(b - x1) / step) per barrier. The exit value is
/// the path increment at the detection point, so embedded values sit exactly
/// on the path: the reconstruction then interpolates true path positions and
/// the two clocks (stopping lengths and |increment|/n) carry matching
/// detection jitter that cancels in the coupling error.
fn walk_to_exit(
    path: &BrownianPath,
    start_index: usize,
    pair: &BarrierPair,
    mut bridge_rng: Option<&mut ChaCha8Rng>,
) -> Option<ExitEvent> {
    let step = path.step();
    let origin = path.value_at_index(start_index);
    let mut prev = 0.0;
    for (offset, idx) in (start_index + 1..path.len()).enumerate() {
        let x = path.value_at_index(idx) - origin;
        if x >= pair.beta || x <= pair.alpha {
            return Some(ExitEvent {
                steps: offset + 1,
                exit_value: x,
            });
        }
        if let Some(rng) = bridge_rng.as_deref_mut() {
            let up_exponent = -2.0 * (pair.beta - prev) * (pair.beta - x) / step;
            let down_exponent = -2.0 * (prev - pair.alpha) * (x - pair.alpha) / step;
            let p_up = if up_exponent > -40.0 { up_exponent.exp() } else { 0.0 };
            let p_down = if down_exponent > -40.0 { down_exponent.exp() } else { 0.0 };
            if p_up > 0.0 || p_down > 0.0 {
                let u = uniform_open01(rng);
                if u < p_up + p_down {
                    return Some(ExitEvent {
                        steps: offset + 1,
                        exit_value: x,
                    });
                }
            }
        }
        prev = x;
    }
    None
}

/// One exit-time embedding starting at `start_time` (rounded to the path
/// grid). Returns the grid-detected stopping length tau and the exit value
/// (the path increment at detection, within one step's movement of the hit
/// barrier).
pub fn embed_one(
    bm: &BrownianPath,
    start_time: f64,
    pair: &BarrierPair,
    bridge_rng: Option<&mut ChaCha8Rng>,
) -> Result<(f64, f64)> {
    require(
        start_time.is_finite() && start_time >= 0.0,
        "start_time",
        format!("must be nonnegative, got {start_time}"),
    )?;
    let start_index = (start_time / bm.step()).round() as usize;
    require(
        start_index + 1 < bm.len(),
        "start_time",
        format!("start {start_time} leaves no room before the horizon {}", bm.horizon()),
    )?;
    let exit = walk_to_exit(bm, start_index, pair, bridge_rng).ok_or(Error::HorizonExhausted {
        embeddings_done: 0,
        horizon: bm.horizon(),
    })?;
    Ok((exit.steps as f64 * bm.step(), exit.exit_value))
}

/// The per-strip coupling skeleton: 2n^2 stopping lengths, the embedded
/// Brownian values at their partial sums, and the derived clocks
/// gamma_i = |embedded increment i| / n (distributed Exp(2n^2)).
#[derive(Debug, Clone)]
pub struct EmbeddingSchedule {
    n: u64,
    sigma: Vec<f64>,
    increments: Vec<f64>,
    embedded_values: Vec<f64>,
    gamma: Vec<f64>,
}

/// Number of embeddings in a schedule of index n.
pub fn schedule_len(n: u64) -> usize {
    (2 * n * n) as usize
}

/// Runs 2n^2 sequential embeddings along the path. `rng` supplies the
/// barrier pairs and the bridge-correction uniforms.
pub fn build_schedule(
    bm: &BrownianPath,
    n: u64,
    rng: &mut ChaCha8Rng,
    bridge_correction: bool,
) -> Result<EmbeddingSchedule> {
    require(n >= 1, "n", "must be a positive integer")?;
    let count = schedule_len(n);
    let step = bm.step();
    let scale = n as f64;
    let mut sigma = Vec::with_capacity(count);
    let mut increments = Vec::with_capacity(count);
    let mut embedded_values = Vec::with_capacity(count);
    let mut gamma = Vec::with_capacity(count);
    let mut index = 0usize;
    let mut embedded = 0.0;
    for i in 0..count {
        let pair = sample_barrier_pair(n, rng)?;
        let bridge = if bridge_correction { Some(&mut *rng) } else { None };
        let exit = walk_to_exit(bm, index, &pair, bridge).ok_or(Error::HorizonExhausted {
            embeddings_done: i,
            horizon: bm.horizon(),
        })?;
        index += exit.steps;
        sigma.push(exit.steps as f64 * step);
        embedded += exit.exit_value;
        increments.push(exit.exit_value);
        embedded_values.push(embedded);
        gamma.push(exit.exit_value.abs() / scale);
    }
    Ok(EmbeddingSchedule {
        n,
        sigma,
        increments,
        embedded_values,
        gamma,
    })
}

impl EmbeddingSchedule {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn embedded_values(&self) -> &[f64] {
        &self.embedded_values
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// Successive exit values (the embedded increments).
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    fn partial_sums(xs: &[f64]) -> Vec<f64> {
        let mut acc = 0.0;
        xs.iter()
            .map(|&x| {
                acc += x;
                acc
            })
            .collect()
    }

    pub fn sigma_partial_sums(&self) -> Vec<f64> {
        Self::partial_sums(&self.sigma)
    }

    pub fn gamma_partial_sums(&self) -> Vec<f64> {
        Self::partial_sums(&self.gamma)
    }

    /// max_i | sum_{j<=i} xs_j - i/(2n^2) |, the Kolmogorov-type deviation of
    /// the partial sums from the reference clock.
    fn max_deviation(&self, xs: &[f64]) -> f64 {
        let target = 1.0 / (2.0 * (self.n * self.n) as f64);
        let mut acc = 0.0;
        let mut max_dev = 0.0f64;
        for (i, &x) in xs.iter().enumerate() {
            acc += x;
            max_dev = max_dev.max((acc - (i + 1) as f64 * target).abs());
        }
        max_dev
    }

    pub fn sigma_max_deviation(&self) -> f64 {
        self.max_deviation(&self.sigma)
    }

    pub fn gamma_max_deviation(&self) -> f64 {
        self.max_deviation(&self.gamma)
    }

    /// Fault-injection hook for the verification suite: corrupts one clock so
    /// the knot identity check must fail.
    #[doc(hidden)]
    pub fn corrupt_gamma_for_fault_injection(&mut self, index: usize) {
        self.gamma[index] *= 1.5;
    }
}

/// A piecewise-linear path pinned at knots, constant beyond the last knot.
#[derive(Debug, Clone)]
pub struct PiecewiseLinearPath {
    times: Vec<f64>,
    values: Vec<f64>,
}

/// Builds the approximating strip: knots at the partial sums of gamma, knot
/// values equal to the embedded Brownian values, anchored at (0, 0).
pub fn reconstruct_strip(schedule: &EmbeddingSchedule) -> PiecewiseLinearPath {
    let mut times = Vec::with_capacity(schedule.len() + 1);
    let mut values = Vec::with_capacity(schedule.len() + 1);
    times.push(0.0);
    values.push(0.0);
    let mut acc = 0.0;
    for (g, v) in schedule.gamma.iter().zip(&schedule.embedded_values) {
        acc += g;
        times.push(acc);
        values.push(*v);
    }
    PiecewiseLinearPath { times, values }
}

impl PiecewiseLinearPath {
    pub fn knot_times(&self) -> &[f64] {
        &self.times
    }

    pub fn knot_values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `t >= 0`; exact knot evaluations return the stored value.
    pub fn value(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        let right = self.times.partition_point(|&x| x <= t);
        let left = right - 1; // times[0] = 0 <= t
        if right == self.times.len() || t == self.times[left] {
            return self.values[left];
        }
        let span = self.times[right] - self.times[left];
        self.values[left] + (t - self.times[left]) / span * (self.values[right] - self.values[left])
    }

    /// Values at an ascending grid, one sweep.
    pub fn values_on_grid(&self, grid: &[f64]) -> Vec<f64> {
        let mut left = 0usize;
        grid.iter()
            .map(|&t| {
                while left + 1 < self.times.len() && self.times[left + 1] <= t {
                    left += 1;
                }
                if left + 1 == self.times.len() || t == self.times[left] {
                    return self.values[left];
                }
                let span = self.times[left + 1] - self.times[left];
                self.values[left]
                    + (t - self.times[left]) / span * (self.values[left + 1] - self.values[left])
            })
            .collect()
    }
}

/// Parameters of a coupled realization (d = 2, theorem-mode lambda).
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct CouplingConfig {
    params: SheetParams,
    /// Time-grid refinement factor for the sup-error grid (r >= 1).
    pub refinement: u32,
    /// Brownian-bridge crossing correction between grid points.
    pub bridge_correction: bool,
}

impl CouplingConfig {
    pub fn new(n: u64, lambda: f64) -> Result<Self> {
        Ok(CouplingConfig {
            params: SheetParams::new(n, lambda, 2, LambdaMode::Theorem)?,
            refinement: 4,
            bridge_correction: true,
        })
    }

    pub fn params(&self) -> &SheetParams {
        &self.params
    }

    pub fn n(&self) -> u64 {
        self.params.n()
    }

    pub fn lambda(&self) -> f64 {
        self.params.lambda()
    }

    /// Fine integration step: the sup-error output grid spacing divided into
    /// enough substeps to be no coarser than min(1e-6, 1/(64 n^2)), so an
    /// embedding spans at least ~32 steps on average and output times land
    /// exactly on the fine grid.
    pub fn fine_step(&self) -> (f64, usize) {
        let n = self.n();
        let outputs = self.output_points() as f64;
        let output_dt = 1.0 / outputs;
        let desired = 1e-6_f64.min(1.0 / (64.0 * (n * n) as f64));
        let per_output = (output_dt / desired).ceil() as usize;
        (output_dt / per_output as f64, per_output)
    }

    /// Number of output-grid intervals on [0, 1]: refinement * 2n^2.
    pub fn output_points(&self) -> u64 {
        self.refinement as u64 * 2 * self.n() * self.n()
    }
}

/// One strip of a coupled realization.
#[derive(Debug, Clone)]
pub struct StripCoupling {
    pub schedule: EmbeddingSchedule,
    pub reconstructed: PiecewiseLinearPath,
    /// Unscaled strip Brownian values at the output grid times j / (r 2n^2).
    pub brownian_on_grid: Vec<f64>,
}

/// A joint sample of the sheet and its approximation built from the same
/// strip Brownian paths.
#[derive(Debug, Clone)]
pub struct CoupledRealization {
    config: CouplingConfig,
    master_seed: u64,
    strips: Vec<StripCoupling>,
    horizon_used: f64,
}

fn schedule_with_retries(
    n: u64,
    step: f64,
    master_seed: u64,
    bm_role: &str,
    aux_role: &str,
    index: &[u64],
    bridge: bool,
) -> Result<(BrownianPath, EmbeddingSchedule)> {
    let mut last_err = None;
    for &horizon in &HORIZON_SCHEDULE {
        // Same seeds on retry: the longer path replays the identical prefix,
        // so an extension never changes already-computed embeddings.
        let mut bm_rng = derive_rng(master_seed, bm_role, index);
        let mut aux_rng = derive_rng(master_seed, aux_role, index);
        let path = simulate_bm_path(step, horizon, &mut bm_rng)?;
        match build_schedule(&path, n, &mut aux_rng, bridge) {
            Ok(schedule) => return Ok((path, schedule)),
            Err(e @ Error::HorizonExhausted { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("horizon schedule is non-empty"))
}

/// Builds the full coupled realization: one Brownian path and schedule per
/// strip, the reconstructed strips, and the strip Brownian values on the
/// output grid.
pub fn coupled_realization(config: &CouplingConfig, master_seed: u64) -> Result<CoupledRealization> {
    require(config.refinement >= 1, "refinement", "must be at least 1")?;
    let n = config.n();
    let m = config.params.strips_per_axis();
    let (step, per_output) = config.fine_step();
    let outputs = config.output_points() as usize;

    let mut strips = Vec::with_capacity(m as usize);
    let mut horizon_used = HORIZON_SCHEDULE[0];
    for k in 1..=m {
        let (path, schedule) = schedule_with_retries(
            n,
            step,
            master_seed,
            "coupling-bm",
            "coupling-aux",
            &[k],
            config.bridge_correction,
        )?;
        horizon_used = horizon_used.max(path.horizon());
        let reconstructed = reconstruct_strip(&schedule);
        let brownian_on_grid = (0..=outputs)
            .map(|j| path.value_at_index(j * per_output))
            .collect();
        strips.push(StripCoupling {
            schedule,
            reconstructed,
            brownian_on_grid,
        });
    }
    Ok(CoupledRealization {
        config: *config,
        master_seed,
        strips,
        horizon_used,
    })
}

impl CoupledRealization {
    pub fn config(&self) -> &CouplingConfig {
        &self.config
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn strips(&self) -> &[StripCoupling] {
        &self.strips
    }

    pub fn horizon_used(&self) -> f64 {
        self.horizon_used
    }

    /// Output grid times j / (r 2n^2), j = 0..=r 2n^2.
    pub fn output_grid(&self) -> Vec<f64> {
        let outputs = self.config.output_points();
        (0..=outputs).map(|j| j as f64 / outputs as f64).collect()
    }

    /// The target sheet at (k / n^lambda, t_j) for all grid times: scaled
    /// partial sum of the first `k` strip Brownian paths.
    pub fn sheet_prefix_on_grid(&self, k: u64) -> Vec<f64> {
        let scale = self.strip_scale();
        let outputs = self.config.output_points() as usize;
        let mut out = vec![0.0; outputs + 1];
        for strip in &self.strips[..k as usize] {
            for (o, b) in out.iter_mut().zip(&strip.brownian_on_grid) {
                *o += b;
            }
        }
        out.iter_mut().for_each(|o| *o *= scale);
        out
    }

    /// The approximating sheet at (k / n^lambda, t): scaled partial sum of
    /// the reconstructed strips.
    pub fn approx_prefix_at(&self, k: u64, t: f64) -> f64 {
        let scale = self.strip_scale();
        self.strips[..k as usize]
            .iter()
            .map(|s| s.reconstructed.value(t))
            .sum::<f64>()
            * scale
    }

    fn strip_scale(&self) -> f64 {
        (self.config.n() as f64).powf(-self.config.lambda() / 2.0)
    }
}

/// Max of |W_n - W| over the coupling grid
/// {(k / n^lambda, j / (r 2n^2)) : 1 <= k <= strips, 0 <= j <= r 2n^2}.
pub fn coupled_sup_error(real: &CoupledRealization) -> f64 {
    let scale = real.strip_scale();
    let grid = real.output_grid();
    let outputs = grid.len();
    let mut cum_target = vec![0.0; outputs];
    let mut cum_approx = vec![0.0; outputs];
    let mut max_err = 0.0f64;
    for strip in &real.strips {
        let recon = strip.reconstructed.values_on_grid(&grid);
        for j in 0..outputs {
            cum_target[j] += strip.brownian_on_grid[j];
            cum_approx[j] += recon[j];
            let err = scale * (cum_approx[j] - cum_target[j]).abs();
            if err > max_err {
                max_err = err;
            }
        }
    }
    max_err
}

/// Per-strip summary statistics for experiment records.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct StripStats {
    pub mean_sigma: f64,
    /// KS p-value of the clocks against Exp(2n^2); absent when the schedule
    /// is too short for the asymptotic p-value.
    pub ks_gamma_pvalue: Option<f64>,
}

/// The JSON experiment record emitted for one coupled realization.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CoupleRecord {
    pub n: u64,
    pub lambda: f64,
    pub seed: u64,
    pub sup_error: f64,
    pub embeddings_per_strip: usize,
    pub per_strip: Vec<StripStats>,
    pub runtime_ms: Option<u64>,
}

/// Runs one coupled realization and summarizes it. `runtime_ms` is left
/// empty so records stay byte-reproducible; callers measuring wall time fill
/// it explicitly.
pub fn couple_experiment(config: &CouplingConfig, master_seed: u64) -> Result<CoupleRecord> {
    let real = coupled_realization(config, master_seed)?;
    let n = config.n();
    let rate = 2.0 * (n * n) as f64;
    let per_strip = real
        .strips
        .iter()
        .map(|strip| {
            let mean_sigma =
                strip.schedule.sigma().iter().sum::<f64>() / strip.schedule.len() as f64;
            let ks_gamma_pvalue = ks_test(strip.schedule.gamma(), exp_cdf(rate)?)
                .ok()
                .map(|ks| ks.p_value);
            Ok(StripStats {
                mean_sigma,
                ks_gamma_pvalue,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoupleRecord {
        n,
        lambda: config.lambda(),
        seed: master_seed,
        sup_error: coupled_sup_error(&real),
        embeddings_per_strip: schedule_len(n),
        per_strip,
        runtime_ms: None,
    })
}

/// An empirical tail probability with its raw counts; `degenerate` flags an
/// all-zero count, which is reported distinctly from a genuine estimate.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct TailEstimate {
    pub probability: f64,
    pub exceed_count: usize,
    pub reps: usize,
    pub degenerate: bool,
}

impl TailEstimate {
    fn from_counts(exceed_count: usize, reps: usize) -> Self {
        TailEstimate {
            probability: exceed_count as f64 / reps as f64,
            exceed_count,
            reps,
            degenerate: exceed_count == 0,
        }
    }
}

/// Joint tails of the sigma- and gamma-partial-sum deviations.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct DeviationTails {
    pub sigma: TailEstimate,
    pub gamma: TailEstimate,
}

/// Estimates P(max_{i,l} |partial sum - i/(2n^2)| >= epsilon) over `reps`
/// independent realizations of the full strip family, for both the stopping
/// lengths and the clocks of the same schedules.
pub fn schedule_deviation_tails(
    n: u64,
    lambda: f64,
    epsilon: f64,
    reps: usize,
    master_seed: u64,
    bridge_correction: bool,
) -> Result<DeviationTails> {
    require(
        epsilon.is_finite() && epsilon >= 0.0,
        "epsilon",
        "must be nonnegative",
    )?;
    require(reps >= 1, "reps", "need at least one replication")?;
    let params = SheetParams::new(n, lambda, 2, LambdaMode::Theorem)?;
    let m = params.strips_per_axis();
    let desired = 1e-6_f64.min(1.0 / (64.0 * (n * n) as f64));

    let deviations: Vec<Result<(f64, f64)>> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut sigma_dev = 0.0f64;
            let mut gamma_dev = 0.0f64;
            for k in 1..=m {
                let (_, schedule) = schedule_with_retries(
                    n,
                    desired,
                    master_seed,
                    "tail-bm",
                    "tail-aux",
                    &[rep, k],
                    bridge_correction,
                )?;
                sigma_dev = sigma_dev.max(schedule.sigma_max_deviation());
                gamma_dev = gamma_dev.max(schedule.gamma_max_deviation());
            }
            Ok((sigma_dev, gamma_dev))
        })
        .collect();

    let mut sigma_count = 0usize;
    let mut gamma_count = 0usize;
    for dev in deviations {
        let (s, g) = dev?;
        if s >= epsilon {
            sigma_count += 1;
        }
        if g >= epsilon {
            gamma_count += 1;
        }
    }
    Ok(DeviationTails {
        sigma: TailEstimate::from_counts(sigma_count, reps),
        gamma: TailEstimate::from_counts(gamma_count, reps),
    })
}

/// The sigma-side tail probability (the clocks' tail comes with it for free
/// via [`schedule_deviation_tails`]).
pub fn sigma_tail_probability(
    n: u64,
    lambda: f64,
    epsilon: f64,
    reps: usize,
    master_seed: u64,
) -> Result<TailEstimate> {
    require(reps >= 100, "reps", "need at least 100 replications")?;
    Ok(schedule_deviation_tails(n, lambda, epsilon, reps, master_seed, true)?.sigma)
}

/// Median sup-error at one index of the convergence study.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ConvergencePoint {
    pub n: u64,
    pub median_sup_error: f64,
    pub reps: usize,
}

/// Runs `reps` coupled realizations per index and fits a log-log slope to
/// the medians. The schedule must be strictly ascending with at least three
/// indices.
pub fn convergence_study(
    ns: &[u64],
    lambda: f64,
    reps: usize,
    refinement: u32,
    master_seed: u64,
) -> Result<(Vec<ConvergencePoint>, LogLogFit)> {
    require(ns.len() >= 3, "schedule", "need at least 3 indices")?;
    for pair in ns.windows(2) {
        require(
            pair[0] < pair[1],
            "schedule",
            format!("not ascending at {} -> {}", pair[0], pair[1]),
        )?;
    }
    require(reps >= 1, "reps", "need at least one replication")?;

    let mut points = Vec::with_capacity(ns.len());
    for &n in ns {
        let mut config = CouplingConfig::new(n, lambda)?;
        config.refinement = refinement;
        let errors: Vec<Result<f64>> = (0..reps as u64)
            .into_par_iter()
            .map(|rep| {
                let seed = derive_seed64(master_seed, "convergence-rep", &[n, rep]);
                Ok(coupled_sup_error(&coupled_realization(&config, seed)?))
            })
            .collect();
        let errors = errors.into_iter().collect::<Result<Vec<f64>>>()?;
        points.push(ConvergencePoint {
            n,
            median_sup_error: crate::stats::median(&errors)?,
            reps,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.median_sup_error).collect();
    let fit = crate::stats::loglog_slope(&xs, &ys)?;
    Ok((points, fit))
}
