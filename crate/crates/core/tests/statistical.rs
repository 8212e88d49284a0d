//! Cross-module distributional checks that are too heavy for inline unit
//! tests. All seeds are fixed, so every assertion is deterministic.

use sheetwalk_core::coupling::{build_schedule, schedule_deviation_tails, CouplingConfig};
use sheetwalk_core::gaussian::{simulate_bm_path, simulate_sheet_grid};
use sheetwalk_core::rng::{derive_rng, derive_seed64, exp_draw, sign_draw};
use sheetwalk_core::sheet::{build_sheet, LambdaMode, SheetParams};
use sheetwalk_core::stats::{
    empirical_covariance, ks_test, ks_two_sample, normal_cdf, variance_se, SampleSummary,
};
use rayon::prelude::*;

const SEED: u64 = 0x57A7_1577;

/// Finite-size variance of the sheet approximation at (s, t): the sum of
/// squared strip weights times n^{-lambda} (1 - (1 - e^{-2nt})/(2nt) ... ),
/// i.e. sum w_k^2 * E[I(t)^2] * n^{-(1+lambda)}.
fn sheet_variance_theory(params: &SheetParams, s: f64, t: f64) -> f64 {
    let n = params.n() as f64;
    let pow = params.pow_n_lambda();
    let strips = params.strips_per_axis();
    let x = (s * pow).min(strips as f64);
    let base = x.floor();
    let frac = x - base;
    let weight_sq = base + frac * frac;
    let raw_second_moment = t * n - (1.0 - (-2.0 * n * t).exp()) / 2.0;
    weight_sq * raw_second_moment * (n as f64).powf(-(1.0 + params.lambda()))
}

fn sheet_samples(n: u64, lambda: f64, reps: u64, points: &[(f64, f64)], role: &str) -> Vec<Vec<f64>> {
    let params = SheetParams::new(n, lambda, 2, LambdaMode::Theorem).unwrap();
    let rows: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let seed = derive_seed64(SEED, role, &[rep]);
            let sheet = build_sheet(params, seed).unwrap();
            points
                .iter()
                .map(|&(s, t)| sheet.value(s, t).unwrap())
                .collect()
        })
        .collect();
    (0..points.len())
        .map(|p| rows.iter().map(|r| r[p]).collect())
        .collect()
}

#[test]
fn sheet_marginal_at_the_plateau_matches_its_finite_size_law() {
    // At the plateau the field equals the full strip sum; its variance is
    // floor(n^lambda)/n^lambda * (1 - 1/(2n)) * t, not s*t. Checking against
    // the finite-size law validates the evaluator itself.
    let (n, lambda, reps) = (1000u64, 0.19, 4000u64);
    let params = SheetParams::new(n, lambda, 2, LambdaMode::Theorem).unwrap();
    let plateau = params.strips_per_axis() as f64 / params.pow_n_lambda();
    let samples = sheet_samples(n, lambda, reps, &[(plateau, 1.0)], "plateau-var");
    let theory = sheet_variance_theory(&params, plateau, 1.0);

    let got = SampleSummary::from_samples(&samples[0]).unwrap().variance;
    let se = variance_se(&samples[0]).unwrap();
    assert!(
        (got - theory).abs() <= 3.0 * se,
        "variance {got} vs theory {theory} (se {se})"
    );

    // Scaled to unit variance the marginal is Gaussian to within the KS
    // resolution at this sample size.
    let scaled: Vec<f64> = samples[0].iter().map(|v| v / theory.sqrt()).collect();
    let ks = ks_test(&scaled, normal_cdf(0.0, 1.0).unwrap()).unwrap();
    assert!(ks.passes(), "plateau marginal KS p = {}", ks.p_value);
}

#[test]
fn sheet_covariance_tracks_the_finite_size_law_at_interior_points() {
    let (n, lambda, reps) = (1000u64, 0.19, 10_000u64);
    let params = SheetParams::new(n, lambda, 2, LambdaMode::Theorem).unwrap();
    let pow = params.pow_n_lambda();
    let samples = sheet_samples(n, lambda, reps, &[(0.5, 1.0), (1.0, 1.0)], "interior-cov");
    // Shared weight of (0.5, t) against the full plateau sum is s n^lambda,
    // so Cov = 0.5 * (1 - 1/(2n)) up to the fractional-weight structure.
    let x = 0.5 * pow;
    let theory = x * (1.0 - 1.0 / (2.0 * n as f64)) * (n as f64).powf(-lambda);
    let (cov, se) = empirical_covariance(&samples[0], &samples[1]).unwrap();
    assert!(
        (cov - theory).abs() <= 3.0 * se,
        "cov {cov} vs theory {theory} (se {se})"
    );
}

#[test]
fn wiener_strip_increments_are_uncorrelated() {
    let reps = 2000u64;
    let cells = 8;
    let strips: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = derive_rng(SEED, "strip-corr", &[rep]);
            let grid = simulate_sheet_grid(cells, 2, &mut rng).unwrap();
            (1..=cells)
                .map(|k| grid.value(&[k, cells]) - grid.value(&[k - 1, cells]))
                .collect()
        })
        .collect();
    let fisher_bound = 3.0 / ((reps as f64 - 3.0).sqrt());
    for (a, b) in [(0usize, 1usize), (2, 6), (3, 4)] {
        let xs: Vec<f64> = strips.iter().map(|r| r[a]).collect();
        let ys: Vec<f64> = strips.iter().map(|r| r[b]).collect();
        let (cov, _) = empirical_covariance(&xs, &ys).unwrap();
        let vx = SampleSummary::from_samples(&xs).unwrap().variance;
        let vy = SampleSummary::from_samples(&ys).unwrap().variance;
        let r = cov / (vx * vy).sqrt();
        let z = 0.5 * ((1.0 + r) / (1.0 - r)).ln();
        assert!(
            z.abs() <= fisher_bound,
            "strips {a},{b}: Fisher z {z} exceeds {fisher_bound}"
        );
    }
}

fn schedules_for(n: u64, count: u64, role: &str) -> Vec<sheetwalk_core::coupling::EmbeddingSchedule> {
    let step = 1e-6_f64.min(1.0 / (64.0 * (n * n) as f64));
    (0..count)
        .into_par_iter()
        .map(|i| {
            // Same retry ladder as the production builders: the total
            // stopping time occasionally overruns 1.5 at small n.
            for horizon in [1.5, 2.0] {
                let mut bm_rng = derive_rng(SEED, role, &[n, i, 0]);
                let mut aux_rng = derive_rng(SEED, role, &[n, i, 1]);
                let bm = simulate_bm_path(step, horizon, &mut bm_rng).unwrap();
                match build_schedule(&bm, n, &mut aux_rng, true) {
                    Ok(s) => return s,
                    Err(sheetwalk_core::Error::HorizonExhausted { .. }) => continue,
                    Err(e) => panic!("unexpected error: {e}"),
                }
            }
            panic!("schedule exhausted both horizons (n = {n}, rep = {i})");
        })
        .collect()
}

#[test]
fn exit_values_match_direct_signed_exponential_draws() {
    // Two-sample check: embedded exits against direct sign * Exp(2n) draws.
    let n = 10u64;
    let schedules = schedules_for(n, 10, "exit-two-sample");
    let exits: Vec<f64> = schedules
        .iter()
        .flat_map(|s| s.increments().iter().copied())
        .collect();
    let mut rng = derive_rng(SEED, "direct-increments", &[]);
    let direct: Vec<f64> = (0..exits.len())
        .map(|_| sign_draw(&mut rng) as f64 * exp_draw(&mut rng, 2.0 * n as f64))
        .collect();
    let ks = ks_two_sample(&exits, &direct).unwrap();
    assert!(ks.passes(), "two-sample exit KS p = {}", ks.p_value);
}

#[test]
fn clock_means_match_the_exponential_rate() {
    let n = 10u64;
    let schedules = schedules_for(n, 20, "clock-mean");
    let gammas: Vec<f64> = schedules
        .iter()
        .flat_map(|s| s.gamma().iter().copied())
        .collect();
    let summary = SampleSummary::from_samples(&gammas).unwrap();
    let target = 1.0 / (2.0 * (n * n) as f64);
    assert!(
        (summary.mean - target).abs() <= 3.0 * summary.mean_se(),
        "mean gamma {} vs {target}",
        summary.mean
    );
}

#[test]
fn stopping_time_moments_stay_within_a_uniform_constant() {
    // E[tau^p] <= L_p E[xi^{2p}] sanity at p = 2: the ratio
    // E[sigma^2] / E[xi^4] should be bounded and roughly constant in n
    // (E[xi^4] = 24/(2n)^4 = 1.5 n^-4 for the symmetric exponential target).
    let mut ratios = Vec::new();
    for n in [8u64, 16, 32, 64] {
        let schedules = schedules_for(n, 8, "moment-sanity");
        let sigmas: Vec<f64> = schedules
            .iter()
            .flat_map(|s| s.sigma().iter().copied())
            .collect();
        let second_moment =
            sigmas.iter().map(|s| s * s).sum::<f64>() / sigmas.len() as f64;
        let xi_fourth = 1.5 / (n as f64).powi(4);
        ratios.push(second_moment / xi_fourth);
    }
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0f64, f64::max);
    assert!(hi < 10.0, "moment ratios unbounded: {ratios:?}");
    assert!(hi / lo < 2.0, "moment ratios drift with n: {ratios:?}");
}

#[test]
fn clock_deviation_tails_respect_the_kolmogorov_bound() {
    // Tail bound 1/(2 eps^2 n^{2-lambda}) at eps = 0.1 over n in {10, 20, 40}.
    let (lambda, epsilon, reps) = (0.19, 0.1, 200usize);
    for (i, n) in [10u64, 20, 40].into_iter().enumerate() {
        let tails = schedule_deviation_tails(
            n,
            lambda,
            epsilon,
            reps,
            derive_seed64(SEED, "gamma-bound", &[i as u64]),
            true,
        )
        .unwrap();
        let bound = 1.0 / (2.0 * epsilon * epsilon * (n as f64).powf(2.0 - lambda));
        assert!(
            tails.gamma.probability <= bound,
            "n = {n}: gamma tail {} exceeds bound {bound}",
            tails.gamma.probability
        );
    }
}

#[test]
fn horizon_exhaustion_recovers_via_the_retry_schedule() {
    // n = 1 schedules (two Exp(1)-mean stops) exhaust a 1.5 horizon often;
    // the coupled builder must still succeed by extending to 2.0 or report
    // the exhaustion honestly.
    let config = CouplingConfig::new(1, 0.19).unwrap();
    let mut extended = 0;
    let mut completed = 0;
    for seed in 0..40u64 {
        match sheetwalk_core::coupling::coupled_realization(&config, seed) {
            Ok(real) => {
                completed += 1;
                if real.horizon_used() > 1.5 {
                    extended += 1;
                }
            }
            Err(sheetwalk_core::Error::HorizonExhausted { .. }) => {}
            Err(e) => panic!("unexpected error: {e}"),
        }
    }
    assert!(completed >= 20, "only {completed}/40 realizations completed");
    assert!(extended >= 1, "retry path never exercised");
}
