//! Direct Gaussian simulation of Brownian motion and the d-parameter Wiener
//! process on uniform grids, plus the exact covariance — the distributional
//! reference the transport approximation is tested against.
//!
//! Normal variates come from the inverse CDF, not rejection, so a seed pins
//! the sample path bit-for-bit.

use crate::error::{require, Result};
use crate::rng::uniform_open01;
use crate::stats::normal_inv_cdf;
use rand::RngCore;

/// Standard normal draw by inversion.
#[inline]
pub fn standard_normal_draw(rng: &mut impl RngCore) -> f64 {
    normal_inv_cdf(uniform_open01(rng))
}

/// Exact covariance of the d-parameter Wiener process: the product of
/// coordinate minima.
pub fn covariance_exact(p: &[f64], q: &[f64]) -> Result<f64> {
    require(
        !p.is_empty() && p.len() == q.len(),
        "points",
        format!("dimension mismatch: {} vs {}", p.len(), q.len()),
    )?;
    for &c in p.iter().chain(q) {
        require(
            c.is_finite() && (0.0..=1.0).contains(&c),
            "points",
            format!("coordinate {c} escapes [0, 1]"),
        )?;
    }
    Ok(p.iter().zip(q).map(|(a, b)| a.min(*b)).product())
}

/// A d-parameter Wiener process sampled on a uniform lattice with `cells`
/// cells per axis: lattice values at (i_1, ..., i_d) / cells, null on the
/// faces where any index is 0.
#[derive(Debug, Clone)]
pub struct WienerGrid {
    d: usize,
    cells: usize,
    values: Vec<f64>, // (cells + 1)^d, row-major, last axis fastest
}

/// Simulates the grid: iid N(0, cells^-d) increments per cell, accumulated
/// into lattice values by cumulative sums along every axis.
pub fn simulate_sheet_grid(cells: usize, d: usize, rng: &mut impl RngCore) -> Result<WienerGrid> {
    require(cells >= 1, "cells", "need at least one cell per axis")?;
    require(d >= 1, "d", "need at least one parameter")?;
    let side = cells + 1;
    let total = side
        .checked_pow(d as u32)
        .filter(|t| *t <= 100_000_000)
        .ok_or_else(|| crate::error::Error::invalid("cells", "lattice too large"))?;

    let step = 1.0 / cells as f64;
    let sd = step.powf(d as f64 / 2.0);
    let mut increments = vec![0.0; total];
    let mut index = vec![0usize; d];
    for cell in increments.iter_mut() {
        if index.iter().all(|&i| i >= 1) {
            *cell = sd * standard_normal_draw(rng);
        }
        for axis in (0..d).rev() {
            index[axis] += 1;
            if index[axis] < side {
                break;
            }
            index[axis] = 0;
        }
    }
    Ok(WienerGrid::from_increments(cells, d, increments))
}

impl WienerGrid {
    /// Accumulates per-cell increments (stored at the cell's upper lattice
    /// corner, zero on the null faces) into lattice values.
    pub fn from_increments(cells: usize, d: usize, mut values: Vec<f64>) -> Self {
        let side = cells + 1;
        assert_eq!(values.len(), side.pow(d as u32));
        let mut stride = 1;
        for _axis in 0..d {
            // Cumulative sum along this axis: row-major order guarantees the
            // predecessor at distance `stride` is already accumulated.
            for i in 0..values.len() {
                let coord = (i / stride) % side;
                if coord >= 1 {
                    values[i] += values[i - stride];
                }
            }
            stride *= side;
        }
        WienerGrid { d, cells, values }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells
    }

    pub fn step(&self) -> f64 {
        1.0 / self.cells as f64
    }

    /// Lattice value at integer multi-index (coordinates index / cells).
    pub fn value(&self, index: &[usize]) -> f64 {
        assert_eq!(index.len(), self.d);
        let side = self.cells + 1;
        let mut flat = 0;
        for &i in index {
            assert!(i < side);
            flat = flat * side + i;
        }
        self.values[flat]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Per-axis lattice coordinates, for grid export.
    pub fn axes(&self) -> Vec<Vec<f64>> {
        let axis: Vec<f64> = (0..=self.cells)
            .map(|i| i as f64 / self.cells as f64)
            .collect();
        vec![axis; self.d]
    }

    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        crate::grid_io::write_grid_csv(out, &self.axes(), &self.values, &[])
    }
}

/// A standard Brownian path on a uniform time grid.
#[derive(Debug, Clone)]
pub struct BrownianPath {
    step: f64,
    values: Vec<f64>,
}

/// Simulates a Brownian path with N(0, step) increments covering at least
/// `horizon`.
pub fn simulate_bm_path(step: f64, horizon: f64, rng: &mut impl RngCore) -> Result<BrownianPath> {
    require(
        step.is_finite() && step > 0.0,
        "step",
        format!("must be positive, got {step}"),
    )?;
    require(
        horizon.is_finite() && horizon >= step,
        "horizon",
        format!("must be at least one step, got {horizon}"),
    )?;
    let count = (horizon / step).ceil() as usize;
    require(count <= 400_000_000, "horizon", "path too long to materialize")?;
    let sd = step.sqrt();
    let mut values = Vec::with_capacity(count + 1);
    let mut position = 0.0;
    values.push(position);
    for _ in 0..count {
        position += sd * standard_normal_draw(rng);
        values.push(position);
    }
    Ok(BrownianPath { step, values })
}

impl BrownianPath {
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of grid points (including time 0).
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn horizon(&self) -> f64 {
        self.step * (self.values.len() - 1) as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn value_at_index(&self, i: usize) -> f64 {
        self.values[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use crate::stats::{empirical_covariance, ks_test, normal_cdf, SampleSummary};

    #[test]
    fn covariance_formula_examples() {
        assert_eq!(covariance_exact(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(covariance_exact(&[0.0, 0.7], &[0.9, 0.2]).unwrap(), 0.0);
        let c = covariance_exact(&[0.5, 0.4], &[0.25, 0.8]).unwrap();
        assert!((c - 0.1).abs() < 1e-15);
        assert!(covariance_exact(&[0.5], &[0.5, 0.5]).is_err());
        assert!(covariance_exact(&[1.5], &[0.5]).is_err());
    }

    #[test]
    fn origin_value_is_zero_and_faces_are_null() {
        let mut rng = derive_rng(0, "wiener", &[]);
        let grid = simulate_sheet_grid(8, 2, &mut rng).unwrap();
        assert_eq!(grid.value(&[0, 0]), 0.0);
        for i in 0..=8 {
            assert_eq!(grid.value(&[0, i]), 0.0);
            assert_eq!(grid.value(&[i, 0]), 0.0);
        }
    }

    #[test]
    fn doubling_increments_doubles_every_value() {
        let mut rng = derive_rng(1, "wiener-scale", &[]);
        let side = 5usize;
        let mut incs = vec![0.0; side * side];
        for (i, v) in incs.iter_mut().enumerate() {
            let (a, b) = (i / side, i % side);
            if a >= 1 && b >= 1 {
                *v = standard_normal_draw(&mut rng);
            }
        }
        let doubled: Vec<f64> = incs.iter().map(|v| 2.0 * v).collect();
        let g1 = WienerGrid::from_increments(4, 2, incs);
        let g2 = WienerGrid::from_increments(4, 2, doubled);
        for (a, b) in g1.values().iter().zip(g2.values()) {
            assert_eq!((2.0 * a).to_bits(), b.to_bits());
        }
    }

    #[test]
    fn corner_variance_and_cross_covariance_match_the_formula() {
        // d = 2, 128 cells per axis, 1e4 replications.
        let reps = 10_000u64;
        let results: Vec<(f64, f64, f64)> = (0..reps)
            .map(|r| {
                let mut rng = derive_rng(0x57, "wiener-mc", &[r]);
                let grid = simulate_sheet_grid(128, 2, &mut rng).unwrap();
                (
                    grid.value(&[128, 128]),
                    grid.value(&[64, 64]),
                    grid.value(&[128, 64]),
                )
            })
            .collect();
        let corner: Vec<f64> = results.iter().map(|r| r.0).collect();
        let summary = SampleSummary::from_samples(&corner).unwrap();
        assert!(
            (0.958..=1.042).contains(&summary.variance),
            "Var W(1,1) = {}",
            summary.variance
        );
        // Cov(W(0.5, 0.5), W(1, 0.5)) = 0.25.
        let xs: Vec<f64> = results.iter().map(|r| r.1).collect();
        let ys: Vec<f64> = results.iter().map(|r| r.2).collect();
        let (cov, se) = empirical_covariance(&xs, &ys).unwrap();
        let target = covariance_exact(&[0.5, 0.5], &[1.0, 0.5]).unwrap();
        assert!(
            (cov - target).abs() <= 3.0 * se,
            "cov {cov} vs {target} (se {se})"
        );
    }

    #[test]
    fn bm_path_starts_at_zero_with_gaussian_increments() {
        let mut rng = derive_rng(2, "bm", &[]);
        let path = simulate_bm_path(1e-3, 1.0, &mut rng).unwrap();
        assert_eq!(path.value_at_index(0), 0.0);
        assert_eq!(path.len(), 1001);
        assert!((path.horizon() - 1.0).abs() < 1e-12);

        // 1e5 increments vs N(0, step).
        let mut rng = derive_rng(3, "bm-incs", &[]);
        let long = simulate_bm_path(1e-3, 100.001, &mut rng).unwrap();
        let incs: Vec<f64> = long.values().windows(2).map(|w| w[1] - w[0]).collect();
        let ks = ks_test(&incs[..100_000], normal_cdf(0.0, 1e-3).unwrap()).unwrap();
        assert!(ks.passes(), "KS p-value {}", ks.p_value);
    }

    #[test]
    fn bm_terminal_variance_tracks_the_horizon() {
        let reps = 4000u64;
        let finals: Vec<f64> = (0..reps)
            .map(|r| {
                let mut rng = derive_rng(4, "bm-var", &[r]);
                let path = simulate_bm_path(0.01, 0.7, &mut rng).unwrap();
                *path.values().last().unwrap()
            })
            .collect();
        let summary = SampleSummary::from_samples(&finals).unwrap();
        let se = crate::stats::variance_se(&finals).unwrap();
        assert!(
            (summary.variance - 0.7).abs() <= 3.0 * se,
            "Var {} vs 0.7 (se {se})",
            summary.variance
        );
    }

    #[test]
    fn bm_rejects_bad_steps() {
        let mut rng = derive_rng(5, "bm-bad", &[]);
        assert!(simulate_bm_path(0.0, 1.0, &mut rng).is_err());
        assert!(simulate_bm_path(0.1, 0.05, &mut rng).is_err());
        assert!(simulate_sheet_grid(0, 2, &mut rng).is_err());
    }
}
