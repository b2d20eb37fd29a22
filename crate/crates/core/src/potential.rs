//! Double-quantum-dot potential, linear bias, and detuning calibration.

use crate::error::{DqdError, Result};
use crate::grid::Grid;
use crate::stationary;
use crate::units::UnitSystem;

/// Geometry of the double-well potential.
///
/// The well region `|x| ≤ w1` is a raised-cosine barrier of height `z0`
/// between the two dots; `w1 < |x| ≤ w2` climbs as a raised cosine to the
/// outer wall height `z2`; beyond `w2` the potential stays at `z2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DqdParams {
    pub w1: f64, // nm, inner half-width (dot region)
    pub w2: f64, // nm, outer half-width (wall foot)
    pub z0: f64, // meV, central barrier height
    pub z2: f64, // meV, outer wall height
}

impl DqdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.w1 > 0.0 && self.w2 > self.w1) {
            return Err(DqdError::Config(format!(
                "need 0 < w1 < w2, got w1 = {}, w2 = {}",
                self.w1, self.w2
            )));
        }
        if !(self.z0 > 0.0 && self.z2 > self.z0) {
            return Err(DqdError::Config(format!(
                "need 0 < z0 < z2, got z0 = {}, z2 = {}",
                self.z0, self.z2
            )));
        }
        Ok(())
    }
}

impl Default for DqdParams {
    /// Reference device geometry used throughout the test suite:
    /// 130/240 nm half-widths, 0.865 meV barrier, 6.92 meV walls.
    fn default() -> Self {
        DqdParams { w1: 130.0, w2: 240.0, z0: 0.865, z2: 6.92 }
    }
}

/// Double-well potential value at position `x`. // meV
pub fn evaluate_dqd(x: f64, p: &DqdParams) -> f64 {
    use std::f64::consts::PI;
    let ax = x.abs();
    if ax <= p.w1 {
        0.5 * p.z0 * (1.0 + (PI * ax / p.w1).cos())
    } else if ax <= p.w2 {
        0.5 * p.z2 * (1.0 - (PI * (ax - p.w1) / (p.w2 - p.w1)).cos())
    } else {
        p.z2
    }
}

/// Linear bias (Stark shift) at position `x`: v_slope · x / (2 w2),
/// extended linearly beyond the walls. // meV
pub fn evaluate_bias(x: f64, v_slope: f64, w2: f64) -> f64 {
    v_slope * x / (2.0 * w2)
}

/// Total potential sampled on every grid node. // meV
pub fn sample_total(p: &DqdParams, v_slope: f64, grid: &Grid) -> Vec<f64> {
    (0..grid.n_points)
        .map(|m| {
            let x = grid.x(m);
            evaluate_dqd(x, p) + evaluate_bias(x, v_slope, p.w2)
        })
        .collect()
}

/// Detuning calibration: ε = λ · v_slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasSpec {
    pub v_slope: f64, // meV
    pub lambda: f64,  // dimensionless
}

impl BiasSpec {
    /// Detuning ε for this slope. // meV
    pub fn detuning(&self) -> f64 {
        self.lambda * self.v_slope
    }

    /// Slope that realises a requested detuning. // meV
    pub fn slope_for(lambda: f64, eps_mev: f64) -> f64 {
        eps_mev / lambda
    }
}

/// Slope span of the default calibration fit. The energy-splitting
/// inversion is linear to better than 1e-5 over this span; the map picks
/// up visible curvature toward the ±0.48 meV extremes of the pulse range,
/// so the default fit stays narrow — calibrate over a wider span
/// explicitly if the curvature there is the thing under study.
pub const DEFAULT_CALIBRATION_SPAN: f64 = 0.08; // meV

/// Result of [`calibrate_lambda`].
#[derive(Debug, Clone)]
pub struct CalibrationReport {
    /// Fitted detuning constant λ (through-origin least squares).
    pub lambda: f64,
    /// max |ε_i − λ·v_i| / max |ε_i| over the fitted samples.
    pub max_residual: f64,
    /// Zero-detuning splitting Δ = E_AB − E_B. // meV
    pub delta_mev: f64,
    /// The fitted (v_slope, ε) samples. // meV, meV
    pub samples: Vec<(f64, f64)>,
}

/// Extract ε from the two lowest energies at one slope, inverting the
/// two-level relation E_AB − E_B = √(ε² + Δ²).
fn invert_splitting(splitting: f64, delta: f64, v_slope: f64) -> f64 {
    let eps_sq = splitting * splitting - delta * delta;
    eps_sq.max(0.0).sqrt() * v_slope.signum()
}

/// Fit ε = λ·v_slope from eigensplittings sampled over ±`span` (meV).
///
/// Δ is taken from the same solver at v_slope = 0, so the inversion is
/// self-consistent with the grid. The fit is ordinary least squares
/// through the origin — parity of the potential forces ε(0) = 0.
pub fn calibrate_lambda(
    p: &DqdParams,
    units: &UnitSystem,
    grid: &Grid,
    span: f64,
    n_samples: usize,
) -> Result<CalibrationReport> {
    if !(span > 0.0) || n_samples < 3 {
        return Err(DqdError::Calibration(format!(
            "need a positive span and at least 3 samples, got span = {span}, n = {n_samples}"
        )));
    }
    let delta = {
        let h0 = stationary::build_hamiltonian(p, 0.0, grid, units);
        let pair = stationary::lowest_eigenpairs(&h0, 2, grid)?;
        pair[1].energy - pair[0].energy
    };
    if delta <= 0.0 {
        return Err(DqdError::Calibration(format!(
            "non-positive zero-detuning splitting {delta} meV"
        )));
    }

    let mut samples = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let v = -span + 2.0 * span * i as f64 / (n_samples - 1) as f64;
        let h = stationary::build_hamiltonian(p, v, grid, units);
        let pair = stationary::lowest_eigenpairs(&h, 2, grid)?;
        let splitting = pair[1].energy - pair[0].energy;
        samples.push((v, invert_splitting(splitting, delta, v)));
    }

    // the splitting must grow monotonically with |v| on each side,
    // otherwise the two-level inversion is meaningless
    let mut by_abs: Vec<(f64, f64)> = samples.iter().map(|&(v, e)| (v.abs(), e.abs())).collect();
    by_abs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for w in by_abs.windows(2) {
        if w[1].0 > w[0].0 + 1e-15 && w[1].1 + 1e-12 < w[0].1 {
            return Err(DqdError::Calibration(format!(
                "splitting not monotone in |v_slope| near |v| = {:.4} meV",
                w[1].0
            )));
        }
    }

    let (mut num, mut den) = (0.0, 0.0);
    for &(v, e) in &samples {
        num += v * e;
        den += v * v;
    }
    if den == 0.0 {
        return Err(DqdError::Calibration("all sample slopes are zero".into()));
    }
    let lambda = num / den;

    let eps_max = samples.iter().map(|&(_, e)| e.abs()).fold(0.0, f64::max);
    let max_residual = if eps_max > 0.0 {
        samples.iter().map(|&(v, e)| (e - lambda * v).abs()).fold(0.0, f64::max) / eps_max
    } else {
        0.0
    };

    Ok(CalibrationReport { lambda, max_residual, delta_mev: delta, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dqd_landmark_values() {
        let p = DqdParams::default();
        assert!((evaluate_dqd(0.0, &p) - p.z0).abs() < 1e-15);
        assert!(evaluate_dqd(p.w1, &p).abs() < 1e-12);
        assert!(evaluate_dqd(-p.w1, &p).abs() < 1e-12);
        assert!((evaluate_dqd(p.w2, &p) - p.z2).abs() < 1e-12);
        assert!((evaluate_dqd(300.0, &p) - p.z2).abs() < 1e-15);
    }

    #[test]
    fn branches_join_continuously() {
        let p = DqdParams::default();
        for x0 in [p.w1, p.w2] {
            let below = evaluate_dqd(x0 - 1e-9, &p);
            let above = evaluate_dqd(x0 + 1e-9, &p);
            assert!((below - above).abs() < 1e-6, "jump at x = {x0}");
        }
    }

    #[test]
    fn parity_of_the_pieces() {
        let p = DqdParams::default();
        for x in [13.0, 77.0, 150.0, 239.0] {
            assert_eq!(evaluate_dqd(x, &p), evaluate_dqd(-x, &p));
            assert_eq!(evaluate_bias(x, 0.3, p.w2), -evaluate_bias(-x, 0.3, p.w2));
        }
    }

    #[test]
    fn bias_landmark_values() {
        let p = DqdParams::default();
        assert_eq!(evaluate_bias(0.0, 0.5, p.w2), 0.0);
        let v = 0.06508; // meV
        assert!((evaluate_bias(p.w2, v, p.w2) - v / 2.0).abs() < 1e-15);
        assert!((evaluate_bias(-p.w2, v, p.w2) + v / 2.0).abs() < 1e-15);
    }

    #[test]
    fn bias_spec_roundtrip() {
        let b = BiasSpec { v_slope: 0.06508, lambda: 0.4225 };
        let eps = b.detuning();
        assert!((BiasSpec::slope_for(b.lambda, eps) - b.v_slope).abs() < 1e-15);
    }
}
