//! Run configuration: one flat JSON object, unit-suffixed keys, full
//! defaults so a missing or partial file still describes the reference
//! device. Unknown keys are rejected — a typo in a sweep bound should
//! fail loudly, not silently fall back to the default.

use std::path::Path;

use dqd_core::control::{PulseKind, RotationTarget};
use dqd_core::error::{DqdError, Result};
use dqd_core::potential::DqdParams;
use dqd_core::units::UnitSystem;
use serde::{Deserialize, Serialize};

/// Pulse shape selector as it appears in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKindName {
    Trapezoid,
    SpinEcho,
}

impl PulseKindName {
    pub fn to_kind(self) -> PulseKind {
        match self {
            PulseKindName::Trapezoid => PulseKind::Trapezoid,
            PulseKindName::SpinEcho => PulseKind::SpinEcho,
        }
    }
}

/// Certification target selector as it appears in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetName {
    SigmaX,
    SigmaZ,
}

impl TargetName {
    pub fn to_target(self) -> RotationTarget {
        match self {
            TargetName::SigmaX => RotationTarget::SigmaX,
            TargetName::SigmaZ => RotationTarget::SigmaZ,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    // ------------------------------------------------- device geometry
    pub w1_nm: f64,
    pub w2_nm: f64,
    pub z0_mev: f64,
    pub z2_mev: f64,
    pub effective_mass_ratio: f64,

    // ------------------------------------------------------------ grids
    /// Simulation half-width; walls sit at ±half_width_nm.
    pub half_width_nm: f64,
    /// Grid for eigensolves and basis construction.
    pub n_points: usize,
    /// Coarser grid for time propagation (sweeps, tomography, prepare).
    pub propagation_n_points: usize,
    /// Multiplier on the recommended stable step (≤ 1 tightens it).
    pub dt_scale: f64,

    // ------------------------------------------------------ calibration
    pub calibration_span_mev: f64,
    pub calibration_samples: usize,

    // ------------------------------------------------------ eigens verb
    /// Bias-slope sweep covers ±this span.
    pub eigens_slope_span_mev: f64,
    pub eigens_samples: usize,

    // ------------------------------------------------------- basis verb
    pub d_map_eps_max_uev: f64,
    pub d_map_samples: usize,
    /// Two-level composition fidelity defining the operating window.
    pub range_threshold: f64,
    pub range_eps_max_uev: f64,
    pub range_samples: usize,

    // ------------------------------------------------ pulse scaffolding
    /// Rise/fall time of every ramp segment.
    pub tau_ps: f64,
    /// Idle detuning the device parks at between pulses.
    pub baseline_uev: f64,

    // ----------------------------------------------------- prepare verb
    pub prepare_t_p_min_ps: f64,
    pub prepare_t_p_max_ps: f64,
    pub prepare_t_p_steps: usize,
    /// Trapezoid amplitude grid (offset from the baseline detuning).
    pub prepare_amp_min_uev: f64,
    pub prepare_amp_max_uev: f64,
    pub prepare_amp_steps: usize,
    pub prepare_refine_rounds: usize,

    // ------------------------------------------------------- sweep verb
    pub sweep_kind: PulseKindName,
    pub sweep_counter_min_uev: f64,
    pub sweep_counter_max_uev: f64,
    pub sweep_counter_steps: usize,
    pub sweep_plateau_min_uev: f64,
    pub sweep_plateau_max_uev: f64,
    pub sweep_plateau_steps: usize,
    /// Plateau-length scan the oscillation amplitude is read from. Also
    /// the window a tomography scan certifies over.
    pub sweep_t_p_min_ps: f64,
    pub sweep_t_p_max_ps: f64,
    pub sweep_t_p_step_ps: f64,

    // -------------------------------------------------- tomography verb
    pub tomography_kind: PulseKindName,
    pub tomography_counter_uev: f64,
    pub tomography_plateau_uev: f64,
    /// Plateau length for single-pulse reconstruction.
    pub tomography_t_p_ps: f64,
    /// 0 → reconstruct the single pulse above; ≥ 5 → run tomography at
    /// this many plateau lengths across the sweep window and certify the
    /// fitted rotation family against `tomography_target`.
    pub tomography_scan_samples: usize,
    pub tomography_target: TargetName,

    // ------------------------------------------------------- bench verb
    pub bench_sizes: Vec<usize>,
    pub bench_steps: u64,

    // ---------------------------------------------------- run plumbing
    /// Echoed into the manifest. Reserved for randomized refinement
    /// strategies; the bundled ones are deterministic.
    pub seed: u64,
    /// Sweep worker threads; 0 = library default. The --serial and
    /// --workers flags override this.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            w1_nm: 130.0,
            w2_nm: 240.0,
            z0_mev: 0.865,
            z2_mev: 6.92,
            effective_mass_ratio: 0.067,

            half_width_nm: 264.0,
            n_points: 1024,
            propagation_n_points: 128,
            dt_scale: 1.0,

            calibration_span_mev: 0.08,
            calibration_samples: 9,

            eigens_slope_span_mev: 0.6,
            eigens_samples: 121,

            d_map_eps_max_uev: 200.0,
            d_map_samples: 21,
            range_threshold: 0.99,
            range_eps_max_uev: 300.0,
            range_samples: 31,

            tau_ps: 90.0,
            baseline_uev: 27.48,

            prepare_t_p_min_ps: 200.0,
            prepare_t_p_max_ps: 900.0,
            prepare_t_p_steps: 15,
            prepare_amp_min_uev: -60.0,
            prepare_amp_max_uev: -5.0,
            prepare_amp_steps: 12,
            prepare_refine_rounds: 3,

            sweep_kind: PulseKindName::SpinEcho,
            sweep_counter_min_uev: -220.0,
            sweep_counter_max_uev: -120.0,
            sweep_counter_steps: 11,
            sweep_plateau_min_uev: -20.0,
            sweep_plateau_max_uev: 230.0,
            sweep_plateau_steps: 11,
            sweep_t_p_min_ps: 360.0,
            sweep_t_p_max_ps: 1100.0,
            sweep_t_p_step_ps: 2.0,

            tomography_kind: PulseKindName::SpinEcho,
            // the certified x-rotation point for the reference device
            tomography_counter_uev: -128.9,
            tomography_plateau_uev: 6.5,
            tomography_t_p_ps: 450.0,
            tomography_scan_samples: 0,
            tomography_target: TargetName::SigmaX,

            bench_sizes: vec![256, 1024, 4096, 16384],
            bench_steps: 20_000,

            seed: 0,
            workers: 0,
        }
    }
}

fn bad(msg: String) -> DqdError {
    DqdError::Config(msg)
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| bad(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn params(&self) -> DqdParams {
        DqdParams { w1: self.w1_nm, w2: self.w2_nm, z0: self.z0_mev, z2: self.z2_mev }
    }

    pub fn units(&self) -> UnitSystem {
        UnitSystem::new(self.effective_mass_ratio)
    }

    pub fn validate(&self) -> Result<()> {
        self.params().validate()?;
        if !(self.effective_mass_ratio > 0.0 && self.effective_mass_ratio.is_finite()) {
            return Err(bad(format!(
                "effective_mass_ratio must be positive, got {}",
                self.effective_mass_ratio
            )));
        }
        if !(self.half_width_nm > self.w2_nm) {
            return Err(bad(format!(
                "half_width_nm ({}) must exceed w2_nm ({}) so the walls clear the outer barrier",
                self.half_width_nm, self.w2_nm
            )));
        }
        if self.n_points < 16 || self.propagation_n_points < 16 {
            return Err(bad(format!(
                "grids need at least 16 points, got n_points = {}, propagation_n_points = {}",
                self.n_points, self.propagation_n_points
            )));
        }
        if !(self.dt_scale > 0.0 && self.dt_scale <= 1.0) {
            return Err(bad(format!(
                "dt_scale must lie in (0, 1], got {}",
                self.dt_scale
            )));
        }
        if !(self.calibration_span_mev > 0.0) || self.calibration_samples < 3 {
            return Err(bad(format!(
                "calibration needs a positive span and ≥ 3 samples, got {} meV / {}",
                self.calibration_span_mev, self.calibration_samples
            )));
        }
        if !(self.eigens_slope_span_mev > 0.0) || self.eigens_samples < 2 {
            return Err(bad(format!(
                "eigens sweep needs a positive span and ≥ 2 samples, got {} meV / {}",
                self.eigens_slope_span_mev, self.eigens_samples
            )));
        }
        if !(self.d_map_eps_max_uev > 0.0) || self.d_map_samples < 3 {
            return Err(bad(format!(
                "D map needs a positive span and ≥ 3 samples, got {} μeV / {}",
                self.d_map_eps_max_uev, self.d_map_samples
            )));
        }
        if !(self.range_threshold > 0.0 && self.range_threshold < 1.0)
            || !(self.range_eps_max_uev > 0.0)
            || self.range_samples < 3
        {
            return Err(bad(format!(
                "operating range needs threshold in (0,1), a positive span and ≥ 3 samples, \
                 got {} / {} μeV / {}",
                self.range_threshold, self.range_eps_max_uev, self.range_samples
            )));
        }
        if !(self.tau_ps >= 0.0 && self.tau_ps.is_finite()) || !self.baseline_uev.is_finite() {
            return Err(bad(format!(
                "pulse scaffolding needs finite tau_ps ≥ 0 and a finite baseline, got {} ps / {} μeV",
                self.tau_ps, self.baseline_uev
            )));
        }
        if !(self.prepare_t_p_min_ps >= 0.0 && self.prepare_t_p_max_ps > self.prepare_t_p_min_ps)
            || self.prepare_t_p_steps < 2
            || !(self.prepare_amp_max_uev > self.prepare_amp_min_uev)
            || self.prepare_amp_steps < 2
        {
            return Err(bad(
                "prepare grids need ascending bounds and ≥ 2 steps per axis".to_string(),
            ));
        }
        if self.sweep_counter_steps < 1
            || self.sweep_plateau_steps < 1
            || self.sweep_counter_max_uev < self.sweep_counter_min_uev
            || self.sweep_plateau_max_uev < self.sweep_plateau_min_uev
        {
            return Err(bad("sweep axes need ordered bounds and ≥ 1 step".to_string()));
        }
        if !(self.sweep_t_p_min_ps >= 0.0
            && self.sweep_t_p_max_ps > self.sweep_t_p_min_ps
            && self.sweep_t_p_step_ps > 0.0)
        {
            return Err(bad(format!(
                "sweep plateau-length scan needs 0 ≤ min < max and a positive step, \
                 got [{}, {}] / {} ps",
                self.sweep_t_p_min_ps, self.sweep_t_p_max_ps, self.sweep_t_p_step_ps
            )));
        }
        if !(self.tomography_t_p_ps >= 0.0) {
            return Err(bad(format!(
                "tomography_t_p_ps must be ≥ 0, got {}",
                self.tomography_t_p_ps
            )));
        }
        if self.tomography_scan_samples != 0 && self.tomography_scan_samples < 5 {
            return Err(bad(format!(
                "a tomography scan needs ≥ 5 samples to fit the rotation family, got {}",
                self.tomography_scan_samples
            )));
        }
        if self.bench_sizes.is_empty() || self.bench_sizes.iter().any(|&n| n < 8) {
            return Err(bad("bench_sizes must be nonempty with every size ≥ 8".to_string()));
        }
        if self.bench_steps < 2 {
            return Err(bad(format!("bench_steps must be ≥ 2, got {}", self.bench_steps)));
        }
        Ok(())
    }
}

/// `n` evenly spaced values over [a, b]; n = 1 collapses to a.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 1);
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Ascending scan a, a+step, … capped at b (b itself is included when the
/// step divides the span; the usual float-fence tolerance applies).
pub fn steprange(a: f64, b: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0 && b >= a);
    let n = ((b - a) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|i| a + step * i as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        let again = serde_json::to_string_pretty(&back).unwrap();
        assert_eq!(text, again, "config must round-trip losslessly");
    }

    #[test]
    fn partial_files_fall_back_to_defaults() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"n_points": 256, "tau_ps": 45.0}"#).unwrap();
        assert_eq!(cfg.n_points, 256);
        assert_eq!(cfg.tau_ps, 45.0);
        assert_eq!(cfg.w1_nm, 130.0);
        assert_eq!(cfg.sweep_kind, PulseKindName::SpinEcho);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"n_pointz": 256}"#);
        assert!(err.is_err());
    }

    #[test]
    fn validate_catches_bad_grids() {
        let mut cfg = RunConfig::default();
        cfg.half_width_nm = 200.0; // inside w2
        assert!(cfg.validate().is_err());

        let mut cfg = RunConfig::default();
        cfg.dt_scale = 0.0;
        assert!(cfg.validate().is_err());

        let mut cfg = RunConfig::default();
        cfg.tomography_scan_samples = 3; // too few for a family fit
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn kind_names_map_to_core_kinds() {
        assert_eq!(PulseKindName::Trapezoid.to_kind(), PulseKind::Trapezoid);
        assert_eq!(PulseKindName::SpinEcho.to_kind(), PulseKind::SpinEcho);
        let text = serde_json::to_string(&PulseKindName::SpinEcho).unwrap();
        assert_eq!(text, "\"spin_echo\"");
    }

    #[test]
    fn ranges_hit_both_fences() {
        let v = linspace(-2.0, 2.0, 5);
        assert_eq!(v, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        let s = steprange(360.0, 370.0, 2.0);
        assert_eq!(s.len(), 6);
        assert_eq!(*s.last().unwrap(), 370.0);
    }
}
