//! Kernel throughput measurement and the serial/threaded equivalence
//! gate. The stencil arithmetic is written in exactly one place and both
//! backends evaluate it in index order, so their results must agree *bit
//! for bit* — any deviation means the threaded path reordered floating
//! point work, and the gate fails before any timing is reported.

use std::time::Instant;

use crate::error::{DqdError, Result};
use crate::grid::Grid;
use crate::kernel::{KernelBackend, SerialKernel, ThreadedKernel};
use crate::potential::DqdParams;
use crate::propagator::{max_stable_dt, Propagator};
use crate::schedule::DetuningSchedule;
use crate::units::UnitSystem;
use crate::wavefunction::Wavefunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendChoice {
    Serial,
    /// row-parallel kernel; `0` means the default chunk size
    Threaded(usize),
}

impl BackendChoice {
    pub fn name(&self) -> &'static str {
        match self {
            BackendChoice::Serial => "serial",
            BackendChoice::Threaded(_) => "threaded",
        }
    }

    pub fn build(&self) -> Box<dyn KernelBackend> {
        match *self {
            BackendChoice::Serial => Box::new(SerialKernel),
            BackendChoice::Threaded(0) => Box::new(ThreadedKernel::new()),
            BackendChoice::Threaded(chunk) => Box::new(ThreadedKernel { chunk }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub backend: String,
    pub n_points: usize,
    pub steps: u64,
    pub wall_s: f64,
    pub steps_per_s: f64,
    /// |norm² − 1| of the final state
    pub norm_drift: f64,
    /// a run only counts if the drift stayed ≤ 1e-6
    pub valid: bool,
}

/// Deterministic workload: the default double dot at a fixed 0.2 meV
/// slope, driven from a Gaussian packet parked in the right well. Returns
/// the propagator (with the chosen backend), the packet, the schedule and
/// the stable step.
pub fn workload(
    n_points: usize,
    units: &UnitSystem,
    choice: BackendChoice,
) -> (Propagator, Wavefunction, DetuningSchedule, f64) {
    let p = DqdParams::default();
    let grid = Grid::symmetric(p.w2 * 1.1, n_points, 1.0).expect("valid bench grid");
    let est = max_stable_dt(&p, 0.2, &grid, units);
    let (x0, sigma) = (0.5 * (p.w1 + p.w2), 25.0); // nm, right well
    let re: Vec<f64> = (0..n_points)
        .map(|m| {
            let x = grid.x(m);
            (-((x - x0) / (2.0 * sigma)).powi(2)).exp()
        })
        .collect();
    let mut psi = Wavefunction::from_real(re).expect("finite packet");
    psi.clamp_walls();
    psi.normalize(&grid);
    let prop = Propagator::dqd(&p, &grid, units).with_backend(choice.build());
    (prop, psi, DetuningSchedule::constant(0.2), est.dt_ps)
}

/// Run every backend 10⁴ steps on a 256-point workload and require the
/// final (u, v) arrays to be bit-identical to the serial reference.
pub fn bit_identity_gate(choices: &[BackendChoice], units: &UnitSystem) -> Result<()> {
    let reference = gate_state(BackendChoice::Serial, units)?;
    for &choice in choices {
        let state = gate_state(choice, units)?;
        for m in 0..reference.0.len() {
            if state.0[m].to_bits() != reference.0[m].to_bits()
                || state.1[m].to_bits() != reference.1[m].to_bits()
            {
                return Err(DqdError::KernelMismatch { backend: choice.name().into(), node: m });
            }
        }
    }
    Ok(())
}

fn gate_state(choice: BackendChoice, units: &UnitSystem) -> Result<(Vec<f64>, Vec<f64>)> {
    let (prop, psi, schedule, dt) = workload(256, units, choice);
    let mut state = prop.init_state(&psi, &schedule, dt, 0.0)?;
    prop.advance(&mut state, &schedule, 10_000, 0, |_| {})?;
    Ok((state.u, state.v))
}

/// Time each (backend × size) combination over `steps` leapfrog steps,
/// after an untimed warm-up of steps/10 (at least 16) to fault in pages
/// and spin up the thread pool.
pub fn run_bench(
    choices: &[BackendChoice],
    sizes: &[usize],
    steps: u64,
    units: &UnitSystem,
) -> Result<Vec<BenchReport>> {
    assert!(steps >= 2);
    let mut reports = Vec::with_capacity(choices.len() * sizes.len());
    for &choice in choices {
        for &n in sizes {
            let (prop, psi, schedule, dt) = workload(n, units, choice);
            let mut state = prop.init_state(&psi, &schedule, dt, 0.0)?;
            prop.advance(&mut state, &schedule, (steps / 10).max(16), 0, |_| {})?;
            let t0 = Instant::now();
            prop.advance(&mut state, &schedule, steps, 0, |_| {})?;
            let wall_s = t0.elapsed().as_secs_f64();
            let norm_drift = (state.wavefunction().norm_sq(&prop.grid) - 1.0).abs();
            reports.push(BenchReport {
                backend: choice.name().to_string(),
                n_points: n,
                steps,
                wall_s,
                steps_per_s: steps as f64 / wall_s,
                norm_drift,
                valid: norm_drift <= 1e-6,
            });
        }
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threaded_kernel_is_bit_identical_to_serial() {
        let units = UnitSystem::gaas();
        bit_identity_gate(
            &[BackendChoice::Threaded(0), BackendChoice::Threaded(64), BackendChoice::Threaded(977)],
            &units,
        )
        .unwrap();
    }

    #[test]
    fn bench_reports_are_valid_and_positive() {
        let units = UnitSystem::gaas();
        let reports = run_bench(
            &[BackendChoice::Serial, BackendChoice::Threaded(0)],
            &[128, 513],
            2_000,
            &units,
        )
        .unwrap();
        assert_eq!(reports.len(), 4);
        for r in &reports {
            assert!(r.valid, "{} at n = {} drifted by {:.2e}", r.backend, r.n_points, r.norm_drift);
            assert!(r.steps_per_s > 0.0 && r.wall_s > 0.0);
        }
    }
}
