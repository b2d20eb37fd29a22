//! Cross-checks of the pulse machinery: the shared-prefix amplitude scan
//! against independent full propagations, and subspace containment through
//! a deep spin-echo excursion.

use dqd_core::control::{amplitude_sweep, tomography, PulseSpec};
use dqd_core::grid::Grid;
use dqd_core::potential::DqdParams;
use dqd_core::propagator::{max_stable_dt, Propagator};
use dqd_core::qubit_basis::{qubit_basis, Device, QubitBasis};
use dqd_core::units::UnitSystem;
use dqd_core::wavefunction::inner_product;

const BASELINE_UEV: f64 = 27.48;
const TAU_PS: f64 = 90.0;

fn setup(worst_eps_uev: f64) -> (Device, QubitBasis, Propagator, f64) {
    let p = DqdParams::default();
    let grid = Grid::symmetric(264.0, 128, 1.0).unwrap();
    let units = UnitSystem::gaas();
    let (dev, _) = Device::calibrated(p, grid, units).unwrap();
    let basis = qubit_basis(&dev).unwrap();
    let prop = Propagator::dqd(&dev.params, &dev.grid, &dev.units);
    let dt = max_stable_dt(&dev.params, dev.slope_for(worst_eps_uev), &dev.grid, &dev.units).dt_ps;
    (dev, basis, prop, dt)
}

#[test]
fn branched_amplitude_scan_matches_independent_runs() {
    let (dev, basis, prop, dt) = setup(200.0);
    let t_ps = [360.0, 380.5, 401.0];
    let template = PulseSpec::spin_echo(BASELINE_UEV, -128.9, 6.5, t_ps[2], TAU_PS);

    let grid = amplitude_sweep(
        &prop,
        &basis,
        dev.lambda,
        &template,
        &[-128.9],
        &[6.5],
        &t_ps,
        dt,
    )
    .unwrap();
    let cell = grid.cell(0, 0);

    // the same three endpoints, each as its own start-to-finish propagation
    let direct: Vec<f64> = t_ps
        .iter()
        .map(|&tp| {
            let mut spec = template;
            spec.t_p_ps = tp;
            let schedule = spec.to_schedule(dev.lambda).unwrap();
            let out = prop.run(&basis.psi0, &schedule, spec.duration_ps(), dt, None).unwrap();
            inner_product(&basis.psi1, &out.psi, &prop.grid).unwrap().norm_sqr()
        })
        .collect();
    let d_min = direct.iter().copied().fold(f64::INFINITY, f64::min);
    let d_max = direct.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    // the branch walk re-anchors the closing ramps on integrator samples,
    // so agreement is O(dt) in the waveform timing, not bitwise
    assert!(
        (cell.p1_min - d_min).abs() < 2e-3,
        "P1 floor: branched {:.6} vs direct {:.6}",
        cell.p1_min,
        d_min
    );
    assert!(
        (cell.p1_max - d_max).abs() < 2e-3,
        "P1 ceiling: branched {:.6} vs direct {:.6}",
        cell.p1_max,
        d_max
    );
    assert!((cell.amplitude - (cell.p1_max - cell.p1_min)).abs() < 1e-15);
}

#[test]
fn deep_spin_echo_keeps_the_state_in_the_qubit_subspace() {
    let (dev, basis, prop, dt) = setup(260.0);
    // the z-rotation operating point: a ±200 μeV excursion, the hardest
    // case the certification sweeps visit
    let spec = PulseSpec::spin_echo(BASELINE_UEV, -183.6, 201.75, 400.0, TAU_PS);
    let est = tomography(&prop, &basis, &spec, dev.lambda, dt).unwrap();
    assert!(
        est.leakage < 0.01,
        "deep pulse leaked {:.3e} outside the qubit subspace",
        est.leakage
    );
    assert!(
        est.residual < 0.01,
        "probe images are not one rotation: misfit {:.3e}",
        est.residual
    );
}
