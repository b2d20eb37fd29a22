//! Integrator checks against closed-form quantum mechanics: free-packet
//! dispersion, coherent-state motion in a harmonic well, reversal through
//! a time-symmetric bias pulse, and linearity.

use dqd_core::grid::Grid;
use dqd_core::potential::DqdParams;
use dqd_core::propagator::{max_stable_dt, Propagator};
use dqd_core::schedule::DetuningSchedule;
use dqd_core::stationary::{build_hamiltonian, build_hamiltonian_from_samples, lowest_eigenpairs};
use dqd_core::units::UnitSystem;
use dqd_core::wavefunction::{inner_product, Wavefunction};
use num_complex::Complex64;

/// ⟨x⟩ and ⟨x²⟩ of |ψ|² by the same Riemann sum the norm uses.
fn moments(psi: &Wavefunction, grid: &Grid) -> (f64, f64) {
    let (mut m1, mut m2) = (0.0, 0.0);
    for m in 0..grid.n_points {
        let w = psi.value(m).norm_sqr() * grid.dx;
        let x = grid.x(m);
        m1 += w * x;
        m2 += w * x * x;
    }
    (m1, m2)
}

fn gaussian(grid: &Grid, x0: f64, sigma: f64) -> Wavefunction {
    let re: Vec<f64> = (0..grid.n_points)
        .map(|m| {
            let x = grid.x(m);
            (-((x - x0) * (x - x0)) / (4.0 * sigma * sigma)).exp()
        })
        .collect();
    let mut psi = Wavefunction::from_real(re).unwrap();
    psi.clamp_walls();
    psi.normalize(grid);
    psi
}

/// Stable step for an arbitrary sampled potential, from the Gershgorin
/// upper bound (slightly conservative, which is what a test wants).
fn stable_dt(v: &[f64], grid: &Grid, units: &UnitSystem) -> f64 {
    let (_, e_hi) = build_hamiltonian_from_samples(v, grid, units).gershgorin();
    0.8 * units.hbar / e_hi
}

#[test]
fn free_packet_spreads_at_the_analytic_rate() {
    let units = UnitSystem::gaas();
    let grid = Grid::symmetric(264.0, 1024, 1.0).unwrap();
    let zeros = vec![0.0; grid.n_points];
    let prop = Propagator::from_samples(zeros.clone(), zeros.clone(), &grid, &units);
    let sigma0 = 40.0; // nm
    let psi0 = gaussian(&grid, 0.0, sigma0);
    let dt = stable_dt(&zeros, &grid, &units);
    let schedule = DetuningSchedule::constant(0.0);

    for t_final in [1.0, 2.0] {
        let out = prop.run(&psi0, &schedule, t_final, dt, None).unwrap();
        let t = out.steps as f64 * dt;
        let (m1, m2) = moments(&out.psi, &grid);
        // σ²(t) = σ₀² + (ħt/(2mσ₀))², with ħ/2m = kinetic_prefactor/ħ
        let spread = units.kinetic_prefactor * t / (units.hbar * sigma0);
        let want = sigma0 * sigma0 + spread * spread;
        assert!(m1.abs() < 1e-9, "centred packet drifted to ⟨x⟩ = {m1:.2e} nm");
        assert!(
            (m2 / want - 1.0).abs() < 1e-3,
            "⟨x²⟩ = {m2:.3} nm², analytic {want:.3} nm² at t = {t:.2} ps"
        );
        assert!((out.psi.norm_sq(&grid) - 1.0).abs() < 1e-9);
    }
}

#[test]
fn coherent_state_oscillates_without_breathing() {
    let units = UnitSystem::gaas();
    let grid = Grid::symmetric(264.0, 512, 1.0).unwrap();
    let hbar_omega = 0.8; // meV
    let v: Vec<f64> = (0..grid.n_points)
        .map(|m| {
            let x = grid.x(m);
            hbar_omega * hbar_omega * x * x / (4.0 * units.kinetic_prefactor)
        })
        .collect();
    let prop = Propagator::from_samples(v.clone(), vec![0.0; grid.n_points], &grid, &units);
    // ground-state width a² = ħ/(2mω), displaced well inside the walls
    let a = (units.kinetic_prefactor / hbar_omega).sqrt();
    let x0 = 60.0; // nm
    let psi0 = gaussian(&grid, x0, a);
    let dt = stable_dt(&v, &grid, &units);
    let omega = hbar_omega / units.hbar; // rad/ps
    let schedule = DetuningSchedule::constant(0.0);

    // half a period carries the packet to −x₀ with the width unchanged
    let out = prop.run(&psi0, &schedule, std::f64::consts::PI / omega, dt, None).unwrap();
    let t = out.steps as f64 * dt;
    let (m1, m2) = moments(&out.psi, &grid);
    let want_center = x0 * (omega * t).cos();
    assert!(
        (m1 - want_center).abs() < 0.05,
        "⟨x⟩ = {m1:.4} nm, classical path gives {want_center:.4} nm"
    );
    let var = m2 - m1 * m1;
    assert!(
        (var / (a * a) - 1.0).abs() < 5e-3,
        "coherent state breathed: var = {var:.3} nm², ground width² = {:.3} nm²",
        a * a
    );
}

#[test]
fn time_symmetric_pulse_reverses_back_to_the_start() {
    let units = UnitSystem::gaas();
    let p = DqdParams::default();
    let grid = Grid::symmetric(264.0, 256, 1.0).unwrap();
    // symmetric tent in slope units: nodes mirror under t → T − t
    let schedule = DetuningSchedule::new(vec![
        (0.0, 0.065),
        (90.0, -0.03),
        (390.0, -0.03),
        (480.0, 0.065),
    ])
    .unwrap();
    let h = build_hamiltonian(&p, 0.065, &grid, &units);
    let psi0 = lowest_eigenpairs(&h, 1, &grid).unwrap().remove(0).state;
    let prop = Propagator::dqd(&p, &grid, &units);
    let dt = max_stable_dt(&p, 0.065, &grid, &units).dt_ps;

    let fwd = prop.run(&psi0, &schedule, 480.0, dt, None).unwrap();
    // conjugate, run the same waveform again, conjugate: ψ → ψ(0) exactly
    // if the stepping is reversible (the startup Taylor is the only loss)
    let conj = Wavefunction::from_parts(fwd.psi.re.clone(), fwd.psi.im.iter().map(|v| -v).collect())
        .unwrap();
    let back = prop.run(&conj, &schedule, 480.0, dt, None).unwrap();
    let rt = Wavefunction::from_parts(back.psi.re.clone(), back.psi.im.iter().map(|v| -v).collect())
        .unwrap();
    let fidelity = inner_product(&psi0, &rt, &grid).unwrap().norm_sqr();
    assert!(fidelity > 1.0 - 1e-6, "round trip lost {:.2e}", 1.0 - fidelity);
}

#[test]
fn propagation_is_linear_in_the_initial_state() {
    let units = UnitSystem::gaas();
    let p = DqdParams::default();
    let grid = Grid::symmetric(264.0, 128, 1.0).unwrap();
    let h = build_hamiltonian(&p, 0.0, &grid, &units);
    let pair = lowest_eigenpairs(&h, 2, &grid).unwrap();
    let prop = Propagator::dqd(&p, &grid, &units);
    let dt = max_stable_dt(&p, 0.2, &grid, &units).dt_ps;
    let schedule =
        DetuningSchedule::new(vec![(0.0, 0.0), (50.0, 0.2), (100.0, 0.0)]).unwrap();

    let (ca, cb) = (Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8));
    let mixed = Wavefunction::superpose(ca, &pair[0].state, cb, &pair[1].state).unwrap();

    let ua = prop.run(&pair[0].state, &schedule, 100.0, dt, None).unwrap().psi;
    let ub = prop.run(&pair[1].state, &schedule, 100.0, dt, None).unwrap().psi;
    let umixed = prop.run(&mixed, &schedule, 100.0, dt, None).unwrap().psi;
    let recombined = Wavefunction::superpose(ca, &ua, cb, &ub).unwrap();

    let mut err_sq = 0.0;
    for m in 0..grid.n_points {
        err_sq += (umixed.value(m) - recombined.value(m)).norm_sqr() * grid.dx;
    }
    assert!(err_sq.sqrt() < 1e-10, "superposition propagated nonlinearly: L2 = {:.2e}", err_sq.sqrt());
}
