//! Detuning pulses and everything driven by them: ground-state → qubit
//! preparation, Rabi amplitude sweeps, Bloch rotation tomography, and the
//! decomposition of pulse families into axis / rate / phase constants.
//!
//! Pulse conventions: a *trapezoid* ramps from the baseline detuning to
//! baseline + A in τ, holds for t_p, and ramps back — its amplitude is an
//! offset. A *spin-echo* pulse visits the absolute detunings Ā′ and A′:
//! ramp base → Ā′ → A′, hold A′ for t_hold = t_p − 4τ, then mirror back,
//! so the whole waveform lasts exactly t_p. All measurements ("just after
//! the pulse") are taken at the first integrator sample at or past the
//! waveform's return to baseline.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{DqdError, Result};
use crate::lsm::{self, QubitState};
use crate::propagator::Propagator;
use crate::qubit_basis::{distance_s, Device, QubitBasis};
use crate::rotation::{angle_between, axis_angle, procrustes, project_so3, rodrigues, skew};
use crate::schedule::DetuningSchedule;
use crate::units::UEV_PER_MEV;
use crate::wavefunction::{inner_product, Wavefunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseKind {
    Trapezoid,
    SpinEcho,
}

/// A finite-rise-time detuning pulse. All detunings in μeV, times in ps.
#[derive(Debug, Clone, Copy)]
pub struct PulseSpec {
    pub kind: PulseKind,
    /// resting detuning before and after the pulse
    pub baseline_uev: f64,
    /// trapezoid: plateau offset from the baseline; spin-echo: absolute
    /// detuning A′ of the long hold
    pub amplitude_uev: f64,
    /// spin-echo only: absolute detuning Ā′ of the two corner points
    /// (ignored by trapezoids)
    pub counter_uev: f64,
    /// active pulse time t_p; for a spin-echo this is the total duration
    pub t_p_ps: f64,
    /// rise time τ of every linear segment
    pub tau_ps: f64,
}

impl PulseSpec {
    pub fn trapezoid(baseline_uev: f64, amplitude_uev: f64, t_p_ps: f64, tau_ps: f64) -> Self {
        PulseSpec {
            kind: PulseKind::Trapezoid,
            baseline_uev,
            amplitude_uev,
            counter_uev: 0.0,
            t_p_ps,
            tau_ps,
        }
    }

    pub fn spin_echo(
        baseline_uev: f64,
        counter_uev: f64,
        amplitude_uev: f64,
        t_p_ps: f64,
        tau_ps: f64,
    ) -> Self {
        PulseSpec { kind: PulseKind::SpinEcho, baseline_uev, amplitude_uev, counter_uev, t_p_ps, tau_ps }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.baseline_uev, self.amplitude_uev, self.counter_uev, self.t_p_ps, self.tau_ps];
        if fields.iter().any(|f| !f.is_finite()) {
            return Err(DqdError::PulseSpec("pulse parameters must be finite".into()));
        }
        if self.tau_ps < 0.0 || self.t_p_ps < 0.0 {
            return Err(DqdError::PulseSpec(format!(
                "negative segment duration: t_p = {}, τ = {}",
                self.t_p_ps, self.tau_ps
            )));
        }
        if self.kind == PulseKind::SpinEcho && self.t_p_ps < 4.0 * self.tau_ps {
            return Err(DqdError::PulseSpec(format!(
                "spin-echo hold time t_p − 4τ = {} ps is negative",
                self.t_p_ps - 4.0 * self.tau_ps
            )));
        }
        // zero rise time is only representable when nothing actually steps
        self.nodes_uev().map(|_| ())
    }

    /// Corner points (t, ε) of the waveform, duplicates collapsed. A time
    /// collision with two different values is a genuine discontinuity and
    /// is rejected — drive the two-level model directly for that
    /// idealisation.
    pub fn nodes_uev(&self) -> Result<Vec<(f64, f64)>> {
        let (b, a, c, tp, tau) =
            (self.baseline_uev, self.amplitude_uev, self.counter_uev, self.t_p_ps, self.tau_ps);
        let raw = match self.kind {
            PulseKind::Trapezoid => vec![
                (0.0, b),
                (tau, b + a),
                (tau + tp, b + a),
                (2.0 * tau + tp, b),
            ],
            PulseKind::SpinEcho => {
                let th = tp - 4.0 * tau;
                vec![
                    (0.0, b),
                    (tau, c),
                    (2.0 * tau, a),
                    (2.0 * tau + th, a),
                    (3.0 * tau + th, c),
                    (4.0 * tau + th, b),
                ]
            }
        };
        let mut nodes: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (t, v) in raw {
            match nodes.last() {
                Some(&(tl, vl)) if t <= tl => {
                    if (v - vl).abs() > 1e-12 {
                        return Err(DqdError::PulseSpec(format!(
                            "waveform steps from {vl} to {v} μeV instantaneously at t = {t} ps \
                             (zero rise time with a nonzero swing)"
                        )));
                    }
                }
                _ => nodes.push((t, v)),
            }
        }
        Ok(nodes)
    }

    /// Total waveform duration: ramps included for a trapezoid, equal to
    /// t_p for a spin-echo by construction.
    pub fn duration_ps(&self) -> f64 {
        match self.kind {
            PulseKind::Trapezoid => self.t_p_ps + 2.0 * self.tau_ps,
            PulseKind::SpinEcho => self.t_p_ps,
        }
    }

    /// Dead time c·τ folded into the rotation-angle model ϑ(t_p) =
    /// ϑ₀ + κ·(t_p − c·τ): the total ramp time (c = 2 for a trapezoid,
    /// c = 4 for a spin-echo).
    pub fn ramp_time_ps(&self) -> f64 {
        match self.kind {
            PulseKind::Trapezoid => 2.0 * self.tau_ps,
            PulseKind::SpinEcho => 4.0 * self.tau_ps,
        }
    }

    /// Detuning at time t, clamped to the baseline outside the pulse.
    pub fn waveform_uev(&self, t: f64) -> Result<f64> {
        Ok(DetuningSchedule::new(self.nodes_uev()?)?.value(t))
    }

    /// The waveform as a bias-slope schedule: ε = λ·v ⇒ v = ε/λ.
    pub fn to_schedule(&self, lambda: f64) -> Result<DetuningSchedule> {
        self.validate()?;
        let nodes = self
            .nodes_uev()?
            .into_iter()
            .map(|(t, uev)| (t, uev_to_slope(uev, lambda)))
            .collect();
        DetuningSchedule::new(nodes)
    }

    /// (hold start time, hold detuning, suffix duration): the constant
    /// stretch whose length is the only thing t_p changes, and the time
    /// the waveform needs after it to come back to baseline.
    fn hold_window(&self) -> (f64, f64, f64) {
        match self.kind {
            PulseKind::Trapezoid => {
                (self.tau_ps, self.baseline_uev + self.amplitude_uev, self.tau_ps)
            }
            PulseKind::SpinEcho => (2.0 * self.tau_ps, self.amplitude_uev, 2.0 * self.tau_ps),
        }
    }

    /// Hold duration for a given active time t_p.
    fn hold_length(&self, t_p: f64) -> f64 {
        match self.kind {
            PulseKind::Trapezoid => t_p,
            PulseKind::SpinEcho => t_p - 4.0 * self.tau_ps,
        }
    }

    /// Nodes of the closing ramps, anchored at absolute time `t0` (the
    /// moment the hold ends).
    fn suffix_nodes_uev(&self, t0: f64) -> Vec<(f64, f64)> {
        let (_, hold, _) = self.hold_window();
        match self.kind {
            PulseKind::Trapezoid => vec![(t0, hold), (t0 + self.tau_ps, self.baseline_uev)],
            PulseKind::SpinEcho => vec![
                (t0, hold),
                (t0 + self.tau_ps, self.counter_uev),
                (t0 + 2.0 * self.tau_ps, self.baseline_uev),
            ],
        }
    }
}

fn uev_to_slope(uev: f64, lambda: f64) -> f64 {
    uev / UEV_PER_MEV / lambda
}

/// Steps needed for k·dt to reach `t` (first sample at or past `t`).
fn steps_to_reach(t: f64, dt: f64) -> u64 {
    (t / dt - 1e-9).ceil().max(0.0) as u64
}

// ---------------------------------------------------------------------
// tomography
// ---------------------------------------------------------------------

/// One reconstructed Bloch rotation.
#[derive(Debug, Clone)]
pub struct RotationEstimate {
    pub rotation: Matrix3<f64>,
    /// rotation axis, unit length; sign chosen so the angle is ≥ 0
    pub axis: Vector3<f64>,
    /// rotation angle, rad, in [0, π]
    pub angle: f64,
    /// worst 1 − |a|² − |b|² over the three probes
    pub leakage: f64,
    /// Procrustes misfit √Σ‖R·rᵢ − r′ᵢ‖²; > 0.01 means the three probe
    /// images are not consistent with any single rotation
    pub residual: f64,
}

/// The three tomography probes and their Bloch vectors: ψ0 at +ẑ,
/// (ψ0+ψ1)/√2 at +x̂, (ψ0+iψ1)/√2 at −ŷ.
fn probes(basis: &QubitBasis, grid: &crate::grid::Grid) -> Result<Vec<(Wavefunction, Vector3<f64>)>> {
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let mut x = Wavefunction::superpose(one, &basis.psi0, one, &basis.psi1)?;
    let mut y = Wavefunction::superpose(one, &basis.psi0, i, &basis.psi1)?;
    x.normalize(grid);
    y.normalize(grid);
    Ok(vec![
        (basis.psi0.clone(), Vector3::z()),
        (x, Vector3::x()),
        (y, -Vector3::y()),
    ])
}

/// Amplitudes of ψ on the qubit basis and the weight lost outside it.
fn project_onto_basis(
    psi: &Wavefunction,
    basis: &QubitBasis,
    grid: &crate::grid::Grid,
) -> Result<(Complex64, Complex64, f64)> {
    let a = inner_product(&basis.psi0, psi, grid)?;
    let b = inner_product(&basis.psi1, psi, grid)?;
    let leakage = (1.0 - a.norm_sqr() - b.norm_sqr()).max(0.0);
    Ok((a, b, leakage))
}

/// Reconstruct the Bloch rotation a pulse implements by propagating the
/// three probe states through it and fitting the proper rotation that
/// maps their initial Bloch vectors onto the measured finals. Leakage
/// above 2% on any probe invalidates the two-level picture and errors.
pub fn tomography(
    prop: &Propagator,
    basis: &QubitBasis,
    spec: &PulseSpec,
    lambda: f64,
    dt: f64,
) -> Result<RotationEstimate> {
    spec.validate()?;
    let schedule = spec.to_schedule(lambda)?;
    let t_final = spec.duration_ps();
    let probe_set = probes(basis, &prop.grid)?;
    let shots: Vec<(Vector3<f64>, f64)> = probe_set
        .par_iter()
        .map(|(psi, _)| -> Result<(Vector3<f64>, f64)> {
            let out = prop.run(psi, &schedule, t_final, dt, None)?;
            let (a, b, leakage) = project_onto_basis(&out.psi, basis, &prop.grid)?;
            if leakage > 0.02 {
                return Err(DqdError::SubspaceViolation { leakage });
            }
            Ok((QubitState::new(a, b).bloch(), leakage))
        })
        .collect::<Result<_>>()?;
    let initials: Vec<Vector3<f64>> = probe_set.iter().map(|(_, r)| *r).collect();
    let finals: Vec<Vector3<f64>> = shots.iter().map(|(r, _)| *r).collect();
    let leakage = shots.iter().map(|&(_, l)| l).fold(0.0, f64::max);
    let (rotation, residual) = procrustes(&initials, &finals)?;
    let (axis, angle) = axis_angle(&rotation);
    Ok(RotationEstimate { rotation, axis, angle, leakage, residual })
}

/// The same reconstruction against the two-level model instead of the
/// full solver — the oracle the full tomography is tested against, and a
/// cheap stand-in for coarse pulse scans.
pub fn lsm_tomography(
    schedule: &DetuningSchedule,
    lambda: f64,
    delta_uev: f64,
    t0: f64,
    t_final: f64,
) -> Result<RotationEstimate> {
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    let i = Complex64::new(0.0, 1.0);
    let probe_states = [
        (QubitState::pole(), Vector3::z()),
        (QubitState::new(Complex64::new(inv, 0.0), Complex64::new(inv, 0.0)), Vector3::x()),
        (QubitState::new(Complex64::new(inv, 0.0), i * inv), -Vector3::y()),
    ];
    let mut initials = Vec::with_capacity(3);
    let mut finals = Vec::with_capacity(3);
    for (s0, r0) in &probe_states {
        let s = lsm::lsm_propagate(s0, schedule, lambda, delta_uev, t0, t_final, 1e-3);
        initials.push(*r0);
        finals.push(s.bloch());
    }
    let (rotation, residual) = procrustes(&initials, &finals)?;
    let (axis, angle) = axis_angle(&rotation);
    Ok(RotationEstimate { rotation, axis, angle, leakage: 0.0, residual })
}

// ---------------------------------------------------------------------
// preparation
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct PrepareResult {
    /// refined optimum
    pub t_p_ps: f64,
    pub amplitude_uev: f64,
    /// infidelity S = 1 − |⟨ψ0|ψ(t_end)⟩|² at the optimum
    pub infidelity: f64,
    /// best grid point before refinement: (t_p, A, S)
    pub coarse: (f64, f64, f64),
    pub evaluations: usize,
}

/// Find the trapezoid (t_p, A) that carries the biased ground state into
/// ψ0: a full grid scan, then a Nelder–Mead descent from each coarse
/// local minimum (best five), run in grid-normalised coordinates until
/// the simplex shrinks below 2^-refine_rounds of the grid spacing.
/// The landscape is multimodal, and the basins are long, thin, oblique
/// valleys: a fixed stencil loses more transversely than it gains along
/// the valley at any step size, while the simplex stretches itself
/// along the floor and tracks it.  Errors if no grid point even reaches
/// S < 0.5 — the sweep window is then looking at the wrong region
/// entirely.
#[allow(clippy::too_many_arguments)]
pub fn prepare_qubit(
    prop: &Propagator,
    dev: &Device,
    basis: &QubitBasis,
    baseline_uev: f64,
    tau_ps: f64,
    t_p_values: &[f64],
    amp_values_uev: &[f64],
    dt: f64,
    refine_rounds: usize,
) -> Result<PrepareResult> {
    assert!(prop.grid.same_space(&dev.grid), "propagator and device must share the grid");
    assert!(t_p_values.len() >= 2 && amp_values_uev.len() >= 2);
    let ground = dev.eigenpairs_at(baseline_uev, 1)?.remove(0).state;

    let evaluate = |t_p: f64, a: f64| -> Result<f64> {
        let spec = PulseSpec::trapezoid(baseline_uev, a, t_p, tau_ps);
        let schedule = spec.to_schedule(dev.lambda)?;
        let out = prop.run(&ground, &schedule, spec.duration_ps(), dt, None)?;
        distance_s(&basis.psi0, &out.psi, &prop.grid)
    };

    let cells: Vec<(f64, f64)> = t_p_values
        .iter()
        .flat_map(|&t| amp_values_uev.iter().map(move |&a| (t, a)))
        .collect();
    let scores: Vec<f64> = cells
        .par_iter()
        .map(|&(t, a)| evaluate(t, a))
        .collect::<Result<_>>()?;
    let mut evaluations = cells.len();
    let best_idx = scores
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("nonempty grid");
    let coarse = (cells[best_idx].0, cells[best_idx].1, scores[best_idx]);
    if coarse.2 >= 0.5 {
        return Err(DqdError::SweepRange(format!(
            "no grid point prepares the qubit: best infidelity {:.3} at (t_p = {} ps, A = {} μeV)",
            coarse.2, coarse.0, coarse.1
        )));
    }

    let (n_t, n_a) = (t_p_values.len(), amp_values_uev.len());
    let mut seeds: Vec<usize> = (0..cells.len())
        .filter(|&c| {
            let (i, j) = (c / n_a, c % n_a);
            (-1..=1i64).all(|di| {
                (-1..=1i64).all(|dj| {
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    ii < 0
                        || jj < 0
                        || ii >= n_t as i64
                        || jj >= n_a as i64
                        || scores[ii as usize * n_a + jj as usize] >= scores[c]
                })
            })
        })
        .collect();
    seeds.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    seeds.truncate(5);

    // Nelder–Mead from each seed, in grid-normalised coordinates
    // (u, v) = ((t_p − t₀)/h_t, (A − a₀)/h_a) so the simplex is not
    // distorted by the ps-vs-μeV scale difference.  Proposals are
    // clamped to the swept box: S revives periodically in t_p, and an
    // unconstrained simplex happily marches out of the window the
    // caller asked about and into the next revival.
    let h_t = t_p_values[1] - t_p_values[0];
    let h_a = amp_values_uev[1] - amp_values_uev[0];
    let (t_lo, t_hi) = (t_p_values[0], *t_p_values.last().unwrap());
    let (a_lo, a_hi) = (amp_values_uev[0], *amp_values_uev.last().unwrap());
    let size_tol = 0.5_f64.powi(refine_rounds as i32);
    let mut best = coarse;
    for seed in seeds {
        let (t0, a0) = cells[seed];
        let boxed = |u: f64, v: f64| {
            (
                ((t0 + u * h_t).clamp(t_lo, t_hi).max(0.0) - t0) / h_t,
                ((a0 + v * h_a).clamp(a_lo, a_hi) - a0) / h_a,
            )
        };
        let eval_uv = |u: f64, v: f64| evaluate(t0 + u * h_t, a0 + v * h_a);
        // open the initial simplex one grid step inward from any edge
        let du = if t0 + h_t <= t_hi { 1.0 } else { -1.0 };
        let dv = if a0 + h_a <= a_hi { 1.0 } else { -1.0 };
        let mut vx: [(f64, f64, f64); 3] = [
            (0.0, 0.0, scores[seed]),
            (du, 0.0, eval_uv(du, 0.0)?),
            (0.0, dv, eval_uv(0.0, dv)?),
        ];
        evaluations += 2;
        let mut restarted = false;
        for _ in 0..60 * refine_rounds.max(1) {
            vx.sort_by(|p, q| p.2.total_cmp(&q.2));
            let diam = (1..3)
                .map(|i| (vx[i].0 - vx[0].0).abs().max((vx[i].1 - vx[0].1).abs()))
                .fold(0.0_f64, f64::max);
            if diam < size_tol {
                if restarted {
                    break;
                }
                // re-open the simplex once around the converged point —
                // the simplex can collapse flat inside a curved valley
                // before reaching its floor
                restarted = true;
                let (u, v, s) = vx[0];
                let (u1, v1) = boxed(u + 4.0 * size_tol, v);
                let (u2, v2) = boxed(u - 4.0 * size_tol, v + 4.0 * size_tol);
                vx = [
                    (u, v, s),
                    (u1, v1, eval_uv(u1, v1)?),
                    (u2, v2, eval_uv(u2, v2)?),
                ];
                evaluations += 2;
                continue;
            }
            let cu = (vx[0].0 + vx[1].0) / 2.0;
            let cv = (vx[0].1 + vx[1].1) / 2.0;
            let (wu, wv, ws) = vx[2];
            let (ru, rv) = boxed(2.0 * cu - wu, 2.0 * cv - wv);
            let rs = eval_uv(ru, rv)?;
            evaluations += 1;
            if rs < vx[0].2 {
                // reflected point beats every vertex: try doubling out
                let (eu, ev) = boxed(3.0 * cu - 2.0 * wu, 3.0 * cv - 2.0 * wv);
                let es = eval_uv(eu, ev)?;
                evaluations += 1;
                vx[2] = if es < rs { (eu, ev, es) } else { (ru, rv, rs) };
            } else if rs < vx[1].2 {
                vx[2] = (ru, rv, rs);
            } else {
                // contract halfway toward the centroid, on whichever
                // side of it looked better
                let (pu, pv) = if rs < ws {
                    ((cu + ru) / 2.0, (cv + rv) / 2.0)
                } else {
                    ((cu + wu) / 2.0, (cv + wv) / 2.0)
                };
                let ps = eval_uv(pu, pv)?;
                evaluations += 1;
                if ps < rs.min(ws) {
                    vx[2] = (pu, pv, ps);
                } else {
                    // shrink toward the best vertex
                    for i in 1..3 {
                        let u = (vx[0].0 + vx[i].0) / 2.0;
                        let v = (vx[0].1 + vx[i].1) / 2.0;
                        let s = eval_uv(u, v)?;
                        evaluations += 1;
                        vx[i] = (u, v, s);
                    }
                }
            }
        }
        vx.sort_by(|p, q| p.2.total_cmp(&q.2));
        if vx[0].2 < best.2 {
            best = ((t0 + vx[0].0 * h_t).max(0.0), a0 + vx[0].1 * h_a, vx[0].2);
        }
    }
    Ok(PrepareResult {
        t_p_ps: best.0,
        amplitude_uev: best.1,
        infidelity: best.2,
        coarse,
        evaluations,
    })
}

// ---------------------------------------------------------------------
// amplitude sweep
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub counter_uev: f64,
    pub plateau_uev: f64,
    /// max − min of P(ψ1) over the t_p scan
    pub amplitude: f64,
    pub p1_min: f64,
    pub p1_max: f64,
}

#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub counter_values_uev: Vec<f64>,
    pub plateau_values_uev: Vec<f64>,
    pub t_p_values: Vec<f64>,
    /// row-major over (counter, plateau)
    pub cells: Vec<SweepCell>,
}

impl SweepGrid {
    pub fn cell(&self, i_counter: usize, j_plateau: usize) -> &SweepCell {
        &self.cells[i_counter * self.plateau_values_uev.len() + j_plateau]
    }
}

/// P(ψ1) after the pulse, scanned over t_p, sharing work across the scan:
/// the opening ramps are propagated once, the hold is walked forward
/// incrementally, and only the closing ramps are re-run per t_p from a
/// cloned integrator state (the hold is constant, so every clone is an
/// exact continuation).
fn rabi_p1_scan(
    prop: &Propagator,
    psi_start: &Wavefunction,
    psi_meas: &Wavefunction,
    template: &PulseSpec,
    lambda: f64,
    t_p_values: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    let t_p_max = *t_p_values.last().expect("nonempty t_p scan");
    let mut longest = *template;
    longest.t_p_ps = t_p_max;
    longest.validate()?;
    let full = longest.to_schedule(lambda)?;
    let (hold_start, _, suffix_len) = longest.hold_window();

    let mut state = prop.init_state(psi_start, &full, dt, 0.0)?;
    let mut done = 0u64;
    let pre = steps_to_reach(hold_start, dt);
    prop.advance(&mut state, &full, pre, 0, |_| {})?;
    done += pre;

    let mut p1 = Vec::with_capacity(t_p_values.len());
    for &t_p in t_p_values {
        let hold = longest.hold_length(t_p);
        if hold < -1e-12 {
            return Err(DqdError::PulseSpec(format!(
                "t_p = {t_p} ps leaves a negative hold for τ = {} ps",
                template.tau_ps
            )));
        }
        let want = steps_to_reach(hold_start + hold.max(0.0), dt);
        if want > done {
            prop.advance(&mut state, &full, want - done, 0, |_| {})?;
            done = want;
        }
        let mut branch = state.clone();
        let t0 = branch.time();
        let suffix_nodes = longest
            .suffix_nodes_uev(t0)
            .into_iter()
            .map(|(t, uev)| (t, uev_to_slope(uev, lambda)))
            .collect();
        let suffix = DetuningSchedule::new(suffix_nodes)?;
        let sfx = steps_to_reach(t0 + suffix_len, dt).saturating_sub(branch.step_index);
        prop.advance(&mut branch, &suffix, sfx, 0, |_| {})?;
        let psi = branch.wavefunction();
        p1.push(inner_product(psi_meas, &psi, &prop.grid)?.norm_sqr());
    }
    Ok(p1)
}

/// Rabi oscillation amplitude max − min P(ψ1) starting from ψ0, on a grid
/// of pulse amplitudes. For trapezoids the counter list is ignored (pass
/// `&[0.0]`); for spin-echo pulses the grid is (Ā′, A′). Cells run in
/// parallel; each cell scans `t_p_values` with the shared-prefix walk.
#[allow(clippy::too_many_arguments)]
pub fn amplitude_sweep(
    prop: &Propagator,
    basis: &QubitBasis,
    lambda: f64,
    template: &PulseSpec,
    counter_values_uev: &[f64],
    plateau_values_uev: &[f64],
    t_p_values: &[f64],
    dt: f64,
) -> Result<SweepGrid> {
    assert!(!t_p_values.is_empty() && !plateau_values_uev.is_empty());
    assert!(
        t_p_values.windows(2).all(|w| w[1] > w[0]),
        "t_p scan must be strictly increasing"
    );
    let counters: &[f64] =
        if template.kind == PulseKind::Trapezoid { &[0.0] } else { counter_values_uev };
    let cells_in: Vec<(f64, f64)> = counters
        .iter()
        .flat_map(|&c| plateau_values_uev.iter().map(move |&p| (c, p)))
        .collect();
    let cells: Vec<SweepCell> = cells_in
        .par_iter()
        .map(|&(c, p)| -> Result<SweepCell> {
            let mut spec = *template;
            spec.counter_uev = c;
            spec.amplitude_uev = p;
            let p1 = rabi_p1_scan(prop, &basis.psi0, &basis.psi1, &spec, lambda, t_p_values, dt)?;
            let p1_min = p1.iter().copied().fold(f64::INFINITY, f64::min);
            let p1_max = p1.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(SweepCell { counter_uev: c, plateau_uev: p, amplitude: p1_max - p1_min, p1_min, p1_max })
        })
        .collect::<Result<_>>()?;
    Ok(SweepGrid {
        counter_values_uev: counters.to_vec(),
        plateau_values_uev: plateau_values_uev.to_vec(),
        t_p_values: t_p_values.to_vec(),
        cells,
    })
}

// ---------------------------------------------------------------------
// family decomposition and certification
// ---------------------------------------------------------------------

/// A one-parameter family R(t_p) = R_n̂(ϑ₀ + κ·(t_p − c·τ)) · P fitted to
/// tomography samples. P is the prescribed fixed factor (identity, or the
/// R_z(π) a spin-echo σx family carries), Ḡ the measured one.
#[derive(Debug, Clone)]
pub struct RotationFamily {
    /// fitted rotation axis n̂ (unit; κ is kept ≥ 0 by flipping n̂)
    pub axis: Vector3<f64>,
    /// angular rate κ // rad/ps
    pub rate_rad_per_ps: f64,
    /// phase ϑ₀ at t_p = c·τ // rad
    pub phase_rad: f64,
    /// measured fixed factor Ḡ ≈ R_n̂(ϑ₀)·P
    pub fixed: Matrix3<f64>,
    /// worst deviation angle of any sample's fixed factor from Ḡ // rad
    pub residual_rad: f64,
}

/// Fit (n̂, κ, ϑ₀) from ≥ 5 tomography samples (t_p, R). Increments
/// R(t_{i+1})·R(t_i)ᵀ vote on the axis and rate; the de-rotated samples
/// R_n̂(−κ(t_i − c·τ))·R_i must then agree on one fixed factor to within
/// 0.05 rad, otherwise the angle is not growing linearly in t_p and the
/// family model does not apply. Keep κ·Δt_p below π or the rate aliases.
pub fn decompose_rotation(
    samples: &[(f64, RotationEstimate)],
    c_tau_ps: f64,
    target: &Matrix3<f64>,
) -> Result<RotationFamily> {
    if samples.len() < 5 {
        return Err(DqdError::Decomposition(format!(
            "need at least 5 tomography samples, got {}",
            samples.len()
        )));
    }
    if !samples.windows(2).all(|w| w[1].0 > w[0].0) {
        return Err(DqdError::Decomposition("t_p samples must be strictly increasing".into()));
    }

    let mut axes: Vec<Vector3<f64>> = Vec::with_capacity(samples.len() - 1);
    let (mut angle_sum, mut time_sum) = (0.0, 0.0);
    for w in samples.windows(2) {
        let dr = w[1].1.rotation * w[0].1.rotation.transpose();
        let (mut ax, mut th) = axis_angle(&dr);
        time_sum += w[1].0 - w[0].0;
        if th < 1e-12 {
            continue; // no increment, no axis vote
        }
        if let Some(first) = axes.first() {
            if ax.dot(first) < 0.0 {
                ax = -ax;
                th = -th;
            }
        }
        axes.push(ax);
        angle_sum += th;
    }
    if axes.is_empty() {
        return Err(DqdError::Decomposition("the family never rotates between samples".into()));
    }
    let mean_axis: Vector3<f64> = axes.iter().sum::<Vector3<f64>>() / axes.len() as f64;
    if mean_axis.norm() < 0.5 {
        return Err(DqdError::Decomposition(
            "incremental rotation axes do not agree on a family axis".into(),
        ));
    }
    let mut axis = mean_axis.normalize();
    let mut rate = angle_sum / time_sum;
    if rate < 0.0 {
        rate = -rate;
        axis = -axis;
    }

    let de_rotated: Vec<Matrix3<f64>> = samples
        .iter()
        .map(|(t, e)| rodrigues(&axis, -rate * (t - c_tau_ps)) * e.rotation)
        .collect();
    let fixed = project_so3(&(de_rotated.iter().sum::<Matrix3<f64>>() / samples.len() as f64));
    let residual_rad = de_rotated
        .iter()
        .map(|g| axis_angle(&(g * fixed.transpose())).1)
        .fold(0.0, f64::max);
    if residual_rad > 0.05 {
        return Err(DqdError::Decomposition(format!(
            "fixed factor drifts by {residual_rad:.3} rad across the scan — the rotation angle \
             is not linear in t_p"
        )));
    }

    // split Ḡ = R_n̂(ϑ₀)·P: maximise tr((R_n̂(ϑ)P)ᵀ·Ḡ) = γ + α·cosϑ + β·sinϑ
    let nnt = axis * axis.transpose();
    let alpha = (target.transpose() * fixed).trace() - (target.transpose() * nnt * fixed).trace();
    let beta = -(target.transpose() * skew(&axis) * fixed).trace();
    let phase_rad = beta.atan2(alpha);

    Ok(RotationFamily { axis, rate_rad_per_ps: rate, phase_rad, fixed, residual_rad })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotationTarget {
    SigmaX,
    SigmaZ,
}

#[derive(Debug, Clone)]
pub struct Certification {
    pub target: RotationTarget,
    pub family: RotationFamily,
    /// Rabi oscillation amplitude max − min P(ψ1) from the sweep cell
    pub oscillation_amplitude: f64,
    /// family axis angle from the target axis (nearest of ±) // degrees
    pub axis_deviation_deg: f64,
    /// σz only: worst mismatch of the equatorial probe's azimuth against
    /// the fitted family's prediction // degrees
    pub phase_deviation_deg: Option<f64>,
    pub estimates: Vec<(f64, RotationEstimate)>,
    pub passed: bool,
}

/// Run tomography across `t_p_values`, fit the rotation family, and apply
/// the certification tests: a σx gate needs oscillation amplitude ≥ 0.99
/// and a family axis within 2° of x̂ (after the R_z(π) factor); a σz gate
/// needs amplitude ≤ 0.01, axis within 2° of ẑ, and the equatorial probe
/// tracking the predicted azimuth to 5°.
#[allow(clippy::too_many_arguments)]
pub fn certify_rotation(
    prop: &Propagator,
    basis: &QubitBasis,
    lambda: f64,
    template: &PulseSpec,
    t_p_values: &[f64],
    oscillation_amplitude: f64,
    target: RotationTarget,
    dt: f64,
) -> Result<Certification> {
    let estimates: Vec<(f64, RotationEstimate)> = t_p_values
        .par_iter()
        .map(|&tp| -> Result<(f64, RotationEstimate)> {
            let mut spec = *template;
            spec.t_p_ps = tp;
            Ok((tp, tomography(prop, basis, &spec, lambda, dt)?))
        })
        .collect::<Result<_>>()?;

    let fixed_target = match target {
        RotationTarget::SigmaX => rodrigues(&Vector3::z(), std::f64::consts::PI),
        RotationTarget::SigmaZ => Matrix3::identity(),
    };
    let family = decompose_rotation(&estimates, template.ramp_time_ps(), &fixed_target)?;

    let goal = match target {
        RotationTarget::SigmaX => Vector3::x(),
        RotationTarget::SigmaZ => Vector3::z(),
    };
    let axis_deviation_deg = angle_between(&family.axis, &goal)
        .min(angle_between(&(-family.axis), &goal))
        .to_degrees();

    let phase_deviation_deg = match target {
        RotationTarget::SigmaX => None,
        RotationTarget::SigmaZ => {
            let mut worst: f64 = 0.0;
            for (tp, est) in &estimates {
                // model: R(t_p) = R_n̂(κ·(t_p − c·τ))·Ḡ, with ϑ₀ already
                // inside the measured fixed factor Ḡ
                let predicted = rodrigues(
                    &family.axis,
                    family.rate_rad_per_ps * (tp - template.ramp_time_ps()),
                ) * family.fixed
                    * Vector3::x();
                let measured = est.rotation * Vector3::x();
                if measured.x.hypot(measured.y) < 0.5 {
                    worst = 180.0; // probe left the equator — no phase to speak of
                    break;
                }
                let dphi = (measured.y.atan2(measured.x) - predicted.y.atan2(predicted.x))
                    .rem_euclid(std::f64::consts::TAU);
                worst = worst.max(dphi.min(std::f64::consts::TAU - dphi).to_degrees());
            }
            Some(worst)
        }
    };

    let passed = match target {
        RotationTarget::SigmaX => oscillation_amplitude >= 0.99 && axis_deviation_deg <= 2.0,
        RotationTarget::SigmaZ => {
            oscillation_amplitude <= 0.01
                && axis_deviation_deg <= 2.0
                && phase_deviation_deg.unwrap_or(180.0) <= 5.0
        }
    };

    Ok(Certification {
        target,
        family,
        oscillation_amplitude,
        axis_deviation_deg,
        phase_deviation_deg,
        estimates,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::HBAR;

    #[test]
    fn trapezoid_waveform_matches_the_node_table() {
        let s = PulseSpec::trapezoid(27.5, -12.0, 500.0, 90.0);
        s.validate().unwrap();
        assert_eq!(s.duration_ps(), 680.0);
        assert_eq!(s.ramp_time_ps(), 180.0);
        let w = |t| s.waveform_uev(t).unwrap();
        assert!((w(0.0) - 27.5).abs() < 1e-12);
        assert!((w(45.0) - 21.5).abs() < 1e-12, "mid-ramp is the average");
        assert!((w(90.0) - 15.5).abs() < 1e-12);
        assert!((w(300.0) - 15.5).abs() < 1e-12, "plateau holds baseline + A");
        assert!((w(590.0) - 15.5).abs() < 1e-12);
        assert!((w(635.0) - 21.5).abs() < 1e-12);
        assert!((w(680.0) - 27.5).abs() < 1e-12);
        assert!((w(1e4) - 27.5).abs() < 1e-12, "clamps to baseline after the pulse");
    }

    #[test]
    fn spin_echo_waveform_and_hold_edge() {
        let s = PulseSpec::spin_echo(27.5, -167.4, 16.5, 520.0, 90.0);
        s.validate().unwrap();
        assert_eq!(s.duration_ps(), 520.0);
        let w = |t| s.waveform_uev(t).unwrap();
        assert!((w(90.0) + 167.4).abs() < 1e-12);
        assert!((w(180.0) - 16.5).abs() < 1e-12);
        assert!((w(340.0) - 16.5).abs() < 1e-12, "hold lasts t_p − 4τ = 160 ps");
        assert!((w(430.0) + 167.4).abs() < 1e-12);
        assert!((w(520.0) - 27.5).abs() < 1e-12);
        // t_p = 4τ: zero hold collapses two nodes, still a valid waveform
        let tight = PulseSpec::spin_echo(27.5, -167.4, 16.5, 360.0, 90.0);
        assert_eq!(tight.nodes_uev().unwrap().len(), 5);
        // t_p < 4τ is unbuildable
        assert!(matches!(
            PulseSpec::spin_echo(27.5, -167.4, 16.5, 300.0, 90.0).validate(),
            Err(DqdError::PulseSpec(_))
        ));
    }

    #[test]
    fn zero_rise_time_rules() {
        // a genuine step is rejected…
        assert!(matches!(
            PulseSpec::trapezoid(0.0, 10.0, 50.0, 0.0).validate(),
            Err(DqdError::PulseSpec(_))
        ));
        // …the degenerate all-flat pulse is fine and lasts zero ps
        let null = PulseSpec::trapezoid(27.5, 0.0, 0.0, 0.0);
        null.validate().unwrap();
        assert_eq!(null.duration_ps(), 0.0);
        let sched = null.to_schedule(0.42).unwrap();
        assert!((sched.value(3.0) - uev_to_slope(27.5, 0.42)).abs() < 1e-15);
        // NaN anywhere is refused
        assert!(PulseSpec::trapezoid(f64::NAN, 0.0, 1.0, 1.0).validate().is_err());
    }

    #[test]
    fn schedule_is_the_waveform_in_slope_units() {
        let s = PulseSpec::spin_echo(27.5, -181.2, 177.0, 444.0, 90.0);
        let lambda = 0.4225;
        let sched = s.to_schedule(lambda).unwrap();
        for t in [0.0, 13.7, 90.0, 200.0, 443.9, 600.0] {
            let want = s.waveform_uev(t).unwrap() / UEV_PER_MEV / lambda;
            assert!((sched.value(t) - want).abs() < 1e-15, "mismatch at t = {t}");
        }
    }

    #[test]
    fn step_counting_lands_at_or_past_the_target() {
        assert_eq!(steps_to_reach(10.0, 0.1), 100);
        assert_eq!(steps_to_reach(10.04, 0.1), 101);
        assert_eq!(steps_to_reach(0.0, 0.1), 0);
        // the epsilon guard forgives float noise just below a whole count:
        // 0.3/0.1 is 2.9999…96 in binary, yet 3 steps is the right answer
        assert_eq!(steps_to_reach(0.3, 0.1), 3);
    }

    #[test]
    fn lsm_tomography_reproduces_the_bare_rabi_rotation() {
        // constant ε = 0 for a quarter Rabi period → R_x(π/2)
        let delta = 11.99; // μeV
        let schedule = DetuningSchedule::constant(0.0);
        let t = 0.25 * crate::units::PLANCK_H * UEV_PER_MEV / delta; // quarter Rabi period
        let est = lsm_tomography(&schedule, 0.42, delta, 0.0, t).unwrap();
        let expected = rodrigues(&Vector3::x(), delta / UEV_PER_MEV * t / HBAR);
        assert!((est.rotation - expected).norm() < 1e-9);
        assert!(est.residual < 1e-9);
        assert!((est.angle - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
        // zero evolution time → exact identity
        let id = lsm_tomography(&schedule, 0.42, delta, 0.0, 0.0).unwrap();
        assert!((id.rotation - Matrix3::identity()).norm() < 1e-12);
    }

    #[test]
    fn decompose_recovers_a_synthetic_family() {
        let axis = Vector3::new(1.0, 0.03, -0.02).normalize();
        let (kappa, theta0, c_tau) = (0.031, 2.66, 360.0);
        let p = rodrigues(&Vector3::z(), std::f64::consts::PI);
        let samples: Vec<(f64, RotationEstimate)> = (0..7)
            .map(|k| {
                let tp = 380.0 + 20.0 * k as f64;
                let r = rodrigues(&axis, kappa * (tp - c_tau) + theta0) * p;
                let (ax, an) = axis_angle(&r);
                (tp, RotationEstimate { rotation: r, axis: ax, angle: an, leakage: 0.0, residual: 0.0 })
            })
            .collect();
        let fam = decompose_rotation(&samples, c_tau, &p).unwrap();
        assert!((fam.rate_rad_per_ps - kappa).abs() < 1e-12);
        assert!((fam.axis - axis).norm() < 1e-10);
        // ϑ₀ is reported modulo 2π
        let dphi = (fam.phase_rad - theta0).rem_euclid(std::f64::consts::TAU);
        assert!(dphi.min(std::f64::consts::TAU - dphi) < 1e-10, "ϑ₀ off by {dphi}");
        assert!(fam.residual_rad < 1e-12);
    }

    #[test]
    fn decompose_recovers_a_z_family_and_flips_negative_rates() {
        let (kappa, theta0, c_tau) = (-0.27, 0.4, 360.0);
        let samples: Vec<(f64, RotationEstimate)> = (0..6)
            .map(|k| {
                let tp = 370.0 + 8.0 * k as f64;
                let r = rodrigues(&Vector3::z(), kappa * (tp - c_tau) + theta0);
                let (ax, an) = axis_angle(&r);
                (tp, RotationEstimate { rotation: r, axis: ax, angle: an, leakage: 0.0, residual: 0.0 })
            })
            .collect();
        let fam = decompose_rotation(&samples, c_tau, &Matrix3::identity()).unwrap();
        assert!(fam.rate_rad_per_ps > 0.0, "rate is canonicalized to ≥ 0");
        assert!((fam.rate_rad_per_ps - kappa.abs()).abs() < 1e-12);
        assert!((fam.axis + Vector3::z()).norm() < 1e-12, "axis carries the sense");
        // reconstruction from the fitted constants, target factor = I:
        // R(t_p) = R_n̂(ϑ₀ + κ·(t_p − c·τ))
        let back = rodrigues(&fam.axis, fam.phase_rad + fam.rate_rad_per_ps * (370.0 - c_tau));
        assert!((back - samples[0].1.rotation).norm() < 1e-10);
    }

    #[test]
    fn decompose_rejects_nonlinear_growth_and_short_scans() {
        let p = Matrix3::identity();
        let quad: Vec<(f64, RotationEstimate)> = (0..6)
            .map(|k| {
                let tp = 10.0 * k as f64;
                let r = rodrigues(&Vector3::x(), 3e-3 * tp * tp);
                let (ax, an) = axis_angle(&r);
                (tp, RotationEstimate { rotation: r, axis: ax, angle: an, leakage: 0.0, residual: 0.0 })
            })
            .collect();
        assert!(matches!(
            decompose_rotation(&quad, 0.0, &p),
            Err(DqdError::Decomposition(_))
        ));
        assert!(matches!(
            decompose_rotation(&quad[..4], 0.0, &p),
            Err(DqdError::Decomposition(_))
        ));
    }
}
