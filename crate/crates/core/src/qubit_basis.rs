//! Construction of the localized qubit basis and charge readout algebra.
//!
//! At each detuning the two lowest eigenstates (bonding ψ_B, antibonding
//! ψ_AB) are rotated into the pair (R, L) that extremises the right-dot
//! probability: the 2×2 half-line weight matrix M_ij = ⟨ψ_i|P_R|ψ_j⟩ is
//! diagonalised and its principal eigenvector gives the coefficients
//! (α, β) of the right-localized state R = α·ψ_B + β·ψ_AB, with
//! L = β·ψ_B − α·ψ_AB the orthogonal partner. The qubit basis is the
//! ε = 0 pair, where symmetry forces α = β = 1/√2.
//!
//! Because (R, L) diagonalise M, the right-dot projector has no cross
//! term in this basis: P_R(a·ψ0 + b·ψ1) = |a|²·P0 + |b|²·P1 exactly, which
//! is what makes single-shot charge readout linear in the qubit
//! populations.

use rayon::prelude::*;

use crate::error::{DqdError, Result};
use crate::grid::Grid;
use crate::lsm;
use crate::potential::{self, CalibrationReport, DqdParams, DEFAULT_CALIBRATION_SPAN};
use crate::stationary::{self, EigenPair};
use crate::units::{UnitSystem, UEV_PER_MEV};
use crate::wavefunction::{half_line_overlap, inner_product, Side, Wavefunction};

/// A double-dot stack: geometry, discretisation, unit system and the
/// calibrated detuning constant λ (ε = λ·v_slope). Everything downstream
/// of the calibration step works in detuning (μeV) and converts to bias
/// slope only when a Hamiltonian has to be built.
#[derive(Debug, Clone)]
pub struct Device {
    pub params: DqdParams,
    pub grid: Grid,
    pub units: UnitSystem,
    /// detuning per unit bias slope, dimensionless
    pub lambda: f64,
}

impl Device {
    pub fn new(params: DqdParams, grid: Grid, units: UnitSystem, lambda: f64) -> Result<Self> {
        params.validate()?;
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(DqdError::Calibration(format!(
                "detuning constant must be positive and finite, got {lambda}"
            )));
        }
        Ok(Self { params, grid, units, lambda })
    }

    /// Build the device by running the splitting calibration on the spot.
    pub fn calibrated(
        params: DqdParams,
        grid: Grid,
        units: UnitSystem,
    ) -> Result<(Self, CalibrationReport)> {
        let report =
            potential::calibrate_lambda(&params, &units, &grid, DEFAULT_CALIBRATION_SPAN, 9)?;
        let dev = Self::new(params, grid, units, report.lambda)?;
        Ok((dev, report))
    }

    /// Bias slope realising a detuning. // meV from μeV
    pub fn slope_for(&self, eps_uev: f64) -> f64 {
        eps_uev / UEV_PER_MEV / self.lambda
    }

    /// Detuning at a bias slope. // μeV from meV
    pub fn detuning_of(&self, v_slope: f64) -> f64 {
        self.lambda * v_slope * UEV_PER_MEV
    }

    /// The k lowest eigenpairs at a fixed detuning.
    pub fn eigenpairs_at(&self, eps_uev: f64, k: usize) -> Result<Vec<EigenPair>> {
        let h = stationary::build_hamiltonian(
            &self.params,
            self.slope_for(eps_uev),
            &self.grid,
            &self.units,
        );
        stationary::lowest_eigenpairs(&h, k, &self.grid)
    }
}

/// Right/left-localized pair at one detuning.
#[derive(Debug, Clone)]
pub struct LocalizedPair {
    pub detuning_uev: f64,
    /// weight of ψ_B in R; sign convention α > 0
    pub alpha: f64,
    /// weight of ψ_AB in R
    pub beta: f64,
    /// right-localized state α·ψ_B + β·ψ_AB
    pub r: Wavefunction,
    /// left-localized state β·ψ_B − α·ψ_AB
    pub l: Wavefunction,
    /// right-dot probability of R (the principal eigenvalue of M)
    pub p_right: f64,
}

/// The computational basis: the localized pair at ε = 0 plus the numbers
/// readout and two-level modelling need.
#[derive(Debug, Clone)]
pub struct QubitBasis {
    /// ψ0, right-localized at zero detuning
    pub psi0: Wavefunction,
    /// ψ1, left-localized at zero detuning
    pub psi1: Wavefunction,
    /// tunnel splitting E_AB − E_B at ε = 0 // μeV
    pub delta_uev: f64,
    /// right-dot probability of ψ0
    pub p0: f64,
    /// right-dot probability of ψ1
    pub p1: f64,
    /// bonding coefficient α at ε = 0 (1/√2 up to grid parity error)
    pub alpha0: f64,
    /// symmetric detuning window (−w, w) on which the two-level
    /// composition stays faithful; filled in by [`operating_range`]
    pub operating_range_uev: Option<(f64, f64)>,
}

/// Principal eigenpair of a symmetric 2×2 [[p, q], [q, r]]: returns the
/// unit eigenvector of the larger eigenvalue (first component ≥ 0), that
/// eigenvalue, and the eigenvalue gap.
fn principal_pair(p: f64, q: f64, r: f64) -> (f64, f64, f64, f64) {
    let mean = 0.5 * (p + r);
    let d = 0.5 * (p - r);
    let s = d.hypot(q);
    let lam_max = mean + s;
    // (q, λ−p) and (λ−r, q) are both eigenvectors; pick the one whose
    // nonzero component is guaranteed: λ−r = d+s ≥ 0 degenerates only for
    // q = 0, d < 0 and λ−p = s−d only for q = 0, d > 0
    let (mut a, mut b) = if d >= 0.0 { (d + s, q) } else { (q, s - d) };
    let n = a.hypot(b);
    a /= n;
    b /= n;
    if a < 0.0 || (a == 0.0 && b < 0.0) {
        a = -a;
        b = -b;
    }
    (a, b, lam_max, 2.0 * s)
}

/// The localized pair at one detuning, from the two lowest eigenstates.
pub fn localized_pair(dev: &Device, eps_uev: f64) -> Result<LocalizedPair> {
    let pair = dev.eigenpairs_at(eps_uev, 2)?;
    localized_pair_from_eigenpairs(dev, eps_uev, &pair)
}

/// Same, reusing eigenpairs the caller already has.
pub fn localized_pair_from_eigenpairs(
    dev: &Device,
    eps_uev: f64,
    pair: &[EigenPair],
) -> Result<LocalizedPair> {
    let (b, ab) = (&pair[0].state, &pair[1].state);
    let grid = &dev.grid;
    let m_pp = half_line_overlap(b, b, grid, Side::Right)?.re;
    let m_pq = half_line_overlap(b, ab, grid, Side::Right)?.re;
    let m_qq = half_line_overlap(ab, ab, grid, Side::Right)?.re;
    let (alpha, beta, p_right, gap) = principal_pair(m_pp, m_pq, m_qq);
    if gap < 1e-12 {
        return Err(DqdError::LocalisationAmbiguous { gap });
    }
    let one = num_complex::Complex64::new(1.0, 0.0);
    let mut r = Wavefunction::superpose(alpha * one, b, beta * one, ab)?;
    let mut l = Wavefunction::superpose(beta * one, b, -alpha * one, ab)?;
    r.normalize(grid);
    l.normalize(grid);
    Ok(LocalizedPair { detuning_uev: eps_uev, alpha, beta, r, l, p_right })
}

/// Build the computational basis at ε = 0.
pub fn qubit_basis(dev: &Device) -> Result<QubitBasis> {
    let pair = dev.eigenpairs_at(0.0, 2)?;
    let delta_uev = (pair[1].energy - pair[0].energy) * UEV_PER_MEV;
    let loc = localized_pair_from_eigenpairs(dev, 0.0, &pair)?;
    let p0 = loc.p_right;
    let p1 = crate::wavefunction::half_line_probability(&loc.l, &dev.grid, Side::Right);
    if !(p0 > 0.5 && p1 < 0.5) {
        return Err(DqdError::Calibration(format!(
            "basis states are not localized: P0 = {p0:.6}, P1 = {p1:.6}"
        )));
    }
    Ok(QubitBasis {
        psi0: loc.r,
        psi1: loc.l,
        delta_uev,
        p0,
        p1,
        alpha0: loc.alpha,
        operating_range_uev: None,
    })
}

/// Charge-distinguishability distance between the localized pairs at two
/// detunings: D = 1 − (|⟨L,L′⟩|² + |⟨R,R′⟩|²)/2, zero iff both dots keep
/// their states identical up to phase.
pub fn correlation_d(a: &LocalizedPair, b: &LocalizedPair, grid: &Grid) -> Result<f64> {
    let ll = inner_product(&a.l, &b.l, grid)?.norm_sqr();
    let rr = inner_product(&a.r, &b.r, grid)?.norm_sqr();
    Ok((1.0 - 0.5 * (ll + rr)).clamp(0.0, 1.0))
}

/// The literal density-product reading of the same quantity,
/// 1 − ½∫(|L·L′|² + |R·R′|²) dx. Note the integrand carries units of
/// 1/length, so this variant is *not* dimensionless and is kept only for
/// comparison against the overlap-squared form above.
pub fn correlation_d_density(a: &LocalizedPair, b: &LocalizedPair, grid: &Grid) -> f64 {
    let mut s = 0.0;
    for m in 0..a.l.n_points() {
        let ll = a.l.value(m).norm_sqr() * b.l.value(m).norm_sqr();
        let rr = a.r.value(m).norm_sqr() * b.r.value(m).norm_sqr();
        s += 0.5 * (ll + rr);
    }
    1.0 - s * grid.dx
}

/// D(εᵢ, εⱼ) over a detuning list; eigensolves run in parallel.
pub fn d_map(dev: &Device, eps_uev: &[f64]) -> Result<Vec<Vec<f64>>> {
    let pairs: Vec<LocalizedPair> = eps_uev
        .par_iter()
        .map(|&e| localized_pair(dev, e))
        .collect::<Result<_>>()?;
    let n = pairs.len();
    let mut map = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = correlation_d(&pairs[i], &pairs[j], &dev.grid)?;
            map[i][j] = d;
            map[j][i] = d;
        }
    }
    Ok(map)
}

/// Column of the D-map with the smallest average distance to the rest of
/// the sweep; ties go to the smallest |ε|. This is the natural pick for
/// the basis-defining detuning.
pub fn d_map_optimal_column(eps_uev: &[f64], map: &[Vec<f64>]) -> usize {
    let n = eps_uev.len();
    let mean = |j: usize| map.iter().map(|row| row[j]).sum::<f64>() / n as f64;
    let best = (0..n).map(mean).fold(f64::INFINITY, f64::min);
    (0..n)
        .filter(|&j| mean(j) <= best + 1e-15)
        .min_by(|&a, &b| eps_uev[a].abs().total_cmp(&eps_uev[b].abs()))
        .expect("at least one column")
}

/// Largest symmetric window (−w, w) over which the two-level composition
/// a_ε·ψ0 + b_ε·ψ1 (coefficients from the two-level model, states frozen
/// at ε = 0) reproduces the full solver's bonding *and* antibonding
/// states with fidelity ≥ `threshold`. Sampled at `n_samples` detunings
/// across ±`eps_max_uev`; fails if even ε = 0 falls short.
pub fn operating_range(
    dev: &Device,
    basis: &QubitBasis,
    threshold: f64,
    eps_max_uev: f64,
    n_samples: usize,
) -> Result<(f64, f64)> {
    assert!(n_samples >= 3 && eps_max_uev > 0.0);
    let n = n_samples | 1; // force a sample at ε = 0
    let one = num_complex::Complex64::new(1.0, 0.0);
    let fidelities: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let eps = -eps_max_uev + 2.0 * eps_max_uev * i as f64 / (n - 1) as f64;
            let pair = dev.eigenpairs_at(eps, 2)?;
            let ((ba, bb), (aa, ab)) = lsm::lsm_eigenvectors(eps, basis.delta_uev);
            let bonding = Wavefunction::superpose(ba * one, &basis.psi0, bb * one, &basis.psi1)?;
            let anti = Wavefunction::superpose(aa * one, &basis.psi0, ab * one, &basis.psi1)?;
            let f_b = inner_product(&bonding, &pair[0].state, &dev.grid)?.norm_sqr();
            let f_ab = inner_product(&anti, &pair[1].state, &dev.grid)?.norm_sqr();
            Ok((eps, f_b.min(f_ab)))
        })
        .collect::<Result<_>>()?;

    let center = fidelities
        .iter()
        .min_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
        .expect("nonempty sample list");
    if center.1 < threshold {
        return Err(DqdError::OperatingRange(format!(
            "two-level composition already fails at ε = 0: fidelity {:.6} < {threshold}",
            center.1
        )));
    }
    // walk outward in |ε|; the window ends at the first failure
    let mut by_abs: Vec<&(f64, f64)> = fidelities.iter().collect();
    by_abs.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
    let mut w = 0.0;
    for &&(eps, f) in &by_abs {
        if f < threshold {
            break;
        }
        w = eps.abs().max(w);
    }
    Ok((-w, w))
}

/// Invert a measured right-dot probability into qubit populations:
/// |β|² = (P_R − P0)/(P1 − P0). Values outside [min(P0,P1), max(P0,P1)]
/// by more than 1e-6 cannot come from a state inside the qubit subspace.
pub fn readout_coefficients(p_r: f64, basis: &QubitBasis) -> Result<(f64, f64)> {
    let lo = basis.p0.min(basis.p1);
    let hi = basis.p0.max(basis.p1);
    if p_r < lo - 1e-6 || p_r > hi + 1e-6 {
        return Err(DqdError::ReadoutLeakage { p_r, lo, hi });
    }
    let beta_sq = ((p_r - basis.p0) / (basis.p1 - basis.p0)).clamp(0.0, 1.0);
    Ok((1.0 - beta_sq, beta_sq))
}

/// Infidelity 1 − |⟨target|ψ⟩|² of a normalized state against a
/// normalized target.
pub fn distance_s(target: &Wavefunction, psi: &Wavefunction, grid: &Grid) -> Result<f64> {
    Ok((1.0 - inner_product(target, psi, grid)?.norm_sqr()).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::HBAR;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn test_device(n: usize) -> Device {
        let p = DqdParams::default();
        let grid = Grid::symmetric(p.w2 * 1.1, n, 1.0).unwrap();
        // λ from a quick 5-sample calibration; accuracy of λ itself is
        // covered in potential.rs, here it only sets the ε ↔ slope map
        let report =
            potential::calibrate_lambda(&p, &UnitSystem::gaas(), &grid, 0.08, 5).unwrap();
        Device::new(p, grid, UnitSystem::gaas(), report.lambda).unwrap()
    }

    #[test]
    fn zero_detuning_basis_is_the_half_superposition() {
        let dev = test_device(512);
        let basis = qubit_basis(&dev).unwrap();
        assert!((basis.alpha0 - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert!((basis.p0 + basis.p1 - 1.0).abs() < 1e-6);
        assert!(basis.p0 > 0.95 && basis.p1 < 0.05);
        assert!(
            inner_product(&basis.psi0, &basis.psi1, &dev.grid).unwrap().norm() < 1e-9,
            "basis states must be orthogonal"
        );
        // Δ ≈ 12 μeV for the default geometry; the 1/ħ scale sanity-checks
        // that the splitting is a usable Rabi rate (~ hundreds of ps)
        assert!(basis.delta_uev > 5.0 && basis.delta_uev < 25.0);
        assert!(HBAR * UEV_PER_MEV / basis.delta_uev > 10.0);
        // mirror symmetry: ψ1(x) = ψ0(−x) on the symmetric grid
        let n = dev.grid.n_points;
        for m in 0..n {
            let d = (basis.psi0.value(m) - basis.psi1.value(n - 1 - m)).norm();
            assert!(d < 1e-6, "mirror mismatch {d:.2e} at node {m}");
        }
    }

    #[test]
    fn localization_tracks_the_detuning_sign() {
        let dev = test_device(512);
        let mut last_alpha = 1.1;
        for eps in [-200.0, -50.0, 0.0, 50.0, 200.0] {
            let loc = localized_pair(&dev, eps).unwrap();
            assert!(loc.alpha > 0.0 && loc.alpha < 1.0);
            assert!(
                loc.alpha < last_alpha,
                "α must fall as ε grows (ground state drifts left)"
            );
            assert!(loc.p_right > 0.99, "R not right-localized at ε = {eps}");
            assert!(
                crate::wavefunction::half_line_probability(&loc.l, &dev.grid, Side::Left) > 0.99,
                "L not left-localized at ε = {eps}"
            );
            last_alpha = loc.alpha;
        }
    }

    #[test]
    fn brute_force_rotation_scan_agrees_with_the_weight_matrix() {
        let dev = test_device(512);
        for eps in [0.0, 75.0] {
            let pair = dev.eigenpairs_at(eps, 2).unwrap();
            let loc = localized_pair_from_eigenpairs(&dev, eps, &pair).unwrap();
            let (b, ab) = (&pair[0].state, &pair[1].state);
            let p = half_line_overlap(b, b, &dev.grid, Side::Right).unwrap().re;
            let q = half_line_overlap(b, ab, &dev.grid, Side::Right).unwrap().re;
            let r = half_line_overlap(ab, ab, &dev.grid, Side::Right).unwrap().re;
            // scan P_R(θ) for cosθ·ψ_B + sinθ·ψ_AB over 1e5 angles
            let mut best = (f64::MIN, 0.0);
            for k in 0..100_000 {
                let th = std::f64::consts::PI * (k as f64 / 100_000.0 - 0.5);
                let (s, c) = th.sin_cos();
                let pr = c * c * p + 2.0 * s * c * q + s * s * r;
                if pr > best.0 {
                    best = (pr, th);
                }
            }
            assert!((best.1.cos() - loc.alpha).abs() < 1e-4, "α mismatch at ε = {eps}");
            assert!((best.1.sin() - loc.beta).abs() < 1e-4, "β mismatch at ε = {eps}");
            assert!((best.0 - loc.p_right).abs() < 1e-8);
        }
    }

    #[test]
    fn readout_round_trips_superpositions_exactly() {
        let dev = test_device(512);
        let basis = qubit_basis(&dev).unwrap();
        // the cross term ⟨ψ0|P_R|ψ1⟩ vanishes by construction…
        let cross = half_line_overlap(&basis.psi0, &basis.psi1, &dev.grid, Side::Right).unwrap();
        assert!(cross.norm() < 1e-9, "readout cross term {:.2e}", cross.norm());
        // …so P_R is linear in |β|² and inverts exactly
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let a = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let b = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let mut psi = Wavefunction::superpose(a, &basis.psi0, b, &basis.psi1).unwrap();
            psi.normalize(&dev.grid);
            let p_r = crate::wavefunction::half_line_probability(&psi, &dev.grid, Side::Right);
            let (_, beta_sq) = readout_coefficients(p_r, &basis).unwrap();
            let want = b.norm_sqr() / (a.norm_sqr() + b.norm_sqr());
            assert!((beta_sq - want).abs() < 1e-9, "readout error {:.2e}", beta_sq - want);
        }
        // infidelity endpoints
        assert!(distance_s(&basis.psi0, &basis.psi0, &dev.grid).unwrap() < 1e-12);
        assert!(distance_s(&basis.psi0, &basis.psi1, &dev.grid).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn readout_rejects_out_of_subspace_probabilities() {
        let dev = test_device(256);
        let basis = qubit_basis(&dev).unwrap();
        assert!(matches!(
            readout_coefficients(basis.p0 + 0.005, &basis),
            Err(DqdError::ReadoutLeakage { .. })
        ));
        assert!(matches!(
            readout_coefficients(basis.p1 - 0.005, &basis),
            Err(DqdError::ReadoutLeakage { .. })
        ));
        // the ±1e-6 slack admits boundary noise
        assert!(readout_coefficients(basis.p0 + 5e-7, &basis).is_ok());
        // endpoints map to the poles
        assert!(readout_coefficients(basis.p0, &basis).unwrap().1 < 1e-12);
        assert!((readout_coefficients(basis.p1, &basis).unwrap().1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distance_map_grows_with_detuning_separation() {
        let dev = test_device(256);
        let at = |e: f64| localized_pair(&dev, e).unwrap();
        let (p0, p30, p300) = (at(0.0), at(30.0), at(300.0));
        let d_self = correlation_d(&p0, &p0, &dev.grid).unwrap();
        let d_near = correlation_d(&p0, &p30, &dev.grid).unwrap();
        let d_far = correlation_d(&p0, &p300, &dev.grid).unwrap();
        assert!(d_self < 1e-12);
        assert!(d_near > 1e-8 && d_far > d_near, "D not growing: {d_near:.3e} vs {d_far:.3e}");
        let d_sym = correlation_d(&p300, &p0, &dev.grid).unwrap();
        assert!((d_far - d_sym).abs() < 1e-14);
        // the literal density-product reading is not dimensionless and
        // fails the D(ε,ε) = 0 sanity check by a wide margin — the reason
        // the overlap-squared form above is the one used everywhere
        assert!(correlation_d_density(&p0, &p0, &dev.grid) > 0.5);
    }

    #[test]
    fn d_map_prefers_the_symmetry_point() {
        let dev = test_device(256);
        let eps: Vec<f64> = (0..9).map(|i| -200.0 + 50.0 * i as f64).collect();
        let map = d_map(&dev, &eps).unwrap();
        for (i, row) in map.iter().enumerate() {
            assert!(row[i] < 1e-12);
            for (j, &d) in row.iter().enumerate() {
                assert!((0.0..=1.0).contains(&d));
                assert!((d - map[j][i]).abs() < 1e-14);
            }
        }
        let best = d_map_optimal_column(&eps, &map);
        assert_eq!(eps[best], 0.0, "average distance should bottom out at ε = 0");
    }

    #[test]
    fn operating_range_covers_the_pulse_window() {
        let dev = test_device(512);
        let basis = qubit_basis(&dev).unwrap();
        let (lo, hi) = operating_range(&dev, &basis, 0.99, 300.0, 41).unwrap();
        assert!((lo + hi).abs() < 1e-12, "window must be symmetric");
        assert!(hi >= 200.0, "two-level window only reaches ±{hi:.1} μeV");
        // tightening the threshold cannot widen the window
        let (_, hi_tight) = operating_range(&dev, &basis, 0.9999, 300.0, 41).unwrap();
        assert!(hi_tight <= hi + 1e-12);
    }

    #[test]
    fn degenerate_weight_matrix_is_rejected() {
        // p = r, q = 0 has no preferred rotation; the gap gate must fire
        let (_, _, _, gap) = principal_pair(0.5, 0.0, 0.5);
        assert!(gap < 1e-12);
        // …and the well-separated case is solved exactly
        let (a, b, lam, gap) = principal_pair(0.9, 0.05, 0.1);
        assert!(gap > 0.5);
        let r1 = 0.9 * a + 0.05 * b - lam * a;
        let r2 = 0.05 * a + 0.1 * b - lam * b;
        assert!(r1.abs() < 1e-14 && r2.abs() < 1e-14);
    }
}
