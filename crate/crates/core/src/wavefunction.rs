//! Complex wavefunction stored as split real/imaginary arrays.

use crate::error::{DqdError, Result};
use crate::grid::Grid;
use num_complex::Complex64;

/// A complex wavefunction sampled on the grid nodes.
///
/// `re` and `im` are the split real and imaginary parts (the integrator
/// advances them as separate arrays). `staggered` records whether `im` is
/// sampled half a time step after `re`; the leapfrog used here keeps both
/// parts on a common time level, so it stays `false` for states produced
/// by this crate, and observables require it to be `false`.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub staggered: bool,
}

/// Which half-axis a probability refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Wavefunction {
    pub fn zeros(n_points: usize) -> Self {
        Wavefunction { re: vec![0.0; n_points], im: vec![0.0; n_points], staggered: false }
    }

    /// Build from split parts. The boundary nodes are forced to zero
    /// (Dirichlet walls); everything downstream relies on that.
    pub fn from_parts(re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != im.len() {
            return Err(DqdError::GridMismatch(format!(
                "re has {} samples, im has {}",
                re.len(),
                im.len()
            )));
        }
        if re.len() < 3 {
            return Err(DqdError::GridMismatch("need at least 3 samples".into()));
        }
        let mut w = Wavefunction { re, im, staggered: false };
        w.clamp_walls();
        Ok(w)
    }

    /// Real-valued state (eigenstates of the real Hamiltonian).
    pub fn from_real(re: Vec<f64>) -> Result<Self> {
        let n = re.len();
        Wavefunction::from_parts(re, vec![0.0; n])
    }

    pub fn n_points(&self) -> usize {
        self.re.len()
    }

    pub fn clamp_walls(&mut self) {
        let n = self.re.len();
        self.re[0] = 0.0;
        self.im[0] = 0.0;
        self.re[n - 1] = 0.0;
        self.im[n - 1] = 0.0;
    }

    /// ∑ |ψ_m|² dx
    pub fn norm_sq(&self, grid: &Grid) -> f64 {
        let mut s = 0.0;
        for m in 0..self.re.len() {
            s += self.re[m] * self.re[m] + self.im[m] * self.im[m];
        }
        s * grid.dx
    }

    pub fn normalize(&mut self, grid: &Grid) {
        let n = self.norm_sq(grid).sqrt();
        assert!(n > 0.0, "cannot normalize the zero state");
        let inv = 1.0 / n;
        for m in 0..self.re.len() {
            self.re[m] *= inv;
            self.im[m] *= inv;
        }
    }

    pub fn value(&self, m: usize) -> Complex64 {
        Complex64::new(self.re[m], self.im[m])
    }

    /// ψ ← ψ·c (global complex scale).
    pub fn scale(&mut self, c: Complex64) {
        for m in 0..self.re.len() {
            let z = Complex64::new(self.re[m], self.im[m]) * c;
            self.re[m] = z.re;
            self.im[m] = z.im;
        }
    }

    /// a·ψ + b·φ as a new state.
    pub fn superpose(a: Complex64, psi: &Wavefunction, b: Complex64, phi: &Wavefunction) -> Result<Wavefunction> {
        if psi.n_points() != phi.n_points() {
            return Err(DqdError::GridMismatch("superposition of different grids".into()));
        }
        let n = psi.n_points();
        let mut re = vec![0.0; n];
        let mut im = vec![0.0; n];
        for m in 0..n {
            let z = a * psi.value(m) + b * phi.value(m);
            re[m] = z.re;
            im[m] = z.im;
        }
        Wavefunction::from_parts(re, im)
    }
}

/// ⟨a, b⟩ = ∑ conj(a_m)·b_m·dx
pub fn inner_product(a: &Wavefunction, b: &Wavefunction, grid: &Grid) -> Result<Complex64> {
    if a.n_points() != b.n_points() || a.n_points() != grid.n_points {
        return Err(DqdError::GridMismatch(format!(
            "inner product over {} / {} samples on a {}-point grid",
            a.n_points(),
            b.n_points(),
            grid.n_points
        )));
    }
    debug_assert!(!a.staggered && !b.staggered, "observables need time-aligned re/im parts");
    let mut s_re = 0.0;
    let mut s_im = 0.0;
    for m in 0..a.n_points() {
        // conj(a)*b = (ar - i ai)(br + i bi)
        s_re += a.re[m] * b.re[m] + a.im[m] * b.im[m];
        s_im += a.re[m] * b.im[m] - a.im[m] * b.re[m];
    }
    Ok(Complex64::new(s_re * grid.dx, s_im * grid.dx))
}

/// Probability mass on one half-axis: ∑_{x_m > 0} |ψ_m|² dx, with a node
/// lying exactly at x = 0 contributing half its weight to each side. On an
/// even-count symmetric grid no node sits at x = 0 and the split is exact;
/// either way left + right equals the total norm by construction.
pub fn half_line_probability(psi: &Wavefunction, grid: &Grid, side: Side) -> f64 {
    debug_assert!(grid.x_min < 0.0 && grid.x_max > 0.0, "grid must straddle x = 0");
    let zero_tol = grid.dx * 1e-9;
    let mut s = 0.0;
    for m in 0..psi.n_points() {
        let x = grid.x(m);
        let w = if x > zero_tol {
            match side {
                Side::Right => 1.0,
                Side::Left => 0.0,
            }
        } else if x < -zero_tol {
            match side {
                Side::Right => 0.0,
                Side::Left => 1.0,
            }
        } else {
            0.5
        };
        if w != 0.0 {
            s += w * (psi.re[m] * psi.re[m] + psi.im[m] * psi.im[m]);
        }
    }
    s * grid.dx
}

/// Overlap restricted to one half-axis: ∑_side conj(a_m)·b_m·dx, with the
/// same half-weight rule at x = 0 as [`half_line_probability`]. This is the
/// cross-term ∫ a*b over one dot, used by the localisation matrix and by
/// the readout cross-orthogonality checks.
pub fn half_line_overlap(
    a: &Wavefunction,
    b: &Wavefunction,
    grid: &Grid,
    side: Side,
) -> Result<Complex64> {
    if a.n_points() != b.n_points() || a.n_points() != grid.n_points {
        return Err(DqdError::GridMismatch(format!(
            "half-line overlap over {} / {} samples on a {}-point grid",
            a.n_points(),
            b.n_points(),
            grid.n_points
        )));
    }
    let zero_tol = grid.dx * 1e-9;
    let mut s_re = 0.0;
    let mut s_im = 0.0;
    for m in 0..a.n_points() {
        let x = grid.x(m);
        let w = if x > zero_tol {
            match side {
                Side::Right => 1.0,
                Side::Left => 0.0,
            }
        } else if x < -zero_tol {
            match side {
                Side::Right => 0.0,
                Side::Left => 1.0,
            }
        } else {
            0.5
        };
        if w != 0.0 {
            s_re += w * (a.re[m] * b.re[m] + a.im[m] * b.im[m]);
            s_im += w * (a.re[m] * b.im[m] - a.im[m] * b.re[m]);
        }
    }
    Ok(Complex64::new(s_re * grid.dx, s_im * grid.dx))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(grid: &Grid, x0: f64, sigma: f64) -> Wavefunction {
        let re: Vec<f64> =
            (0..grid.n_points).map(|m| (-((grid.x(m) - x0) / sigma).powi(2) / 2.0).exp()).collect();
        let mut w = Wavefunction::from_real(re).unwrap();
        w.normalize(grid);
        w
    }

    #[test]
    fn norm_and_inner_product_agree() {
        let grid = Grid::symmetric(50.0, 257, 1e-3).unwrap();
        let g = gaussian(&grid, 3.0, 5.0);
        let ip = inner_product(&g, &g, &grid).unwrap();
        assert!((ip.re - 1.0).abs() < 1e-12);
        assert!(ip.im.abs() < 1e-15);
        assert!((g.norm_sq(&grid) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inner_product_with_i_times_state() {
        let grid = Grid::symmetric(50.0, 257, 1e-3).unwrap();
        let g = gaussian(&grid, 0.0, 5.0);
        let mut ig = g.clone();
        ig.scale(Complex64::new(0.0, 1.0));
        let ip = inner_product(&g, &ig, &grid).unwrap();
        assert!(ip.re.abs() < 1e-14);
        assert!((ip.im - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_line_splits_symmetric_state() {
        // even and odd point counts exercise both x=0 treatments
        for n in [256, 257] {
            let grid = Grid::symmetric(50.0, n, 1e-3).unwrap();
            let g = gaussian(&grid, 0.0, 7.0);
            let r = half_line_probability(&g, &grid, Side::Right);
            let l = half_line_probability(&g, &grid, Side::Left);
            assert!((r - 0.5).abs() < 1e-9, "n={n}: right = {r}");
            assert!((l + r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn half_line_complement_is_exact() {
        let grid = Grid::symmetric(50.0, 300, 1e-3).unwrap();
        let g = gaussian(&grid, 11.0, 4.0);
        let r = half_line_probability(&g, &grid, Side::Right);
        let l = half_line_probability(&g, &grid, Side::Left);
        assert!((l + r - g.norm_sq(&grid)).abs() < 1e-12);
        assert!(r > 0.95); // strongly right-localised packet
    }

    #[test]
    fn rejects_mismatched_grids() {
        let grid = Grid::symmetric(50.0, 257, 1e-3).unwrap();
        let a = gaussian(&grid, 0.0, 5.0);
        let small = Grid::symmetric(50.0, 129, 1e-3).unwrap();
        let b = gaussian(&small, 0.0, 5.0);
        assert!(inner_product(&a, &b, &grid).is_err());
    }

    #[test]
    fn walls_are_clamped() {
        let w = Wavefunction::from_parts(vec![1.0; 8], vec![1.0; 8]).unwrap();
        assert_eq!(w.re[0], 0.0);
        assert_eq!(w.im[7], 0.0);
        assert_eq!(w.re[3], 1.0);
    }
}
