//! Leapfrog step kernels.
//!
//! One leapfrog half-update is a three-point stencil applied independently
//! at every interior grid node:
//!
//!   out_m ← out_m ± [ c_m·mid_m − a_x·(mid_{m−1} + mid_{m+1}) ]
//!
//! with `out` holding the array from two steps back and `mid` the array
//! from one step back. Every backend must produce bit-identical results:
//! each element is computed by the same inlined expression in the same
//! order of floating-point operations, so chunking and thread count cannot
//! change a single ULP.

use rayon::prelude::*;

use crate::grid::Grid;
use crate::units::UnitSystem;

/// Coefficients of one leapfrog step at a fixed potential sample.
///
/// a_x = 2·K·dt/(ħ·dx²), b = 2·dt/ħ, c_m = 2·a_x + b·V_m (meV⁻¹·meV = 1);
/// all three are dimensionless.
#[derive(Debug, Clone)]
pub struct StepCoeffs {
    pub a_x: f64,
    pub b: f64,
    /// c_m over the full grid (wall entries present but never read).
    pub c: Vec<f64>,
}

impl StepCoeffs {
    pub fn new(v: &[f64], grid: &Grid, units: &UnitSystem, dt: f64) -> StepCoeffs {
        assert_eq!(v.len(), grid.n_points);
        let a_x = 2.0 * units.kinetic_prefactor * dt / (units.hbar * grid.dx * grid.dx);
        let b = 2.0 * dt / units.hbar;
        let c = v.iter().map(|&vm| 2.0 * a_x + b * vm).collect();
        StepCoeffs { a_x, b, c }
    }

    /// Refill c for a new potential without touching a_x, b.
    pub fn refill(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.c.len());
        for (cm, &vm) in self.c.iter_mut().zip(v) {
            *cm = 2.0 * self.a_x + self.b * vm;
        }
    }
}

/// The one place the stencil arithmetic is written down. Both backends call
/// this exact function per element — that, plus IEEE determinism, is what
/// makes the bit-identity contract hold by construction.
#[inline(always)]
fn stencil(prev: f64, left: f64, center: f64, right: f64, a_x: f64, c: f64, sign: f64) -> f64 {
    prev + sign * (c * center - a_x * (left + right))
}

pub trait KernelBackend: Send + Sync {
    fn name(&self) -> &'static str;

    /// Apply one half-update in place: `out` enters as the array from two
    /// steps back and leaves as the freshly updated array; `mid` is the
    /// array from one step back (read-only). Walls are held at zero.
    fn apply(&self, out: &mut [f64], mid: &[f64], coeffs: &StepCoeffs, sign: f64);
}

/// Straight loop over the interior nodes.
pub struct SerialKernel;

impl KernelBackend for SerialKernel {
    fn name(&self) -> &'static str {
        "serial"
    }

    fn apply(&self, out: &mut [f64], mid: &[f64], coeffs: &StepCoeffs, sign: f64) {
        let n = out.len();
        debug_assert_eq!(mid.len(), n);
        debug_assert_eq!(coeffs.c.len(), n);
        let a_x = coeffs.a_x;
        out[0] = 0.0;
        out[n - 1] = 0.0;
        for m in 1..n - 1 {
            out[m] = stencil(out[m], mid[m - 1], mid[m], mid[m + 1], a_x, coeffs.c[m], sign);
        }
    }
}

/// Work-stealing threads over fixed-size interior chunks. Chunks only
/// partition the output; every element still reads its two neighbours from
/// the shared `mid` array, so no halo exchange is needed.
pub struct ThreadedKernel {
    pub chunk: usize,
}

impl ThreadedKernel {
    pub fn new() -> Self {
        ThreadedKernel { chunk: 2048 }
    }
}

impl Default for ThreadedKernel {
    fn default() -> Self {
        Self::new()
    }
}

impl KernelBackend for ThreadedKernel {
    fn name(&self) -> &'static str {
        "threaded"
    }

    fn apply(&self, out: &mut [f64], mid: &[f64], coeffs: &StepCoeffs, sign: f64) {
        let n = out.len();
        debug_assert_eq!(mid.len(), n);
        debug_assert_eq!(coeffs.c.len(), n);
        let a_x = coeffs.a_x;
        let c = &coeffs.c;
        out[0] = 0.0;
        out[n - 1] = 0.0;
        let interior = &mut out[1..n - 1];
        let chunk = self.chunk.max(1);
        interior.par_chunks_mut(chunk).enumerate().for_each(|(ci, slab)| {
            let base = 1 + ci * chunk;
            for (j, o) in slab.iter_mut().enumerate() {
                let m = base + j;
                *o = stencil(*o, mid[m - 1], mid[m], mid[m + 1], a_x, c[m], sign);
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_arrays(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gen = |_| rng.gen_range(-1.0..1.0);
        let out: Vec<f64> = (0..n).map(&mut gen).collect();
        let mid: Vec<f64> = (0..n).map(&mut gen).collect();
        let v: Vec<f64> = (0..n).map(&mut gen).collect();
        (out, mid, v)
    }

    #[test]
    fn stencil_matches_hand_computation() {
        let grid = Grid::new(0.0, 4.0, 5, 0.01).unwrap();
        let units = UnitSystem::gaas();
        let v = vec![0.0, 1.0, 2.0, 3.0, 0.0];
        let coeffs = StepCoeffs::new(&v, &grid, &units, 0.01);
        let mut out = vec![0.5; 5];
        let mid = vec![0.1, 0.2, 0.3, 0.4, 0.5];
        SerialKernel.apply(&mut out, &mid, &coeffs, 1.0);
        let expect = 0.5 + coeffs.c[2] * 0.3 - coeffs.a_x * (0.2 + 0.4);
        assert_eq!(out[2], expect);
        assert_eq!(out[0], 0.0);
        assert_eq!(out[4], 0.0);
    }

    #[test]
    fn backends_are_bit_identical() {
        let units = UnitSystem::gaas();
        // odd count exercises a ragged final chunk
        for &n in &[37usize, 1023, 5000] {
            let grid = Grid::new(-100.0, 100.0, n, 1e-3).unwrap();
            let (out0, mid, v) = random_arrays(n, 7 + n as u64);
            let coeffs = StepCoeffs::new(&v, &grid, &units, 1e-3);
            for sign in [1.0, -1.0] {
                let mut a = out0.clone();
                let mut b = out0.clone();
                SerialKernel.apply(&mut a, &mid, &coeffs, sign);
                ThreadedKernel { chunk: 64 }.apply(&mut b, &mid, &coeffs, sign);
                assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
        }
    }

    #[test]
    fn repeated_application_is_deterministic() {
        let units = UnitSystem::gaas();
        let grid = Grid::new(-50.0, 50.0, 2048, 1e-3).unwrap();
        let (out0, mid, v) = random_arrays(2048, 99);
        let coeffs = StepCoeffs::new(&v, &grid, &units, 1e-3);
        let kernel = ThreadedKernel::new();
        let mut a = out0.clone();
        let mut b = out0.clone();
        for _ in 0..10 {
            kernel.apply(&mut a, &mid, &coeffs, -1.0);
            kernel.apply(&mut b, &mid, &coeffs, -1.0);
        }
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn refill_matches_fresh_construction() {
        let units = UnitSystem::gaas();
        let grid = Grid::new(0.0, 10.0, 101, 1e-3).unwrap();
        let (_, _, v1) = random_arrays(101, 1);
        let (_, _, v2) = random_arrays(101, 2);
        let mut coeffs = StepCoeffs::new(&v1, &grid, &units, 1e-3);
        coeffs.refill(&v2);
        let fresh = StepCoeffs::new(&v2, &grid, &units, 1e-3);
        assert!(coeffs.c.iter().zip(&fresh.c).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
