//! Uniform 1D spatial grid plus the propagation time step.

use crate::error::{DqdError, Result};

/// Uniform spatial grid on `[x_min, x_max]` with `n_points` nodes
/// (both endpoints included; the endpoints are the Dirichlet walls),
/// together with the leapfrog time step `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub x_min: f64, // nm
    pub x_max: f64, // nm
    pub n_points: usize,
    pub dx: f64, // nm
    pub dt: f64, // ps
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize, dt: f64) -> Result<Self> {
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(DqdError::InvalidGrid(format!(
                "need x_max > x_min, got [{x_min}, {x_max}]"
            )));
        }
        if n_points < 3 {
            return Err(DqdError::InvalidGrid(format!(
                "need at least 3 points, got {n_points}"
            )));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(DqdError::InvalidGrid(format!("need dt > 0, got {dt}")));
        }
        let dx = (x_max - x_min) / (n_points - 1) as f64;
        Ok(Grid { x_min, x_max, n_points, dx, dt })
    }

    /// Symmetric grid on `[-half_width, +half_width]`.
    pub fn symmetric(half_width: f64, n_points: usize, dt: f64) -> Result<Self> {
        Grid::new(-half_width, half_width, n_points, dt)
    }

    /// Position of node `m`. // nm
    #[inline]
    pub fn x(&self, m: usize) -> f64 {
        self.x_min + m as f64 * self.dx
    }

    /// All node positions.
    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points).map(|m| self.x(m)).collect()
    }

    /// Same spatial grid with a different time step.
    pub fn with_dt(&self, dt: f64) -> Grid {
        let mut g = self.clone();
        g.dt = dt;
        g
    }

    /// True if the two grids share the spatial discretisation.
    pub fn same_space(&self, other: &Grid) -> bool {
        self.x_min == other.x_min && self.x_max == other.x_max && self.n_points == other.n_points
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_positions() {
        let g = Grid::new(-2.0, 2.0, 5, 0.1).unwrap();
        assert_eq!(g.dx, 1.0);
        assert_eq!(g.x(0), -2.0);
        assert_eq!(g.x(4), 2.0);
        assert_eq!(g.x(2), 0.0);
    }

    #[test]
    fn rejects_bad_domains() {
        assert!(Grid::new(1.0, 1.0, 10, 0.1).is_err());
        assert!(Grid::new(0.0, 1.0, 2, 0.1).is_err());
        assert!(Grid::new(0.0, 1.0, 10, 0.0).is_err());
    }

    #[test]
    fn symmetric_straddles_zero() {
        let g = Grid::symmetric(264.0, 1024, 1e-3).unwrap();
        assert!(g.x_min < 0.0 && g.x_max > 0.0);
        // even point count: no node sits exactly at x = 0
        let nearest = (0..g.n_points).map(|m| g.x(m).abs()).fold(f64::MAX, f64::min);
        assert!((nearest - g.dx / 2.0).abs() < 1e-12);
    }
}
