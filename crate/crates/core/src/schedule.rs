//! Piecewise-linear time dependence of the bias slope.

use crate::error::{DqdError, Result};

/// V_slope as a piecewise-linear function of time. Breakpoints are
/// (time, v_slope) pairs in ps / meV; evaluation outside the breakpoint
/// range clamps to the end values, so a schedule also describes the static
/// baseline before and after a pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct DetuningSchedule {
    nodes: Vec<(f64, f64)>,
}

impl DetuningSchedule {
    pub fn new(nodes: Vec<(f64, f64)>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(DqdError::Schedule("no breakpoints".into()));
        }
        for (t, v) in &nodes {
            if !t.is_finite() || !v.is_finite() {
                return Err(DqdError::Schedule(format!("non-finite breakpoint ({t}, {v})")));
            }
        }
        for w in nodes.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(DqdError::Schedule(format!(
                    "breakpoint times not strictly increasing: {} then {}",
                    w[0].0, w[1].0
                )));
            }
        }
        Ok(DetuningSchedule { nodes })
    }

    /// Time-independent slope.
    pub fn constant(v_slope: f64) -> Self {
        DetuningSchedule { nodes: vec![(0.0, v_slope)] }
    }

    pub fn nodes(&self) -> &[(f64, f64)] {
        &self.nodes
    }

    pub fn start_time(&self) -> f64 {
        self.nodes[0].0
    }

    pub fn end_time(&self) -> f64 {
        self.nodes[self.nodes.len() - 1].0
    }

    /// v_slope at time t (meV), clamped to the end values outside the range.
    pub fn value(&self, t: f64) -> f64 {
        let nodes = &self.nodes;
        if t <= nodes[0].0 {
            return nodes[0].1;
        }
        let last = nodes.len() - 1;
        if t >= nodes[last].0 {
            return nodes[last].1;
        }
        // schedules have a handful of nodes; linear scan beats bookkeeping
        for w in nodes.windows(2) {
            let (t0, v0) = w[0];
            let (t1, v1) = w[1];
            if t <= t1 {
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
            }
        }
        nodes[last].1
    }

    /// Largest |v_slope| attained anywhere (piecewise-linear ⇒ at a node);
    /// this is what the stability bound must be computed for.
    pub fn max_abs_value(&self) -> f64 {
        self.nodes.iter().map(|&(_, v)| v.abs()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_and_clamps() {
        let s = DetuningSchedule::new(vec![(0.0, 0.1), (10.0, 0.3), (20.0, 0.3), (30.0, 0.1)])
            .unwrap();
        assert_eq!(s.value(-5.0), 0.1);
        assert!((s.value(5.0) - 0.2).abs() < 1e-15);
        assert_eq!(s.value(15.0), 0.3);
        assert_eq!(s.value(99.0), 0.1);
        assert_eq!(s.end_time(), 30.0);
        assert_eq!(s.max_abs_value(), 0.3);
    }

    #[test]
    fn rejects_unordered_times() {
        assert!(DetuningSchedule::new(vec![(0.0, 0.1), (0.0, 0.2)]).is_err());
        assert!(DetuningSchedule::new(vec![(5.0, 0.1), (1.0, 0.2)]).is_err());
        assert!(DetuningSchedule::new(vec![]).is_err());
    }

    #[test]
    fn constant_schedule_is_flat() {
        let s = DetuningSchedule::constant(-0.05);
        assert_eq!(s.value(0.0), -0.05);
        assert_eq!(s.value(1e6), -0.05);
        assert_eq!(s.max_abs_value(), 0.05);
    }
}
