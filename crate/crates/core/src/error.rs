use thiserror::Error;

/// Error type shared by every module in the crate.
#[derive(Debug, Error)]
pub enum DqdError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("numerical instability detected at step {step}: {what}")]
    Instability { step: u64, what: String },

    #[error("eigensolver did not converge: residual {residual:.3e} after {iters} iterations")]
    SolverConvergence { residual: f64, iters: usize },

    #[error("near-degenerate eigenvalues (gap {gap_mev:.3e} meV)")]
    DegenerateEigenvalues { gap_mev: f64 },

    #[error("localisation is ambiguous: half-line weight matrix eigenvalues differ by {gap:.3e}")]
    LocalisationAmbiguous { gap: f64 },

    #[error("detuning calibration failed: {0}")]
    Calibration(String),

    #[error("invalid pulse specification: {0}")]
    PulseSpec(String),

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("sweep range unusable: {0}")]
    SweepRange(String),

    #[error("state leaked outside the qubit subspace: leakage {leakage:.3e}")]
    SubspaceViolation { leakage: f64 },

    #[error("readout probability {p_r:.6} outside [{lo:.6}, {hi:.6}]; state not in the qubit subspace")]
    ReadoutLeakage { p_r: f64, lo: f64, hi: f64 },

    #[error("rotation decomposition failed: {0}")]
    Decomposition(String),

    #[error("kernel backend '{backend}' diverged from the serial reference at node {node}")]
    KernelMismatch { backend: String, node: usize },

    #[error("tomography probe geometry degenerate: {0}")]
    DegenerateProbes(String),

    #[error("operating range: {0}")]
    OperatingRange(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl DqdError {
    /// Stable lowercase tag naming the failure class, for machine-parsable
    /// error lines (`error: <kind>: <message>`).
    pub fn kind(&self) -> &'static str {
        match self {
            DqdError::GridMismatch(_) => "grid-mismatch",
            DqdError::InvalidGrid(_) => "invalid-grid",
            DqdError::Instability { .. } => "instability",
            DqdError::SolverConvergence { .. } => "solver-convergence",
            DqdError::DegenerateEigenvalues { .. } => "degenerate-eigenvalues",
            DqdError::LocalisationAmbiguous { .. } => "localisation-ambiguous",
            DqdError::Calibration(_) => "calibration",
            DqdError::PulseSpec(_) => "pulse-spec",
            DqdError::Schedule(_) => "schedule",
            DqdError::SweepRange(_) => "sweep-range",
            DqdError::SubspaceViolation { .. } => "subspace-violation",
            DqdError::ReadoutLeakage { .. } => "readout-leakage",
            DqdError::Decomposition(_) => "decomposition",
            DqdError::KernelMismatch { .. } => "kernel-mismatch",
            DqdError::DegenerateProbes(_) => "degenerate-probes",
            DqdError::OperatingRange(_) => "operating-range",
            DqdError::Config(_) => "config",
            DqdError::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, DqdError>;
