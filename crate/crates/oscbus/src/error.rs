use thiserror::Error;

use crate::hilbert::Axis;

#[derive(Debug, Error)]
pub enum Error {
    #[error("oscillator cutoff {cutoff} is below the minimum of 2")]
    InvalidCutoff { cutoff: usize },

    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not Hermitian: max asymmetry {max_asymmetry:.3e}")]
    NotHermitian { max_asymmetry: f64 },

    #[error(
        "operator term on qubit {qubit} uses axis {op_axis:?} but the frame assigns {frame_axis:?}"
    )]
    FrameMismatch {
        qubit: usize,
        op_axis: Axis,
        frame_axis: Axis,
    },

    #[error("operators assign conflicting axes {first:?} and {second:?} to qubit {qubit}")]
    FrameConflict {
        qubit: usize,
        first: Axis,
        second: Axis,
    },

    #[error("composite dimension {dim} exceeds the cap of {cap}; lower the cutoff or raise the cap (OSCBUS_MAX_DIM)")]
    DimensionCap { dim: usize, cap: usize },

    #[error("state is not normalized: deviation {deviation:.3e}")]
    NotNormalized { deviation: f64 },

    #[error("cutoff {cutoff} leaves thermal tail weight {tail:.3e} above 1e-10; raise the cutoff")]
    ThermalTail { cutoff: usize, tail: f64 },

    #[error("eigendecomposition did not converge")]
    EigenFailure,

    #[error(
        "cutoff did not converge below dimension cap {cap}; last fidelity change {last_change:.3e}"
    )]
    CutoffNotConverged { cap: usize, last_change: f64 },

    #[error("{0}")]
    InvalidArgument(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
