use thiserror::Error;

/// Errors raised by the numerical kernels, models and protocols.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix is not Hermitian (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPsd { eigenvalue: f64 },

    #[error("singular matrix: eigenvalue {eigenvalue:e} is below the floor {floor:e}")]
    SingularMatrix { eigenvalue: f64, floor: f64 },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {residual:e})")]
    NumericalFailure { sweeps: usize, residual: f64 },

    #[error("dimension {dim} exceeds the capacity cap {cap}")]
    Capacity { dim: usize, cap: usize },

    #[error("parameter outside the model domain: {0}")]
    Domain(String),

    #[error("derivative leaves the support of the state: |dρ_kl| = {entry:e} where p_k + p_l = {weight:e}")]
    SingularModel { entry: f64, weight: f64 },

    #[error("outcome {outcome} has probability {probability:e} but carries first-order information ({slope:e})")]
    SingularOutcome { outcome: usize, probability: f64, slope: f64 },

    #[error("outcome {outcome} has negative probability {probability:e}")]
    NegativeProbability { outcome: usize, probability: f64 },

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid projector: {0}")]
    InvalidProjector(String),

    #[error("inadmissible target information: {0}")]
    Target(String),

    #[error("reference point on the boundary of the state space (|θ| = {norm})")]
    Boundary { norm: f64 },

    #[error("no stage-1 outcomes recorded for axis {axis}")]
    InsufficientData { axis: usize },

    #[error("design direction {index} has zero weight; three parameters cannot be recovered")]
    RankDeficientDesign { index: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
