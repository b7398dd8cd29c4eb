use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("matrix is not symmetric (defect {defect:e})")]
    NotSymmetric { defect: f64 },
    #[error("matrix is not symplectic (defect {defect:e})")]
    NotSymplectic { defect: f64 },
    #[error("frame error: {0}")]
    Frame(String),
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("special-homotopy witness rejected: {0}")]
    WitnessRejected(String),
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error("sampling too coarse near t = {t}: {reason}")]
    RefinementNeeded { t: f64, reason: String },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("signature of M_eps did not stabilise down to eps = {last_eps:e}")]
    Instability { last_eps: f64 },
    #[error("brake iteration joint mismatch {mismatch:e} at segment {segment}")]
    JointMismatch { segment: usize, mismatch: f64 },
    #[error("integrator failure at t = {t}: {reason}")]
    StepSize { t: f64, reason: String },
    #[error("convexity error: {0}")]
    Convexity(String),
    #[error("profile horizon too small: need k_max >= {needed}")]
    Horizon { needed: usize },
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
}
