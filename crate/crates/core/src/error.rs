use thiserror::Error;

/// Failures reported by the numerical pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("|Im z| = {im} exceeds the certified strip height {strip}")]
    StripExceeded { im: f64, strip: f64 },
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("no sign change found on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("no critical omega for lambda = {lambda} (requires lambda < lambda0 = {lambda0})")]
    NoCriticalOmega { lambda: f64, lambda0: f64 },
    #[error("evaluation point {at} is too close to a pole")]
    PoleProximity { at: f64 },
    #[error("w = {w} is outside the open range (0, {max})")]
    DomainW { w: f64, max: f64 },
    #[error("cannot invert the zero quaternion")]
    ZeroQuaternion,
    #[error("step size underflow at t = {t}")]
    StepFailure { t: f64 },
    #[error("invalid reparametrization: {0}")]
    SpecInvalid(String),
    #[error("rotation angle {theta} is degenerate; the piece closes after one period")]
    DegenerateRotation { theta: f64 },
    #[error("the quartic Q has no positive oscillation interval with Q3 > 0")]
    NoOscillation,
    #[error("root {root} of Q is not simple")]
    SingularRoot { root: f64 },
    #[error("least-squares fit is degenerate: {0}")]
    DegenerateFit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
