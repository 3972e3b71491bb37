use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("arm z={arm} has no observations")]
    ZeroArm { arm: u8 },

    /// The first-stage risk difference is zero. `numerator` is the
    /// reduced-form risk difference so callers can tell 0/0 from x/0.
    #[error("zero denominator (numerator = {numerator})")]
    ZeroDenominator { numerator: f64 },

    #[error("non-informative misclassification rates: {what} = {value} (must be > 0)")]
    NonInformativeRates { what: String, value: f64 },

    #[error("no valid P(Z'|Z) exists: implied P(Z'=1) = {implied}")]
    InfeasibleZChannel { implied: f64 },

    #[error("latent model violates its constraints: {0}")]
    InfeasibleModel(String),

    #[error("degenerate denominator in inverse map: {what}")]
    DegenerateDenominator { what: &'static str },

    #[error("strong monotonicity violated: P(D=1|Z=0) = {p_treated_control}")]
    StrongMonoViolated { p_treated_control: f64 },

    #[error("no feasible point found (smallest constraint violation {nearest_violation:.3e})")]
    NoFeasiblePoint { nearest_violation: f64 },

    #[error("treatment margins carry no compliance mass")]
    ZeroComplianceMass,

    #[error("misclassification-corrected first stage is zero")]
    ZeroCorrectedDenominator,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
