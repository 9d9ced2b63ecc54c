use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HvlError {
    #[error("point with modulus {0} is not inside the open unit disc")]
    OutsideDisc(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("truncation degree {degree} too small: tail bound {tail:e} exceeds {tol:e}")]
    TruncationTooShort { degree: usize, tail: f64, tol: f64 },

    #[error("series evaluation at |z| = {modulus} outside validity radius {radius}")]
    OutsideValidityRadius { modulus: f64, radius: f64 },

    #[error("closed-form backend requested but the function has none")]
    NoClosedForm,

    #[error("function carries no series coefficients")]
    NoSeries,

    #[error("boundary evaluation of a series-only function without a summable tail")]
    SeriesOnBoundary,

    #[error("evaluation on the singular direction at angle {0}")]
    SingularPoint(f64),

    #[error("quadrature did not reach tolerance {tol:e} (last change {change:e})")]
    QuadratureNotConverged { tol: f64, change: f64 },

    #[error("ratio undefined: denominator {0:e} below 1e-14")]
    DegenerateRatio(f64),

    #[error("certificate mismatch: {0}")]
    CertificateMismatch(String),

    #[error("support of the coefficient vector ({support}) exceeds certificate levels ({levels})")]
    SupportExceedsLevels { support: usize, levels: usize },
}

pub type Result<T> = std::result::Result<T, HvlError>;
