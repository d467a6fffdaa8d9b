//! Error type shared by every module of the engine.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("series has zero leading coefficient and cannot be inverted")]
    ZeroLeadingCoefficient,

    #[error("cannot substitute q -> -q: nonzero term at fractional exponent {0}")]
    FractionalExponentNegation(String),

    #[error("infinite product does not converge formally (step exponent must be positive)")]
    DivergentProduct,

    #[error("negative-index q-Pochhammer symbol has a pole")]
    PoleInNegativeIndex,

    #[error("exponent {exponent} is not below the truncation order {trunc}")]
    BeyondTruncation { exponent: String, trunc: String },

    #[error("eta quotient check failed: {0}")]
    EtaQuotientMismatch(String),

    #[error("tau is not in the upper half-plane")]
    NotInUpperHalfPlane,

    #[error("product or series tail does not converge at this point: {0}")]
    NonconvergentTail(String),

    #[error("unknown function `{0}`")]
    UnknownFunction(String),

    #[error("tail bound not reached for `{name}` after {terms} terms")]
    TailBoundFailure { name: String, terms: usize },

    #[error("denominator magnitude below 2^-{bits} in `{name}`")]
    DenominatorUnderflow { name: String, bits: u32 },

    #[error("cancellation in `{name}` left fewer than {bits} accurate bits")]
    CancellationLoss { name: String, bits: u32 },

    #[error("two-sided sum for `{0}` is not formally convergent")]
    NonconvergentBilateral(String),

    #[error("modular product for `{name}` leaves a fractional exponent {exponent}")]
    ResidualFractionalExponent { name: String, exponent: String },

    #[error("common truncation {available} is below the requested order {requested}")]
    InsufficientTruncation { available: String, requested: String },

    #[error("no modular product is recorded for `{0}`")]
    NoModularProduct(String),

    #[error("no applicable radial case for `{name}` at a root of unity of order {m}")]
    NoApplicableCase { name: String, m: u64 },

    #[error("closed formula has a vanishing denominator factor")]
    VanishingDenominator,

    #[error("grid has {0} usable points, at least 3 are required")]
    GridTooCoarse(usize),

    #[error("working precision limit of {0} bits reached without agreement")]
    PrecisionExhausted(u32),

    #[error("malformed root of unity: {0}")]
    MalformedRoot(String),

    #[error("invalid term rule: {0}")]
    InvalidRule(String),

    #[error("invalid expression: {0}")]
    InvalidExpression(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
