//! Crate-wide error type with the exit-code classes the CLI maps to.

use thiserror::Error;

/// Coarse classification used for CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input: schema violations, mismatched rings, out-of-range parameters. Exit 2.
    Validation,
    /// The requested answer is not determined at the carried precision/truncation. Exit 3.
    Precision,
    /// A mathematical hypothesis of the operation is violated by the input. Exit 4.
    Hypothesis,
    /// An internal consistency check failed (solver residual, axiom re-check). Exit 5.
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("ring mismatch: {0}")]
    RingMismatch(String),
    #[error("truncation mismatch: {0}")]
    TruncationMismatch(String),
    #[error("invalid ring spec: {0}")]
    BadRingSpec(String),
    #[error("no inertial polynomial tabulated for p={p}, f={f}")]
    InertialTableMiss { p: u64, f: usize },
    #[error("not a unit (valuation {val} > 0)")]
    NotAUnit { val: u32 },
    #[error("not divisible: valuation {val} < {want}")]
    NotDivisible { val: u32, want: u32 },
    #[error("zero input")]
    ZeroInput,
    #[error("series is not invertible under substitution (linear coefficient is not a unit)")]
    NotInvertible,
    #[error("insufficient precision: {0}")]
    InsufficientPrecision(String),
    #[error("no qualifying coefficient up to the truncation degree (cannot distinguish at precision)")]
    InfiniteAtPrecision,
    #[error("not a member of the Nottingham group: {0}")]
    NotNottingham(String),
    #[error("enumeration budget exceeded: {needed} cosets > budget {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },
    #[error("generators do not commute to the working truncation")]
    NoncommutingGenerators,
    #[error("pair does not commute to the working truncation")]
    NoncommutingPair,
    #[error("degenerate window: truncation degree {deg} is too small (need at least {need})")]
    DegenerateWindow { deg: usize, need: usize },
    #[error("series is not stable noninvertible: {0}")]
    NotStable(String),
    #[error("Weierstrass degree {0} is not a power of p")]
    NotPPower(u64),
    #[error("too few finite profile entries (need {need}, have {have})")]
    TooFewEntries { need: usize, have: usize },
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("the valuation equation m*v(g'(0)) = v(u'(0)^(p^n) - 1) has no integer solution")]
    NoMatchingM,
    #[error("closed form is not integral for the given inputs")]
    NotIntegral,
    #[error("d(x) is not of the form -theta(zeta(x)): {0}")]
    NotInImage(String),
    #[error("difference pair is not in B_r at level {level}: {detail}")]
    NotInB { level: u32, detail: String },
    #[error("reduction mismatch: {0}")]
    ReductionMismatch(String),
    #[error("oracle series has insufficient precision or truncation: {0}")]
    OraclePrecision(String),
    #[error("working precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("solver residual is nonzero: {0}")]
    ResidualNonzero(String),
    #[error("schema error at {path}: {msg}")]
    Schema { path: String, msg: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            RingMismatch(_) | TruncationMismatch(_) | BadRingSpec(_) | InertialTableMiss { .. }
            | ZeroInput | NotNottingham(_) | BudgetExceeded { .. } | Schema { .. } | Io { .. }
            | DegenerateWindow { .. } => ErrorClass::Validation,
            InsufficientPrecision(_) | InfiniteAtPrecision | PrecisionExhausted(_)
            | OraclePrecision(_) => ErrorClass::Precision,
            NotAUnit { .. } | NotDivisible { .. } | NotInvertible | NoncommutingGenerators
            | NoncommutingPair | NotStable(_) | NotPPower(_) | TooFewEntries { .. }
            | HypothesisViolated(_) | NoMatchingM | NotIntegral | NotInImage(_)
            | NotInB { .. } | ReductionMismatch(_) => ErrorClass::Hypothesis,
            ResidualNonzero(_) => ErrorClass::Internal,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Validation => 2,
            ErrorClass::Precision => 3,
            ErrorClass::Hypothesis => 4,
            ErrorClass::Internal => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
