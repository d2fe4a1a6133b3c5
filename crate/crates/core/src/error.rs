use std::fmt;

use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("division by zero while evaluating kernel at (lambda={lambda}, t={t}, s={s})")]
    KernelDivisionByZero { lambda: f64, t: f64, s: f64 },

    #[error("division by zero while evaluating expression at {0}")]
    DivisionByZero(Point),

    #[error("integrand returned non-finite value {value} at (t={t}, s={s})")]
    NonFinite { t: f64, s: f64, value: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("lambda={0} is outside the kernel index set")]
    OutsideIndexSet(f64),

    #[error("point ({x}, {y}) with quadrant [{h}, {k}] does not fit inside the domain")]
    QuadrantOutsideDomain { x: f64, y: f64, h: f64, k: f64 },

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("could not determine effective support: {0}")]
    EffectiveSupport(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Variable bindings at which an expression failed, for error reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(pub Vec<(String, f64)>);

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, (name, value)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{name}={value}")?;
        }
        f.write_str(")")
    }
}
