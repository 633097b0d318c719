//! Crate-wide error type.

use thiserror::Error;

/// Which certification clause a candidate pair potential failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PotentialClause {
    /// φ must vanish beyond the declared interaction range.
    FiniteRange,
    /// φ must be bounded: sup |φ| < ∞ and consistent with the declared bound.
    Bounded,
    /// b = -inf(φ ∧ 0) must be finite and within the declared bound.
    LowerBound,
    /// Repulsion at short range: inf_{|x-y| ≤ δ} φ(x,y) > 2 m^φ b.
    Repulsion,
    /// φ(x,y) must equal φ(y,x).
    Symmetry,
}

impl std::fmt::Display for PotentialClause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            PotentialClause::FiniteRange => "finite range",
            PotentialClause::Bounded => "boundedness",
            PotentialClause::LowerBound => "lower bound",
            PotentialClause::Repulsion => "short-range repulsion",
            PotentialClause::Symmetry => "symmetry",
        };
        f.write_str(name)
    }
}

/// Structured rejection produced when a pair potential fails certification.
#[derive(Debug, Clone)]
pub struct CertifyRejection {
    pub clause: PotentialClause,
    /// Witness pair (x, y) at which the violation was observed, if pointwise.
    pub witness: Option<(Vec<f64>, Vec<f64>)>,
    /// Human-readable inequality with the numbers filled in.
    pub detail: String,
}

impl std::fmt::Display for CertifyRejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} clause violated: {}", self.clause, self.detail)?;
        if let Some((x, y)) = &self.witness {
            write!(f, " (witness x = {:?}, y = {:?})", x, y)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("pair potential rejected: {0}")]
    Certification(CertifyRejection),

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("dump format error: {0}")]
    DumpFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
