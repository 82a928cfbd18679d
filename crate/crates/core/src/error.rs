use thiserror::Error;

use crate::path::GridPath;
use crate::types::AtomMeasure;

/// Errors reported by the library.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A query lies outside the range covered by the available data.
    #[error("range error: {0}")]
    Range(String),

    /// A mixing probability evaluated outside `[0, 1]`.
    #[error("mixing probability {value} outside [0, 1] at z = {z}")]
    Normalization { value: f64, z: f64 },

    /// A combinatorial sum would be too large to enumerate.
    #[error("product of {k} factors exceeds the supported maximum of {max}")]
    Complexity { k: usize, max: usize },

    /// The negative-theta construction needed more re-designations than allowed.
    /// `partial` holds the grid states produced before the cap was hit.
    #[error("re-designation cap {cap} reached at time {time}")]
    EpochCap { cap: usize, time: f64, partial: Option<Box<GridPath<AtomMeasure>>> },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

/// Returns a domain error unless every value is finite.
pub(crate) fn check_finite(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(domain(format!("{name}: non-finite input")))
    }
}
