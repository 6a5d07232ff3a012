use std::fmt;

use thiserror::Error;

use crate::stochastics::Branch;

/// One step of the index path that led to a failing evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyStep {
    pub branch: Branch,
    pub indices: Vec<u64>,
}

impl fmt::Display for KeyStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}{:?}", self.branch, self.indices)
    }
}

fn format_path(path: &[KeyStep]) -> String {
    if path.is_empty() {
        return "<root>".to_string();
    }
    path.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("/")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    /// A terminal or nonlinearity evaluation produced NaN or an infinity.
    /// `path` lists the child-key steps from the outermost call inwards.
    #[error("non-finite {what} at s={s}, x={x:?}, key path {}", format_path(.path))]
    NonFinite {
        what: &'static str,
        s: f64,
        x: Vec<f64>,
        path: Vec<KeyStep>,
    },

    #[error("predicted draw count {predicted} exceeds budget {budget}")]
    BudgetExceeded { predicted: u64, budget: u64 },

    #[error("Newton iteration for Gauss-Legendre rule with {n} nodes did not converge")]
    QuadratureNonConvergence { n: usize },

    #[error("finite-difference solve unstable ({config})")]
    Unstable { config: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// Prepends `step` to the key path of a non-finite failure as it
    /// unwinds through the recursion.
    pub(crate) fn within(mut self, step: KeyStep) -> Self {
        if let Error::NonFinite { path, .. } = &mut self {
            path.insert(0, step);
        }
        self
    }
}
