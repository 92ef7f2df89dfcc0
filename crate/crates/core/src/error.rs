use thiserror::Error;

/// Errors raised by the numeric, enumeration, sampling, and experiment layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    #[error("oracle budget exceeded: {subsets} subsets of {slots} edge slots (limits: {max_subsets} subsets, {max_slots} slots)")]
    BudgetExceeded {
        slots: u64,
        subsets: u128,
        max_slots: u64,
        max_subsets: u128,
    },

    #[error("vertex {vertex} out of range for {vertices} vertices")]
    Index { vertex: usize, vertices: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            op,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
