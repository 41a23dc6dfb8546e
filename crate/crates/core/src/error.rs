use thiserror::Error;

use crate::model::Violation;

/// Errors produced by spread-time construction and analysis.
#[derive(Debug, Error)]
pub enum SpreadError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("network spec failed validation: {}", format_violations(.0))]
    InvalidSpec(Vec<Violation>),

    /// The seeds already meet the penetration target, so `T_alpha = 0`.
    #[error("seed count {seeds} already reaches the target count {target}")]
    TrivialCompletion { seeds: usize, target: usize },

    #[error("transient state {state:?} has no outflow; absorption is impossible")]
    DegenerateReachability { state: Vec<usize> },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("rates {0} and {1} are too close for the generalized Erlang form")]
    NearDegenerateRates(f64, f64),

    #[error("the non-cooperative model has no finite moment of order {0} in the limit model")]
    InfiniteMoment(u32),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("sample set is empty")]
    EmptySamples,

    #[error("pair ({0}, {1}) has fewer than two contacts")]
    InsufficientContacts(String, String),

    #[error("no contact lasts at least {0} s; transfer never succeeds")]
    NoFeasibleTransfer(f64),

    #[error("node {0} has no group assignment")]
    UnmappedNode(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, SpreadError>;
