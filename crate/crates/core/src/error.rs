use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidSpec(String),

    #[error("degenerate metric at node ({i}, {j}): det g = {det:e}")]
    DegenerateMetric { i: usize, j: usize, det: f64 },

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("exact weak index requires a constant-|A|^2 family; got {0}")]
    NotConstantCurvature(String),

    #[error("surface is not minimal (H = {h:e})")]
    NotMinimal { h: f64 },

    #[error("surface is totally umbilical (max A2 - nH^2 = {max_excess:e}); theorem hypothesis not met")]
    Umbilical { max_excess: f64 },

    #[error("factorization breakdown at pivot {index}: {reason}")]
    Breakdown { index: usize, reason: String },

    #[error("sample file line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
