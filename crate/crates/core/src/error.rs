use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("{op}: invalid input: {msg}")]
    InvalidInput { op: &'static str, msg: String },

    #[error("{op}: argument {value} outside the supported domain [{lo}, {hi}]")]
    OutsideDomain {
        op: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("{op}: grid too coarse for the marching scheme, try n >= {suggested_n}")]
    GridTooCoarse { op: &'static str, suggested_n: usize },

    #[error("{op}: no root found in bracket [{lo}, {hi}]")]
    RootBracket { op: &'static str, lo: f64, hi: f64 },

    #[error("{op}: did not converge: {detail}")]
    NoConvergence { op: &'static str, detail: String },

    #[error("ratio_limit: tail not converging, last estimates {estimates:?}")]
    RatioLimit { estimates: [f64; 3] },

    #[error("creeping_limit: alpha ladder did not stabilise, trace {trace:?}")]
    CreepingLadder { trace: Vec<(f64, f64)> },

    #[error("{op}: integration failed at x = {x}: {msg}")]
    Integration {
        op: &'static str,
        x: f64,
        msg: String,
    },
}

impl Error {
    pub(crate) fn invalid(op: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidInput {
            op,
            msg: msg.into(),
        }
    }

    pub(crate) fn no_convergence(op: &'static str, detail: impl Into<String>) -> Self {
        Error::NoConvergence {
            op,
            detail: detail.into(),
        }
    }

    /// True for errors caused by the caller's input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput { .. } | Error::OutsideDomain { .. } | Error::GridTooCoarse { .. }
        )
    }
}
