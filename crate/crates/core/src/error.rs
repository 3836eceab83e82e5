use thiserror::Error;

use crate::solver::HittingRecord;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dyadic refinement exceeded level {max_level} at t = {time} (|H| = {modulus:e})")]
    RefinementDepth { max_level: u32, time: f64, modulus: f64 },

    #[error("real start {x} hits 0 at T = {} before t_end = {t_end}", .record.hit_time)]
    HitBeforeEnd { x: f64, t_end: f64, record: HittingRecord<f64> },

    #[error("boundary ladder stopped at y = {last_y:e} with Cauchy gap {last_gap:e} > tol {tol:e}: {reason}")]
    BoundaryNotConverged { tol: f64, last_y: f64, last_gap: f64, reason: String },

    #[error("trace point t = {t} failed: {source}")]
    TracePoint {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
