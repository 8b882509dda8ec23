use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite state at step {step} (t = {time:e})")]
    NonFiniteState { step: usize, time: f64 },

    #[error("Taylor recurrence (m = {m}, s = {s}) produced a non-finite value at iterate {iterate}")]
    TaylorOverflow { m: usize, s: usize, iterate: usize },

    #[error("dense exponential requested for n = {n} > {limit}; use the Taylor action instead")]
    DenseTooLarge { n: usize, limit: usize },

    #[error("closed form only covers the underdamped regime (R^2 = {r_sq:e}, 4L/C = {bound:e})")]
    NotUnderdamped { r_sq: f64, bound: f64 },

    #[error("sample grids do not match: {0}")]
    GridMismatch(String),

    #[error("adaptive step size underflow at t = {time:e} (h = {step:e})")]
    StepSizeUnderflow { time: f64, step: f64 },

    #[error("worker {worker} failed: {source}")]
    Worker {
        worker: usize,
        #[source]
        source: Box<Error>,
    },
}
