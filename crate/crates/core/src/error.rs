use alloc::string::String;
use core::fmt;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A numeric argument is outside its documented range.
    InvalidParameter(String),
    /// The kernel vanishes somewhere inside the tested ball, so the lower
    /// bound `J(z) >= r` fails.
    HypothesisViolated(String),
    /// The kernel symbol touches its zero-frequency value at a nonzero
    /// frequency; no symbol lower-bound constant exists.
    DegenerateKernel(String),
    /// The operation is undefined for this input (e.g. a non-even kernel
    /// where a real symbol is required).
    Unsupported(String),
    /// A fixed-point iteration ran out of its iteration budget.
    NoConvergence { residual: f64, iterations: usize },
    /// An iterate that must stay positive developed a nonpositive entry.
    PositivityLost,
    /// A time step exceeds the stability guard of the integrator.
    StepRejected { dt: f64, dt_max: f64 },
    /// Too few samples to evaluate a finite-difference residual.
    InsufficientData,
    /// Two objects that must share a grid do not.
    GridMismatch,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::HypothesisViolated(msg) => write!(f, "kernel hypothesis violated: {msg}"),
            Error::DegenerateKernel(msg) => write!(f, "degenerate kernel: {msg}"),
            Error::Unsupported(msg) => write!(f, "unsupported: {msg}"),
            Error::NoConvergence {
                residual,
                iterations,
            } => write!(
                f,
                "no convergence after {iterations} iterations (residual {residual:e})"
            ),
            Error::PositivityLost => write!(f, "iterate lost positivity"),
            Error::StepRejected { dt, dt_max } => {
                write!(
                    f,
                    "step rejected: dt {dt:e} exceeds stability guard {dt_max:e}"
                )
            }
            Error::InsufficientData => write!(f, "insufficient data"),
            Error::GridMismatch => write!(f, "grid mismatch"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
