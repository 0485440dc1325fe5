use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A coefficient or payoff evaluator produced a non-finite value.
    ModelEvaluation {
        what: &'static str,
        t: f64,
        x: Vec<f64>,
        u: Vec<f64>,
        v: Vec<f64>,
    },
    /// The Euler march produced a non-finite state.
    SimulationBlowUp { t: f64, x: Vec<f64> },
    /// A control set or problem definition violates its invariants.
    InvalidModel(String),
    /// Bad arguments to an operation (grid, dimensions, counts).
    InvalidInput(String),
    /// A strategy was evaluated outside its time interval.
    Interval { t: f64, start: f64 },
    /// Rule ordering or concatenation preconditions failed.
    Structural(String),
    /// Missing information for an open-loop generator.
    Configuration(String),
    /// The explicit scheme step exceeds the monotonicity bound.
    Cfl { dt: f64, dt_max: f64 },
    /// Non-finite value during the backward march.
    PdeBlowUp { layer: usize, node: usize },
    /// An iterative or exact solver failed to certify its answer.
    Numerical { what: &'static str, residual: f64 },
    /// An internal invariant does not hold (optimizer or simulator bug).
    Invariant(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ModelEvaluation { what, t, x, u, v } => {
                write!(f, "non-finite {what} at t={t}, x={x:?}, u={u:?}, v={v:?}")
            }
            Error::SimulationBlowUp { t, x } => {
                write!(f, "simulation blow-up at t={t}, x={x:?}")
            }
            Error::InvalidModel(msg) => write!(f, "invalid model: {msg}"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::Interval { t, start } => {
                write!(f, "strategy evaluated at t={t}, not after its start {start}")
            }
            Error::Structural(msg) => write!(f, "structural error: {msg}"),
            Error::Configuration(msg) => write!(f, "configuration error: {msg}"),
            Error::Cfl { dt, dt_max } => {
                write!(f, "time step {dt} exceeds the CFL bound {dt_max}")
            }
            Error::PdeBlowUp { layer, node } => {
                write!(f, "non-finite value in layer {layer} at node {node}")
            }
            Error::Numerical { what, residual } => {
                write!(f, "{what} failed to converge (residual {residual:e})")
            }
            Error::Invariant(msg) => write!(f, "invariant violation: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
