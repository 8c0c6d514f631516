use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A tape node produced NaN or infinity.
    NonFinite { node: usize },
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    NoOutput,
    /// Gradients need a single scalar output node.
    NotScalarOutput { len: usize },
    Shape(String),
    InvalidParameter(String),
    /// A vector field or force evaluation returned non-finite values.
    NonFiniteForce,
    /// A stepper failed while producing a trajectory.
    StepFailed { step: usize, source: Box<Error> },
    /// A learned model's rollout left the finite range.
    Diverged { step: usize },
    SingularDenominator { value: f64 },
    NotPowerOfTwo(usize),
    DepthBelowFloor { min_depth: f64, floor: f64 },
    SmoothingDidNotConverge { iterations: usize },
    EmptyBatch,
    NonFiniteLoss { phase: u8, epoch: usize },
    /// Generation failed inside trajectory `traj`.
    Generation { traj: usize, source: Box<Error> },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonFinite { node } => write!(f, "non-finite value at tape node {node}"),
            Error::LengthMismatch {
                what,
                expected,
                got,
            } => write!(f, "{what}: expected length {expected}, got {got}"),
            Error::NoOutput => f.write_str("tape has no output node"),
            Error::NotScalarOutput { len } => {
                write!(f, "gradient requires a scalar output, output has length {len}")
            }
            Error::Shape(msg) => write!(f, "shape mismatch: {msg}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::NonFiniteForce => f.write_str("non-finite force or vector field"),
            Error::StepFailed { step, source } => write!(f, "step {step} failed: {source}"),
            Error::Diverged { step } => write!(f, "rollout diverged at step {step}"),
            Error::SingularDenominator { value } => {
                write!(f, "acceleration denominator {value:e} is singular")
            }
            Error::NotPowerOfTwo(n) => write!(f, "grid size {n} is not a power of two"),
            Error::DepthBelowFloor { min_depth, floor } => {
                write!(f, "depth {min_depth:e} fell below floor {floor:e}")
            }
            Error::SmoothingDidNotConverge { iterations } => {
                write!(f, "smoothing did not converge in {iterations} iterations")
            }
            Error::EmptyBatch => f.write_str("empty batch"),
            Error::NonFiniteLoss { phase, epoch } => {
                write!(f, "non-finite loss in phase {phase}, epoch {epoch}")
            }
            Error::Generation { traj, source } => {
                write!(f, "generation failed in trajectory {traj}: {source}")
            }
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            what,
            expected,
            got,
        })
    }
}
