//! Reverse-mode differentiation with forward-over-reverse mixed second
//! derivatives, plus the flat parameter container the networks train.

mod params;
mod tape;

pub use params::{ParamBlock, ParamLeaves, ParamVector};
pub use tape::{Adjoints, ConvShape, DualAdjoints, LeafKind, Op, Tape, Unary, Var};
