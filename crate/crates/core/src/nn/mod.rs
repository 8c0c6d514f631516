//! Function approximators: MLP Hamiltonians, a DeepONet-style scalar
//! functional over periodic fields and a residual periodic CNN used as the
//! learned structure operator.

mod deeponet;
mod mlp;
mod resconv;

pub use deeponet::DeepOnetSpec;
pub use mlp::{glorot_uniform, Activation, MlpSpec};
pub use resconv::ResConvSpec;
