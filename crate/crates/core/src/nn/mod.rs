//! Layer primitives and the weight container every network loads from.

pub mod conv;
mod gemm;
pub mod lstm;
pub mod resblock;
pub mod tensor;
pub mod wavenet;
pub mod weights;

pub use conv::{conv1d, conv_transpose1d, Conv1d, ConvParams, ConvTranspose1d, TransposeParams};
pub use lstm::Lstm;
pub use resblock::{fuse_resblocks, ResBlock, LRELU_SLOPE};
pub use tensor::{leaky_relu, Tensor3};
pub use wavenet::WaveNet;
pub use weights::{Init, ModelWeights, Param, ParamSource, StrictReader};
