//! Minimal dense/convolutional network substrate with reverse-mode
//! gradients, sized for the fixed encoder/decoder architecture.

pub mod adam;
pub mod gradcheck;
pub mod layer;
pub mod tensor;

pub use adam::{AdamHyper, AdamState};
pub use gradcheck::{check_gradients, relative_error};
pub use layer::{Activation, ForwardCache, LayerParams, LayerSpec, LayerStack};
pub use tensor::Tensor;
