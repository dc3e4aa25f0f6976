//! Text-image super-resolution with small fully-convolutional networks.
//!
//! The pipeline: a low-resolution text image is bicubically upscaled ×2 and
//! passed through a stack of valid convolutions (ReLU on every layer but
//! the last). Networks are trained from scratch with per-layer SGD on
//! 18×18 sub-images, and several trained networks can be combined by
//! averaging their outputs, with the combination picked greedily.

pub mod conv;
pub mod ensemble;
pub mod error;
pub mod imaging;
pub mod metrics;
pub mod network;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use network::{init_network, parse_spec, Network, NetworkSpec};
pub use tensor::{FilterBank, Tensor};
