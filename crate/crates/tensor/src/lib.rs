//! Numeric substrate: dense 2-D tensors, a reverse-mode gradient tape, a
//! radix-2 FFT and the parameter-free Fourier token-mixing transform.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the `*64` aliases
//! below are the instantiations the rest of the workspace uses.

pub mod counter;
pub mod error;
pub mod fft;
pub mod fourier;
pub mod gradcheck;
pub mod scalar;
pub mod tape;
pub mod tensor;

pub use counter::{MacCategory, MacCounts};
pub use error::{Result, TensorError};
pub use fft::{fft_pow2, ComplexBuffer, Radix2Plan};
pub use fourier::fourier_mix;
pub use scalar::Scalar;
pub use tape::{activate, segments, Activation, Tape, Var};
pub use tensor::Tensor;

pub type Tensor64 = Tensor<f64>;
pub type Tensor32 = Tensor<f32>;
pub type Tape64 = Tape<f64>;
pub type Tape32 = Tape<f32>;
pub type ComplexBuffer64 = ComplexBuffer<f64>;
