//! Batched FFT primitives and a frequency-domain convolution engine for the
//! three passes of convolutional network training: forward propagation,
//! gradient with respect to the input, and weight gradient accumulation.
//!
//! The pipeline follows the classic interpolation scheme: zero-pad each
//! spatial plane to the transform size, take a real-to-complex 2-d FFT,
//! transpose so every frequency bin holds a small dense matrix, contract
//! those matrices over the reduction dimension with a batched complex
//! product, transpose back, invert the transform, and clip the result to
//! the pass-specific output window.
//!
//! Entry points:
//! - [`fft1d`], [`rfft`]: 1-d complex transforms and real-input 2-d wrappers.
//! - [`direct_conv`]: loop-nest reference implementations of all three passes.
//! - [`conv_engine`]: the frequency-domain engine with reusable work buffers.
//! - [`tiling`]: decomposition of large convolutions into small tiles.
//! - [`autotuner`]: transform-size search, timing, and the on-disk plan cache.
//! - [`bench`]: verification and benchmark drivers behind the `fftconv` binary.

pub mod autotuner;
pub mod bench;
pub mod cgemm;
pub mod conv_engine;
pub mod direct_conv;
pub mod fft1d;
pub mod rfft;
pub mod tensor;
pub mod tiling;

mod error;

pub use error::{Error, Result};
