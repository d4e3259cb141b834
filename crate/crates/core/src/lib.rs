//! Fractional-precision Rice-Golomb coding of integer sequences with
//! real-valued predictions.
//!
//! Predictions are rounded to a grid of spacing `rho/tau` instead of to
//! integers; the residual is folded onto the non-negative integers by a
//! generalized Rice mapping and written with a Golomb code. `rho = tau = 1`
//! is ordinary Rice-Golomb coding.

pub mod analysis;
pub mod bitcoder;
pub mod codec;
pub mod error;
pub mod harness;
pub mod predictor;
pub mod qmap;

pub use bitcoder::{BitSink, BitSource, GolombParam};
pub use codec::{
    decode_stream, encode_stream, EncoderConfig, Mode, Predictions, ResidualSource, StreamDecoder,
    StreamEncoder, StreamHeader,
};
pub use error::{Error, Result};
pub use predictor::{LpcConfig, LpcPredictor};
pub use qmap::{FinitePrecision, Precision};
