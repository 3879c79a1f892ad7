//! Ternary spike signal processing: threshold-adaptive encoders, quantized
//! ternary spiking networks with integer-only inference, surrogate-gradient
//! training, and energy/memory accounting.

pub mod corpus;
pub mod encoders;
pub mod energy;
pub mod error;
pub mod formats;
pub mod metrics;
pub mod qtsnn;
pub mod quant;
pub mod signal;
pub mod tlif;
pub mod topology;
pub mod training;

pub use error::{Error, Result};
pub use signal::{AnalogSignal, EncoderMeta, Method, TernarySpikeTrain};
