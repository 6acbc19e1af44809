//! Residual vector quantization as a depth-controlled input defense for a
//! toy CTC recognizer, with white-box attacks and the evaluation harness
//! used to study it.

pub mod asr;
pub mod attack;
pub mod autodiff;
pub mod defense;
mod error;
pub mod harness;
pub mod metrics;
pub mod signal;

pub use error::{Error, Result};
