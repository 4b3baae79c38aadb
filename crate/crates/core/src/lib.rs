//! Spiking wavelets: time-causal scale-space kernels, leaky integrate-and-fire
//! polarity encoding, spike-count wavelet coefficients and reconstruction,
//! with classical continuous wavelet baselines for comparison.

pub mod analysis;
pub mod classical_wavelet;
pub mod cli;
pub mod conv;
pub mod error;
pub mod io;
pub mod neuron;
pub mod scale_space;
pub mod signals;
pub mod spiking_wavelet;

pub use error::{Error, Result};
