//! Two-step estimation of a source cross-power spectrum from noisy linear
//! measurements: Tikhonov inversion of `y = G x + n`, then Welch estimation on
//! the reconstructed sources. The [`harness`] module sweeps simulated
//! configurations to study how the optimal regularization parameter for the
//! spectrum relates to the one for the time series.

pub mod error;
pub mod forward;
pub mod harness;
pub mod inverse;
pub mod mvar;
pub mod optimize;
pub mod spectra;

pub use error::{Error, Result};
