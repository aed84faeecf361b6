//! Wavelet-domain sub-series forecasting.
//!
//! A series is split by a single-level orthogonal DWT into half-length
//! approximation and detail bands, mixed by a small residual convolution,
//! mapped to forecast bands by one shared linear (or shallow MLP) head, and
//! brought back to the time domain by the inverse transform.

pub mod analysis;
pub mod data;
pub mod error;
pub mod model;
pub mod training;
pub mod wavelet;

pub use error::{Error, Result};
