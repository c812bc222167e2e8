//! Threshold return-interval statistics for daily trading records.
//!
//! The crate turns a corpus of per-stock daily series into normalized
//! volatility, extracts the waiting times between volatilities above a
//! threshold, and characterizes them: log-binned densities, scaling collapse,
//! power-law and exponential tail fits, conditional densities for short-term
//! memory, detrended fluctuation analysis for long-term memory, and binning by
//! financial factors (lifetime, capitalization, volume, trading value).
//!
//! Synthetic generators (i.i.d., fractional Gaussian noise, multiplicative
//! cascades) provide series with known behavior for every estimator.
//!
//! Per-stock work goes through [`par::map_ordered`], which runs on a rayon
//! pool when the `parallel` feature is enabled and sequentially otherwise.
//! Every reduction happens after an order-preserving collect, so results do
//! not depend on the thread count.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conditional;
pub mod dfa;
pub mod error;
pub mod factors;
pub mod fitting;
pub mod ingest;
pub mod intervals;
pub mod par;
pub mod pipeline;
pub mod seed;
pub mod stats;
pub mod synth;
pub mod volatility;

pub use error::{Error, Result};
pub use par::Parallelism;
