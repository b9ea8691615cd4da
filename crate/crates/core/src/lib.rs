//! Portfolio construction via complex valued risk diversification.
//!
//! The pipeline: asset prices -> simple returns -> analytic signals
//! (discrete Hilbert transform) -> complex Hermitian covariance -> unitary
//! eigendecomposition -> entropy of the eigen-space risk distribution,
//! maximized over the weight simplex. Risk parity and real-covariance
//! maximum-diversification solvers are included as baselines, along with a
//! rolling monthly-rebalance backtest.

pub mod allocation;
pub mod backtest;
pub mod error;
pub mod market_data;
pub mod risk_models;
pub mod spectral;

pub use error::{Error, Result};
