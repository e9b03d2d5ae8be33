//! Quantized-feedback control of scalar linear stochastic systems.
//!
//! The library covers the full chain from scalar quantizer design to closed
//! loops over rate-limited channels:
//!
//! - [`density`]: gridded one-dimensional densities with the affine /
//!   truncation / convolution algebra of sequential Bayesian filtering;
//! - [`quantizer`]: regular scalar quantizers and Lloyd-Max design;
//! - [`silent`]: three-level quantizers with a minimum-probability silent
//!   cell for event-triggered operation;
//! - [`mrsq`]: multi-resolution (successive-refinement) quantizers via the
//!   generalized Lloyd-Max algorithm;
//! - [`control`]: Riccati gains, the greedy coder-controller, its
//!   event-triggered variant, and the globally optimal LQR policy;
//! - [`sim`]: reproducible Monte Carlo ensembles, exact LQR cost tables,
//!   and high-rate (Bennett) asymptotics;
//! - [`cli`]: the TOML experiment schema plus CSV/JSON emission behind the
//!   `qfc` binary.

pub mod cli;
pub mod control;
pub mod density;
pub mod error;
pub mod mrsq;
pub mod quantizer;
pub mod silent;
pub mod sim;

pub use control::{Mode, RiccatiGains, SystemSpec};
pub use density::{GriddedDensity, PdfSpec};
pub use error::{Error, Result};
pub use mrsq::MultiResolutionQuantizer;
pub use quantizer::ScalarQuantizer;
pub use silent::SilentQuantizer;
