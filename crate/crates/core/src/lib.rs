//! Photon-number statistics of heralded single-photon sources.
//!
//! A pair source emits `N` photon pairs per time bin (Poisson for a multimode
//! source, thermal for a single mode). One photon of each pair goes to a
//! threshold detector with efficiency `eta_h` and dark-count probability
//! `d_h`; the twin goes to the signal output with efficiency `eta_s`. A click
//! heralds the bin. This crate computes the signal law conditioned on that
//! click, exactly and by simulation.
//!
//! ## Modules
//!
//! - [`model`]: parameters, filters, truncated distributions
//! - [`analytic`]: correcting factors `xi(n)`, conditional pmfs, moments, and
//!   the independent series used to check them
//! - [`montecarlo`]: seeded trial-by-trial simulation
//! - [`optimize`]: optimal pump level and parameter sweeps
//! - [`verify`]: the cross-check matrix behind `hsps verify`
//! - [`output`], [`cli`]: the `hsps` binary
//!
//! ## Examples
//!
//! ```text
//! examples/
//! ├── heralding_gain.rs    # heralded vs plain pmf, xi(n), gain ratio
//! ├── perfect_source.rs    # lossless, noiseless limits
//! ├── sub_poissonian.rs    # moments, Fano ratio, g2
//! ├── optimal_dimming.rs   # best mu for a noisy detector
//! ├── dimming_sweep.rs     # Poisson vs thermal Fano curves, written as CSV
//! ├── mode_filtering.rs    # filter on the signal or herald arm
//! ├── monte_carlo.rs       # simulation against the closed forms
//! └── verify_matrix.rs     # every cross-check over random configurations
//! ```
//!
//! ```bash
//! cargo run --release --example heralding_gain
//! ```
//!
//! ## Quick start
//!
//! ```
//! use hsps::analytic::{signal_pmf, DEFAULT_TOL};
//! use hsps::model::{FilterSpec, PairStatistics, SourceParams};
//!
//! let params = SourceParams::new(0.01, 0.5, 0.5, 1e-4)?;
//! let pmf = signal_pmf(PairStatistics::Poisson, &params, &FilterSpec::none(), DEFAULT_TOL)?;
//! assert!((pmf.get(1) - 0.4903).abs() < 1e-4);
//! # Ok::<(), hsps::error::Error>(())
//! ```

pub mod analytic;
pub mod cli;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod optimize;
pub mod output;
pub mod verify;

pub use error::{Error, Result};
