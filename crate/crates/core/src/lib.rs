//! Balloon Analogue Risk Task (BART) cognitive models with a Bayesian
//! workflow around them.
//!
//! The crate covers the whole loop for the two BART models (a single
//! participant-level parameter pair, and a hierarchy over conditions):
//!
//! - [`model`]: the model equations, likelihood with pop-censoring, and the
//!   unconstrained parameterizations used for sampling.
//! - [`simulate`]: seeded generative simulation, including prior predictive
//!   checks that either ignore or include the popping mechanism of the task.
//! - [`infer`]: adaptive random-walk Metropolis, split R-hat / bulk ESS,
//!   parameter recovery and simulation-based calibration.
//! - [`compare`]: bridge-sampling marginal likelihoods, Bayes factors,
//!   PSIS-LOO and prior-width sweeps.
//! - [`data`]: dataset CSV I/O, a synthetic three-condition dataset
//!   generator and condition permutation.
//! - [`cli`]: the `bartlab` command-line front end.
//!
//! Every random quantity is drawn from a counter-based substream (see
//! [`rng`]), so results are bit-identical across runs and thread counts.

pub mod cli;
pub mod compare;
pub mod data;
pub mod error;
pub mod infer;
pub mod model;
pub mod plot;
pub mod rng;
pub mod simulate;
pub(crate) mod stats;

pub use error::{Error, Result};
