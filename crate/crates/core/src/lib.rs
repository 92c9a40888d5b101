//! Percent-change credible intervals for A/B experiments.
//!
//! The post-only model gives each arm's mean an independent Student-t
//! posterior. The pre-post model regresses post-period values on the
//! pre-period covariate and integrates over the shared pre-period mean.
//! Both are summarized by crossing equal-probability quantile grids of the
//! component posteriors, which needs no random numbers. A Gibbs sampler of
//! the full pre-post posterior serves as a stochastic reference.
#![no_std]

extern crate alloc;

pub mod error;
pub mod gibbs;
pub mod grid;
pub mod ols;
pub mod post;
pub mod prepost;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod student_t;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use gibbs::{gibbs_percent_change, GibbsConfig, GibbsTrace};
pub use grid::{discretize, AtomSet};
pub use ols::{ols_fit, OlsFit};
pub use post::{
    percent_change, post_percent_change, post_posterior, Group, GroupSample, Method, PercentChangeEstimate,
    DEFAULT_LEVEL, DEFAULT_NODES,
};
pub use prepost::{grid_dump, prepost_percent_change, PrePostSample};
pub use sim::{gen_prepost, permutation_pvalue, SimModel};
pub use stats::{classical_t_interval, equal_weight_quantile, summarize, SampleStats};
pub use student_t::StudentT;
