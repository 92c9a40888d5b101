//! Percent change from post-period data only.
//!
//! Under the independent reference priors `1/σ_c² · 1/σ_t²` the two group
//! means have independent t posteriors `t_{n-1}(ȳ, s/√n)`. Their `D`-node
//! quantile grids are crossed into `D²` equal-weight percent-change atoms.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{AtomSet, StandardNodes};
use crate::stats::{check_level, summarize, SampleStats};
use crate::student_t::StudentT;

pub const DEFAULT_NODES: usize = 50;
pub const DEFAULT_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Group {
    Control,
    Treatment,
}

impl Group {
    pub fn as_str(&self) -> &'static str {
        match self {
            Group::Control => "control",
            Group::Treatment => "treatment",
        }
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "control" => Ok(Group::Control),
            "treatment" => Ok(Group::Treatment),
            _ => Err(Error::InvalidInput("group must be `control` or `treatment`")),
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    Post,
    PrePost,
    Gibbs,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Post => "post",
            Method::PrePost => "prepost",
            Method::Gibbs => "gibbs",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "post" => Ok(Method::Post),
            "prepost" => Ok(Method::PrePost),
            "gibbs" => Ok(Method::Gibbs),
            _ => Err(Error::InvalidInput("method must be `post`, `prepost` or `gibbs`")),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Post-period observations of one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSample {
    pub label: Group,
    pub values: Vec<f64>,
}

impl GroupSample {
    pub fn new(label: Group, values: Vec<f64>) -> Self {
        Self { label, values }
    }
}

/// Point estimate and equal-tailed credible interval for the percent
/// change, all in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PercentChangeEstimate {
    pub median: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub level: f64,
    pub method: Method,
    /// Grid nodes `D` for the deterministic methods, retained draws for
    /// the sampler.
    pub nodes_or_iterations: usize,
    /// Whether the control mean clears five standard errors.
    pub positivity_ok: bool,
}

impl PercentChangeEstimate {
    pub fn width(&self) -> f64 {
        self.ci_upper - self.ci_lower
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_lower <= value && value <= self.ci_upper
    }
}

/// `t_{n-1}(ȳ, s/√n)` for one group's post-period values.
pub fn post_posterior(group: &GroupSample) -> Result<StudentT> {
    summarize(&group.values)?.mean_posterior()
}

/// Rule of thumb for a usable percent change: `ȳ_c > 5 · SE(ȳ_c)`.
pub fn check_positivity(control: &SampleStats) -> bool {
    control.mean > 5.0 * control.standard_error()
}

/// `100 · (mu_t - mu_c) / mu_c`.
pub fn percent_change(mu_t: f64, mu_c: f64) -> Result<f64> {
    if mu_c == 0.0 {
        return Err(Error::DivisionByZero);
    }
    Ok(crate::grid::raw_percent_change(mu_t, mu_c))
}

/// Probabilities of the median and the two interval endpoints.
pub(crate) fn summary_probabilities(level: f64) -> [f64; 3] {
    [0.5, 0.5 * (1.0 - level), 0.5 * (1.0 + level)]
}

pub(crate) fn estimate_from_atoms(
    atoms: &AtomSet,
    level: f64,
    method: Method,
    nodes: usize,
    positivity_ok: bool,
) -> Result<PercentChangeEstimate> {
    let q = atoms.quantiles(&summary_probabilities(level))?;
    Ok(PercentChangeEstimate {
        median: q[0],
        ci_lower: q[1],
        ci_upper: q[2],
        level,
        method,
        nodes_or_iterations: nodes,
        positivity_ok,
    })
}

pub(crate) fn check_nodes(nodes: usize) -> Result<()> {
    if nodes < 2 {
        Err(Error::InvalidInput("grid needs at least 2 nodes"))
    } else {
        Ok(())
    }
}

/// Post-only grid estimate: `D` nodes per group, `D²` atoms.
pub fn post_percent_change(
    control: &GroupSample,
    treatment: &GroupSample,
    nodes: usize,
    level: f64,
) -> Result<PercentChangeEstimate> {
    check_nodes(nodes)?;
    check_level(level)?;
    let control_stats = summarize(&control.values)?;
    let control_post = control_stats.mean_posterior()?;
    let treatment_post = post_posterior(treatment)?;

    let control_nodes = StandardNodes::new(control_post.df(), nodes)?;
    let treatment_nodes = if treatment_post.df() == control_post.df() {
        control_nodes.clone()
    } else {
        StandardNodes::new(treatment_post.df(), nodes)?
    };
    let atoms = AtomSet::new(
        nodes,
        treatment_nodes.scaled(treatment_post.location(), treatment_post.scale()),
        control_nodes.scaled(control_post.location(), control_post.scale()),
    )?;
    estimate_from_atoms(
        &atoms,
        level,
        Method::Post,
        nodes,
        check_positivity(&control_stats),
    )
}
