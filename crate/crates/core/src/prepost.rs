//! Percent change with a single pre-period covariate.
//!
//! Model, per group `j`:
//!
//! ```text
//! X_ij ~ N(μ0, σ0²)
//! Y_ij | X_ij = x ~ N(μ_j + β_j (x - μ0), τ_j²)
//! prior ∝ 1/σ0² · 1/τ_c² · 1/τ_t²
//! ```
//!
//! The joint posterior of `(μ_t, μ_c)` integrates the product of the two
//! conditional posteriors `μ_j | x_j, y_j, μ0` against the posterior of
//! `μ0`. The grid estimator replaces the latter by the pre-period-only
//! pseudo-posterior `t_{N-1}(x̄, s_x/√N)` and discretizes all three
//! distributions into `D` quantile nodes, giving `D³` equal-weight atoms.
//!
//! Given `μ0`, the regression of `y` on `x - μ0` has intercept `μ_j`, and
//! under the flat prior on `(μ_j, β_j)` and `1/τ_j²` its marginal posterior
//! is `t_{n-2}(μ̂_j, τ̂_j · z_j)` with
//! `z_j = sqrt(Σ(x - μ0)² / (n (n-1) s_x,j²))`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{discretize, raw_percent_change, AtomSet, StandardNodes};
use crate::ols::{OlsFit, OlsSummary};
use crate::post::{check_nodes, check_positivity, estimate_from_atoms, Method, PercentChangeEstimate};
use crate::stats::{check_level, summarize};
use crate::student_t::StudentT;

/// Largest `D` for which [`grid_dump`] materializes the `D³` atoms.
pub const GRID_DUMP_MAX_NODES: usize = 200;

/// Paired pre/post observations of both arms. Index `i` of `x_c` and
/// `y_c` belong to the same bucket; likewise for treatment.
#[derive(Debug, Clone, PartialEq)]
pub struct PrePostSample {
    pub x_c: Vec<f64>,
    pub y_c: Vec<f64>,
    pub x_t: Vec<f64>,
    pub y_t: Vec<f64>,
}

impl PrePostSample {
    pub fn new(x_c: Vec<f64>, y_c: Vec<f64>, x_t: Vec<f64>, y_t: Vec<f64>) -> Result<Self> {
        let sample = Self { x_c, y_c, x_t, y_t };
        sample.validate()?;
        Ok(sample)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_c.len() != self.y_c.len() || self.x_t.len() != self.y_t.len() {
            return Err(Error::InvalidInput("pre and post values must be paired"));
        }
        let smallest = self.x_c.len().min(self.x_t.len());
        if smallest < 3 {
            return Err(Error::InsufficientData {
                needed: 3,
                got: smallest,
            });
        }
        if [&self.x_c, &self.y_c, &self.x_t, &self.y_t]
            .iter()
            .any(|v| v.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::InvalidInput("values must be finite"));
        }
        Ok(())
    }

    pub fn n_control(&self) -> usize {
        self.x_c.len()
    }

    pub fn n_treatment(&self) -> usize {
        self.x_t.len()
    }

    /// Every stream multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let s = |v: &[f64]| v.iter().map(|x| x * k).collect();
        Self {
            x_c: s(&self.x_c),
            y_c: s(&self.y_c),
            x_t: s(&self.x_t),
            y_t: s(&self.y_t),
        }
    }
}

/// Posterior of `μ0` from the pooled pre-period alone.
pub fn mu0_pseudo_posterior(x_c: &[f64], x_t: &[f64]) -> Result<StudentT> {
    let pooled: Vec<f64> = x_c.iter().chain(x_t).copied().collect();
    summarize(&pooled)?.mean_posterior()
}

/// Regression of one group with its residual spread verified non-zero.
#[derive(Debug, Clone, Copy)]
struct GroupRegression {
    summary: OlsSummary,
}

impl GroupRegression {
    fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        let summary = OlsSummary::new(x, y)?;
        let y_scale = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        // Residuals at rounding level mean an exact linear relation.
        if summary.resid_sd() <= 16.0 * f64::EPSILON * y_scale {
            return Err(Error::ZeroResidual);
        }
        Ok(Self { summary })
    }

    fn df(&self) -> f64 {
        (self.summary.n() - 2) as f64
    }

    fn location_scale(fit: &OlsFit) -> (f64, f64) {
        (fit.intercept, fit.resid_sd * fit.intercept_scale)
    }

    fn at(&self, mu0: f64) -> (f64, f64) {
        Self::location_scale(&self.summary.at_center(mu0))
    }

    fn posterior(&self, mu0: f64) -> Result<StudentT> {
        let (location, scale) = self.at(mu0);
        StudentT::new(self.df(), location, scale)
    }
}

/// `μ_j | x, y, μ0 ~ t_{n-2}(μ̂_j, τ̂_j · z_j)`.
pub fn conditional_mu_posterior(x: &[f64], y: &[f64], mu0: f64) -> Result<StudentT> {
    if !mu0.is_finite() {
        return Err(Error::InvalidInput("mu0 must be finite"));
    }
    GroupRegression::new(x, y)?.posterior(mu0)
}

/// All pieces of a `D³` grid before quantile extraction.
struct Grid {
    mu0_nodes: Vec<f64>,
    control: GroupRegression,
    treatment: GroupRegression,
    atoms: AtomSet,
}

fn build_grid(sample: &PrePostSample, nodes: usize) -> Result<Grid> {
    sample.validate()?;
    let mu0_post = mu0_pseudo_posterior(&sample.x_c, &sample.x_t)?;
    let mu0_nodes = discretize(&mu0_post, nodes)?;
    let control = GroupRegression::new(&sample.x_c, &sample.y_c)?;
    let treatment = GroupRegression::new(&sample.x_t, &sample.y_t)?;

    let control_std = StandardNodes::new(control.df(), nodes)?;
    let treatment_std = if treatment.df() == control.df() {
        control_std.clone()
    } else {
        StandardNodes::new(treatment.df(), nodes)?
    };

    let total = nodes * nodes;
    let mut control_nodes = Vec::with_capacity(total);
    let mut treatment_nodes = Vec::with_capacity(total);
    for &mu0 in &mu0_nodes {
        let (loc, scale) = control.at(mu0);
        control_std.extend_scaled(loc, scale, &mut control_nodes);
        let (loc, scale) = treatment.at(mu0);
        treatment_std.extend_scaled(loc, scale, &mut treatment_nodes);
    }
    let atoms = AtomSet::new(nodes, treatment_nodes, control_nodes)?;
    Ok(Grid {
        mu0_nodes,
        control,
        treatment,
        atoms,
    })
}

/// Deterministic grid estimate of the pre-post percent change.
pub fn prepost_percent_change(
    sample: &PrePostSample,
    nodes: usize,
    level: f64,
) -> Result<PercentChangeEstimate> {
    check_nodes(nodes)?;
    check_level(level)?;
    let grid = build_grid(sample, nodes)?;
    let positivity_ok = check_positivity(&summarize(&sample.y_c)?);
    estimate_from_atoms(&grid.atoms, level, Method::PrePost, nodes, positivity_ok)
}

/// One `(μ_t, μ_c)` grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridAtom {
    pub mu0_index: usize,
    pub mu_t: f64,
    pub mu_c: f64,
    pub percent_change: f64,
}

/// Fully materialized `D³` grid, for inspection and figure export.
#[derive(Debug, Clone, PartialEq)]
pub struct GridApproximation {
    pub nodes: usize,
    pub mu0_nodes: Vec<f64>,
    /// `(control, treatment)` conditional posterior at each `μ0` node.
    pub conditional_posteriors: Vec<(StudentT, StudentT)>,
    pub atoms: Vec<GridAtom>,
}

impl GridApproximation {
    pub fn percent_changes(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.percent_change)
    }
}

pub fn grid_dump(sample: &PrePostSample, nodes: usize) -> Result<GridApproximation> {
    check_nodes(nodes)?;
    if nodes > GRID_DUMP_MAX_NODES {
        return Err(Error::RefusedSize {
            nodes,
            max: GRID_DUMP_MAX_NODES,
        });
    }
    let grid = build_grid(sample, nodes)?;
    let conditional_posteriors = grid
        .mu0_nodes
        .iter()
        .map(|&mu0| Ok((grid.control.posterior(mu0)?, grid.treatment.posterior(mu0)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut atoms = Vec::with_capacity(grid.atoms.len());
    for (mu0_index, (ts, cs)) in grid.atoms.block_pairs().enumerate() {
        for &mu_c in cs {
            for &mu_t in ts {
                atoms.push(GridAtom {
                    mu0_index,
                    mu_t,
                    mu_c,
                    percent_change: raw_percent_change(mu_t, mu_c),
                });
            }
        }
    }
    Ok(GridApproximation {
        nodes,
        mu0_nodes: grid.mu0_nodes,
        conditional_posteriors,
        atoms,
    })
}
