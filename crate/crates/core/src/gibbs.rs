//! Gibbs sampler for the full pre-post model, used as an oracle for the
//! grid estimator and as its runtime baseline.
//!
//! Unlike the grid, the sampler targets the exact posterior of `μ0`, which
//! also draws information from the post period through the regression.
//!
//! # Full conditionals
//!
//! With `N = n_c + n_t`, `u_ij = x_ij - μ0` and residuals
//! `e_ij = y_ij - μ_j - β_j u_ij`, the unnormalized log posterior is
//!
//! ```text
//! -(N/2 + 1) ln σ0² - Σ (x_ij - μ0)² / 2σ0²
//!   + Σ_j [ -(n_j/2 + 1) ln τ_j² - Σ_i e_ij² / 2τ_j² ]
//! ```
//!
//! Reading off each coordinate:
//!
//! * `σ0² | ·  ~ InvGamma(N/2, Σ (x - μ0)² / 2)`
//! * `τ_j² | · ~ InvGamma(n_j/2, Σ_i e_ij² / 2)`
//! * `(μ_j, β_j) | ·` is the flat-prior regression posterior
//!   `N(θ̂_j, τ_j² (UᵀU)⁻¹)` with design `U = [1, x_j - μ0]`; it is drawn as
//!   `β_j ~ N(β̂_j, τ_j² / S_xx)` followed by
//!   `μ_j | β_j ~ N(ȳ_j - β_j ū_j, τ_j² / n_j)`.
//! * `μ0 | ·` is normal. Writing `r_ij = y_ij - μ_j - β_j x_ij` so that
//!   `e_ij = r_ij + β_j μ0`, the log density is quadratic in `μ0` with
//!   precision `P = N/σ0² + Σ_j n_j β_j² / τ_j²` and mean
//!   `(Σ x / σ0² - Σ_j β_j Σ_i r_ij / τ_j²) / P`.
//!
//! One sweep updates `σ0²`, `μ0`, then for each group `(β_j, μ_j)` and
//! `τ_j²`. Chains start from the sample means, the per-group OLS slopes and
//! the residual variances.

use alloc::vec::Vec;

use libm::sqrt;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::raw_percent_change;
use crate::ols::OlsSummary;
use crate::post::{check_positivity, summary_probabilities, Method, PercentChangeEstimate};
use crate::prepost::PrePostSample;
use crate::rng::{stream_rng, SimRng};
use crate::stats::{check_level, select_quantiles, summarize};

pub const DEFAULT_ITERATIONS: usize = 2000;
pub const DEFAULT_BURNIN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GibbsConfig {
    /// Retained sweeps per chain, after burn-in.
    pub iterations: usize,
    pub burnin: usize,
    pub seed: u64,
    /// Chain `k` uses stream `k` of `seed`.
    pub chains: usize,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            burnin: DEFAULT_BURNIN,
            seed: 0,
            chains: 1,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidInput("iterations must be at least 1"));
        }
        if self.chains == 0 {
            return Err(Error::InvalidInput("chains must be at least 1"));
        }
        Ok(())
    }
}

/// Regression parameters of one group.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroupParams {
    pub mu: f64,
    pub beta: f64,
    pub tau_sq: f64,
}

/// One state of the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GibbsDraw {
    pub chain: usize,
    pub iteration: usize,
    pub mu0: f64,
    pub sigma0_sq: f64,
    pub control: GroupParams,
    pub treatment: GroupParams,
}

impl GibbsDraw {
    pub fn percent_change(&self) -> f64 {
        raw_percent_change(self.treatment.mu, self.control.mu)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GibbsTrace {
    pub draws: Vec<GibbsDraw>,
    pub percent_change: Vec<f64>,
}

/// Shape/scale of an inverse-gamma conditional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvGammaParams {
    pub shape: f64,
    pub scale: f64,
}

impl InvGammaParams {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // Shape is n/2 >= 1.5 and scale > 0 on every reachable state.
        let g: f64 = Gamma::new(self.shape, 1.0)
            .expect("inverse-gamma shape is positive")
            .sample(rng);
        self.scale / g
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalParams {
    pub mean: f64,
    pub variance: f64,
}

impl NormalParams {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mean + sqrt(self.variance) * z
    }
}

pub fn sigma0_sq_conditional(x_c: &[f64], x_t: &[f64], mu0: f64) -> InvGammaParams {
    let ss: f64 = x_c.iter().chain(x_t).map(|x| (x - mu0) * (x - mu0)).sum();
    InvGammaParams {
        shape: 0.5 * (x_c.len() + x_t.len()) as f64,
        scale: 0.5 * ss,
    }
}

pub fn tau_sq_conditional(x: &[f64], y: &[f64], mu0: f64, mu: f64, beta: f64) -> InvGammaParams {
    let ss: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let e = yi - mu - beta * (xi - mu0);
            e * e
        })
        .sum();
    InvGammaParams {
        shape: 0.5 * x.len() as f64,
        scale: 0.5 * ss,
    }
}

pub fn mu0_conditional(
    sample: &PrePostSample,
    sigma0_sq: f64,
    control: &GroupParams,
    treatment: &GroupParams,
) -> NormalParams {
    let n_pre = (sample.x_c.len() + sample.x_t.len()) as f64;
    let sum_x: f64 = sample.x_c.iter().chain(&sample.x_t).sum();
    let mut precision = n_pre / sigma0_sq;
    let mut linear = sum_x / sigma0_sq;
    for (x, y, g) in [
        (&sample.x_c, &sample.y_c, control),
        (&sample.x_t, &sample.y_t, treatment),
    ] {
        let sum_r: f64 = x
            .iter()
            .zip(y.iter())
            .map(|(xi, yi)| yi - g.mu - g.beta * xi)
            .sum();
        precision += x.len() as f64 * g.beta * g.beta / g.tau_sq;
        linear -= g.beta * sum_r / g.tau_sq;
    }
    NormalParams {
        mean: linear / precision,
        variance: 1.0 / precision,
    }
}

/// Conditional of `(μ_j, β_j)`, factored as `β` then `μ | β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionConditional {
    pub beta: NormalParams,
    /// `ȳ` and `ū` so that `μ | β ~ N(ȳ - β ū, τ² / n)`.
    pub y_mean: f64,
    pub u_mean: f64,
    pub mu_variance: f64,
}

impl RegressionConditional {
    pub fn new(x: &[f64], y: &[f64], mu0: f64, tau_sq: f64) -> Self {
        let n = x.len() as f64;
        let x_mean = x.iter().sum::<f64>() / n;
        let y_mean = y.iter().sum::<f64>() / n;
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for (xi, yi) in x.iter().zip(y) {
            let dx = xi - x_mean;
            sxx += dx * dx;
            sxy += dx * (yi - y_mean);
        }
        Self {
            beta: NormalParams {
                mean: sxy / sxx,
                variance: tau_sq / sxx,
            },
            y_mean,
            u_mean: x_mean - mu0,
            mu_variance: tau_sq / n,
        }
    }

    /// Mean of `μ` and the covariance entries `(var μ, cov(μ, β), var β)`.
    pub fn moments(&self) -> (f64, f64, [f64; 3]) {
        let mu_mean = self.y_mean - self.beta.mean * self.u_mean;
        let var_beta = self.beta.variance;
        let cov = -self.u_mean * var_beta;
        let var_mu = self.mu_variance + self.u_mean * self.u_mean * var_beta;
        (mu_mean, self.beta.mean, [var_mu, cov, var_beta])
    }

    /// Returns `(μ, β)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let beta = self.beta.sample(rng);
        let mu = NormalParams {
            mean: self.y_mean - beta * self.u_mean,
            variance: self.mu_variance,
        }
        .sample(rng);
        (mu, beta)
    }
}

fn initial_state(sample: &PrePostSample) -> Result<(f64, GroupParams, GroupParams)> {
    let pooled: Vec<f64> = sample.x_c.iter().chain(&sample.x_t).copied().collect();
    let pre = summarize(&pooled)?;
    if pre.sd == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let mu0 = pre.mean;
    let group = |x: &[f64], y: &[f64]| -> Result<GroupParams> {
        let summary = OlsSummary::new(x, y)?;
        let fit = summary.at_center(mu0);
        if fit.resid_sd == 0.0 {
            return Err(Error::ZeroResidual);
        }
        Ok(GroupParams {
            mu: summary.y_mean(),
            beta: fit.slope,
            tau_sq: fit.resid_sd * fit.resid_sd,
        })
    };
    Ok((
        mu0,
        group(&sample.x_c, &sample.y_c)?,
        group(&sample.x_t, &sample.y_t)?,
    ))
}

fn finite_or_fail(value: f64, iteration: usize, parameter: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NumericalFailure { iteration, parameter })
    }
}

fn positive_or_fail(value: f64, iteration: usize, parameter: &'static str) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::NumericalFailure { iteration, parameter })
    }
}

fn update_group(
    rng: &mut SimRng,
    x: &[f64],
    y: &[f64],
    mu0: f64,
    params: &mut GroupParams,
    iteration: usize,
    names: [&'static str; 3],
) -> Result<()> {
    let (mu, beta) = RegressionConditional::new(x, y, mu0, params.tau_sq).sample(rng);
    params.mu = finite_or_fail(mu, iteration, names[0])?;
    params.beta = finite_or_fail(beta, iteration, names[1])?;
    let tau_sq = tau_sq_conditional(x, y, mu0, params.mu, params.beta).sample(rng);
    params.tau_sq = positive_or_fail(tau_sq, iteration, names[2])?;
    Ok(())
}

/// Runs one chain and calls `keep` on every retained draw.
fn run_chain(
    sample: &PrePostSample,
    rng: &mut SimRng,
    chain: usize,
    burnin: usize,
    iterations: usize,
    mut keep: impl FnMut(GibbsDraw) -> Result<()>,
) -> Result<()> {
    let (mut mu0, mut control, mut treatment) = initial_state(sample)?;
    for iteration in 0..burnin + iterations {
        let s = sigma0_sq_conditional(&sample.x_c, &sample.x_t, mu0).sample(rng);
        let sigma0_sq = positive_or_fail(s, iteration, "sigma0_sq")?;
        let m = mu0_conditional(sample, sigma0_sq, &control, &treatment).sample(rng);
        mu0 = finite_or_fail(m, iteration, "mu0")?;
        update_group(
            rng,
            &sample.x_c,
            &sample.y_c,
            mu0,
            &mut control,
            iteration,
            ["mu_c", "beta_c", "tau_c_sq"],
        )?;
        update_group(
            rng,
            &sample.x_t,
            &sample.y_t,
            mu0,
            &mut treatment,
            iteration,
            ["mu_t", "beta_t", "tau_t_sq"],
        )?;
        if iteration >= burnin {
            keep(GibbsDraw {
                chain,
                iteration: iteration - burnin,
                mu0,
                sigma0_sq,
                control,
                treatment,
            })?;
        }
    }
    Ok(())
}

fn percent_change_of(draw: &GibbsDraw) -> Result<f64> {
    let pc = draw.percent_change();
    if pc.is_finite() {
        Ok(pc)
    } else {
        Err(Error::NumericalFailure {
            iteration: draw.iteration,
            parameter: "percent_change",
        })
    }
}

/// Posterior draws from `config.chains` chains, concatenated in chain
/// order.
pub fn gibbs_trace(sample: &PrePostSample, config: &GibbsConfig) -> Result<GibbsTrace> {
    sample.validate()?;
    config.validate()?;
    let total = config.iterations * config.chains;
    let mut trace = GibbsTrace {
        draws: Vec::with_capacity(total),
        percent_change: Vec::with_capacity(total),
    };
    for chain in 0..config.chains {
        let mut rng = stream_rng(config.seed, chain as u64);
        run_chain(
            sample,
            &mut rng,
            chain,
            config.burnin,
            config.iterations,
            |draw| {
                trace.percent_change.push(percent_change_of(&draw)?);
                trace.draws.push(draw);
                Ok(())
            },
        )?;
    }
    Ok(trace)
}

pub fn gibbs_percent_change(
    sample: &PrePostSample,
    config: &GibbsConfig,
    level: f64,
) -> Result<(PercentChangeEstimate, GibbsTrace)> {
    check_level(level)?;
    let trace = gibbs_trace(sample, config)?;
    let mut scratch = trace.percent_change.clone();
    let q = select_quantiles(&mut scratch, &summary_probabilities(level))?;
    let estimate = PercentChangeEstimate {
        median: q[0],
        ci_lower: q[1],
        ci_upper: q[2],
        level,
        method: Method::Gibbs,
        nodes_or_iterations: trace.percent_change.len(),
        positivity_ok: check_positivity(&summarize(&sample.y_c)?),
    };
    Ok((estimate, trace))
}

/// Running 2.5 % / 50 % / 97.5 % estimates after `iteration` retained
/// draws.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuantilePoint {
    pub iteration: usize,
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrajectory {
    pub seed: u64,
    pub points: Vec<QuantilePoint>,
}

/// Per-chain running quantiles of the percent change; chain `k` is seeded
/// with `seeds[k]` alone.
pub fn chain_stability_report(
    sample: &PrePostSample,
    seeds: &[u64],
    max_iterations: usize,
    burnin: usize,
) -> Result<Vec<ChainTrajectory>> {
    if seeds.len() < 2 {
        return Err(Error::InvalidInput("stability report needs at least two seeds"));
    }
    if max_iterations == 0 {
        return Err(Error::InvalidInput("iterations must be at least 1"));
    }
    sample.validate()?;
    let [_, p_lower, p_upper] = summary_probabilities(0.95);
    seeds
        .iter()
        .map(|&seed| {
            let mut rng = stream_rng(seed, 0);
            let mut sorted: Vec<f64> = Vec::with_capacity(max_iterations);
            let mut points = Vec::with_capacity(max_iterations);
            run_chain(sample, &mut rng, 0, burnin, max_iterations, |draw| {
                let pc = percent_change_of(&draw)?;
                let at = sorted.partition_point(|v| v.total_cmp(&pc).is_le());
                sorted.insert(at, pc);
                let q = |p| crate::stats::sorted_quantile(&sorted, p);
                points.push(QuantilePoint {
                    iteration: draw.iteration + 1,
                    lower: q(p_lower)?,
                    median: q(0.5)?,
                    upper: q(p_upper)?,
                });
                Ok(())
            })?;
            Ok(ChainTrajectory { seed, points })
        })
        .collect()
}

/// Draws of `μ_j` from a chain over `(μ_j, β_j, τ_j²)` of one group with
/// `μ0` held fixed. Its stationary marginal is the conditional posterior
/// used by the grid estimator.
pub fn sample_group_given_mu0(
    x: &[f64],
    y: &[f64],
    mu0: f64,
    iterations: usize,
    burnin: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let fit = OlsSummary::new(x, y)?.at_center(mu0);
    let mut params = GroupParams {
        mu: fit.intercept,
        beta: fit.slope,
        tau_sq: fit.resid_sd * fit.resid_sd,
    };
    if !(params.tau_sq > 0.0) {
        return Err(Error::ZeroResidual);
    }
    let mut rng = stream_rng(seed, 0);
    let mut out = Vec::with_capacity(iterations);
    for iteration in 0..burnin + iterations {
        update_group(
            &mut rng,
            x,
            y,
            mu0,
            &mut params,
            iteration,
            ["mu", "beta", "tau_sq"],
        )?;
        if iteration >= burnin {
            out.push(params.mu);
        }
    }
    Ok(out)
}
