//! Synthetic experiments: the bivariate-normal bucket generator, the
//! pre-period permutation test and the coverage and width campaigns.
//!
//! Campaign functions here run sequentially. Each replicate is a pure
//! function of `(master seed, replicate index)`, so callers may evaluate
//! replicates in any order or in parallel and aggregate in index order.

use alloc::vec::Vec;

use libm::sqrt;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::post::{post_percent_change, Group, GroupSample, PercentChangeEstimate};
use crate::prepost::{prepost_percent_change, PrePostSample};
use crate::rng::{derive_seed, stream_rng, SimRng};
use crate::stats::{check_level, mean_sd};
use crate::student_t::normal_quantile;

pub const DEFAULT_PERMUTATIONS: usize = 999;
pub const DEFAULT_BUCKETS: usize = 10;
pub const MIN_PERMUTATIONS: usize = 100;

/// Bucket-level generator: per group `n_per_group` pairs with
/// `X ~ N(mu0, sigma0²)` and `Y ~ N(mu_j, sigma²)`, `cor(X, Y) = rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimModel {
    pub mu0: f64,
    pub sigma0: f64,
    pub mu_c: f64,
    pub mu_t: f64,
    pub sigma: f64,
    pub rho: f64,
    pub n_per_group: usize,
    pub seed: u64,
}

impl SimModel {
    /// 100 vs 110 with unit variances, correlation 0.8 and 20 buckets per
    /// group.
    pub fn appendix() -> Self {
        Self {
            mu0: 100.0,
            sigma0: 1.0,
            mu_c: 100.0,
            mu_t: 110.0,
            sigma: 1.0,
            rho: 0.8,
            n_per_group: 20,
            seed: 0,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.mu0, self.sigma0, self.mu_c, self.mu_t, self.sigma, self.rho]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput("model parameters must be finite"));
        }
        if !(self.sigma0 > 0.0 && self.sigma > 0.0) {
            return Err(Error::InvalidInput("standard deviations must be positive"));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::InvalidInput("rho must lie in (-1, 1)"));
        }
        if self.n_per_group < 3 {
            return Err(Error::InvalidInput("n_per_group must be at least 3"));
        }
        Ok(())
    }

    /// True percent change of the post-period means.
    pub fn true_percent_change(&self) -> f64 {
        crate::grid::raw_percent_change(self.mu_t, self.mu_c)
    }
}

fn gen_group(model: &SimModel, mu: f64, rng: &mut SimRng) -> (Vec<f64>, Vec<f64>) {
    let beta = model.rho * model.sigma / model.sigma0;
    let resid_sd = model.sigma * sqrt(1.0 - model.rho * model.rho);
    let mut x = Vec::with_capacity(model.n_per_group);
    let mut y = Vec::with_capacity(model.n_per_group);
    for _ in 0..model.n_per_group {
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        let dx = model.sigma0 * z1;
        x.push(model.mu0 + dx);
        y.push(mu + beta * dx + resid_sd * z2);
    }
    (x, y)
}

/// One simulated experiment; control pairs are drawn before treatment
/// pairs from stream 0 of `model.seed`.
pub fn gen_prepost(model: &SimModel) -> Result<PrePostSample> {
    model.validate()?;
    let mut rng = stream_rng(model.seed, 0);
    let (x_c, y_c) = gen_group(model, model.mu_c, &mut rng);
    let (x_t, y_t) = gen_group(model, model.mu_t, &mut rng);
    PrePostSample::new(x_c, y_c, x_t, y_t)
}

/// Dataset `index` of a campaign seeded with `master`.
pub fn replicate_sample(model: &SimModel, master: u64, index: u64) -> Result<PrePostSample> {
    gen_prepost(&model.with_seed(derive_seed(master, index)))
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
        if acc == u128::MAX {
            break;
        }
    }
    acc
}

struct PermutationTest {
    pooled: Vec<f64>,
    n_a: usize,
    total: f64,
    observed: f64,
    tolerance: f64,
}

impl PermutationTest {
    fn new(a: &[f64], b: &[f64]) -> Result<Self> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidInput("permutation test needs two nonempty samples"));
        }
        let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
        if pooled.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("sample values must be finite"));
        }
        let total: f64 = pooled.iter().sum();
        let scale = pooled.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut test = Self {
            n_a: a.len(),
            total,
            observed: 0.0,
            // Rounding noise of a regrouped sum, so that relabelings with
            // the same partition count as ties.
            tolerance: 8.0 * pooled.len() as f64 * f64::EPSILON * scale,
            pooled,
        };
        test.observed = test.statistic(a.iter().sum());
        Ok(test)
    }

    fn statistic(&self, sum_a: f64) -> f64 {
        let n_b = (self.pooled.len() - self.n_a) as f64;
        (sum_a / self.n_a as f64 - (self.total - sum_a) / n_b).abs()
    }

    fn extreme(&self, sum_a: f64) -> bool {
        self.statistic(sum_a) >= self.observed - self.tolerance
    }

    /// Every subset of size `n_a` in lexicographic order.
    fn exhaustive(&self) -> f64 {
        let n = self.pooled.len();
        let k = self.n_a;
        let mut idx: Vec<usize> = (0..k).collect();
        let (mut hits, mut count) = (0u64, 0u64);
        loop {
            let sum: f64 = idx.iter().map(|&i| self.pooled[i]).sum();
            count += 1;
            if self.extreme(sum) {
                hits += 1;
            }
            let mut i = k;
            loop {
                if i == 0 {
                    return hits as f64 / count as f64;
                }
                i -= 1;
                if idx[i] != i + n - k {
                    break;
                }
            }
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }

    fn monte_carlo(&self, n_perm: usize, rng: &mut SimRng) -> f64 {
        let mut hits = 1usize;
        let mut work = self.pooled.clone();
        for _ in 0..n_perm {
            let (chosen, _) = work.partial_shuffle(rng, self.n_a);
            let sum: f64 = chosen.iter().sum();
            if self.extreme(sum) {
                hits += 1;
            }
        }
        hits as f64 / (n_perm + 1) as f64
    }
}

/// Two-sided permutation p-value for the difference in means.
///
/// When the number of distinct relabelings is at most `n_perm` they are
/// enumerated and the observed labeling is one of them; otherwise `n_perm`
/// random relabelings give `(1 + hits) / (n_perm + 1)`.
pub fn permutation_pvalue(a: &[f64], b: &[f64], n_perm: usize, seed: u64) -> Result<f64> {
    permutation_pvalue_with_rng(a, b, n_perm, &mut stream_rng(seed, 0))
}

pub fn permutation_pvalue_with_rng(a: &[f64], b: &[f64], n_perm: usize, rng: &mut SimRng) -> Result<f64> {
    if n_perm < MIN_PERMUTATIONS {
        return Err(Error::InvalidInput("n_perm must be at least 100"));
    }
    let test = PermutationTest::new(a, b)?;
    if binomial(a.len() + b.len(), a.len()) <= n_perm as u128 {
        Ok(test.exhaustive())
    } else {
        Ok(test.monte_carlo(n_perm, rng))
    }
}

/// Per-replicate result of the A/A coverage campaign.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoverageOutcome {
    pub p_value: f64,
    pub post_covers: bool,
    pub post_sq_error: f64,
    pub prepost_covers: bool,
    pub prepost_sq_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageSettings {
    pub buckets: usize,
    pub level: f64,
    pub nodes: usize,
    pub n_perm: usize,
}

impl Default for CoverageSettings {
    fn default() -> Self {
        Self {
            buckets: DEFAULT_BUCKETS,
            level: crate::post::DEFAULT_LEVEL,
            nodes: crate::post::DEFAULT_NODES,
            n_perm: DEFAULT_PERMUTATIONS,
        }
    }
}

fn check_aa(model: &SimModel) -> Result<()> {
    model.validate()?;
    if model.mu_t != model.mu_c {
        return Err(Error::InvalidInput("coverage study needs mu_t == mu_c"));
    }
    Ok(())
}

/// Replicate `index` of the coverage campaign seeded with `model.seed`.
pub fn coverage_replicate(
    model: &SimModel,
    settings: &CoverageSettings,
    index: u64,
) -> Result<CoverageOutcome> {
    check_aa(model)?;
    let seed = derive_seed(model.seed, index);
    let sample = gen_prepost(&model.with_seed(seed))?;
    let p_value = permutation_pvalue(&sample.x_c, &sample.x_t, settings.n_perm, derive_seed(seed, 1))?;
    let post = post_percent_change(
        &GroupSample::new(Group::Control, sample.y_c.clone()),
        &GroupSample::new(Group::Treatment, sample.y_t.clone()),
        settings.nodes,
        settings.level,
    )?;
    let prepost = prepost_percent_change(&sample, settings.nodes, settings.level)?;
    Ok(CoverageOutcome {
        p_value,
        post_covers: post.covers(0.0),
        post_sq_error: post.median * post.median,
        prepost_covers: prepost.covers(0.0),
        prepost_sq_error: prepost.median * prepost.median,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MethodCell {
    pub covered: usize,
    pub sq_error_sum: f64,
}

impl MethodCell {
    fn add(&mut self, covers: bool, sq_error: f64) {
        self.covered += covers as usize;
        self.sq_error_sum += sq_error;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoverageBucket {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub post: MethodCell,
    pub prepost: MethodCell,
}

impl CoverageBucket {
    fn rate(&self, covered: usize) -> Option<f64> {
        (self.count > 0).then(|| covered as f64 / self.count as f64)
    }

    pub fn post_coverage(&self) -> Option<f64> {
        self.rate(self.post.covered)
    }

    pub fn prepost_coverage(&self) -> Option<f64> {
        self.rate(self.prepost.covered)
    }

    pub fn post_mse(&self) -> Option<f64> {
        (self.count > 0).then(|| self.post.sq_error_sum / self.count as f64)
    }

    pub fn prepost_mse(&self) -> Option<f64> {
        (self.count > 0).then(|| self.prepost.sq_error_sum / self.count as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoverageReport {
    pub level: f64,
    pub buckets: Vec<CoverageBucket>,
}

impl CoverageReport {
    /// Equal-width p-value buckets on `[0, 1]`; `p = 1` joins the last.
    pub fn from_outcomes(outcomes: &[CoverageOutcome], buckets: usize, level: f64) -> Result<Self> {
        if buckets == 0 {
            return Err(Error::InvalidInput("buckets must be at least 1"));
        }
        let mut cells: Vec<CoverageBucket> = (0..buckets)
            .map(|b| CoverageBucket {
                lower: b as f64 / buckets as f64,
                upper: (b + 1) as f64 / buckets as f64,
                count: 0,
                post: MethodCell::default(),
                prepost: MethodCell::default(),
            })
            .collect();
        for o in outcomes {
            let b = ((o.p_value * buckets as f64) as usize).min(buckets - 1);
            let cell = &mut cells[b];
            cell.count += 1;
            cell.post.add(o.post_covers, o.post_sq_error);
            cell.prepost.add(o.prepost_covers, o.prepost_sq_error);
        }
        Ok(Self {
            level,
            buckets: cells,
        })
    }

    pub fn total(&self) -> usize {
        self.buckets.iter().map(|b| b.count).sum()
    }
}

/// Two-sided 99 % normal-approximation band for a binomial proportion.
pub fn coverage_band(nominal: f64, count: usize) -> (f64, f64) {
    let half = normal_quantile(0.995) * sqrt(nominal * (1.0 - nominal) / count as f64);
    (nominal - half, nominal + half)
}

pub fn coverage_study(
    model: &SimModel,
    replicates: usize,
    settings: &CoverageSettings,
) -> Result<CoverageReport> {
    check_aa(model)?;
    check_level(settings.level)?;
    let outcomes = (0..replicates as u64)
        .map(|i| coverage_replicate(model, settings, i))
        .collect::<Result<Vec<_>>>()?;
    CoverageReport::from_outcomes(&outcomes, settings.buckets, settings.level)
}

/// Post and Pre-Post interval widths for one dataset.
pub fn width_replicate(
    model: &SimModel,
    master: u64,
    index: u64,
    nodes: usize,
    level: f64,
) -> Result<(f64, f64)> {
    let sample = replicate_sample(model, master, index)?;
    let post = post_percent_change(
        &GroupSample::new(Group::Control, sample.y_c.clone()),
        &GroupSample::new(Group::Treatment, sample.y_t.clone()),
        nodes,
        level,
    )?;
    let prepost = prepost_percent_change(&sample, nodes, level)?;
    Ok((post.width(), prepost.width()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WidthCell {
    pub n_per_group: usize,
    pub rho: f64,
    pub replicates: usize,
    pub post_width: f64,
    pub prepost_width: f64,
}

impl WidthCell {
    pub fn from_widths(model: &SimModel, widths: &[(f64, f64)]) -> Self {
        let k = widths.len() as f64;
        Self {
            n_per_group: model.n_per_group,
            rho: model.rho,
            replicates: widths.len(),
            post_width: widths.iter().map(|w| w.0).sum::<f64>() / k,
            prepost_width: widths.iter().map(|w| w.1).sum::<f64>() / k,
        }
    }

    pub fn ratio(&self) -> f64 {
        self.prepost_width / self.post_width
    }
}

/// Mean widths over the grid `n_values × rho_values`. Replicate `r` of
/// every cell uses the same derived seed.
pub fn width_scaling_study(
    base: &SimModel,
    n_values: &[usize],
    rho_values: &[f64],
    replicates: usize,
    nodes: usize,
    level: f64,
) -> Result<Vec<WidthCell>> {
    if replicates == 0 {
        return Err(Error::InvalidInput("replicates must be at least 1"));
    }
    let mut cells = Vec::with_capacity(n_values.len() * rho_values.len());
    for &n in n_values {
        for &rho in rho_values {
            let model = SimModel {
                n_per_group: n,
                rho,
                ..*base
            };
            let widths = (0..replicates as u64)
                .map(|r| width_replicate(&model, base.seed, r, nodes, level))
                .collect::<Result<Vec<_>>>()?;
            cells.push(WidthCell::from_widths(&model, &widths));
        }
    }
    Ok(cells)
}

/// Mean and `n - 1` standard deviation of one benchmark column.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Self {
        let (mean, sd) = mean_sd(values);
        Self { mean, sd }
    }
}

/// Dataset `index` of the grid-versus-sampler benchmark, with the sampler
/// seed paired to it.
pub fn benchmark_dataset(model: &SimModel, master: u64, index: u64) -> Result<(PrePostSample, u64)> {
    let seed = derive_seed(master, index);
    Ok((gen_prepost(&model.with_seed(seed))?, derive_seed(seed, 1)))
}

/// Interval width and point estimate of the grid (DA) and sampler (GS)
/// estimates over the same datasets, and of their paired differences.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Table1 {
    pub datasets: usize,
    pub da_width: MeanSd,
    pub da_estimate: MeanSd,
    pub gs_width: MeanSd,
    pub gs_estimate: MeanSd,
    pub diff_width: MeanSd,
    pub diff_estimate: MeanSd,
}

impl Table1 {
    pub fn from_estimates(da: &[PercentChangeEstimate], gs: &[PercentChangeEstimate]) -> Result<Self> {
        if da.is_empty() || da.len() != gs.len() {
            return Err(Error::InvalidInput(
                "benchmark needs one sampler estimate per grid estimate",
            ));
        }
        let column = |v: &[PercentChangeEstimate], f: fn(&PercentChangeEstimate) -> f64| {
            v.iter().map(f).collect::<Vec<f64>>()
        };
        let paired = |f: fn(&PercentChangeEstimate) -> f64| {
            da.iter().zip(gs).map(|(a, b)| f(a) - f(b)).collect::<Vec<f64>>()
        };
        Ok(Self {
            datasets: da.len(),
            da_width: MeanSd::of(&column(da, PercentChangeEstimate::width)),
            da_estimate: MeanSd::of(&column(da, |e| e.median)),
            gs_width: MeanSd::of(&column(gs, PercentChangeEstimate::width)),
            gs_estimate: MeanSd::of(&column(gs, |e| e.median)),
            diff_width: MeanSd::of(&paired(PercentChangeEstimate::width)),
            diff_estimate: MeanSd::of(&paired(|e| e.median)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sample() {
        let m = SimModel::appendix().with_seed(11);
        assert_eq!(gen_prepost(&m).unwrap(), gen_prepost(&m).unwrap());
        assert_ne!(gen_prepost(&m).unwrap(), gen_prepost(&m.with_seed(12)).unwrap());
    }

    #[test]
    fn invalid_models() {
        let m = SimModel::appendix();
        for bad in [
            SimModel { rho: 1.0, ..m },
            SimModel { sigma: 0.0, ..m },
            SimModel { sigma0: -1.0, ..m },
            SimModel { n_per_group: 2, ..m },
            SimModel { mu0: f64::NAN, ..m },
        ] {
            assert!(matches!(gen_prepost(&bad), Err(Error::InvalidInput(_))));
        }
    }

    #[test]
    fn maximal_separation_gives_minimum_pvalue() {
        let a = [0.0; 5];
        let b = [100.0; 5];
        let p = permutation_pvalue(&a, &b, 999, 1).unwrap();
        // 252 relabelings, two of which are as extreme as the observed one.
        assert_eq!(p, 2.0 / 252.0);
    }

    #[test]
    fn identical_samples_give_pvalue_one() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0];
        let p = permutation_pvalue(&a, &a, 100_000, 3).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn monte_carlo_pvalue_is_in_range() {
        let a: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..30).map(|i| i as f64 + 3.0).collect();
        let p = permutation_pvalue(&a, &b, 999, 5).unwrap();
        assert!((1.0 / 1000.0..=1.0).contains(&p));
        assert_eq!(p, permutation_pvalue(&a, &b, 999, 5).unwrap());
        assert_eq!((p * 1000.0).round(), p * 1000.0);
    }

    #[test]
    fn permutation_errors() {
        assert!(permutation_pvalue(&[], &[1.0], 999, 0).is_err());
        assert!(permutation_pvalue(&[1.0], &[2.0], 99, 0).is_err());
    }

    #[test]
    fn binomial_counts() {
        assert_eq!(binomial(10, 5), 252);
        assert_eq!(binomial(40, 20), 137_846_528_820);
        assert_eq!(binomial(7, 0), 1);
    }

    #[test]
    fn report_buckets() {
        let o = |p, c| CoverageOutcome {
            p_value: p,
            post_covers: c,
            post_sq_error: 4.0,
            prepost_covers: true,
            prepost_sq_error: 1.0,
        };
        let outcomes = [o(0.001, false), o(0.05, true), o(0.5, true), o(1.0, true)];
        let r = CoverageReport::from_outcomes(&outcomes, 10, 0.95).unwrap();
        assert_eq!(r.total(), 4);
        assert_eq!(r.buckets[0].count, 2);
        assert_eq!(r.buckets[0].post_coverage(), Some(0.5));
        assert_eq!(r.buckets[0].prepost_mse(), Some(1.0));
        assert_eq!(r.buckets[9].count, 1);
        assert_eq!(r.buckets[3].post_coverage(), None);
    }

    #[test]
    fn coverage_requires_aa() {
        let m = SimModel::appendix();
        assert!(coverage_study(&m, 10, &CoverageSettings::default()).is_err());
    }

    #[test]
    fn table1_differences_are_paired() {
        let est = |median: f64, lo: f64, hi: f64| PercentChangeEstimate {
            median,
            ci_lower: lo,
            ci_upper: hi,
            level: 0.95,
            method: crate::post::Method::PrePost,
            nodes_or_iterations: 50,
            positivity_ok: true,
        };
        let da = [est(10.0, 9.5, 10.5), est(11.0, 10.0, 12.0)];
        let gs = [est(10.5, 9.9, 10.7), est(10.0, 9.0, 11.2)];
        let t = Table1::from_estimates(&da, &gs).unwrap();
        assert_eq!(t.datasets, 2);
        assert_eq!(t.da_estimate.mean, 10.5);
        assert_eq!(t.diff_estimate.mean, 0.25);
        assert!(t.diff_width.mean.abs() < 1e-12);
        assert!(Table1::from_estimates(&da, &gs[..1]).is_err());
    }
}
