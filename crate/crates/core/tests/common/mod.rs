//! Monte Carlo reference for the grid estimators, written against the model
//! definitions only: t draws come from `rand_distr` and regressions are
//! refit from scratch for every draw of the pre-period mean.
#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StudentT};

pub struct McQuantile {
    pub value: f64,
    pub se: f64,
}

/// Hazen-convention quantile of sorted data.
pub fn hazen(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = n as f64 * p + 0.5;
    if h <= 1.0 {
        return sorted[0];
    }
    if h >= n as f64 {
        return sorted[n - 1];
    }
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1])
}

/// Quantile with its asymptotic standard error
/// `sqrt(p(1-p)/N) / f(q)`, the density taken from a central difference
/// of the empirical quantile function.
pub fn quantile_with_se(sorted: &[f64], p: f64) -> McQuantile {
    let h = 0.005;
    let slope = (hazen(sorted, p + h) - hazen(sorted, p - h)) / (2.0 * h);
    McQuantile {
        value: hazen(sorted, p),
        se: (p * (1.0 - p) / sorted.len() as f64).sqrt() * slope,
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let ss = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    (m, (ss / (n - 1.0)).sqrt())
}

fn t_sampler(df: f64) -> StudentT<f64> {
    StudentT::new(df).unwrap()
}

/// Draws of `100 (μ_t/μ_c − 1)` under independent `t_{n-1}(ȳ, s/√n)`
/// posteriors, sorted.
pub fn post_draws(control: &[f64], treatment: &[f64], draws: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mc, sc) = mean_sd(control);
    let (mt, st) = mean_sd(treatment);
    let (nc, nt) = (control.len() as f64, treatment.len() as f64);
    let tc = t_sampler(nc - 1.0);
    let tt = t_sampler(nt - 1.0);
    let mut out: Vec<f64> = (0..draws)
        .map(|_| {
            let mu_c = mc + sc / nc.sqrt() * tc.sample(&mut rng);
            let mu_t = mt + st / nt.sqrt() * tt.sample(&mut rng);
            100.0 * (mu_t / mu_c - 1.0)
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Intercept at `center` and its standard error for `y ~ a + b (x - center)`.
fn intercept_and_se(x: &[f64], y: &[f64], center: f64) -> (f64, f64) {
    let n = x.len() as f64;
    let u: Vec<f64> = x.iter().map(|v| v - center).collect();
    let su: f64 = u.iter().sum();
    let suu: f64 = u.iter().map(|v| v * v).sum();
    let sy: f64 = y.iter().sum();
    let suy: f64 = u.iter().zip(y).map(|(a, b)| a * b).sum();
    let det = n * suu - su * su;
    let a = (suu * sy - su * suy) / det;
    let b = (n * suy - su * sy) / det;
    let rss: f64 = u.iter().zip(y).map(|(ui, yi)| (yi - a - b * ui).powi(2)).sum();
    let s2 = rss / (n - 2.0);
    // (AᵀA)⁻¹ entry for the intercept.
    (a, (s2 * suu / det).sqrt())
}

/// Draws of the percent change under the pre-post model with the pooled
/// pre-period pseudo-posterior for `μ0`, sorted.
pub fn prepost_draws(
    x_c: &[f64],
    y_c: &[f64],
    x_t: &[f64],
    y_t: &[f64],
    draws: usize,
    seed: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pooled: Vec<f64> = x_c.iter().chain(x_t).copied().collect();
    let (m0, s0) = mean_sd(&pooled);
    let n0 = pooled.len() as f64;
    let t0 = t_sampler(n0 - 1.0);
    let tc = t_sampler(x_c.len() as f64 - 2.0);
    let tt = t_sampler(x_t.len() as f64 - 2.0);
    let mut out: Vec<f64> = (0..draws)
        .map(|_| {
            let mu0 = m0 + s0 / n0.sqrt() * t0.sample(&mut rng);
            let (ac, sec) = intercept_and_se(x_c, y_c, mu0);
            let (at, set) = intercept_and_se(x_t, y_t, mu0);
            let mu_c = ac + sec * tc.sample(&mut rng);
            let mu_t = at + set * tt.sample(&mut rng);
            100.0 * (mu_t / mu_c - 1.0)
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Appendix-model style fixture: `n` pairs per group, correlation `rho`.
pub fn fixture(seed: u64, n: usize, rho: f64) -> [Vec<f64>; 4] {
    use rand_distr::StandardNormal;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xF1);
    let mut group = |mu: f64| {
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            x.push(100.0 + a);
            y.push(mu + rho * a + (1.0 - rho * rho).sqrt() * b);
        }
        (x, y)
    };
    let (x_c, y_c) = group(100.0);
    let (x_t, y_t) = group(110.0);
    [x_c, y_c, x_t, y_t]
}
