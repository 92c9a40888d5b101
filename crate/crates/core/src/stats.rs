//! Sample summaries, classical t intervals and the equal-weight quantile
//! convention used by every estimator.

use alloc::vec::Vec;

use libm::{floor, sqrt};

use crate::error::{Error, Result};
use crate::student_t::{standard_quantile, StudentT};

/// Sufficient statistics of one group: count, mean and the
/// `n - 1`-denominator standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampleStats {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

impl SampleStats {
    /// Standard error of the mean, `sd / sqrt(n)`.
    pub fn standard_error(&self) -> f64 {
        self.sd / sqrt(self.n as f64)
    }

    /// Objective-prior posterior of the mean: `t_{n-1}(mean, sd / sqrt(n))`.
    pub fn mean_posterior(&self) -> Result<StudentT> {
        if self.n < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: self.n,
            });
        }
        if self.sd == 0.0 {
            return Err(Error::DegenerateVariance);
        }
        StudentT::new((self.n - 1) as f64, self.mean, self.standard_error())
    }
}

pub fn summarize(values: &[f64]) -> Result<SampleStats> {
    if values.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("values must be finite"));
    }
    let n = values.len();
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return Ok(SampleStats {
            n,
            mean: first,
            sd: 0.0,
        });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok(SampleStats {
        n,
        mean,
        sd: sqrt(ss / (n - 1) as f64),
    })
}

pub(crate) fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput("level must lie strictly between 0 and 1"))
    }
}

/// Frequentist t interval `mean ± t_{n-1,(1+level)/2} · sd/√n`.
pub fn classical_t_interval(stats: &SampleStats, level: f64) -> Result<(f64, f64)> {
    check_level(level)?;
    if stats.n < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: stats.n,
        });
    }
    if stats.sd == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let t = standard_quantile((stats.n - 1) as f64, 0.5 * (1.0 + level))?;
    let half = t * stats.standard_error();
    Ok((stats.mean - half, stats.mean + half))
}

/// Interpolation plan for the `p`-quantile of `n` equal-weight atoms.
///
/// Atom `k` (1-based, sorted) sits at cumulative probability `(k - 1/2) / n`;
/// between those positions the quantile is linear, outside them it is
/// clamped to the extreme atom. A `D`-node quantile grid therefore returns
/// its own generating quantiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct QuantilePlan {
    /// 0-based rank of the lower order statistic.
    pub lower: usize,
    /// 0-based rank of the upper order statistic.
    pub upper: usize,
    pub frac: f64,
}

impl QuantilePlan {
    pub fn new(n: usize, p: f64) -> Self {
        debug_assert!(n > 0);
        let h = n as f64 * p + 0.5;
        if h <= 1.0 {
            return Self {
                lower: 0,
                upper: 0,
                frac: 0.0,
            };
        }
        if h >= n as f64 {
            return Self {
                lower: n - 1,
                upper: n - 1,
                frac: 0.0,
            };
        }
        let k = floor(h);
        let lower = k as usize - 1;
        Self {
            lower,
            upper: lower + 1,
            frac: h - k,
        }
    }

    pub fn interpolate(&self, lower: f64, upper: f64) -> f64 {
        if self.frac == 0.0 {
            lower
        } else {
            lower + self.frac * (upper - lower)
        }
    }
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(
            "probability must lie strictly between 0 and 1",
        ))
    }
}

/// `p`-quantile of the discrete uniform distribution over `values`.
pub fn equal_weight_quantile(values: &[f64], p: f64) -> Result<f64> {
    let mut scratch = values.to_vec();
    Ok(select_quantiles(&mut scratch, &[p])?[0])
}

/// Several equal-weight quantiles at once. Reorders `values` in place.
pub fn select_quantiles(values: &mut [f64], ps: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InvalidInput("quantile of an empty set"));
    }
    for &p in ps {
        check_probability(p)?;
    }
    let n = values.len();
    let mut out = Vec::with_capacity(ps.len());
    for &p in ps {
        let plan = QuantilePlan::new(n, p);
        let (_, lower, rest) = values.select_nth_unstable_by(plan.lower, f64::total_cmp);
        let lower = *lower;
        let upper = if plan.upper == plan.lower {
            lower
        } else {
            rest.iter().copied().min_by(f64::total_cmp).unwrap_or(lower)
        };
        out.push(plan.interpolate(lower, upper));
    }
    Ok(out)
}

/// Quantile of an already sorted slice under the same convention.
pub fn sorted_quantile(sorted: &[f64], p: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::InvalidInput("quantile of an empty set"));
    }
    check_probability(p)?;
    let plan = QuantilePlan::new(sorted.len(), p);
    Ok(plan.interpolate(sorted[plan.lower], sorted[plan.upper]))
}

/// Mean and `n - 1` standard deviation of a batch of replicate results;
/// unlike [`summarize`] this accepts a single value (sd reported as 0).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    match values.len() {
        0 => (f64::NAN, f64::NAN),
        1 => (values[0], 0.0),
        n => {
            let mean = values.iter().sum::<f64>() / n as f64;
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (mean, sqrt(ss / (n - 1) as f64))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;

    #[test]
    fn summarize_examples() {
        assert_eq!(
            summarize(&[1.0, 2.0, 3.0]).unwrap(),
            SampleStats {
                n: 3,
                mean: 2.0,
                sd: 1.0
            }
        );
        assert_eq!(
            summarize(&[5.0; 4]).unwrap(),
            SampleStats {
                n: 4,
                mean: 5.0,
                sd: 0.0
            }
        );
        assert_eq!(
            summarize(&[42.0]),
            Err(Error::InsufficientData { needed: 2, got: 1 })
        );
        assert!(matches!(summarize(&[1.0, f64::NAN]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn constant_non_representable_values_have_zero_sd() {
        let s = summarize(&[0.1, 0.1, 0.1]).unwrap();
        assert_eq!(s.sd, 0.0);
        assert_eq!(s.mean, 0.1);
    }

    #[test]
    fn classical_interval_example() {
        let stats = SampleStats {
            n: 4,
            mean: 10.0,
            sd: 2.0,
        };
        let (lo, hi) = classical_t_interval(&stats, 0.95).unwrap();
        // t_{3, 0.975} = 3.1824463052837084 from the mpmath oracle.
        assert_relative_eq!(lo, 10.0 - 3.182_446_305_283_708_4, max_relative = 1e-12);
        assert_relative_eq!(hi, 10.0 + 3.182_446_305_283_708_4, max_relative = 1e-12);
    }

    #[test]
    fn classical_interval_errors() {
        let stats = SampleStats {
            n: 100,
            mean: 0.0,
            sd: 1.0,
        };
        let (lo, hi) = classical_t_interval(&stats, 0.95).unwrap();
        assert_eq!(lo, -hi);
        assert!(matches!(
            classical_t_interval(&stats, 1.0),
            Err(Error::InvalidInput(_))
        ));
        let flat = SampleStats {
            n: 5,
            mean: 3.0,
            sd: 0.0,
        };
        assert_eq!(classical_t_interval(&flat, 0.9), Err(Error::DegenerateVariance));
    }

    #[test]
    fn quantile_convention() {
        assert_eq!(
            equal_weight_quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.5).unwrap(),
            3.0
        );
        assert_eq!(equal_weight_quantile(&[4.0, 1.0, 3.0, 2.0], 0.5).unwrap(), 2.5);
        assert_eq!(equal_weight_quantile(&[7.0], 0.01).unwrap(), 7.0);
        assert_eq!(equal_weight_quantile(&[1.0, 2.0], 0.01).unwrap(), 1.0);
        assert_eq!(equal_weight_quantile(&[1.0, 2.0], 0.99).unwrap(), 2.0);
        assert!(equal_weight_quantile(&[], 0.5).is_err());
        assert!(equal_weight_quantile(&[1.0], 0.0).is_err());
    }

    #[test]
    fn grid_reproduces_generating_quantiles() {
        let d = 8;
        let nodes: Vec<f64> = (1..=d).map(|k| (k * k) as f64).collect();
        for k in 1..=d {
            let p = (2 * k - 1) as f64 / (2 * d) as f64;
            assert_eq!(sorted_quantile(&nodes, p).unwrap(), nodes[k - 1]);
        }
    }

    #[test]
    fn select_many_matches_sorted() {
        let mut v = vec![3.0, -1.0, 8.5, 2.0, 2.0, 7.0, 0.5, 11.0, -4.0];
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        let ps = [0.1, 0.25, 0.5, 0.77, 0.95];
        let got = select_quantiles(&mut v, &ps).unwrap();
        for (g, p) in got.iter().zip(ps) {
            assert_eq!(*g, sorted_quantile(&sorted, p).unwrap());
        }
    }
}
