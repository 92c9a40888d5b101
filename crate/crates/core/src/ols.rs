//! Simple linear regression of `y` on a re-centered covariate `x - center`.
//!
//! Slope and residual spread do not depend on the center; only the
//! intercept and its standard-error factor do. [`OlsSummary`] keeps the
//! center-free part so that refitting at many centers costs O(1) each.

use libm::sqrt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OlsFit {
    pub intercept: f64,
    pub slope: f64,
    /// Residual standard deviation with an `n - 2` denominator.
    pub resid_sd: f64,
    /// `sqrt(Σ(x - center)² / (n Σ(x - x̄)²))`; multiplied by `resid_sd` it
    /// gives the classical standard error of the intercept.
    pub intercept_scale: f64,
    pub n: usize,
}

/// Center-independent regression summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OlsSummary {
    n: usize,
    x_mean: f64,
    y_mean: f64,
    sxx: f64,
    slope: f64,
    resid_sd: f64,
}

impl OlsSummary {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidInput("covariate and response lengths differ"));
        }
        let n = x.len();
        if n < 3 {
            return Err(Error::InsufficientData { needed: 3, got: n });
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("values must be finite"));
        }
        if x.iter().all(|&v| v == x[0]) {
            return Err(Error::DegenerateCovariate);
        }
        let nf = n as f64;
        let x_mean = x.iter().sum::<f64>() / nf;
        let y_mean = y.iter().sum::<f64>() / nf;
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for (&xi, &yi) in x.iter().zip(y) {
            let dx = xi - x_mean;
            sxx += dx * dx;
            sxy += dx * (yi - y_mean);
        }
        if !(sxx > 0.0) {
            return Err(Error::DegenerateCovariate);
        }
        let slope = sxy / sxx;
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(&xi, &yi)| {
                let r = (yi - y_mean) - slope * (xi - x_mean);
                r * r
            })
            .sum();
        Ok(Self {
            n,
            x_mean,
            y_mean,
            sxx,
            slope,
            resid_sd: sqrt(rss / (nf - 2.0)),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn resid_sd(&self) -> f64 {
        self.resid_sd
    }

    pub fn x_mean(&self) -> f64 {
        self.x_mean
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    /// Fit with covariate `x - center`.
    pub fn at_center(&self, center: f64) -> OlsFit {
        let offset = self.x_mean - center;
        let nf = self.n as f64;
        // Σ(x - c)² = Σ(x - x̄)² + n (x̄ - c)²
        let centered_ss = self.sxx + nf * offset * offset;
        OlsFit {
            intercept: self.y_mean - self.slope * offset,
            slope: self.slope,
            resid_sd: self.resid_sd,
            intercept_scale: sqrt(centered_ss / (nf * self.sxx)),
            n: self.n,
        }
    }
}

pub fn ols_fit(x: &[f64], y: &[f64], center: f64) -> Result<OlsFit> {
    Ok(OlsSummary::new(x, y)?.at_center(center))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn perfect_line() {
        let fit = ols_fit(&[1.0, 2.0, 3.0, 4.0], &[3.0, 5.0, 7.0, 9.0], 0.0).unwrap();
        assert_eq!(fit.intercept, 1.0);
        assert_eq!(fit.slope, 2.0);
        assert_eq!(fit.resid_sd, 0.0);
    }

    #[test]
    fn flat_response_centered() {
        let fit = ols_fit(&[1.0, 2.0, 3.0], &[7.0, 7.0, 7.0], 2.0).unwrap();
        assert_eq!(fit.intercept, 7.0);
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.resid_sd, 0.0);
    }

    #[test]
    fn matches_normal_equations() {
        // Oracle: [n Σu; Σu Σu²] [a b]' = [Σy Σuy]' solved by Cramer's rule,
        // with u = x (center 0), in a separate formulation.
        let x = [0.8, 1.1, 2.2, 2.9, 4.0];
        let y = [1.2, 2.3, 3.1, 4.8, 5.1];
        let n = 5.0;
        let su: f64 = x.iter().sum();
        let suu: f64 = x.iter().map(|u| u * u).sum();
        let sy: f64 = y.iter().sum();
        let suy: f64 = x.iter().zip(&y).map(|(u, v)| u * v).sum();
        let det = n * suu - su * su;
        let a = (sy * suu - su * suy) / det;
        let b = (n * suy - su * sy) / det;
        let rss: f64 = x.iter().zip(&y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
        let var_a = rss / (n - 2.0) * suu / det;

        let fit = ols_fit(&x, &y, 0.0).unwrap();
        assert_relative_eq!(fit.intercept, a, max_relative = 1e-10);
        assert_relative_eq!(fit.slope, b, max_relative = 1e-10);
        assert_relative_eq!(fit.resid_sd, (rss / (n - 2.0)).sqrt(), max_relative = 1e-10);
        assert_relative_eq!(
            fit.intercept_scale * fit.resid_sd,
            var_a.sqrt(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn errors() {
        assert_eq!(
            ols_fit(&[2.0; 4], &[1.0, 2.0, 3.0, 4.0], 0.0),
            Err(Error::DegenerateCovariate)
        );
        assert_eq!(
            ols_fit(&[1.0, 2.0], &[1.0, 2.0], 0.0),
            Err(Error::InsufficientData { needed: 3, got: 2 })
        );
        assert!(matches!(
            ols_fit(&[1.0, 2.0, 3.0], &[1.0, 2.0], 0.0),
            Err(Error::InvalidInput(_))
        ));
    }
}
