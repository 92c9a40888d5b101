//! Campaign configuration: TOML with a required top-level `seed` and one
//! optional section per study. Unknown keys are rejected by name.

use prepost_core::gibbs::{DEFAULT_BURNIN, DEFAULT_ITERATIONS};
use prepost_core::sim::{DEFAULT_BUCKETS, DEFAULT_PERMUTATIONS, MIN_PERMUTATIONS};
use prepost_core::{SimModel, DEFAULT_LEVEL, DEFAULT_NODES};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub coverage: CoverageConfig,
    #[serde(default)]
    pub benchmark: BenchmarkConfig,
    #[serde(default)]
    pub figures: FiguresConfig,
    #[serde(default)]
    pub scaling: ScalingConfig,
}

/// Generator parameters; the seed comes from the top level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub mu0: f64,
    pub sigma0: f64,
    pub mu_c: f64,
    pub mu_t: f64,
    pub sigma: f64,
    pub rho: f64,
    pub n_per_group: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let m = SimModel::appendix();
        Self {
            mu0: m.mu0,
            sigma0: m.sigma0,
            mu_c: m.mu_c,
            mu_t: m.mu_t,
            sigma: m.sigma,
            rho: m.rho,
            n_per_group: m.n_per_group,
        }
    }
}

impl ModelConfig {
    pub fn model(&self, seed: u64) -> SimModel {
        SimModel {
            mu0: self.mu0,
            sigma0: self.sigma0,
            mu_c: self.mu_c,
            mu_t: self.mu_t,
            sigma: self.sigma,
            rho: self.rho,
            n_per_group: self.n_per_group,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub datasets: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { datasets: 1 }
    }
}

/// A/A campaign; the treatment mean is set to the control mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoverageConfig {
    pub replicates: usize,
    pub buckets: usize,
    pub level: f64,
    pub nodes: usize,
    pub n_perm: usize,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            replicates: 5000,
            buckets: DEFAULT_BUCKETS,
            level: DEFAULT_LEVEL,
            nodes: DEFAULT_NODES,
            n_perm: DEFAULT_PERMUTATIONS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkConfig {
    pub datasets: usize,
    pub nodes: usize,
    pub level: f64,
    pub iterations: usize,
    pub burnin: usize,
    /// Run one untimed estimate of each method first.
    pub warmup: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            datasets: 100,
            nodes: DEFAULT_NODES,
            level: DEFAULT_LEVEL,
            iterations: DEFAULT_ITERATIONS,
            burnin: DEFAULT_BURNIN,
            warmup: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiguresConfig {
    /// Grid size of the scatter and histogram export.
    pub scatter_nodes: usize,
    /// Equal-probability histogram bins.
    pub histogram_bins: usize,
    pub histogram_level: f64,
    /// Grid sizes of the quantile-versus-nodes curve.
    pub stability_nodes: Vec<usize>,
    pub chain_seeds: usize,
    pub chain_iterations: usize,
    pub burnin: usize,
}

impl Default for FiguresConfig {
    fn default() -> Self {
        Self {
            scatter_nodes: 20,
            histogram_bins: 100,
            histogram_level: 0.90,
            stability_nodes: vec![5, 10, 15, 20, 30, 40, 50, 60, 80, 100, 150, 200],
            chain_seeds: 3,
            chain_iterations: DEFAULT_ITERATIONS,
            burnin: DEFAULT_BURNIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingConfig {
    pub n_values: Vec<usize>,
    pub rho_values: Vec<f64>,
    pub replicates: usize,
    pub nodes: usize,
    pub level: f64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            n_values: vec![50, 100, 200, 400],
            rho_values: vec![0.0, 0.4, 0.8],
            replicates: 200,
            nodes: DEFAULT_NODES,
            level: DEFAULT_LEVEL,
        }
    }
}

fn invalid(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn check(ok: bool, key: &str, message: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(invalid(key, message))
    }
}

fn check_level(key: &str, level: f64) -> Result<()> {
    check(
        level > 0.0 && level < 1.0,
        key,
        "must lie strictly between 0 and 1",
    )
}

fn check_nodes(key: &str, nodes: usize) -> Result<()> {
    check(nodes >= 2, key, "must be at least 2")
}

/// Best-effort name of the offending key: the first backticked token of a
/// serde message, else the key on the line the parser pointed at.
fn offending_key(source: &str, error: &toml::de::Error) -> String {
    let message = error.message();
    if let Some(start) = message.find('`') {
        if let Some(len) = message[start + 1..].find('`') {
            return message[start + 1..start + 1 + len].to_string();
        }
    }
    if let Some(span) = error.span() {
        let line_start = source[..span.start].rfind('\n').map_or(0, |i| i + 1);
        let line = source[line_start..].lines().next().unwrap_or("");
        if let Some((key, _)) = line.split_once('=') {
            return key.trim().to_string();
        }
    }
    "<document>".to_string()
}

impl Config {
    pub fn parse(source: &str) -> Result<Self> {
        let config: Config = toml::from_str(source).map_err(|e| CliError::Config {
            key: offending_key(source, &e),
            message: e.message().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.model
            .model(self.seed)
            .validate()
            .map_err(|e| invalid("model", e.to_string()))?;

        check(
            self.simulate.datasets >= 1,
            "simulate.datasets",
            "must be at least 1",
        )?;

        let c = &self.coverage;
        check(c.buckets >= 1, "coverage.buckets", "must be at least 1")?;
        check(
            c.replicates >= 50 * c.buckets,
            "coverage.replicates",
            "must be at least 50 per bucket",
        )?;
        check_level("coverage.level", c.level)?;
        check_nodes("coverage.nodes", c.nodes)?;
        check(
            c.n_perm >= MIN_PERMUTATIONS,
            "coverage.n_perm",
            "must be at least 100",
        )?;

        let b = &self.benchmark;
        check(b.datasets >= 50, "benchmark.datasets", "must be at least 50")?;
        check_nodes("benchmark.nodes", b.nodes)?;
        check_level("benchmark.level", b.level)?;
        check(b.iterations >= 1, "benchmark.iterations", "must be at least 1")?;

        let f = &self.figures;
        check_nodes("figures.scatter_nodes", f.scatter_nodes)?;
        check(
            f.scatter_nodes <= prepost_core::prepost::GRID_DUMP_MAX_NODES,
            "figures.scatter_nodes",
            "must be at most 200",
        )?;
        check(
            f.histogram_bins >= 1,
            "figures.histogram_bins",
            "must be at least 1",
        )?;
        check_level("figures.histogram_level", f.histogram_level)?;
        check(
            !f.stability_nodes.is_empty(),
            "figures.stability_nodes",
            "must not be empty",
        )?;
        for &d in &f.stability_nodes {
            check_nodes("figures.stability_nodes", d)?;
        }
        check(f.chain_seeds >= 2, "figures.chain_seeds", "must be at least 2")?;
        check(
            f.chain_iterations >= 1,
            "figures.chain_iterations",
            "must be at least 1",
        )?;

        let s = &self.scaling;
        check(!s.n_values.is_empty(), "scaling.n_values", "must not be empty")?;
        check(
            s.n_values.iter().all(|&n| n >= 3),
            "scaling.n_values",
            "must be at least 3",
        )?;
        check(
            !s.rho_values.is_empty(),
            "scaling.rho_values",
            "must not be empty",
        )?;
        check(
            s.rho_values.iter().all(|r| r.abs() < 1.0),
            "scaling.rho_values",
            "must lie in (-1, 1)",
        )?;
        check(s.replicates >= 1, "scaling.replicates", "must be at least 1")?;
        check_nodes("scaling.nodes", s.nodes)?;
        check_level("scaling.level", s.level)?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(e: CliError) -> String {
        match e {
            CliError::Config { key, .. } => key,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let c = Config::parse("seed = 7\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.model.model(7), SimModel::appendix().with_seed(7));
        assert_eq!(c.benchmark.iterations, 2000);
        assert_eq!(c.benchmark.burnin, 100);
        assert_eq!(c.coverage.level, 0.95);
    }

    #[test]
    fn unknown_keys_are_named() {
        assert_eq!(
            key_of(Config::parse("seed = 1\n[model]\nrhoo = 0.5\n").unwrap_err()),
            "rhoo"
        );
        assert_eq!(
            key_of(Config::parse("seed = 1\nextra = 2\n").unwrap_err()),
            "extra"
        );
        assert_eq!(key_of(Config::parse("[model]\nrho = 0.5\n").unwrap_err()), "seed");
    }

    #[test]
    fn wrong_types_name_the_key() {
        let e = Config::parse("seed = 1\n[coverage]\nreplicates = \"many\"\n").unwrap_err();
        assert_eq!(key_of(e), "replicates");
    }

    #[test]
    fn semantic_checks_name_the_key() {
        let e = Config::parse("seed = 1\n[coverage]\nreplicates = 10\n").unwrap_err();
        assert_eq!(key_of(e), "coverage.replicates");
        let e = Config::parse("seed = 1\n[model]\nrho = 1.5\n").unwrap_err();
        assert_eq!(key_of(e), "model");
    }
}
