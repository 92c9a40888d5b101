use std::io::Write;

use prepost_core::gibbs::GibbsTrace;
use prepost_core::{Method, PercentChangeEstimate};
use serde::{Deserialize, Serialize};

pub const POSITIVITY_WARNING: &str =
    "positivity: control mean is within five standard errors of zero; the percent change is unreliable";

/// Serialized estimate; field names and order are part of the interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub method: Method,
    pub level: f64,
    /// Grid nodes; absent for the sampler.
    pub nodes: Option<usize>,
    pub percent_change_median: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub positivity_ok: bool,
    pub n_control: usize,
    pub n_treatment: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub warnings: Vec<String>,
}

impl EstimateReport {
    pub fn new(
        estimate: &PercentChangeEstimate,
        n_control: usize,
        n_treatment: usize,
        seed: Option<u64>,
        mut warnings: Vec<String>,
    ) -> Self {
        if !estimate.positivity_ok {
            warnings.push(POSITIVITY_WARNING.to_string());
        }
        Self {
            method: estimate.method,
            level: estimate.level,
            nodes: (estimate.method != Method::Gibbs).then_some(estimate.nodes_or_iterations),
            percent_change_median: estimate.median,
            ci_lower: estimate.ci_lower,
            ci_upper: estimate.ci_upper,
            positivity_ok: estimate.positivity_ok,
            n_control,
            n_treatment,
            seed,
            warnings,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Header plus one row; `seed` is empty for deterministic methods and
    /// warnings are joined with `; `.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record([
            "method",
            "level",
            "nodes",
            "percent_change_median",
            "ci_lower",
            "ci_upper",
            "positivity_ok",
            "n_control",
            "n_treatment",
            "seed",
            "warnings",
        ])?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        csv.write_record([
            self.method.to_string(),
            self.level.to_string(),
            opt(self.nodes.map(|n| n.to_string())),
            self.percent_change_median.to_string(),
            self.ci_lower.to_string(),
            self.ci_upper.to_string(),
            self.positivity_ok.to_string(),
            self.n_control.to_string(),
            self.n_treatment.to_string(),
            opt(self.seed.map(|s| s.to_string())),
            self.warnings.join("; "),
        ])?;
        csv.flush()?;
        Ok(())
    }
}

pub fn write_trace<W: Write>(trace: &GibbsTrace, writer: W) -> csv::Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record([
        "chain",
        "iteration",
        "mu0",
        "sigma0_sq",
        "mu_c",
        "beta_c",
        "tau_c_sq",
        "mu_t",
        "beta_t",
        "tau_t_sq",
        "percent_change",
    ])?;
    for (d, pc) in trace.draws.iter().zip(&trace.percent_change) {
        csv.write_record([
            d.chain.to_string(),
            d.iteration.to_string(),
            d.mu0.to_string(),
            d.sigma0_sq.to_string(),
            d.control.mu.to_string(),
            d.control.beta.to_string(),
            d.control.tau_sq.to_string(),
            d.treatment.mu.to_string(),
            d.treatment.beta.to_string(),
            d.treatment.tau_sq.to_string(),
            pc.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}
