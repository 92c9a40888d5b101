//! Simulation campaigns behind the `simulate`, `coverage`, `benchmark`,
//! `figures` and `scaling` commands.
//!
//! Replicates run on the ambient rayon pool and are collected in index
//! order, so every reproducible output is independent of the thread count.
//! The benchmark is timed sequentially on the calling thread.

use std::path::PathBuf;
use std::time::Instant;

use prepost_core::gibbs::{chain_stability_report, ChainTrajectory};
use prepost_core::rng::derive_seed;
use prepost_core::sim::{
    benchmark_dataset, coverage_band, coverage_replicate, replicate_sample, width_replicate, CoverageOutcome,
    CoverageReport, CoverageSettings, MeanSd, Table1, WidthCell,
};
use prepost_core::{
    gibbs_percent_change, grid_dump, prepost_percent_change, GibbsConfig, PercentChangeEstimate, SimModel,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{BenchmarkConfig, Config, CoverageConfig, FiguresConfig, ScalingConfig};
use crate::error::Result;
use crate::input::write_sample;
use crate::output::{csv_bytes, OutputDir};

fn par_indexed<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> prepost_core::Result<T> + Sync + Send,
{
    Ok((0..count as u64)
        .into_par_iter()
        .map(f)
        .collect::<prepost_core::Result<Vec<T>>>()?)
}

#[derive(Debug, Clone, Serialize)]
struct DatasetEntry {
    file: String,
    index: u64,
    seed: u64,
    true_percent_change: f64,
}

pub fn simulate(config: &Config, out: &mut OutputDir) -> Result<()> {
    let model = config.model.model(config.seed);
    let samples = par_indexed(config.simulate.datasets, |i| {
        replicate_sample(&model, config.seed, i)
    })?;
    let mut entries = Vec::with_capacity(samples.len());
    for (i, sample) in samples.iter().enumerate() {
        let file = format!("dataset_{i:04}.csv");
        let mut buf = Vec::new();
        write_sample(sample, &mut buf).expect("in-memory CSV write");
        out.write(&file, &buf)?;
        entries.push(DatasetEntry {
            file,
            index: i as u64,
            seed: derive_seed(config.seed, i as u64),
            true_percent_change: model.true_percent_change(),
        });
    }
    out.write_json("summary.json", &entries)
}

/// A/A version of the configured model.
pub fn coverage_model(config: &Config) -> SimModel {
    SimModel {
        mu_t: config.model.mu_c,
        ..config.model.model(config.seed)
    }
}

pub fn coverage_outcomes(model: &SimModel, c: &CoverageConfig) -> Result<Vec<CoverageOutcome>> {
    let settings = CoverageSettings {
        buckets: c.buckets,
        level: c.level,
        nodes: c.nodes,
        n_perm: c.n_perm,
    };
    par_indexed(c.replicates, |i| coverage_replicate(model, &settings, i))
}

pub fn coverage(config: &Config, out: &mut OutputDir) -> Result<()> {
    let model = coverage_model(config);
    let c = &config.coverage;
    let outcomes = coverage_outcomes(&model, c)?;
    let report = CoverageReport::from_outcomes(&outcomes, c.buckets, c.level)?;

    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    out.write(
        "coverage.csv",
        &csv_bytes(|w| {
            w.write_record([
                "p_lower",
                "p_upper",
                "count",
                "post_coverage",
                "prepost_coverage",
                "post_mse",
                "prepost_mse",
                "band_lower",
                "band_upper",
            ])?;
            for b in &report.buckets {
                let (lo, hi) = if b.count > 0 {
                    coverage_band(c.level, b.count)
                } else {
                    (f64::NAN, f64::NAN)
                };
                w.write_record([
                    b.lower.to_string(),
                    b.upper.to_string(),
                    b.count.to_string(),
                    opt(b.post_coverage()),
                    opt(b.prepost_coverage()),
                    opt(b.post_mse()),
                    opt(b.prepost_mse()),
                    opt((b.count > 0).then_some(lo)),
                    opt((b.count > 0).then_some(hi)),
                ])?;
            }
            Ok(())
        }),
    )?;
    out.write(
        "coverage_replicates.csv",
        &csv_bytes(|w| {
            w.write_record([
                "replicate",
                "p_value",
                "post_covers",
                "post_sq_error",
                "prepost_covers",
                "prepost_sq_error",
            ])?;
            for (i, o) in outcomes.iter().enumerate() {
                w.write_record([
                    i.to_string(),
                    o.p_value.to_string(),
                    o.post_covers.to_string(),
                    o.post_sq_error.to_string(),
                    o.prepost_covers.to_string(),
                    o.prepost_sq_error.to_string(),
                ])?;
            }
            Ok(())
        }),
    )?;

    #[derive(Serialize)]
    struct Summary<'a> {
        model: SimModel,
        replicates: usize,
        n_perm: usize,
        nodes: usize,
        report: &'a CoverageReport,
    }
    out.write_json(
        "summary.json",
        &Summary {
            model,
            replicates: report.total(),
            n_perm: c.n_perm,
            nodes: c.nodes,
            report: &report,
        },
    )
}

/// Grid (DA) and sampler (GS) results over the benchmark datasets, with
/// per-dataset wall-clock seconds.
#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub table: Table1,
    pub da: Vec<PercentChangeEstimate>,
    pub gs: Vec<PercentChangeEstimate>,
    pub data_seeds: Vec<u64>,
    pub gibbs_seeds: Vec<u64>,
    pub da_seconds: Vec<f64>,
    pub gs_seconds: Vec<f64>,
}

impl BenchmarkRun {
    pub fn da_time(&self) -> MeanSd {
        MeanSd::of(&self.da_seconds)
    }

    pub fn gs_time(&self) -> MeanSd {
        MeanSd::of(&self.gs_seconds)
    }
}

/// Sequential on the calling thread; each method is timed per dataset,
/// excluding data generation.
pub fn run_benchmark(model: &SimModel, b: &BenchmarkConfig, master: u64) -> Result<BenchmarkRun> {
    let gibbs = |seed| GibbsConfig {
        iterations: b.iterations,
        burnin: b.burnin,
        seed,
        chains: 1,
    };
    if b.warmup {
        let (sample, seed) = benchmark_dataset(model, master, 0)?;
        prepost_percent_change(&sample, b.nodes, b.level)?;
        gibbs_percent_change(&sample, &gibbs(seed), b.level)?;
    }
    let n = b.datasets;
    let (mut da, mut gs) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut data_seeds, mut gibbs_seeds) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut da_seconds, mut gs_seconds) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n as u64 {
        let (sample, gibbs_seed) = benchmark_dataset(model, master, i)?;
        let start = Instant::now();
        da.push(prepost_percent_change(&sample, b.nodes, b.level)?);
        da_seconds.push(start.elapsed().as_secs_f64());
        let start = Instant::now();
        gs.push(gibbs_percent_change(&sample, &gibbs(gibbs_seed), b.level)?.0);
        gs_seconds.push(start.elapsed().as_secs_f64());
        data_seeds.push(derive_seed(master, i));
        gibbs_seeds.push(gibbs_seed);
    }
    Ok(BenchmarkRun {
        table: Table1::from_estimates(&da, &gs)?,
        da,
        gs,
        data_seeds,
        gibbs_seeds,
        da_seconds,
        gs_seconds,
    })
}

pub fn benchmark(config: &Config, out: &mut OutputDir) -> Result<()> {
    let model = config.model.model(config.seed);
    let b = &config.benchmark;
    let run = run_benchmark(&model, b, config.seed)?;
    let t = &run.table;

    out.write(
        "table1.csv",
        &csv_bytes(|w| {
            w.write_record(["method", "width_mean", "width_sd", "estimate_mean", "estimate_sd"])?;
            for (name, width, estimate) in [
                ("DA", t.da_width, t.da_estimate),
                ("GS", t.gs_width, t.gs_estimate),
                ("DA-GS", t.diff_width, t.diff_estimate),
            ] {
                w.write_record([
                    name.to_string(),
                    width.mean.to_string(),
                    width.sd.to_string(),
                    estimate.mean.to_string(),
                    estimate.sd.to_string(),
                ])?;
            }
            Ok(())
        }),
    )?;
    out.write(
        "table1_datasets.csv",
        &csv_bytes(|w| {
            w.write_record([
                "dataset",
                "data_seed",
                "gibbs_seed",
                "da_median",
                "da_lower",
                "da_upper",
                "gs_median",
                "gs_lower",
                "gs_upper",
            ])?;
            for i in 0..run.da.len() {
                let (da, gs) = (&run.da[i], &run.gs[i]);
                w.write_record([
                    i.to_string(),
                    run.data_seeds[i].to_string(),
                    run.gibbs_seeds[i].to_string(),
                    da.median.to_string(),
                    da.ci_lower.to_string(),
                    da.ci_upper.to_string(),
                    gs.median.to_string(),
                    gs.ci_lower.to_string(),
                    gs.ci_upper.to_string(),
                ])?;
            }
            Ok(())
        }),
    )?;
    let (da_time, gs_time) = (run.da_time(), run.gs_time());
    out.write_unhashed(
        "table1_timing.csv",
        &csv_bytes(|w| {
            w.write_record(["method", "seconds_mean", "seconds_sd"])?;
            w.write_record(["DA".to_string(), da_time.mean.to_string(), da_time.sd.to_string()])?;
            w.write_record(["GS".to_string(), gs_time.mean.to_string(), gs_time.sd.to_string()])?;
            w.write_record([
                "GS/DA".to_string(),
                (gs_time.mean / da_time.mean).to_string(),
                String::new(),
            ])?;
            Ok(())
        }),
    )?;

    #[derive(Serialize)]
    struct Summary<'a> {
        model: SimModel,
        nodes: usize,
        level: f64,
        iterations: usize,
        burnin: usize,
        table: &'a Table1,
    }
    out.write_json(
        "summary.json",
        &Summary {
            model,
            nodes: b.nodes,
            level: b.level,
            iterations: b.iterations,
            burnin: b.burnin,
            table: t,
        },
    )
}

/// One row of the quantile-versus-grid-size curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub nodes: usize,
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
}

/// `(lower, upper, central)` edges of `bins` equal-probability bins over
/// sorted values; a bin is central when it lies inside the `level` interval.
pub fn equal_probability_bins(sorted: &[f64], bins: usize, level: f64) -> Vec<(f64, f64, bool)> {
    let n = sorted.len();
    let tail = (1.0 - level) / 2.0 * bins as f64;
    (0..bins)
        .filter_map(|k| {
            let (start, end) = (k * n / bins, (k + 1) * n / bins);
            (end > start).then(|| {
                let central = k as f64 >= tail - 1e-9 && ((k + 1) as f64) <= bins as f64 - tail + 1e-9;
                (sorted[start], sorted[end - 1], central)
            })
        })
        .collect()
}

pub fn figures(config: &Config, out: &mut OutputDir) -> Result<()> {
    let f: &FiguresConfig = &config.figures;
    let model = config.model.model(config.seed);
    let sample = replicate_sample(&model, config.seed, 0)?;

    let grid = grid_dump(&sample, f.scatter_nodes)?;
    out.write(
        "fig1_scatter.csv",
        &csv_bytes(|w| {
            w.write_record(["mu0_index", "mu0", "mu_t", "mu_c", "percent_change"])?;
            for a in &grid.atoms {
                w.write_record([
                    a.mu0_index.to_string(),
                    grid.mu0_nodes[a.mu0_index].to_string(),
                    a.mu_t.to_string(),
                    a.mu_c.to_string(),
                    a.percent_change.to_string(),
                ])?;
            }
            Ok(())
        }),
    )?;
    let mut sorted: Vec<f64> = grid.percent_changes().collect();
    sorted.sort_by(f64::total_cmp);
    let bins = equal_probability_bins(&sorted, f.histogram_bins, f.histogram_level);
    out.write(
        "fig1_histogram.csv",
        &csv_bytes(|w| {
            w.write_record(["bin", "lower", "upper", "central"])?;
            for (k, (lo, hi, central)) in bins.iter().enumerate() {
                w.write_record([k.to_string(), lo.to_string(), hi.to_string(), central.to_string()])?;
            }
            Ok(())
        }),
    )?;
    let fig1 = prepost_percent_change(&sample, f.scatter_nodes, f.histogram_level)?;

    let curve = f
        .stability_nodes
        .par_iter()
        .map(|&d| {
            prepost_percent_change(&sample, d, 0.95).map(|e| GridPoint {
                nodes: d,
                lower: e.ci_lower,
                median: e.median,
                upper: e.ci_upper,
            })
        })
        .collect::<prepost_core::Result<Vec<_>>>()?;
    out.write(
        "fig4_grid.csv",
        &csv_bytes(|w| {
            w.write_record(["nodes", "lower", "median", "upper"])?;
            for p in &curve {
                w.write_record([
                    p.nodes.to_string(),
                    p.lower.to_string(),
                    p.median.to_string(),
                    p.upper.to_string(),
                ])?;
            }
            Ok(())
        }),
    )?;

    let seeds: Vec<u64> = (0..f.chain_seeds as u64)
        .map(|k| derive_seed(config.seed, 1 << 32 | k))
        .collect();
    let chains: Vec<ChainTrajectory> = chain_stability_report(&sample, &seeds, f.chain_iterations, f.burnin)?;
    out.write(
        "fig4_chains.csv",
        &csv_bytes(|w| {
            w.write_record(["chain", "seed", "iteration", "lower", "median", "upper"])?;
            for (k, chain) in chains.iter().enumerate() {
                for p in &chain.points {
                    w.write_record([
                        k.to_string(),
                        chain.seed.to_string(),
                        p.iteration.to_string(),
                        p.lower.to_string(),
                        p.median.to_string(),
                        p.upper.to_string(),
                    ])?;
                }
            }
            Ok(())
        }),
    )?;

    #[derive(Serialize)]
    struct Summary {
        model: SimModel,
        fig1_estimate: PercentChangeEstimate,
        fig4_grid: Vec<GridPoint>,
        chain_seeds: Vec<u64>,
    }
    out.write_json(
        "summary.json",
        &Summary {
            model,
            fig1_estimate: fig1,
            fig4_grid: curve,
            chain_seeds: seeds,
        },
    )
}

/// Mean widths per `(n, rho)` cell; replicate `r` of every cell reuses the
/// same derived seed.
pub fn scaling_cells(base: &SimModel, s: &ScalingConfig) -> Result<Vec<WidthCell>> {
    let mut cells = Vec::with_capacity(s.n_values.len() * s.rho_values.len());
    for &n in &s.n_values {
        for &rho in &s.rho_values {
            let model = SimModel {
                n_per_group: n,
                rho,
                ..*base
            };
            let widths = par_indexed(s.replicates, |r| {
                width_replicate(&model, base.seed, r, s.nodes, s.level)
            })?;
            cells.push(WidthCell::from_widths(&model, &widths));
        }
    }
    Ok(cells)
}

pub fn scaling(config: &Config, out: &mut OutputDir) -> Result<()> {
    let base = config.model.model(config.seed);
    let cells = scaling_cells(&base, &config.scaling)?;
    out.write(
        "scaling.csv",
        &csv_bytes(|w| {
            w.write_record([
                "n_per_group",
                "rho",
                "replicates",
                "post_width",
                "prepost_width",
                "ratio",
                "sqrt_one_minus_rho_sq",
            ])?;
            for c in &cells {
                w.write_record([
                    c.n_per_group.to_string(),
                    c.rho.to_string(),
                    c.replicates.to_string(),
                    c.post_width.to_string(),
                    c.prepost_width.to_string(),
                    c.ratio().to_string(),
                    (1.0 - c.rho * c.rho).sqrt().to_string(),
                ])?;
            }
            Ok(())
        }),
    )?;
    out.write_json("summary.json", &cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Campaign {
    Simulate,
    Coverage,
    Benchmark,
    Figures,
    Scaling,
}

impl Campaign {
    pub fn name(self) -> &'static str {
        match self {
            Campaign::Simulate => "simulate",
            Campaign::Coverage => "coverage",
            Campaign::Benchmark => "benchmark",
            Campaign::Figures => "figures",
            Campaign::Scaling => "scaling",
        }
    }
}

/// Runs `campaign` into `out_root/<name>/` and returns that directory.
pub fn run_campaign(
    campaign: Campaign,
    config_bytes: &[u8],
    config: &Config,
    out_root: &std::path::Path,
) -> Result<PathBuf> {
    let mut out = OutputDir::create(out_root, campaign.name())?;
    match campaign {
        Campaign::Simulate => simulate(config, &mut out)?,
        Campaign::Coverage => coverage(config, &mut out)?,
        Campaign::Benchmark => benchmark(config, &mut out)?,
        Campaign::Figures => figures(config, &mut out)?,
        Campaign::Scaling => scaling(config, &mut out)?,
    }
    out.finish(config_bytes, config.seed)
}
