use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use prepost_core::gibbs::{DEFAULT_BURNIN, DEFAULT_ITERATIONS};
use prepost_core::{
    gibbs_percent_change, post_percent_change, prepost_percent_change, GibbsConfig, Method, DEFAULT_LEVEL,
    DEFAULT_NODES,
};

use crate::campaign::{run_campaign, Campaign};
use crate::config::Config;
use crate::error::{CliError, Result};
use crate::input::Dataset;
use crate::report::{write_trace, EstimateReport};

pub const OUT_DIR_ENV: &str = "PREPOST_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "prepost",
    version,
    about = "Percent-change credible intervals for A/B experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the percent change from a bucket CSV.
    Estimate(EstimateArgs),
    /// Write simulated datasets in the input CSV schema.
    Simulate(CampaignArgs),
    /// A/A coverage against the pre-period permutation p-value.
    Coverage(CampaignArgs),
    /// Grid versus Gibbs sampler: widths, estimates and timings.
    Benchmark(CampaignArgs),
    /// Data behind the grid construction and stability figures.
    Figures(CampaignArgs),
    /// Interval width by sample size and pre/post correlation.
    Scaling(CampaignArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Post,
    Prepost,
    Gibbs,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Post => Method::Post,
            MethodArg::Prepost => Method::PrePost,
            MethodArg::Gibbs => Method::Gibbs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// CSV with header `bucket_id,group,pre_value,post_value`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "prepost")]
    pub method: MethodArg,
    #[arg(long, default_value_t = DEFAULT_LEVEL)]
    pub level: f64,
    /// Grid nodes per posterior (post, prepost).
    #[arg(long, default_value_t = DEFAULT_NODES)]
    pub nodes: usize,
    /// Retained sweeps per chain (gibbs).
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    pub iterations: usize,
    #[arg(long, default_value_t = DEFAULT_BURNIN)]
    pub burnin: usize,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    /// Required for gibbs.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report the post-only estimate when the pre-period data cannot be
    /// used, with a warning.
    #[arg(long)]
    pub fallback_to_post: bool,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Write the sampler trace as CSV (gibbs).
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CampaignArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Defaults to $PREPOST_OUT_DIR, then `prepost-out`.
    #[arg(long, env = OUT_DIR_ENV, default_value = "prepost-out")]
    pub out_dir: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Whether `error` means the pre-period data cannot drive the correction.
fn pre_period_unusable(error: &CliError) -> bool {
    use prepost_core::Error as E;
    matches!(
        error,
        CliError::Schema { .. } | CliError::Core(E::DegenerateCovariate | E::ZeroResidual)
    )
}

pub fn estimate(args: &EstimateArgs) -> Result<(EstimateReport, Option<prepost_core::GibbsTrace>)> {
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(CliError::usage("--level must lie strictly between 0 and 1"));
    }
    if args.nodes < 2 {
        return Err(CliError::usage("--nodes must be at least 2"));
    }
    let method = Method::from(args.method);
    if method == Method::Gibbs {
        if args.seed.is_none() {
            return Err(CliError::usage("--seed is required for --method gibbs"));
        }
        if args.iterations == 0 || args.chains == 0 {
            return Err(CliError::usage("--iterations and --chains must be at least 1"));
        }
    } else if args.trace.is_some() {
        return Err(CliError::usage("--trace needs --method gibbs"));
    }

    let data = Dataset::read(&args.input)?;
    let (n_control, n_treatment) = (
        data.count(prepost_core::Group::Control),
        data.count(prepost_core::Group::Treatment),
    );
    let post = || -> Result<_> {
        let (c, t) = data.post_groups();
        Ok(post_percent_change(&c, &t, args.nodes, args.level)?)
    };
    let corrected = || -> Result<_> {
        let sample = data.prepost_sample()?;
        Ok(match method {
            Method::PrePost => (prepost_percent_change(&sample, args.nodes, args.level)?, None),
            _ => {
                let config = GibbsConfig {
                    iterations: args.iterations,
                    burnin: args.burnin,
                    seed: args.seed.unwrap_or_default(),
                    chains: args.chains,
                };
                let (e, trace) = gibbs_percent_change(&sample, &config, args.level)?;
                (e, Some(trace))
            }
        })
    };

    let mut warnings = Vec::new();
    let (estimate, trace) = match method {
        Method::Post => (post()?, None),
        _ => match corrected() {
            Ok(r) => r,
            Err(e) if args.fallback_to_post && pre_period_unusable(&e) => {
                warnings.push(format!(
                    "fallback: {method} could not use the pre-period data ({}: {e}); reporting the post-only estimate",
                    e.kind()
                ));
                (post()?, None)
            }
            Err(e) => return Err(e),
        },
    };
    let seed = (estimate.method == Method::Gibbs).then_some(args.seed).flatten();
    Ok((
        EstimateReport::new(&estimate, n_control, n_treatment, seed, warnings),
        trace,
    ))
}

fn run_estimate(args: &EstimateArgs, stdout: &mut dyn Write) -> Result<()> {
    let (report, trace) = estimate(args)?;
    if let (Some(path), Some(trace)) = (&args.trace, &trace) {
        let mut buf = Vec::new();
        write_trace(trace, &mut buf).expect("in-memory CSV write");
        write_file(path, &buf)?;
    }
    let bytes = match args.format {
        Format::Json => report.to_json().into_bytes(),
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf).expect("in-memory CSV write");
            buf
        }
    };
    match &args.output {
        Some(path) => write_file(path, &bytes),
        None => stdout.write_all(&bytes).map_err(|source| CliError::Write {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn run_campaign_command(campaign: Campaign, args: &CampaignArgs, stdout: &mut dyn Write) -> Result<()> {
    let bytes = std::fs::read(&args.config).map_err(|source| CliError::Read {
        path: args.config.clone(),
        source,
    })?;
    let text = std::str::from_utf8(&bytes).map_err(|_| CliError::Config {
        key: "<document>".into(),
        message: "config is not valid UTF-8".into(),
    })?;
    let config = Config::parse(text)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::usage(format!("cannot start thread pool: {e}")))?;
    let dir = pool.install(|| run_campaign(campaign, &bytes, &config, &args.out_dir))?;
    writeln!(stdout, "{}", dir.display()).map_err(|source| CliError::Write {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Estimate(args) => run_estimate(args, stdout),
        Command::Simulate(args) => run_campaign_command(Campaign::Simulate, args, stdout),
        Command::Coverage(args) => run_campaign_command(Campaign::Coverage, args, stdout),
        Command::Benchmark(args) => run_campaign_command(Campaign::Benchmark, args, stdout),
        Command::Figures(args) => run_campaign_command(Campaign::Figures, args, stdout),
        Command::Scaling(args) => run_campaign_command(Campaign::Scaling, args, stdout),
    }
}

/// Parses `args`, runs the command and returns the exit status. Errors go
/// to `stderr` as one JSON object.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let message = e.kind().to_string();
            let detail = e.to_string();
            let first = detail
                .lines()
                .next()
                .unwrap_or(&message)
                .trim_start_matches("error: ");
            let _ = writeln!(stderr, "{}", CliError::usage(first).to_json());
            return 1;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.to_json());
            e.exit_code()
        }
    }
}
