use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use prepost_cli::input::write_sample;
use prepost_cli::report::EstimateReport;
use prepost_core::sim::replicate_sample;
use prepost_core::{PrePostSample, SimModel};

fn prepost(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_prepost"));
    cmd.args(args).env_remove("PREPOST_OUT_DIR");
    if let Some(dir) = env_out {
        cmd.env("PREPOST_OUT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn error_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"))
}

fn write_dataset(dir: &Path, name: &str, sample: &PrePostSample) -> PathBuf {
    let path = dir.join(name);
    let mut buf = Vec::new();
    write_sample(sample, &mut buf).unwrap();
    std::fs::write(&path, buf).unwrap();
    path
}

fn estimate(path: &Path, extra: &[&str]) -> (Output, Option<EstimateReport>) {
    let mut args = vec!["estimate", "--input", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = prepost(&args, None);
    let report = (out.status.success() && !out.stdout.is_empty())
        .then(|| serde_json::from_slice(&out.stdout).unwrap());
    (out, report)
}

fn appendix_file(dir: &Path) -> PathBuf {
    let sample = replicate_sample(&SimModel::appendix(), 2024, 0).unwrap();
    write_dataset(dir, "appendix.csv", &sample)
}

#[test]
fn prepost_estimate_on_appendix_data() {
    let dir = tempfile::tempdir().unwrap();
    let path = appendix_file(dir.path());
    let (_, da) = estimate(&path, &["--method", "prepost"]);
    let da = da.unwrap();
    assert!((da.percent_change_median - 10.0).abs() < 1.0);
    assert_eq!((da.n_control, da.n_treatment), (20, 20));
    assert_eq!(da.nodes, Some(50));
    assert_eq!(da.seed, None);

    let (_, gs) = estimate(&path, &["--method", "gibbs", "--seed", "5"]);
    let gs = gs.unwrap();
    assert_eq!(gs.nodes, None);
    assert_eq!(gs.seed, Some(5));
    let width = da.ci_upper - da.ci_lower;
    assert!((gs.percent_change_median - da.percent_change_median).abs() < 0.1 * width);

    let (_, post) = estimate(&path, &["--method", "post"]);
    let post = post.unwrap();
    assert!(post.ci_upper - post.ci_lower > width);
}

#[test]
fn post_method_ignores_missing_pre_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("post.csv");
    std::fs::write(
        &path,
        "bucket_id,group,pre_value,post_value\n1,control,,100\n2,control,,101\n3,control,,99.5\n\
         1,treatment,,110\n2,treatment,,111\n3,treatment,,109\n",
    )
    .unwrap();
    let (out, report) = estimate(&path, &["--method", "post"]);
    assert!(out.status.success());
    assert!(report.unwrap().percent_change_median > 5.0);

    let (out, _) = estimate(&path, &["--method", "prepost"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["line"], 2);
}

#[test]
fn malformed_row_exits_2_and_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(
        &path,
        "bucket_id,group,pre_value,post_value\n1,control,1,2\n2,control,1,2\n3,control,x,2\n",
    )
    .unwrap();
    let (out, _) = estimate(&path, &[]);
    assert_eq!(out.status.code(), Some(2));
    let e = error_json(&out);
    assert_eq!(e["error"]["kind"], "schema");
    assert_eq!(e["error"]["line"], 4);
    assert!(e["error"]["message"].as_str().unwrap().contains("line 4"));
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = appendix_file(dir.path());
    for extra in [
        &["--level", "1.5"][..],
        &["--nodes", "1"][..],
        &["--method", "gibbs"][..],
        &["--method", "nope"][..],
        &["--trace", "t.csv"][..],
    ] {
        let (out, _) = estimate(&path, extra);
        assert_eq!(out.status.code(), Some(1), "{extra:?}");
        error_json(&out);
    }
    assert_eq!(prepost(&["frobnicate"], None).status.code(), Some(1));
    assert_eq!(prepost(&["--help"], None).status.code(), Some(0));
}

#[test]
fn missing_input_exits_2() {
    let (out, _) = estimate(Path::new("/nonexistent/input.csv"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "read");
}

#[test]
fn degenerate_pre_period_needs_explicit_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let mut sample = replicate_sample(&SimModel::appendix(), 7, 0).unwrap();
    sample.x_c.iter_mut().for_each(|x| *x = 100.0);
    let path = write_dataset(dir.path(), "flat.csv", &sample);

    let (out, _) = estimate(&path, &["--method", "prepost"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "degenerate_covariate");

    let (out, report) = estimate(&path, &["--method", "prepost", "--fallback-to-post"]);
    assert!(out.status.success());
    let report = report.unwrap();
    assert_eq!(report.method, prepost_core::Method::Post);
    assert_eq!(report.warnings.len(), 1);
    assert!(report.warnings[0].starts_with("fallback"));

    let (_, post) = estimate(&path, &["--method", "post"]);
    let post = post.unwrap();
    assert_eq!(post.percent_change_median, report.percent_change_median);
    assert!(post.warnings.is_empty());
}

#[test]
fn json_output_round_trips_and_csv_matches() {
    let dir = tempfile::tempdir().unwrap();
    let path = appendix_file(dir.path());
    let json_path = dir.path().join("r.json");
    let csv_path = dir.path().join("r.csv");
    let (out, _) = estimate(&path, &["--output", json_path.to_str().unwrap()]);
    assert!(out.status.success() && out.stdout.is_empty());
    let text = std::fs::read_to_string(&json_path).unwrap();
    let report: EstimateReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report.to_json(), text);

    estimate(
        &path,
        &["--format", "csv", "--output", csv_path.to_str().unwrap()],
    );
    let mut rdr = csv::Reader::from_path(&csv_path).unwrap();
    let row = rdr.records().next().unwrap().unwrap();
    assert_eq!(row[3].parse::<f64>().unwrap(), report.percent_change_median);
}

#[test]
fn gibbs_trace_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let path = appendix_file(dir.path());
    let trace = dir.path().join("trace.csv");
    let (out, _) = estimate(
        &path,
        &[
            "--method",
            "gibbs",
            "--seed",
            "1",
            "--iterations",
            "300",
            "--chains",
            "2",
            "--trace",
            trace.to_str().unwrap(),
        ],
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(trace).unwrap();
    assert_eq!(text.lines().count(), 601);
    assert!(text.starts_with("chain,iteration,mu0,sigma0_sq"));
}

const SMALL: &str = "seed = 99
[simulate]
datasets = 3
[coverage]
replicates = 100
buckets = 2
n_perm = 100
nodes = 20
[benchmark]
datasets = 50
iterations = 200
burnin = 20
[figures]
stability_nodes = [10, 20]
chain_iterations = 200
[scaling]
n_values = [20, 40]
rho_values = [0.0, 0.8]
replicates = 10
nodes = 20
";

fn run_campaign(command: &str, config: &Path, out_dir: &Path, threads: &str) -> PathBuf {
    let out = prepost(
        &[
            command,
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
            "--threads",
            threads,
        ],
        None,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out_dir.join(command)
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn campaigns_are_reproducible_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.toml");
    std::fs::write(&config, SMALL).unwrap();
    for command in ["simulate", "coverage", "figures", "scaling"] {
        let a = run_campaign(command, &config, &dir.path().join("a"), "1");
        let b = run_campaign(command, &config, &dir.path().join("b"), "3");
        let (fa, fb) = (read_dir_sorted(&a), read_dir_sorted(&b));
        assert_eq!(fa, fb, "{command}");
        assert!(fa.iter().any(|(n, _)| n == "manifest.json"));
    }
}

#[test]
fn benchmark_keeps_timing_out_of_the_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.toml");
    std::fs::write(&config, SMALL).unwrap();
    let a = run_campaign("benchmark", &config, &dir.path().join("a"), "1");
    let b = run_campaign("benchmark", &config, &dir.path().join("b"), "2");
    for name in [
        "table1.csv",
        "table1_datasets.csv",
        "summary.json",
        "manifest.json",
    ] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let table = std::fs::read_to_string(a.join("table1.csv")).unwrap();
    let methods: Vec<&str> = table
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(methods, ["DA", "GS", "DA-GS"]);
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["unhashed"][0], "table1_timing.csv");
    assert_eq!(manifest["seed"], 99);
    let hashed: Vec<&str> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["file"].as_str().unwrap())
        .collect();
    assert!(!hashed.contains(&"table1_timing.csv"));
}

#[test]
fn manifest_hashes_match_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.toml");
    std::fs::write(&config, SMALL).unwrap();
    let out = run_campaign("simulate", &config, dir.path(), "1");
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(
        manifest["config_sha256"],
        prepost_cli::config::sha256_hex(SMALL.as_bytes())
    );
    for o in manifest["outputs"].as_array().unwrap() {
        let bytes = std::fs::read(out.join(o["file"].as_str().unwrap())).unwrap();
        assert_eq!(o["sha256"], prepost_cli::config::sha256_hex(&bytes));
    }
}

#[test]
fn simulated_files_feed_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.toml");
    std::fs::write(&config, SMALL).unwrap();
    let out = run_campaign("simulate", &config, dir.path(), "1");
    let sample = replicate_sample(&SimModel::appendix(), 99, 1).unwrap();
    let file = out.join("dataset_0001.csv");
    let read = prepost_cli::input::Dataset::read(&file).unwrap();
    assert_eq!(read.prepost_sample().unwrap(), sample);
}

#[test]
fn figures_scatter_has_d_cubed_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.toml");
    std::fs::write(&config, SMALL).unwrap();
    let out = run_campaign("figures", &config, dir.path(), "1");
    let scatter = std::fs::read_to_string(out.join("fig1_scatter.csv")).unwrap();
    assert_eq!(scatter.lines().count(), 1 + 20 * 20 * 20);
    let histogram = std::fs::read_to_string(out.join("fig1_histogram.csv")).unwrap();
    assert_eq!(histogram.lines().count(), 101);
    assert_eq!(histogram.lines().filter(|l| l.ends_with("true")).count(), 90);
}

#[test]
fn out_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.toml");
    std::fs::write(&config, SMALL).unwrap();
    let env_dir = dir.path().join("from-env");
    let out = prepost(
        &["simulate", "--config", config.to_str().unwrap()],
        Some(&env_dir),
    );
    assert!(out.status.success());
    assert!(env_dir.join("simulate").join("manifest.json").exists());
}

#[test]
fn bad_config_keys_exit_1_with_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "seed = 1\n[coverage]\nreplicate = 10\n").unwrap();
    let out = prepost(
        &[
            "coverage",
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(1));
    let e = error_json(&out);
    assert_eq!(e["error"]["kind"], "config");
    assert!(e["error"]["message"].as_str().unwrap().contains("`replicate`"));
}
