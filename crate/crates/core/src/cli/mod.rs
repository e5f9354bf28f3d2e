//! The `opera` command line: experiment runs, verification suites, rate fits,
//! mode comparisons and reports over result directories.
//!
//! Exit codes: 0 success, 1 verification or runtime failure, 2 usage or
//! configuration error.

pub mod suites;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::Error;
use crate::experiment::config::{parse_overrides, DEFAULT_T_MIN};
use crate::experiment::io::{read_csv, write_json, write_outputs, CsvKind};
use crate::experiment::runner::{compare_modes, pair_modes, run_experiment, summarize};
use crate::experiment::{ExperimentConfig, Mode};
use crate::theory::VerificationReport;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable overriding the base seed of a configuration.
pub const SEED_ENV: &str = "OPERA_SEED";

#[derive(Debug, Parser)]
#[command(name = "opera", about = "Online pairwise least-squares learning in an RKHS")]
struct Cli {
    /// Size of the worker pool (default: logical cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    config: PathBuf,
    /// `--key=value` overrides of configuration entries.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Suite {
    Lemmas,
    Operators,
    Concentration,
    Decomposition,
    Isometry,
    Equivalence,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    suite: Suite,
    /// Step-size exponents (comma-separated).
    #[arg(long, value_delimiter = ',')]
    theta: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    mu: Vec<f64>,
    #[arg(long, default_value_t = 5000)]
    tmax: usize,
    #[arg(long, value_delimiter = ',')]
    beta: Vec<f64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 20)]
    windows: usize,
    /// Sample count per replication (concentration).
    #[arg(long = "t")]
    t: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Horizon of the learning runs.
    #[arg(long = "T")]
    horizon: Option<usize>,
    /// Support size of the discrete measure.
    #[arg(long, default_value_t = 5)]
    m: usize,
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for the JSON report.
    #[arg(long, default_value = "results")]
    output: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write trials.csv and summary.json.
    Run(ConfigArgs),
    /// Run a numeric verification suite.
    Verify(VerifyArgs),
    /// Run an experiment and print the fitted rate.
    Rates(ConfigArgs),
    /// Run OPERA and POGD on the same seeds.
    Compare(ConfigArgs),
    /// Summarize every CSV in a results directory.
    Report { dir: PathBuf },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::Input(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn fail(e: Error) -> i32 {
    eprintln!("error: {e}");
    exit_code(&e)
}

/// Accepts `--key=value` and `--key value`.
fn normalize_overrides(raw: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < raw.len() {
        let a = &raw[i];
        if !a.contains('=') && a.starts_with("--") && i + 1 < raw.len() {
            out.push(format!("{a}={}", raw[i + 1]));
            i += 2;
        } else {
            out.push(a.clone());
            i += 1;
        }
    }
    out
}

fn load_config(args: &ConfigArgs, workers: Option<usize>) -> Result<ExperimentConfig, Error> {
    let mut overrides: BTreeMap<String, String> = parse_overrides(&normalize_overrides(&args.overrides))?;
    if let Some(w) = workers {
        overrides.insert("workers".into(), w.to_string());
    }
    if let Ok(s) = std::env::var(SEED_ENV) {
        let seed: u64 = s
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("{SEED_ENV} is not an unsigned integer: `{s}`")))?;
        overrides.insert("seed".into(), seed.to_string());
    }
    if !args.config.is_file() {
        return Err(Error::config(format!(
            "config file `{}` not found",
            args.config.display()
        )));
    }
    ExperimentConfig::load(&args.config, &overrides)
}

fn cmd_run(args: &ConfigArgs, workers: Option<usize>) -> i32 {
    let cfg = match load_config(args, workers) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let out = run_experiment(&cfg).and_then(|results| {
        let s = summarize(&results, cfg.t_min);
        write_outputs(&cfg, &results, &s, None)
    });
    match out {
        Ok(o) => {
            println!("wrote {}", o.trials.display());
            println!("wrote {}", o.summary.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

fn cmd_rates(args: &ConfigArgs, workers: Option<usize>) -> i32 {
    let cfg = match load_config(args, workers) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let results = match run_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILURE;
        }
    };
    let summaries = summarize(&results, cfg.t_min);
    let mut code = EXIT_OK;
    for (mode, s) in &summaries {
        for (t, m) in &s.medians_by_t {
            println!("{} t={t} median_error={m:.6e}", mode.name());
        }
        match &s.rate_fit {
            Some(f) => println!(
                "{} slope={:.4} intercept={:.4} residual={:.3e} t_range={}..{}",
                mode.name(),
                f.slope,
                f.intercept,
                f.residual,
                f.t_range.0,
                f.t_range.1
            ),
            None => {
                eprintln!(
                    "{}: {}",
                    mode.name(),
                    s.rate_fit_error.as_deref().unwrap_or("no rate fit")
                );
                code = EXIT_FAILURE;
            }
        }
    }
    if let Err(e) = write_outputs(&cfg, &results, &summaries, None) {
        eprintln!("error: {e}");
        return EXIT_FAILURE;
    }
    code
}

fn cmd_compare(args: &ConfigArgs, workers: Option<usize>) -> i32 {
    let cfg = match load_config(args, workers) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let cmp = match compare_modes(&cfg) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    for (mode, s) in &cmp.summary {
        let avg = s
            .final_median_averaged
            .map(|v| format!("{v:.6e}"))
            .unwrap_or_else(|| "-".into());
        println!("{} final_median={:.6e} averaged={avg}", mode.name(), s.final_median);
    }
    match write_outputs(&cfg, &cmp.results, &cmp.summary, Some(&cmp.paired)) {
        Ok(o) => {
            println!("wrote {}", o.trials.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

fn or<T: Clone>(v: &[T], default: &[T]) -> Vec<T> {
    if v.is_empty() {
        default.to_vec()
    } else {
        v.to_vec()
    }
}

fn run_suite(a: &VerifyArgs) -> Result<Vec<VerificationReport>, Error> {
    let theta_or = |d: f64| a.theta.first().copied().unwrap_or(d);
    match a.suite {
        Suite::Lemmas => suites::lemmas(
            &or(&a.theta, &suites::DEFAULT_THETAS),
            &or(&a.mu, &suites::DEFAULT_MUS),
            a.tmax,
        ),
        Suite::Operators => suites::operators(
            &or(&a.beta, &[0.5, 1.0]),
            theta_or(0.6),
            a.mu.first().copied().unwrap_or(1.0),
            a.dim.unwrap_or(20),
            a.trials.unwrap_or(100),
            a.windows,
            a.seed,
        ),
        Suite::Concentration => suites::concentration(
            a.dim.unwrap_or(5),
            a.t.unwrap_or(100),
            a.delta,
            a.trials.unwrap_or(10_000),
            a.seed,
        ),
        Suite::Decomposition => {
            suites::decomposition(a.m, a.horizon.unwrap_or(50), a.sigma, theta_or(2.0 / 3.0), a.seed)
        }
        Suite::Isometry => Ok(vec![suites::isometry(a.trials.unwrap_or(100), a.seed)?]),
        Suite::Equivalence => Ok(vec![suites::equivalence(
            a.m,
            a.horizon.unwrap_or(300),
            a.seeds,
            a.sigma,
            theta_or(2.0 / 3.0),
            a.seed,
        )?]),
    }
}

fn cmd_verify(a: &VerifyArgs) -> i32 {
    let reports = match run_suite(a) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let name = format!("{:?}", a.suite).to_lowercase();
    let path = a.output.join(format!("verify-{name}.json"));
    let written = std::fs::create_dir_all(&a.output)
        .map_err(Error::from)
        .and_then(|_| write_json(&reports, &path));
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_FAILURE;
    }
    let mut ok = true;
    for r in &reports {
        let status = if r.passed() { "ok" } else { "FAILED" };
        println!(
            "{:<24} {status:<6} cases={} violations={} worst_margin={:.3e}",
            r.check, r.n_cases, r.n_violations, r.worst_margin
        );
        for key in [
            "max_deviation",
            "max_step_residual",
            "unrolled_residual",
            "max_relative_gap",
        ] {
            if let Some(v) = r.parameters.get(key) {
                println!("  {key} = {v}");
            }
        }
        ok &= r.passed();
    }
    if ok {
        println!("report: {}", path.display());
        EXIT_OK
    } else {
        eprintln!("violations found; report: {}", path.display());
        EXIT_FAILURE
    }
}

fn cmd_report(dir: &Path) -> i32 {
    let entries = match std::fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: cannot read `{}`: {e}", dir.display());
            return EXIT_USAGE;
        }
    };
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        eprintln!("error: no result files in `{}`", dir.display());
        return EXIT_USAGE;
    }
    let mut file_entries = Vec::new();
    let mut paired_entries = Vec::new();
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:<28} {:<6} {:>6} {:>10} {:>10} {:>12}",
        "file", "mode", "trials", "slope", "final", "violations"
    );
    for f in &files {
        let name = f
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let results = match read_csv(f) {
            Ok(CsvKind::Trials(r)) => r,
            Ok(CsvKind::Paired) => continue,
            Err(e) => {
                eprintln!("error: corrupt CSV `{}`: {e}", f.display());
                return EXIT_FAILURE;
            }
        };
        let summaries = summarize(&results, DEFAULT_T_MIN);
        for (mode, s) in &summaries {
            let slope = s
                .rate_fit
                .as_ref()
                .map(|r| format!("{:.4}", r.slope))
                .unwrap_or_else(|| "-".into());
            let viol = s
                .bound_violation_fraction
                .map(|v| format!("{v:.3}"))
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(
                text,
                "{name:<28} {:<6} {:>6} {slope:>10} {:>10.4e} {viol:>12}",
                mode.name(),
                s.n_trials,
                s.final_median
            );
        }
        let modes: BTreeMap<&str, _> = summaries.iter().map(|(m, s)| (m.name(), s)).collect();
        file_entries.push(json!({ "file": name, "modes": modes }));
        if summaries.contains_key(&Mode::Opera) && summaries.contains_key(&Mode::Pogd) {
            let rows = pair_modes(&results);
            let _ = writeln!(text, "\npaired rows for {name}:");
            let _ = writeln!(
                text,
                "{:>8} {:>8} {:>14} {:>14}",
                "seed", "t", "opera_error", "pogd_error"
            );
            for p in &rows {
                let _ = writeln!(
                    text,
                    "{:>8} {:>8} {:>14.6e} {:>14.6e}",
                    p.seed, p.t, p.opera_error, p.pogd_error
                );
            }
            paired_entries.push(json!({ "file": name, "rows": rows }));
        }
    }
    let report = json!({ "files": file_entries, "paired": paired_entries });
    let json_path = dir.join("report.json");
    let txt_path = dir.join("report.txt");
    let written = write_json(&report, &json_path).and_then(|_| std::fs::write(&txt_path, &text).map_err(Error::from));
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_FAILURE;
    }
    print!("{text}");
    EXIT_OK
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match &cli.command {
        Command::Run(a) => cmd_run(a, cli.workers),
        Command::Verify(a) => cmd_verify(a),
        Command::Rates(a) => cmd_rates(a, cli.workers),
        Command::Compare(a) => cmd_compare(a, cli.workers),
        Command::Report { dir } => cmd_report(dir),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_forms() {
        let raw: Vec<String> = ["--theta=0.7", "--T", "30", "seed=4"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(normalize_overrides(&raw), vec!["--theta=0.7", "--T=30", "seed=4"]);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["opera", "verify", "nonsense"]), EXIT_USAGE);
        assert_eq!(run(["opera", "run", "/definitely/missing.cfg"]), EXIT_USAGE);
        assert_eq!(run(["opera"]), EXIT_USAGE);
    }
}
