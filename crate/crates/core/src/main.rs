use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::Parser;
use log::error;

use singlap::harness::{emit_csv, format_csv, parse_list, run_experiment, Experiment, Overrides};
use singlap::quadrature::TruncationPolicy;
use singlap::Error;

/// Graph Laplacians at isolated metric singularities.
#[derive(Debug, Parser)]
#[command(name = "singlap", version)]
struct Cli {
    /// table1, table2, counterexample, interior, curvature or mc.
    experiment: Option<Experiment>,

    /// Comma-separated, strictly decreasing bandwidths in (0, 1).
    #[arg(long)]
    t_values: Option<CommaList<f64>>,

    #[arg(long)]
    n_theta: Option<usize>,

    #[arg(long)]
    n_r: Option<usize>,

    /// Relative tolerance for flagging unconverged quadrature.
    #[arg(long)]
    rel_tol: Option<f64>,

    /// fixed:R, power:η or mult:c.
    #[arg(long)]
    trunc: Option<TruncationPolicy>,

    #[arg(long)]
    seed: Option<u64>,

    /// Write the CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Built-in metric for the curvature experiment.
    #[arg(long)]
    metric: Option<String>,

    /// Comma-separated sample sizes for the mc experiment.
    #[arg(long)]
    n_values: Option<CommaList<usize>>,

    #[arg(long)]
    replicates: Option<usize>,

    /// `key = value` file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Compare against the acceptance thresholds; exit 4 on failure.
    #[arg(long)]
    check: bool,
}

#[derive(Debug, Clone)]
struct CommaList<T>(Vec<T>);

impl<T: FromStr> FromStr for CommaList<T>
where
    T::Err: fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        parse_list(s)
            .map(CommaList)
            .map_err(|e| format!("`{s}`: {e}"))
    }
}

impl Cli {
    fn overrides(self) -> (Option<PathBuf>, bool, Overrides) {
        (
            self.config,
            self.check,
            Overrides {
                experiment: self.experiment,
                t_values: self.t_values.map(|l| l.0),
                n_theta: self.n_theta,
                n_r: self.n_r,
                rel_tol: self.rel_tol,
                truncation: self.trunc,
                seed: self.seed,
                output_path: self.out,
                metric: self.metric,
                sample_sizes: self.n_values.map(|l| l.0),
                replicates: self.replicates,
            },
        )
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    let (config, check, flags) = cli.overrides();
    let base = match config {
        Some(path) => Overrides::from_file(&path)?,
        None => Overrides::default(),
    };
    let cfg = base.merged(flags).resolve()?;
    let outcome = run_experiment(&cfg)?;

    match &cfg.output_path {
        Some(path) => emit_csv(&outcome.rows, path)?,
        None => print!("{}", format_csv(&outcome.rows)),
    }
    for line in outcome.summary_lines() {
        eprintln!("{line}");
    }

    if check {
        let checks = outcome.checks();
        for c in &checks {
            eprintln!(
                "[{}] {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        if !outcome.all_converged() {
            return Ok(3);
        }
        if checks.iter().any(|c| !c.passed) {
            return Ok(4);
        }
    } else if !outcome.all_converged() {
        return Ok(3);
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            error!("{e}");
            eprintln!("singlap: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
