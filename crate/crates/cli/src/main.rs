//! `densbayes` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use densbayes::evaluation::{accuracy_csv, accuracy_experiment, coverage_experiment};
use densbayes::estimator::fit_density;
use densbayes::preprocessing::parse_values;
use densbayes::{EstimateOptions, FitConfig, Hyperparameters, Method, NormalMixture};
use serde::Serialize;

const SYNOPSIS: &str = "\
usage: densbayes <fit|accuracy|coverage> [options]
  fit       --input FILE [--output FILE]
  accuracy  (--mixture mw8 | --weights W --means M --sds S) --n N --reps R [--output FILE]
  coverage  (--mixture mw8 | --weights W --means M --sds S) --n N --reps R [--output FILE]
  common    --method slice|nuts --grid-size M --num-basis K --sigma-beta S --s-sigma S
            --warmup G --samples R --seed SEED --level L --log-transform --padding P
run `densbayes <subcommand> --help` for details";

#[derive(Parser, Debug)]
#[command(name = "densbayes", version, about = "Bayesian density estimation with penalized splines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate a density from one value per line.
    Fit(FitArgs),
    /// Accuracy scores of repeated fits to samples from a normal mixture.
    Accuracy(SimArgs),
    /// Empirical coverage of credible bands at the population deciles.
    Coverage(SimArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct ModelArgs {
    /// Inference engine.
    #[arg(long, default_value = "slice", value_parser = parse_method)]
    method: Method,
    /// Number of binning grid points.
    #[arg(long, default_value_t = 401)]
    grid_size: usize,
    /// Number of spline basis functions.
    #[arg(long, default_value_t = 50)]
    num_basis: usize,
    /// Prior standard deviation of the intercept and slope.
    #[arg(long, default_value_t = 1000.0)]
    sigma_beta: f64,
    /// Half-Cauchy scale of the smoothing standard deviation.
    #[arg(long, default_value_t = 1000.0)]
    s_sigma: f64,
    /// Warm-up iterations [default: 100 for slice, 1000 for nuts].
    #[arg(long)]
    warmup: Option<usize>,
    /// Retained posterior draws.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Seed for all randomness.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Credible level of the pointwise bands.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Estimate on the log scale (positive data only).
    #[arg(long)]
    log_transform: bool,
    /// Fraction of the data range added on each side.
    #[arg(long, default_value_t = 0.05)]
    padding: f64,
    /// Initial slice width.
    #[arg(long, default_value_t = 1.0)]
    slice_width: f64,
    /// Maximum stepping-out steps of the slice sampler.
    #[arg(long, default_value_t = 50)]
    slice_max_steps: usize,
    /// NUTS target acceptance statistic.
    #[arg(long, default_value_t = 0.8)]
    target_accept: f64,
    /// NUTS maximum tree depth.
    #[arg(long, default_value_t = 10)]
    max_depth: usize,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Input file with one value per line (`-` for stdin).
    #[arg(long)]
    input: PathBuf,
    /// Output CSV; a JSON sidecar is written next to it. Stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args, Debug)]
struct SimArgs {
    /// Named mixture preset (`mw8`).
    #[arg(long, conflicts_with_all = ["weights", "means", "sds"])]
    mixture: Option<String>,
    /// Comma-separated mixture weights.
    #[arg(long, value_delimiter = ',', requires_all = ["means", "sds"])]
    weights: Option<Vec<f64>>,
    /// Comma-separated component means.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    means: Option<Vec<f64>>,
    /// Comma-separated component standard deviations.
    #[arg(long, value_delimiter = ',')]
    sds: Option<Vec<f64>>,
    /// Sample size per replication.
    #[arg(long)]
    n: usize,
    /// Number of replications.
    #[arg(long)]
    reps: usize,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|_| format!("expected `slice` or `nuts`, got `{s}`"))
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }
}

impl From<densbayes::Error> for Failure {
    fn from(e: densbayes::Error) -> Self {
        let code = if e.is_data_error() {
            2
        } else if e.is_numeric_failure() {
            3
        } else {
            1
        };
        Failure { code, message: e.to_string() }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    }
}

impl ModelArgs {
    fn options(&self) -> Result<EstimateOptions, Failure> {
        let mut fit = FitConfig::new(self.method).with_seed(self.seed);
        if let Some(w) = self.warmup {
            fit.warmup = w;
        }
        fit.retained = self.samples;
        fit.slice_width = self.slice_width;
        fit.slice_max_steps = self.slice_max_steps;
        fit.nuts_target_accept = self.target_accept;
        fit.nuts_max_depth = self.max_depth;
        let opts = EstimateOptions {
            grid_size: self.grid_size,
            num_basis: self.num_basis,
            padding: self.padding,
            log_transform: self.log_transform,
            level: self.level,
            hyper: Hyperparameters {
                sigma_beta: self.sigma_beta,
                s_sigma: self.s_sigma,
            },
            fit,
        };
        if !(self.padding.is_finite() && self.padding >= 0.0) {
            return Err(Failure::usage(format!("--padding must be non-negative, got {}", self.padding)));
        }
        opts.validate().map_err(|e| Failure::usage(e.to_string()))?;
        Ok(opts)
    }

    /// Flag values as given, with the engine-dependent warm-up resolved.
    fn echo(&self, opts: &EstimateOptions) -> ModelArgs {
        let mut m = self.clone();
        m.warmup = Some(opts.fit.warmup);
        m
    }
}

impl SimArgs {
    fn mixture(&self) -> Result<NormalMixture, Failure> {
        match (&self.mixture, &self.weights, &self.means, &self.sds) {
            (Some(name), None, None, None) => NormalMixture::preset(name).map_err(|e| Failure::usage(e.to_string())),
            (None, Some(w), Some(m), Some(s)) => {
                NormalMixture::new(w.clone(), m.clone(), s.clone()).map_err(|e| Failure::usage(e.to_string()))
            }
            _ => Err(Failure::usage("give either --mixture or all of --weights, --means and --sds")),
        }
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).map_err(|e| io_failure(path, e))?;
        Ok(s)
    } else {
        fs::read_to_string(path).map_err(|e| io_failure(path, e))
    }
}

fn write_output(path: Option<&Path>, contents: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, contents).map_err(|e| io_failure(p, e)),
        None => io::stdout()
            .write_all(contents.as_bytes())
            .map_err(|e| io_failure(Path::new("<stdout>"), e)),
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    #[serde(flatten)]
    estimate: &'a densbayes::DensityEstimate,
    config: ModelArgs,
    diagnostics: BTreeMap<String, f64>,
}

fn run_fit(args: &FitArgs) -> Result<(), Failure> {
    let opts = args.model.options()?;
    let data = parse_values(&read_input(&args.input)?)?;
    let fitted = fit_density(&data, &opts)?;
    let est = fitted.estimate(opts.level)?;
    write_output(args.output.as_deref(), &est.to_csv())?;
    if let Some(out) = &args.output {
        // timings are left out so that repeated runs are byte-identical
        let diagnostics = fitted
            .samples
            .diagnostics
            .iter()
            .filter(|(k, _)| k.as_str() != "seconds")
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        let sidecar = Sidecar {
            estimate: &est,
            config: args.model.echo(&opts),
            diagnostics,
        };
        let json = serde_json::to_string_pretty(&sidecar).map_err(|e| Failure {
            code: 3,
            message: format!("NonFiniteResult: cannot serialize estimate: {e}"),
        })?;
        let path = out.with_extension("json");
        fs::write(&path, json + "\n").map_err(|e| io_failure(&path, e))?;
    }
    Ok(())
}

fn run_accuracy(args: &SimArgs) -> Result<(), Failure> {
    let opts = args.model.options()?;
    let mix = args.mixture()?;
    let records = accuracy_experiment(&mix, args.n, args.reps, &opts, args.model.seed)?;
    for r in records.iter().filter(|r| r.error.is_some()) {
        eprintln!("replication {}: {}", r.replication, r.error.as_deref().unwrap_or_default());
    }
    write_output(args.output.as_deref(), &accuracy_csv(&records))
}

fn run_coverage(args: &SimArgs) -> Result<(), Failure> {
    let opts = args.model.options()?;
    let mix = args.mixture()?;
    let table = coverage_experiment(&mix, args.n, args.reps, &opts, args.model.seed)
        .map_err(|e| match e {
            densbayes::Error::InvalidConfig(m) => Failure::usage(m),
            other => other.into(),
        })?;
    for m in &table.failure_messages {
        eprintln!("{m}");
    }
    write_output(args.output.as_deref(), &table.to_csv())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            // clap spreads one reason over several lines; fold it back into one
            let rendered = e.to_string();
            let reason: Vec<&str> = rendered
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .filter(|l| !l.is_empty())
                .collect();
            eprintln!("{}\n{SYNOPSIS}", reason.join(" "));
            return ExitCode::from(1);
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Accuracy(a) => run_accuracy(a),
        Command::Coverage(a) => run_coverage(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            if f.code == 1 {
                eprintln!("{SYNOPSIS}");
            }
            ExitCode::from(f.code)
        }
    }
}
