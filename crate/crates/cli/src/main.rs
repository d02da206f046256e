//! `wtest`: Wasserstein goodness-of-fit tests from the command line.
//!
//! Exit codes: 0 on success, 2 for invalid input or configuration, 3 for
//! numeric failures and capacity limits.

mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use wtest_core::baselines::mmd_permutation_test;
use wtest_core::bootstrap::run_bootstrap;
use wtest_core::datagen::{generate, DistSpec, Family};
use wtest_core::dual::train_dual_critic;
use wtest_core::inference::{
    anti_concentration_diagnostic, check_parameter_budget, confidence_interval, default_r_grid,
    exact_distance, one_sample_test, qq_reference, two_sample_test, TestSettings,
};
use wtest_core::nn::TrainConfig;
use wtest_core::par::with_threads;
use wtest_core::rng::{stream, Domain};
use wtest_core::transport::DEFAULT_LP_BUDGET;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numeric(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(msg) | CliError::Numeric(msg) => f.write_str(msg),
        }
    }
}

impl From<wtest_core::Error> for CliError {
    fn from(e: wtest_core::Error) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "wtest",
    version,
    about = "Wasserstein goodness-of-fit tests with Lipschitz neural critics"
)]
struct Cli {
    /// Worker threads for bootstrap draws and permutations (default: all cores).
    #[arg(long, global = true, env = "WTEST_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a synthetic family and map it to the unit box.
    Gen {
        #[arg(long)]
        dist: Family,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Write a header row x0..x{d-1}.
        #[arg(long)]
        header: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact W1 between two samples.
    Exact {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        /// Largest n*m accepted by the transport solver.
        #[arg(long, default_value_t = DEFAULT_LP_BUDGET)]
        budget: usize,
    },
    /// Dual estimate of W1 with a trained critic.
    Dual {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multiplier bootstrap draws, one per line.
    Bootstrap {
        #[arg(long)]
        data: PathBuf,
        #[arg(long = "T")]
        t: usize,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// One-sample test against a reference sample.
    OneSample(OneSampleArgs),
    /// Confidence interval for the distance to a reference sample.
    Ci(OneSampleArgs),
    /// Two-sample test.
    TwoSample {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long = "T")]
        t: usize,
        #[arg(long = "config-x")]
        config_x: Option<PathBuf>,
        #[arg(long = "config-y")]
        config_y: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        /// Comma-separated splits in (0, 1); default 0.05, 0.10, ..., 0.95.
        #[arg(long = "r-grid", value_delimiter = ',')]
        r_grid: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Gaussian-kernel MMD permutation test.
    Mmd {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        permutations: usize,
        #[arg(long)]
        seed: u64,
        /// Kernel bandwidth; median heuristic when omitted.
        #[arg(long)]
        bandwidth: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reference draws of the scaled exact distance next to bootstrap draws.
    Qq {
        #[arg(long)]
        dist: Family,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        reps: usize,
        /// Size of the second sample in each reference repetition (default n).
        #[arg(long)]
        m: Option<usize>,
        /// Bootstrap draws (default reps).
        #[arg(long = "T")]
        t: Option<usize>,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Diagnostics.
    Diag {
        #[command(subcommand)]
        which: DiagCommand,
    },
    /// Compare a parameter count with the admissible window.
    Budget {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long = "S")]
        s: usize,
    },
}

#[derive(Subcommand, Debug)]
enum DiagCommand {
    /// Estimates of P(r <= W <= r + delta) / delta over a grid of r.
    AntiConcentration {
        #[arg(long)]
        dist: Family,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        reps: usize,
        /// Reference sample size per repetition (default n).
        #[arg(long = "m-ref")]
        m_ref: Option<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        deltas: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct ConfigArg {
    /// Training configuration JSON; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OneSampleArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    alpha: f64,
    #[arg(long = "T")]
    t: usize,
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Provenance embedded in every JSON output.
#[derive(Debug, Serialize)]
struct RunManifest {
    command: String,
    version: &'static str,
    seed: Option<u64>,
    config_digest: Option<String>,
    inputs: Vec<InputDigest>,
    wall_clock_seconds: f64,
}

#[derive(Debug, Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

struct Run {
    command: &'static str,
    started: Instant,
    inputs: Vec<InputDigest>,
}

impl Run {
    fn new(command: &'static str) -> Self {
        Self {
            command,
            started: Instant::now(),
            inputs: Vec::new(),
        }
    }

    fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: io::file_digest(path)?,
        });
        Ok(())
    }

    fn manifest(self, seed: Option<u64>, config_digest: Option<String>) -> RunManifest {
        RunManifest {
            command: self.command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config_digest,
            inputs: self.inputs,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        }
    }
}

fn load_config(arg: &ConfigArg, run: &mut Run) -> Result<TrainConfig, CliError> {
    load_config_path(arg.config.as_deref(), run)
}

fn load_config_path(path: Option<&Path>, run: &mut Run) -> Result<TrainConfig, CliError> {
    match path {
        None => Ok(TrainConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Input(format!("cannot read {}: {e}", p.display())))?;
            run.input(p)?;
            Ok(TrainConfig::from_json(&text)?)
        }
    }
}

fn envelope(report: impl Serialize, manifest: RunManifest, details: Value) -> Value {
    let mut out = json!({ "report": report, "manifest": manifest });
    if !details.is_null() {
        out["details"] = details;
    }
    out
}

fn print_json(value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Input(format!("cannot encode JSON: {e}")))?;
    println!("{text}");
    Ok(())
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Gen {
            dist,
            d,
            n,
            seed,
            header,
            out,
        } => {
            let spec = DistSpec::new(dist, d)?;
            let sample = generate(&spec, n, seed)?;
            let rows: Vec<Vec<Option<f64>>> = sample
                .data()
                .rows()
                .into_iter()
                .map(|r| r.iter().map(|v| Some(*v)).collect())
                .collect();
            let names: Vec<String> = if header {
                (0..d).map(|k| format!("x{k}")).collect()
            } else {
                Vec::new()
            };
            let names: Vec<&str> = names.iter().map(String::as_str).collect();
            io::write_csv(&out, &names, &rows)
        }
        Command::Exact { x, y, budget } => {
            let (x, y) = (io::read_sample(&x)?, io::read_sample(&y)?);
            println!("{:?}", exact_distance(&x, &y, budget)?);
            Ok(())
        }
        Command::Dual {
            x,
            y,
            config,
            seed,
            out,
        } => {
            let mut run = Run::new("dual");
            run.input(&x)?;
            run.input(&y)?;
            let cfg = load_config(&config, &mut run)?.with_seed(seed);
            let (xs, ys) = (io::read_sample(&x)?, io::read_sample(&y)?);
            let est = train_dual_critic(&xs, &ys, &cfg)?;
            let report = json!({
                "estimate": est.value,
                "lipschitz_certificate": est.lipschitz_certificate,
                "S": cfg.param_count(xs.d()),
                "epochs": cfg.epochs,
            });
            let value = envelope(
                report,
                run.manifest(Some(seed), Some(cfg.digest())),
                Value::Null,
            );
            match out {
                Some(path) => io::write_json(&path, &value),
                None => print_json(&value),
            }
        }
        Command::Bootstrap {
            data,
            t,
            config,
            seed,
            out,
        } => {
            let mut run = Run::new("bootstrap");
            let cfg = load_config(&config, &mut run)?.with_seed(seed);
            let x = io::read_sample(&data)?;
            let draws = run_bootstrap(&x, t, &cfg, seed)?;
            let rows: Vec<Vec<Option<f64>>> =
                draws.draws().iter().map(|v| vec![Some(*v)]).collect();
            io::write_csv(&out, &["draw"], &rows)
        }
        Command::OneSample(args) => {
            let mut run = Run::new("one-sample");
            let (x, r) = load_pair(&args, &mut run)?;
            let cfg = load_config(&args.config, &mut run)?;
            let outcome = one_sample_test(
                &x,
                &r,
                &cfg,
                &TestSettings::new(args.alpha, args.t, args.seed),
            )?;
            let details = json!({
                "p_value": outcome.p_value,
                "lipschitz_certificate": outcome.lipschitz_certificate,
            });
            let digest = outcome.report.config_digest.clone();
            let value = envelope(
                &outcome.report,
                run.manifest(Some(args.seed), Some(digest)),
                details,
            );
            io::write_json(&args.out, &value)
        }
        Command::Ci(args) => {
            let mut run = Run::new("ci");
            let (x, r) = load_pair(&args, &mut run)?;
            let cfg = load_config(&args.config, &mut run)?;
            let ci = confidence_interval(
                &x,
                &r,
                &cfg,
                &TestSettings::new(args.alpha, args.t, args.seed),
            )?;
            let digest = ci.config_digest.clone();
            let value = envelope(
                &ci,
                run.manifest(Some(args.seed), Some(digest)),
                Value::Null,
            );
            io::write_json(&args.out, &value)
        }
        Command::TwoSample {
            x,
            y,
            alpha,
            t,
            config_x,
            config_y,
            seed,
            r_grid,
            out,
        } => {
            let mut run = Run::new("two-sample");
            run.input(&x)?;
            run.input(&y)?;
            let cfg_x = load_config_path(config_x.as_deref(), &mut run)?;
            let cfg_y = load_config_path(config_y.as_deref(), &mut run)?;
            let (xs, ys) = (io::read_unit_box_sample(&x)?, io::read_unit_box_sample(&y)?);
            let grid = r_grid.unwrap_or_else(default_r_grid);
            let outcome = two_sample_test(
                &xs,
                &ys,
                &cfg_x,
                &cfg_y,
                &TestSettings::new(alpha, t, seed),
                &grid,
            )?;
            let details = json!({
                "two_sample_quantile": outcome.quantile,
                "lipschitz_certificate": outcome.lipschitz_certificate,
            });
            let digest = outcome.report.config_digest.clone();
            let value = envelope(
                &outcome.report,
                run.manifest(Some(seed), Some(digest)),
                details,
            );
            io::write_json(&out, &value)
        }
        Command::Mmd {
            x,
            y,
            alpha,
            permutations,
            seed,
            bandwidth,
            out,
        } => {
            let mut run = Run::new("mmd");
            run.input(&x)?;
            run.input(&y)?;
            let (xs, ys) = (io::read_sample(&x)?, io::read_sample(&y)?);
            let report = mmd_permutation_test(&xs, &ys, alpha, permutations, seed, bandwidth)?;
            let value = envelope(&report, run.manifest(Some(seed), None), Value::Null);
            io::write_json(&out, &value)
        }
        Command::Qq {
            dist,
            d,
            n,
            reps,
            m,
            t,
            config,
            seed,
            out,
        } => {
            let mut run = Run::new("qq");
            let cfg = load_config(&config, &mut run)?.with_seed(seed);
            let spec = DistSpec::new(dist, d)?;
            let reference = qq_reference(&spec, n, m.unwrap_or(n), reps, &cfg, seed)?;
            let data = wtest_core::datagen::generate_with_rng(
                &spec,
                n,
                &mut stream(seed, Domain::Misc, 0),
            )?;
            let draws = run_bootstrap(&data, t.unwrap_or(reps), &cfg, seed)?;
            let len = reference.len().max(draws.len());
            let rows: Vec<Vec<Option<f64>>> = (0..len)
                .map(|k| vec![reference.get(k).copied(), draws.draws().get(k).copied()])
                .collect();
            io::write_csv(&out, &["reference", "bootstrap"], &rows)
        }
        Command::Diag {
            which:
                DiagCommand::AntiConcentration {
                    dist,
                    d,
                    n,
                    reps,
                    m_ref,
                    deltas,
                    seed,
                    out,
                },
        } => {
            let spec = DistSpec::new(dist, d)?;
            let rows =
                anti_concentration_diagnostic(&spec, n, reps, m_ref.unwrap_or(n), &deltas, seed)?;
            let rows: Vec<Vec<Option<f64>>> = rows
                .iter()
                .map(|r| vec![Some(r.delta), Some(r.r), Some(r.c_r)])
                .collect();
            io::write_csv(&out, &["delta", "r", "c_r"], &rows)
        }
        Command::Budget { n, d, s } => {
            let report = check_parameter_budget(n, d, s)?;
            if !report.admissible {
                eprintln!(
                    "warning: S = {s} lies outside ({:.4e}, {:.4e})",
                    report.lower, report.upper
                );
            }
            print_json(&report)
        }
    }
}

fn load_pair(
    args: &OneSampleArgs,
    run: &mut Run,
) -> Result<(wtest_core::Sample, wtest_core::Sample), CliError> {
    run.input(&args.data)?;
    run.input(&args.reference)?;
    Ok((
        io::read_unit_box_sample(&args.data)?,
        io::read_sample(&args.reference)?,
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads == Some(0) {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(2);
    }
    let command = cli.command;
    match with_threads(cli.threads, move || run(command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
