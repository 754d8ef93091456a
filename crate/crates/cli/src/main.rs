//! Command-line interface: CSV ingestion, the pursuit pipeline, tail
//! tables, Monte Carlo curve generation, the verification battery, and
//! fixture regeneration.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or input error,
//! 3 degenerate data.

mod csvio;
mod fixtures;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pptube::cumulant::CumulantKind;
use pptube::error::Error as CoreError;
use pptube::mc::{self, McConfig};
use pptube::report::{self, VerifyReport};
use pptube::sphere_opt::{self, OptConfig, PursuitConfig};
use pptube::tube;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pptube",
    version,
    about = "Moment-index projection pursuit with tube-method tail probabilities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maximize the moment index over projection directions of a CSV
    /// sample and report the direction, the maximum, and its p-value.
    Pursue(PursueArgs),
    /// Tabulate the tail approximation of the maximum with its per-degree
    /// breakdown (plot-ready CSV).
    TailTable(TailTableArgs),
    /// Monte Carlo tail curves of the limiting or finite-sample maximum.
    Simulate(SimulateArgs),
    /// Run the invariant verification batteries and emit a JSON report.
    Verify(VerifyArgs),
    /// Compare the closed-form tube volume against uniform sampling.
    TubeVolume(TubeVolumeArgs),
    /// Rewrite the committed fixture datasets deterministically.
    RegenFixtures(RegenArgs),
}

#[derive(Args)]
struct PursueArgs {
    /// CSV file, one observation per row, dimension inferred from columns.
    #[arg(long)]
    data: PathBuf,
    /// Skip a single header row.
    #[arg(long)]
    header: bool,
    /// Random optimizer starts (dimensions above 2).
    #[arg(long, default_value_t = 32)]
    starts: usize,
    /// Half-circle grid resolution (dimension 2).
    #[arg(long, default_value_t = 4096)]
    grid: usize,
    #[arg(long, env = "PPTUBE_SEED", default_value_t = 0)]
    seed: u64,
    /// Use unbiased k-statistics instead of moment-based cumulants.
    #[arg(long)]
    kstat: bool,
    /// Emit CSV instead of the default JSON.
    #[arg(long, conflicts_with = "json")]
    csv: bool,
    /// Emit JSON (the default).
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct TailTableArgs {
    #[arg(long, default_value_t = 2)]
    q: u32,
    /// Comma-separated thresholds on the index scale (c squared).
    #[arg(long, value_delimiter = ',', conflicts_with = "range")]
    c2: Vec<f64>,
    /// Threshold sweep A:B:STEP on the index scale.
    #[arg(long)]
    range: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimMode {
    /// Limiting Gaussian field maxima.
    Limit,
    /// Finite-sample maxima of the index for n normal observations.
    Finite,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    mode: SimMode,
    #[arg(long, default_value_t = 2)]
    q: u32,
    /// Sample size per replication (finite mode only).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 2000)]
    reps: usize,
    #[arg(long, env = "PPTUBE_SEED", default_value_t = 0)]
    seed: u64,
    /// Comma-separated thresholds for the emitted tail curve.
    #[arg(long, value_delimiter = ',', required = true)]
    thresholds: Vec<f64>,
    /// Append the tube approximation column for overlay plots.
    #[arg(long)]
    approx: bool,
    /// Worker threads (1 forces a sequential run; the output is identical).
    #[arg(long)]
    workers: Option<usize>,
    /// Half-circle grid resolution for the inner maximization.
    #[arg(long, default_value_t = 4096)]
    grid: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Specfun,
    Geometry,
    Tube,
    Mc,
    All,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    suite: Suite,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct TubeVolumeArgs {
    #[arg(long, default_value_t = 2)]
    q: u32,
    /// Tube radius, at most the critical radius atan(3/4).
    #[arg(long)]
    theta: f64,
    #[arg(long, default_value_t = 200_000)]
    mc_reps: usize,
    #[arg(long, env = "PPTUBE_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value_t = 1024)]
    grid: usize,
}

#[derive(Args)]
struct RegenArgs {
    /// Target directory for the fixture CSVs.
    #[arg(long, default_value = "fixtures")]
    dir: PathBuf,
    #[arg(long, default_value_t = fixtures::FIXTURE_SEED)]
    seed: u64,
}

/// Failures mapped onto process exit codes.
enum CliError {
    /// Bad arguments or unreadable/malformed input: exit 2.
    Usage(String),
    /// Degenerate data: exit 3.
    Degenerate(String),
}

impl CliError {
    fn code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Degenerate(_) => ExitCode::from(3),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Degenerate(m) => m,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::DegenerateSample => CliError::Degenerate(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

/// The pursuit pipeline's machine-readable report.
#[derive(Serialize, Deserialize, Debug)]
pub struct PursuitReport {
    pub q: usize,
    pub n: usize,
    pub seed: u64,
    pub h_star: Vec<f64>,
    pub max_index: f64,
    pub p_value: f64,
    /// True when the p-value had to be regularized (observed maximum below
    /// the approximation's trustworthy regime).
    pub clamped: bool,
    pub converged: bool,
    pub gradient_norm: Option<f64>,
    pub starts_used: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Pursue(args) => cmd_pursue(args),
        Command::TailTable(args) => cmd_tail_table(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Verify(args) => cmd_verify(args),
        Command::TubeVolume(args) => cmd_tube_volume(args),
        Command::RegenFixtures(args) => cmd_regen_fixtures(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {}", err.message());
            err.code()
        }
    }
}

fn cmd_pursue(args: PursueArgs) -> Result<ExitCode, CliError> {
    let data = csvio::read_data(&args.data, args.header)?;
    let config = PursuitConfig {
        grid_resolution: args.grid,
        opt: OptConfig {
            starts: args.starts,
            seed: args.seed,
            ..OptConfig::default()
        },
        kind: if args.kstat {
            CumulantKind::KStatistic
        } else {
            CumulantKind::Moment
        },
    };
    let result = sphere_opt::max_index_value(&data, &config)?;
    let pv = tube::pvalue(data.q() as u32, result.value)?;
    let report = PursuitReport {
        q: data.q(),
        n: data.n(),
        seed: args.seed,
        h_star: result.h_star.as_ref().to_vec(),
        max_index: result.value,
        p_value: pv.p.value(),
        clamped: pv.clamped,
        converged: result.converged,
        gradient_norm: result.best_gradient_norm,
        starts_used: result.starts_used,
    };
    if args.csv {
        let h = report
            .h_star
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",");
        println!("q,n,seed,max_index,p_value,clamped,h_star");
        println!(
            "{},{},{},{},{},{},\"{}\"",
            report.q, report.n, report.seed, report.max_index, report.p_value, report.clamped, h
        );
    } else {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_range(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "range must be A:B:STEP, got '{text}'"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad number '{p}' in range")))
        })
        .collect::<Result<_, _>>()?;
    let (a, b, step) = (nums[0], nums[1], nums[2]);
    if step <= 0.0 || b < a {
        return Err(CliError::Usage("range needs B >= A and STEP > 0".into()));
    }
    let mut out = Vec::new();
    let mut x = a;
    while x <= b + 1e-12 {
        out.push(x);
        x += step;
    }
    Ok(out)
}

fn cmd_tail_table(args: TailTableArgs) -> Result<ExitCode, CliError> {
    let thresholds = if let Some(range) = &args.range {
        parse_range(range)?
    } else if !args.c2.is_empty() {
        args.c2.clone()
    } else {
        return Err(CliError::Usage("provide --c2 LIST or --range A:B:STEP".into()));
    };
    if thresholds.iter().any(|&c| c < 0.0 || !c.is_finite()) {
        return Err(CliError::Usage("thresholds must be finite and nonnegative".into()));
    }
    let degrees: Vec<u32> = tube::weyl_coefficients(args.q)
        .map_err(CliError::from)?
        .iter()
        .map(|(e, _)| e)
        .collect();
    let term_cols = degrees
        .iter()
        .map(|e| format!("term_e{e}"))
        .collect::<Vec<_>>()
        .join(",");
    println!("c2,tail,clamped,{term_cols}");
    for &c2 in &thresholds {
        let approx = tube::tail_approx(args.q, c2)?;
        let pv = tube::pvalue(args.q, c2)?;
        let terms = approx
            .terms
            .iter()
            .map(|(_, t)| t.to_string())
            .collect::<Vec<_>>()
            .join(",");
        println!("{},{},{},{}", c2, approx.value, pv.clamped, terms);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode, CliError> {
    if args.thresholds.iter().any(|t| !t.is_finite()) {
        return Err(CliError::Usage("thresholds must be finite".into()));
    }
    let cfg = McConfig {
        reps: args.reps,
        seed: args.seed,
        workers: args.workers,
        grid_resolution: args.grid,
        opt: OptConfig::default(),
    };
    let samples = match args.mode {
        SimMode::Limit => mc::simulate_limit_max(args.q, &cfg)?,
        SimMode::Finite => {
            let n = args
                .n
                .ok_or_else(|| CliError::Usage("finite mode needs --n".into()))?;
            mc::simulate_finite_max(args.q, n, &cfg)?
        }
    };
    let curve = mc::empirical_tail(&samples.values, &args.thresholds)?;
    if args.approx {
        println!("threshold,p_hat,se,approx");
    } else {
        println!("threshold,p_hat,se");
    }
    for i in 0..curve.thresholds.len() {
        if args.approx {
            let approx = tube::tail_approx(args.q, curve.thresholds[i])?;
            println!(
                "{},{},{},{}",
                curve.thresholds[i], curve.probabilities[i], curve.se[i], approx.value
            );
        } else {
            println!(
                "{},{},{}",
                curve.thresholds[i], curve.probabilities[i], curve.se[i]
            );
        }
    }
    if samples.non_converged > 0 {
        eprintln!(
            "note: {} of {} inner maximizations did not meet the gradient tolerance",
            samples.non_converged, args.reps
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode, CliError> {
    let mut checks = Vec::new();
    let mut name = String::new();
    if matches!(args.suite, Suite::Specfun | Suite::All) {
        checks.extend(report::specfun_suite());
        name.push_str("specfun ");
    }
    if matches!(args.suite, Suite::Geometry | Suite::All) {
        checks.extend(report::geometry_suite());
        name.push_str("geometry ");
    }
    if matches!(args.suite, Suite::Tube | Suite::All) {
        checks.extend(report::tube_suite());
        name.push_str("tube ");
    }
    if matches!(args.suite, Suite::Mc | Suite::All) {
        checks.extend(report::mc_suite(args.workers));
        name.push_str("mc ");
    }
    let report = VerifyReport::new(name.trim(), checks);
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    if report.pass {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

#[derive(Serialize)]
struct TubeVolumeReport {
    q: u32,
    theta: f64,
    formula: f64,
    mc_fraction: f64,
    mc_se: f64,
    hits: usize,
    reps: usize,
    flagged: usize,
    z_score: f64,
}

fn cmd_tube_volume(args: TubeVolumeArgs) -> Result<ExitCode, CliError> {
    let formula = tube::tube_volume_fraction(args.q, args.theta)?;
    let cfg = McConfig {
        reps: args.mc_reps,
        seed: args.seed,
        workers: args.workers,
        grid_resolution: args.grid,
        opt: OptConfig::default(),
    };
    let est = mc::tube_volume_mc(args.q, args.theta, &cfg)?;
    // binomial standard error under the formula's rate, so tiny volumes
    // still get a finite z-score
    let se = (formula * (1.0 - formula) / est.reps as f64).sqrt().max(1e-300);
    let report = TubeVolumeReport {
        q: args.q,
        theta: args.theta,
        formula,
        mc_fraction: est.fraction,
        mc_se: est.se,
        hits: est.hits,
        reps: est.reps,
        flagged: est.flagged,
        z_score: (est.fraction - formula) / se,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_regen_fixtures(args: RegenArgs) -> Result<ExitCode, CliError> {
    let written = fixtures::write_fixtures(&args.dir, args.seed)
        .map_err(|e| CliError::Usage(format!("cannot write fixtures: {e}")))?;
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}
