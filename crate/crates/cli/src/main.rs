//! Command-line front end: simulate sheet approximations, run coupling
//! experiments and convergence studies, and drive the verification suite.
//!
//! Every output embeds the full run configuration and the artifact version,
//! and is byte-reproducible given (config, seed). Exit codes: 0 ok,
//! 1 verification failure, 2 configuration, 3 i/o, 4 numeric/retry
//! exhaustion.

use clap::{Args, Parser, Subcommand, ValueEnum};
use sheetwalk_core::coupling::{convergence_study, couple_experiment, CouplingConfig};
use sheetwalk_core::grid_io::{grid_json, write_grid_csv, GridParams};
use sheetwalk_core::sheet::{build_sheet, GridSpec, LambdaMode, SheetParams};
use sheetwalk_core::verify::{core_criteria_filtered, CriterionOutcome, FaultInjection, SUITE_SEED};
use std::path::PathBuf;
use std::process::ExitCode;

const ARTIFACT_NAME: &str = "sheetwalk";
const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "sheetwalk", version, about = "Uniform transport approximations of the Brownian sheet with a Skorokhod-embedding coupling laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a sheet approximation on a grid and export CSV or JSON
    Simulate(SimulateArgs),
    /// Run one coupled realization and emit its experiment record
    Couple(CoupleArgs),
    /// Median coupled sup-error across an ascending index schedule
    Convergence(ConvergenceArgs),
    /// Run the verification suite and report pass/fail per criterion
    Verify(VerifyArgs),
}

#[derive(Args, Clone)]
#[group(required = true, multiple = false)]
struct LambdaSpec {
    /// Scaling exponent lambda
    #[arg(long)]
    lambda: Option<f64>,
    /// Lambda given as its reciprocal: lambda = 1 / LAMBDA_INV
    #[arg(long)]
    lambda_inv: Option<f64>,
}

impl LambdaSpec {
    fn resolve(&self) -> Result<f64, CliError> {
        match (self.lambda, self.lambda_inv) {
            (Some(l), None) => Ok(l),
            (None, Some(inv)) => {
                if inv.is_finite() && inv > 0.0 {
                    Ok(1.0 / inv)
                } else {
                    Err(CliError::Config(format!(
                        "lambda-inv: must be positive and finite, got {inv}"
                    )))
                }
            }
            _ => unreachable!("clap group enforces exactly one"),
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Copy, Clone, ValueEnum)]
enum Mode {
    Theorem,
    Exploratory,
}

impl From<Mode> for LambdaMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Theorem => LambdaMode::Theorem,
            Mode::Exploratory => LambdaMode::Exploratory,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Scaling index of the transport paths
    #[arg(long)]
    n: u64,
    #[command(flatten)]
    lambda: LambdaSpec,
    /// Number of parameters (2 = sheet)
    #[arg(long, default_value_t = 2)]
    d: u32,
    /// Evaluation points per axis, e.g. 200x200
    #[arg(long, default_value = "200x200")]
    grid: String,
    #[arg(long, env = "SHEETWALK_SEED", default_value_t = 1)]
    seed: u64,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Lambda validation regime
    #[arg(long, value_enum, default_value_t = Mode::Theorem)]
    mode: Mode,
}

#[derive(Args)]
struct CoupleArgs {
    /// Scaling index (desk-scale; a warning is printed above 512)
    #[arg(long)]
    n: u64,
    #[command(flatten)]
    lambda: LambdaSpec,
    #[arg(long, env = "SHEETWALK_SEED", default_value_t = 1)]
    seed: u64,
    /// Time-grid refinement factor of the sup-error grid
    #[arg(long, default_value_t = 4)]
    refinement: u32,
    /// Disable the Brownian-bridge crossing correction
    #[arg(long)]
    no_bridge_correction: bool,
    /// Include wall-clock runtime in the record (breaks byte reproducibility)
    #[arg(long)]
    timings: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct ConvergenceArgs {
    /// Ascending comma-separated index schedule, e.g. 16,32,64,128,256
    #[arg(long)]
    schedule: String,
    /// Replications per index
    #[arg(long, default_value_t = 50)]
    reps: usize,
    #[command(flatten)]
    lambda: LambdaSpec,
    #[arg(long, default_value_t = 4)]
    refinement: u32,
    #[arg(long, env = "SHEETWALK_SEED", default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, env = "SHEETWALK_SEED", default_value_t = SUITE_SEED)]
    seed: u64,
    /// Run only criteria whose id contains one of these substrings
    #[arg(long)]
    only: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Test hook: corrupt one clock so the knot identity must fail
    #[arg(long, hide = true, value_parser = parse_fault)]
    inject_fault: Option<FaultInjection>,
}

fn parse_fault(s: &str) -> Result<FaultInjection, String> {
    match s {
        "flip-gamma" => Ok(FaultInjection::FlipGamma),
        other => Err(format!("unknown fault {other:?} (expected flip-gamma)")),
    }
}

enum CliError {
    Config(String),
    Io(String),
    Numeric(String),
    VerificationFailed(Vec<&'static str>),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::VerificationFailed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(m) => format!("configuration: {m}"),
            CliError::Io(m) => format!("i/o: {m}"),
            CliError::Numeric(m) => format!("numeric: {m}"),
            CliError::VerificationFailed(ids) => {
                format!("verification failed: {}", ids.join(", "))
            }
        }
    }
}

impl From<sheetwalk_core::Error> for CliError {
    fn from(e: sheetwalk_core::Error) -> Self {
        match e {
            sheetwalk_core::Error::InvalidParameter { .. } => CliError::Config(e.to_string()),
            sheetwalk_core::Error::Io { .. } => CliError::Io(e.to_string()),
            sheetwalk_core::Error::HorizonExhausted { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

/// The run configuration serialized verbatim into every output.
///
/// The worker count is deliberately not part of this block: it changes
/// scheduling only, never a drawn bit, and outputs must stay byte-identical
/// across worker counts.
#[derive(serde::Serialize, Clone, Default)]
struct RunConfig {
    command: &'static str,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    d: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    replications: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    format: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    refinement: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    schedule: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bridge_correction: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    only: Option<Vec<String>>,
}

fn artifact_block() -> serde_json::Value {
    serde_json::json!({ "name": ARTIFACT_NAME, "version": ARTIFACT_VERSION })
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match workers {
        Some(w) => {
            if w == 0 {
                return Err(CliError::Config("workers: must be at least 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| CliError::Config(format!("workers: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn parse_grid(spec: &str, d: u32) -> Result<Vec<usize>, CliError> {
    let parts: Vec<usize> = spec
        .split('x')
        .map(|p| {
            p.parse::<usize>()
                .map_err(|e| CliError::Config(format!("grid: bad axis size {p:?}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    if parts.len() != d as usize {
        return Err(CliError::Config(format!(
            "grid: expected {d} axis sizes for d = {d}, got {}",
            parts.len()
        )));
    }
    if parts.iter().any(|&p| p == 0) {
        return Err(CliError::Config("grid: axis sizes must be at least 1".into()));
    }
    Ok(parts)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let lambda = args.lambda.resolve()?;
    let mode: LambdaMode = args.mode.into();
    let params = SheetParams::new(args.n, lambda, args.d, mode)?;
    if mode == LambdaMode::Exploratory && lambda >= SheetParams::theorem_lambda_sup(args.d) {
        eprintln!(
            "warning: lambda = {lambda} is outside the proven-convergence range (0, {})",
            SheetParams::theorem_lambda_sup(args.d)
        );
    }
    let points = parse_grid(&args.grid, args.d)?;
    let grid = GridSpec::uniform(&points)?;
    let config = RunConfig {
        command: "simulate",
        seed: args.seed,
        n: Some(args.n),
        lambda: Some(lambda),
        d: Some(args.d),
        grid: Some(points),
        output: args.out.as_ref().map(|p| p.display().to_string()),
        format: Some(match args.format {
            Format::Csv => "csv",
            Format::Json => "json",
        }),
        mode: Some(match args.mode {
            Mode::Theorem => "theorem",
            Mode::Exploratory => "exploratory",
        }),
        ..RunConfig::default()
    };

    let sheet = build_sheet(params, args.seed)?;
    let values = sheet.values_on_grid(&grid)?;
    let grid_params = GridParams {
        n: args.n,
        lambda,
        d: args.d,
        seed: args.seed,
    };
    let content = match args.format {
        Format::Csv => {
            let comments = vec![
                format!("{ARTIFACT_NAME} v{ARTIFACT_VERSION}"),
                format!(
                    "config: {}",
                    serde_json::to_string(&config).expect("config serializes")
                ),
            ];
            let mut buf = Vec::new();
            write_grid_csv(&mut buf, grid.axes(), &values, &comments)
                .map_err(|e| CliError::Io(e.to_string()))?;
            String::from_utf8(buf).expect("csv is utf-8")
        }
        Format::Json => {
            let mut doc = grid_json(&grid_params, grid.axes(), &values);
            let map = doc.as_object_mut().expect("grid json is an object");
            map.insert("artifact".into(), artifact_block());
            map.insert(
                "config".into(),
                serde_json::to_value(&config).expect("config serializes"),
            );
            let mut s = serde_json::to_string_pretty(&doc).expect("doc serializes");
            s.push('\n');
            s
        }
    };
    write_output(&args.out, &content)
}

fn cmd_couple(args: CoupleArgs) -> Result<(), CliError> {
    let lambda = args.lambda.resolve()?;
    if args.n > 512 {
        eprintln!(
            "warning: n = {} is beyond the desk-scale cap (512); expect {} embeddings per strip",
            args.n,
            2 * args.n * args.n
        );
    }
    let mut coupling = CouplingConfig::new(args.n, lambda)?;
    coupling.refinement = args.refinement;
    coupling.bridge_correction = !args.no_bridge_correction;
    let config = RunConfig {
        command: "couple",
        seed: args.seed,
        n: Some(args.n),
        lambda: Some(lambda),
        refinement: Some(args.refinement),
        bridge_correction: Some(coupling.bridge_correction),
        output: args.out.as_ref().map(|p| p.display().to_string()),
        ..RunConfig::default()
    };

    let started = std::time::Instant::now();
    let mut record = with_pool(args.workers, || couple_experiment(&coupling, args.seed))??;
    if args.timings {
        record.runtime_ms = Some(started.elapsed().as_millis() as u64);
    }

    let mut doc = serde_json::to_value(&record).expect("record serializes");
    let map = doc.as_object_mut().expect("record is an object");
    map.insert("artifact".into(), artifact_block());
    map.insert(
        "config".into(),
        serde_json::to_value(&config).expect("config serializes"),
    );
    let mut s = serde_json::to_string_pretty(&doc).expect("doc serializes");
    s.push('\n');
    write_output(&args.out, &s)
}

fn cmd_convergence(args: ConvergenceArgs) -> Result<(), CliError> {
    let lambda = args.lambda.resolve()?;
    let schedule: Vec<u64> = args
        .schedule
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<u64>()
                .map_err(|e| CliError::Config(format!("schedule: bad index {p:?}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let config = RunConfig {
        command: "convergence",
        seed: args.seed,
        lambda: Some(lambda),
        replications: Some(args.reps),
        refinement: Some(args.refinement),
        schedule: Some(schedule.clone()),
        output: args.out.as_ref().map(|p| p.display().to_string()),
        ..RunConfig::default()
    };

    let (points, fit) = with_pool(args.workers, || {
        convergence_study(&schedule, lambda, args.reps, args.refinement, args.seed)
    })??;
    let doc = serde_json::json!({
        "artifact": artifact_block(),
        "config": config,
        "points": points,
        "fit": fit,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("doc serializes");
    s.push('\n');
    write_output(&args.out, &s)
}

/// Byte-determinism of the CLI itself: repeated runs and different worker
/// counts of the same seeded commands must produce identical bytes.
fn determinism_criterion(seed: u64) -> CriterionOutcome {
    let exe = match std::env::current_exe() {
        Ok(p) => p,
        Err(e) => {
            return CriterionOutcome {
                id: "determinism",
                name: "CLI outputs are byte-identical across runs and workers",
                passed: false,
                details: format!("cannot locate executable: {e}"),
            }
        }
    };
    let run = |args: &[String]| -> Result<Vec<u8>, String> {
        let output = std::process::Command::new(&exe)
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        if !output.status.success() {
            return Err(format!(
                "exit {:?}: {}",
                output.status.code(),
                String::from_utf8_lossy(&output.stderr)
            ));
        }
        Ok(output.stdout)
    };
    let seed_arg = seed.to_string();
    let checks: Vec<(&str, Vec<String>, Vec<String>)> = vec![
        (
            "simulate twice",
            to_args(&["simulate", "--n", "500", "--lambda", "0.19", "--d", "2", "--grid", "9x9", "--seed", &seed_arg]),
            to_args(&["simulate", "--n", "500", "--lambda", "0.19", "--d", "2", "--grid", "9x9", "--seed", &seed_arg]),
        ),
        (
            "couple twice",
            to_args(&["couple", "--n", "8", "--lambda", "0.19", "--seed", &seed_arg]),
            to_args(&["couple", "--n", "8", "--lambda", "0.19", "--seed", &seed_arg]),
        ),
        (
            "convergence workers 1 vs 2",
            to_args(&["convergence", "--schedule", "4,6,8", "--reps", "2", "--lambda", "0.19", "--seed", &seed_arg, "--workers", "1"]),
            to_args(&["convergence", "--schedule", "4,6,8", "--reps", "2", "--lambda", "0.19", "--seed", &seed_arg, "--workers", "2"]),
        ),
    ];
    let mut failures = Vec::new();
    for (label, left, right) in &checks {
        match (run(left), run(right)) {
            (Ok(a), Ok(b)) => {
                if a != b {
                    failures.push(format!("{label}: outputs differ"));
                }
            }
            (Err(e), _) | (_, Err(e)) => failures.push(format!("{label}: {e}")),
        }
    }
    let passed = failures.is_empty();
    CriterionOutcome {
        id: "determinism",
        name: "CLI outputs are byte-identical across runs and workers",
        passed,
        details: if passed {
            format!("{} paired runs byte-identical", checks.len())
        } else {
            failures.join("; ")
        },
    }
}

fn to_args(parts: &[&str]) -> Vec<String> {
    parts.iter().map(|s| s.to_string()).collect()
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let config = RunConfig {
        command: "verify",
        seed: args.seed,
        output: args.out.as_ref().map(|p| p.display().to_string()),
        only: if args.only.is_empty() {
            None
        } else {
            Some(args.only.clone())
        },
        ..RunConfig::default()
    };
    let only = args.only.clone();
    let wanted = move |id: &str| only.is_empty() || only.iter().any(|s| id.contains(s));

    let mut criteria: Vec<CriterionOutcome> = Vec::new();
    let core: Vec<CriterionOutcome> = with_pool(args.workers, {
        let wanted = wanted.clone();
        let fault = args.inject_fault;
        let seed = args.seed;
        move || core_criteria_filtered(seed, fault, wanted)
    })?;
    for c in core {
        eprintln!("{}", c.line());
        criteria.push(c);
    }
    if wanted("determinism") {
        let c = determinism_criterion(args.seed);
        eprintln!("{}", c.line());
        criteria.push(c);
    }
    if criteria.is_empty() {
        return Err(CliError::Config(format!(
            "only: no criterion matches {:?}",
            args.only
        )));
    }

    let passed = criteria.iter().all(|c| c.passed);
    let doc = serde_json::json!({
        "artifact": artifact_block(),
        "config": config,
        "criteria": criteria,
        "passed": passed,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("doc serializes");
    s.push('\n');
    write_output(&args.out, &s)?;
    if passed {
        Ok(())
    } else {
        Err(CliError::VerificationFailed(
            criteria.iter().filter(|c| !c.passed).map(|c| c.id).collect(),
        ))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Couple(args) => cmd_couple(args),
        Command::Convergence(args) => cmd_convergence(args),
        Command::Verify(args) => cmd_verify(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
