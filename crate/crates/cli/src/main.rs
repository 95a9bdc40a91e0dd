//! `psclab`: run minimal-graph, stability, conformal-descent and collar
//! experiments from JSON configs.
//!
//! Exit codes: 0 success, 2 invalid usage or config, 3 numerical
//! non-convergence (partial outputs are still written), 4 internal error.

// Range checks are written negated so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use commands::{Command, Failure, Status};
use output::{sha256_hex, OutDir};
use psclab::Error;

#[derive(Parser)]
#[command(name = "psclab", version, about = "Free-boundary minimal graphs and conformal descent experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Solve for a free-boundary minimal graph.
    MinSurface(RunArgs),
    /// Minimal graph plus the lowest Jacobi eigenvalues.
    Stability(RunArgs),
    /// Principal eigenpair of the conformal Laplacian, descent and sign certificate.
    ConformalDescent(RunArgs),
    /// Minimal graphs over a sequence of collar lengths.
    CollarSweep(RunArgs),
    /// Collar, minimize, restrict, check stability, descend and certify.
    Pipeline(RunArgs),
    /// Double a solved minimal graph across the collar ends.
    Double(RunArgs),
    /// Coarea identity for the collar coordinate on a solved graph.
    Coarea(RunArgs),
    /// Check a config and print its diagnostics.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: physical cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Replace every seed in the config.
    #[arg(long)]
    seed_override: Option<u64>,
    #[arg(long, value_enum, default_value_t = LogLevel::Warn)]
    log_level: LogLevel,
}

#[derive(Clone, Copy, ValueEnum)]
enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
}

impl From<LogLevel> for log::LevelFilter {
    fn from(l: LogLevel) -> Self {
        match l {
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
        }
    }
}

const EXIT_INVALID: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INVALID } else { 0 });
        }
    };
    let (cmd, args) = match cli.command {
        Sub::Validate { config } => return validate(&config),
        Sub::MinSurface(a) => (Command::MinSurface, a),
        Sub::Stability(a) => (Command::Stability, a),
        Sub::ConformalDescent(a) => (Command::ConformalDescent, a),
        Sub::CollarSweep(a) => (Command::CollarSweep, a),
        Sub::Pipeline(a) => (Command::Pipeline, a),
        Sub::Double(a) => (Command::Double, a),
        Sub::Coarea(a) => (Command::Coarea, a),
    };
    env_logger::Builder::new().filter_level(args.log_level.into()).format_timestamp(None).init();
    ExitCode::from(execute(cmd, &args))
}

fn validate(path: &std::path::Path) -> ExitCode {
    match config::validate(path) {
        Ok(d) => {
            println!("{}", serde_json::to_string_pretty(&d).expect("diagnostics serialize"));
            for x in &d {
                eprintln!("{x}");
            }
            ExitCode::from(if d.is_empty() { 0 } else { EXIT_INVALID })
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: ConfigRef,
    seeds: Seeds,
    threads: usize,
    exit_code: u8,
    message: Option<String>,
    outputs: Vec<OutputRef>,
    /// Written but left out of the hashes because they hold wall-clock times.
    volatile: Vec<String>,
}

#[derive(Serialize)]
struct ConfigRef {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct Seeds {
    solver: u64,
    eigen: u64,
    certificate: u64,
}

#[derive(Serialize)]
struct OutputRef {
    path: String,
    sha256: String,
}

fn execute(cmd: Command, args: &RunArgs) -> u8 {
    // Sized before the config is loaded: building the ambient metric
    // already runs on the global pool.
    let threads = args.threads.unwrap_or_else(num_cpus::get_physical).max(1);
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        log::warn!("could not size the worker pool: {e}");
    }
    let mut loaded = match config::load(&args.config) {
        Err(e) => {
            eprintln!("{e}");
            return EXIT_INVALID;
        }
        Ok(Err(diags)) => {
            eprintln!("config {} is not runnable:", args.config.display());
            for d in &diags {
                eprintln!("  {d}");
            }
            return EXIT_INVALID;
        }
        Ok(Ok(l)) => l,
    };
    if let Some(seed) = args.seed_override {
        loaded.scenario = loaded.scenario.clone().with_seed(seed);
    }
    let mut out = match OutDir::create(&args.out) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("cannot create {}: {e}", args.out.display());
            return EXIT_INTERNAL;
        }
    };

    let (code, message) = match commands::run(cmd, &loaded, &mut out) {
        Ok(Status::Done) => (0, None),
        Ok(Status::Incomplete(m)) => (EXIT_NUMERICAL, Some(m)),
        Err(Failure::Numerical(e)) => (exit_code(&e), Some(e.to_string())),
        Err(Failure::Internal(m)) => (EXIT_INTERNAL, Some(m)),
    };
    if let Some(m) = &message {
        eprintln!("{}: {m}", cmd.name());
    }
    let outputs = match out.hashes() {
        Ok(h) => h.into_iter().map(|(path, sha256)| OutputRef { path, sha256 }).collect(),
        Err(e) => {
            eprintln!("cannot hash outputs: {e}");
            return EXIT_INTERNAL;
        }
    };
    let sc = &loaded.scenario;
    let manifest = Manifest {
        tool: "psclab",
        version: env!("CARGO_PKG_VERSION"),
        command: cmd.name(),
        config: ConfigRef {
            file: args.config.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
            sha256: sha256_hex(&loaded.bytes),
        },
        seeds: Seeds { solver: sc.solver.seed, eigen: sc.eigen.seed, certificate: sc.certificate.seed },
        threads,
        exit_code: code,
        message,
        outputs,
        volatile: out.volatile().to_vec(),
    };
    if let Err(e) = out.json("manifest.json", &manifest) {
        eprintln!("cannot write the manifest: {e}");
        return EXIT_INTERNAL;
    }
    code
}

/// Numerical failures get 3, everything else 4.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonConvergence { .. }
        | Error::EigenNonConvergence(_)
        | Error::GraphRegimeExceeded { .. }
        | Error::FreeBoundaryViolated(_)
        | Error::NotMinimal(_)
        | Error::SignIndefiniteEigenfunction { .. }
        | Error::VerificationFailed(_)
        | Error::SignDisagreement(_)
        | Error::StageFailed { .. }
        | Error::StepTooLarge { .. }
        | Error::LinearSolve(_) => EXIT_NUMERICAL,
        _ => EXIT_INTERNAL,
    }
}
