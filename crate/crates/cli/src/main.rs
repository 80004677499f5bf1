//! `weave` — pipeline driver for the architecture toolchain.
//!
//! Subcommands: `check` (parse + validate + properties), `build` (full
//! pipeline into an output directory), `matrix` (all combinations of QoS
//! sets and platforms). Exit codes: 0 success, 1 parse/validation,
//! 2 property violation, 3 refinement/preservation, 4 platform
//! conformance, 64 usage. Set `WEAVE_NO_COLOR` to disable styled output.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod pipeline;
mod report;

use pipeline::{
    parse_pattern_spec, run_build, run_check, run_matrix, BuildInputs, MatrixInputs, PatternSpec,
    EXIT_USAGE,
};

#[derive(Parser)]
#[command(
    name = "weave",
    version,
    about = "Architecture refinement and generation pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a model, validate its structure, and evaluate its properties.
    Check {
        /// Model file (.adl, .qos, .plat, .map, .res)
        model: PathBuf,
        /// Report path (default: weave-report.json)
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the full pipeline: patterns, platform, generation, deployment.
    Build(BuildArgs),
    /// Run every (gecm set x platform) combination into subdirectories.
    Matrix(MatrixArgs),
}

#[derive(Args)]
struct BuildArgs {
    /// Abstract architecture (.adl)
    #[arg(long)]
    geim: PathBuf,
    /// QoS pattern with bindings: file.qos[:name=value,...] (repeatable, ordered)
    #[arg(long = "gecm")]
    gecm: Vec<String>,
    /// Platform model (.plat)
    #[arg(long)]
    getm: PathBuf,
    /// Mapping model (.map)
    #[arg(long)]
    gemm: PathBuf,
    /// Resource model (.res); enables deployment planning
    #[arg(long)]
    germ: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Report path (default: `<out>/report.json`)
    #[arg(long)]
    report: Option<PathBuf>,
    /// Fail generation when a component matches no mapping rule
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct MatrixArgs {
    /// Abstract architecture (.adl)
    #[arg(long)]
    geim: PathBuf,
    /// One QoS set: ';'-separated pattern specs (repeatable)
    #[arg(long = "gecm-set")]
    gecm_set: Vec<String>,
    /// Platform model (.plat) (repeatable)
    #[arg(long = "getm")]
    getm: Vec<PathBuf>,
    /// Mapping model (.map)
    #[arg(long)]
    gemm: PathBuf,
    /// Resource model (.res); enables deployment planning
    #[arg(long)]
    germ: Option<PathBuf>,
    /// Output directory; one subdirectory per combination
    #[arg(long)]
    out: PathBuf,
    /// Summary report path (default: `<out>/matrix-report.json`)
    #[arg(long)]
    report: Option<PathBuf>,
    /// Fail generation when a component matches no mapping rule
    #[arg(long)]
    strict: bool,
}

fn usage_error(message: &str) -> ExitCode {
    eprintln!("usage error: {message}");
    eprintln!("run 'weave --help' for usage");
    ExitCode::from(EXIT_USAGE as u8)
}

fn require_file(path: &Path, what: &str) -> Result<(), String> {
    if path.is_file() {
        Ok(())
    } else {
        Err(format!("{what} {} is not a readable file", path.display()))
    }
}

fn write_report(path: &Path, text: &str) -> Result<(), String> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| format!("cannot create {}: {e}", parent.display()))?;
        }
    }
    fs::write(path, text).map_err(|e| format!("cannot write report {}: {e}", path.display()))
}

fn parse_gecm_args(raw: &[String]) -> Result<Vec<PatternSpec>, String> {
    let mut specs = Vec::new();
    for arg in raw {
        specs.push(parse_pattern_spec(arg)?);
    }
    Ok(specs)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are normal exits; everything else is usage.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };

    match cli.command {
        Command::Check { model, report } => {
            if let Err(m) = require_file(&model, "model") {
                return usage_error(&m);
            }
            let report_path = report.unwrap_or_else(|| PathBuf::from("weave-report.json"));
            let (exit, run_report) = run_check(&model);
            if let Err(m) = write_report(&report_path, &run_report.to_json()) {
                return usage_error(&m);
            }
            summarize(exit, &run_report.outcome);
            ExitCode::from(exit as u8)
        }
        Command::Build(args) => {
            let gecm = match parse_gecm_args(&args.gecm) {
                Ok(s) => s,
                Err(m) => return usage_error(&m),
            };
            let inputs = BuildInputs {
                geim: args.geim,
                gecm,
                getm: args.getm,
                gemm: args.gemm,
                germ: args.germ,
                out: args.out,
                strict: args.strict,
            };
            if let Err(m) = validate_build_paths(&inputs) {
                return usage_error(&m);
            }
            let report_path = args
                .report
                .unwrap_or_else(|| inputs.out.join("report.json"));
            let (exit, run_report) = run_build(&inputs, "build");
            if let Err(m) = write_report(&report_path, &run_report.to_json()) {
                return usage_error(&m);
            }
            summarize(exit, &run_report.outcome);
            ExitCode::from(exit as u8)
        }
        Command::Matrix(args) => {
            if args.gecm_set.is_empty() {
                return usage_error("at least one --gecm-set is required");
            }
            if args.getm.is_empty() {
                return usage_error("at least one --getm is required");
            }
            let mut gecm_sets = Vec::new();
            for set in &args.gecm_set {
                let specs: Result<Vec<PatternSpec>, String> = set
                    .split(';')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(parse_pattern_spec)
                    .collect();
                match specs {
                    Ok(s) => gecm_sets.push(s),
                    Err(m) => return usage_error(&m),
                }
            }
            let inputs = MatrixInputs {
                geim: args.geim,
                gecm_sets,
                getms: args.getm,
                gemm: args.gemm,
                germ: args.germ,
                out: args.out,
                strict: args.strict,
            };
            if let Err(m) = validate_matrix_paths(&inputs) {
                return usage_error(&m);
            }
            let report_path = args
                .report
                .unwrap_or_else(|| inputs.out.join("matrix-report.json"));
            let (exit, summary) = run_matrix(&inputs);
            if let Err(m) = write_report(&report_path, &summary.to_json()) {
                return usage_error(&m);
            }
            summarize(exit, &summary.outcome);
            ExitCode::from(exit as u8)
        }
    }
}

fn validate_build_paths(inputs: &BuildInputs) -> Result<(), String> {
    require_file(&inputs.geim, "--geim")?;
    for spec in &inputs.gecm {
        require_file(&spec.path, "--gecm")?;
    }
    require_file(&inputs.getm, "--getm")?;
    require_file(&inputs.gemm, "--gemm")?;
    if let Some(germ) = &inputs.germ {
        require_file(germ, "--germ")?;
    }
    Ok(())
}

fn validate_matrix_paths(inputs: &MatrixInputs) -> Result<(), String> {
    require_file(&inputs.geim, "--geim")?;
    for set in &inputs.gecm_sets {
        for spec in set {
            require_file(&spec.path, "--gecm-set")?;
        }
    }
    for getm in &inputs.getms {
        require_file(getm, "--getm")?;
    }
    require_file(&inputs.gemm, "--gemm")?;
    if let Some(germ) = &inputs.germ {
        require_file(germ, "--germ")?;
    }
    Ok(())
}

fn summarize(exit: i32, outcome: &report::Outcome) {
    match outcome {
        report::Outcome::Ok => println!("outcome: ok"),
        report::Outcome::Failed { stage, error, .. } => {
            eprintln!("outcome: failed at {stage}: {error} (exit {exit})");
        }
    }
}
