//! `gcnnvc` — batch front-end over the library: closed-form and search VC
//! bounds, shattering construction + certification (with replay), lift
//! equality, invariance checks, and the acceptance selftest.
//!
//! Reports are JSON by default (CSV projections where documented). With a
//! fixed `--seed` and `--no-timestamp`, two runs over the same inputs emit
//! byte-identical reports. Exit status: 0 success, 1 verification failure,
//! 2 usage/schema error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use gcnn_vc::bounds::{build_bound_report, BoundReport};
use gcnn_vc::construct::{build_composite_instance, build_shatter_instance, lift_dnn_to_gcnn};
use gcnn_vc::rng::algorithm_id;
use gcnn_vc::selftest::run_all;
use gcnn_vc::signal::identity_indicator_basis;
use gcnn_vc::verify::{
    verify_invariance, verify_lift_equality, verify_shattering, verify_shattering_sampled,
    ShatterReport,
};
use gcnn_vc::{DnnSpec, GcnnSpec, KernelBasis};

use gcnn_vc_cli::{
    default_interval, extract_instance, parse_group, parse_pair, DnnFile, Envelope, GcnnFile,
    ResidualPayload, ShatterPayload,
};

#[derive(Parser)]
#[command(
    name = "gcnnvc",
    version,
    about = "VC bounds and shattering certificates for group-convolutional networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Upper-bound report (closed forms, search, growth curve) for a GCNN
    /// architecture file
    Bounds {
        /// Architecture file: {"gcnn": {"k", "widths", "group"}}
        #[arg(long)]
        spec: PathBuf,
        /// "c,C" pair for the sandwich display in the report
        #[arg(long)]
        constants: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Build a shattering instance and certify it by enumeration
    Shatter {
        /// Group descriptor: cyclic:N, dihedral:N, grid:HxW,
        /// product:(desc,desc)
        #[arg(long, required_unless_present = "spec", conflicts_with = "spec")]
        group: Option<String>,
        /// Replay path: re-verify an instance (or a previously emitted
        /// shatter report) from a file
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Number of juxtaposed blocks (composite construction)
        #[arg(long, conflicts_with_all = ["interval", "spec"])]
        blocks: Option<usize>,
        /// Value interval "A,B" for the windows (default: dyadic
        /// [0, 2(2^⌊log₂r⌋+2)], whose margins are exact)
        #[arg(long, conflicts_with = "spec")]
        interval: Option<String>,
        /// Check this many random labelings instead of all 2^m
        /// (statistical, never certifies)
        #[arg(long)]
        sample: Option<u64>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Lift a dense network to a GCNN and compare with the double-sum
    /// oracle on random signals
    LiftCheck {
        /// File: {"dnn": {"widths"}, "group": ..., "params": ...}
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Check pooled-output invariance under the left action on random
    /// signals
    Invariance {
        /// File: {"gcnn": {...}, "params": ..., "basis"?: [[...]]}
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the twelve-criterion acceptance corpus
    Selftest {
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Seed for every random draw in this run
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout (nothing is written on
    /// usage errors)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit the timestamp and wall-clock fields so reruns are
    /// byte-identical
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Usage/schema problem: diagnostic to stderr, exit 2, no report written.
struct UsageError(String);

impl<E: std::fmt::Display> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.to_string())
    }
}

type CliResult = Result<Outcome, UsageError>;

struct Outcome {
    payload: String,
    /// false when a verification ran and failed (exit 1; report still
    /// written)
    verified: bool,
}

fn envelope<T: Serialize>(command: &'static str, common: &CommonArgs, report: T) -> String {
    let timestamp_unix_seconds = if common.no_timestamp {
        None
    } else {
        Some(
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        )
    };
    let env = Envelope {
        tool: "gcnnvc".to_string(),
        rng: algorithm_id().to_string(),
        seed: common.seed,
        command: command.to_string(),
        timestamp_unix_seconds,
        report,
    };
    serde_json::to_string_pretty(&env).expect("report serialization cannot fail")
}

fn read_file(path: &Path) -> Result<String, UsageError> {
    std::fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, UsageError> {
    serde_json::from_str(text).map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

// ------------------------------------------------------------- subcommands

fn run_bounds(spec: &Path, constants: Option<&str>, common: &CommonArgs) -> CliResult {
    let file: GcnnFile = parse_json(spec, &read_file(spec)?)?;
    let group = file.gcnn.group.descriptor()?.build()?;
    let arch = GcnnSpec::new(file.gcnn.k, file.gcnn.widths, group.r)?;
    let constants = constants.map(|s| parse_pair(s, "--constants")).transpose()?;
    let report = build_bound_report(&arch, constants)?;
    let payload = match common.format {
        Format::Json => envelope("bounds", common, report),
        Format::Csv => format!("{}\n{}", BoundReport::csv_header(), report.csv_row()),
    };
    Ok(Outcome { payload, verified: true })
}

fn run_shatter(
    group: Option<&str>,
    spec: Option<&Path>,
    blocks: Option<usize>,
    interval: Option<&str>,
    sample: Option<u64>,
    common: &CommonArgs,
) -> CliResult {
    let instance = match (group, spec) {
        (Some(desc), None) => {
            let g = parse_group(desc)?.build()?;
            match blocks {
                Some(w) => build_composite_instance(&g, w)?,
                None => {
                    let (a, b) = match interval {
                        Some(s) => parse_pair(s, "--interval")?,
                        None => default_interval(g.r),
                    };
                    build_shatter_instance(&g, a, b)?
                }
            }
        }
        (None, Some(path)) => {
            let text = read_file(path)?;
            extract_instance(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))?
        }
        _ => return Err(UsageError("shatter needs exactly one of --group or --spec".into())),
    };
    let mut verification = match sample {
        Some(n) => verify_shattering_sampled(&instance, n, common.seed)?,
        None => verify_shattering(&instance)?,
    };
    if common.no_timestamp {
        verification.wall_time_seconds = None;
    }
    let verified = verification.success;
    let payload = match common.format {
        Format::Json => envelope("shatter", common, ShatterPayload { instance, verification }),
        Format::Csv => format!("{}\n{}", ShatterReport::csv_header(), verification.csv_row()),
    };
    Ok(Outcome { payload, verified })
}

fn residual_outcome(
    command: &'static str,
    common: &CommonArgs,
    trials: u64,
    max_residual: f64,
) -> Outcome {
    let tolerance = 1e-9;
    let passed = max_residual <= tolerance;
    let report = ResidualPayload { trials, tolerance, max_residual, passed };
    let payload = match common.format {
        Format::Json => envelope(command, common, report),
        Format::Csv => format!(
            "trials,tolerance,max_residual,passed\n{trials},{tolerance},{max_residual},{passed}"
        ),
    };
    Outcome { payload, verified: passed }
}

fn run_lift_check(spec: &Path, trials: u64, common: &CommonArgs) -> CliResult {
    let file: DnnFile = parse_json(spec, &read_file(spec)?)?;
    let g = file.group.descriptor()?.build()?;
    let dspec = DnnSpec::new(file.dnn.widths)?;
    let dparams = file
        .params
        .as_ref()
        .ok_or_else(|| UsageError("lift-check needs \"params\" in the spec file".into()))?
        .materialize(&dspec)?;
    let (gspec, gparams, basis) = lift_dnn_to_gcnn(&dspec, &dparams, &g)?;
    let max_residual = verify_lift_equality(
        &dspec, &dparams, &gspec, &gparams, &basis, &g, trials, common.seed,
    )?;
    Ok(residual_outcome("lift-check", common, trials, max_residual))
}

fn run_invariance(spec: &Path, trials: u64, common: &CommonArgs) -> CliResult {
    let file: GcnnFile = parse_json(spec, &read_file(spec)?)?;
    let g = file.gcnn.group.descriptor()?.build()?;
    let arch = GcnnSpec::new(file.gcnn.k, file.gcnn.widths, g.r)?;
    let params = file
        .params
        .as_ref()
        .ok_or_else(|| UsageError("invariance needs \"params\" in the spec file".into()))?
        .materialize(&arch)?;
    let basis = match file.basis {
        Some(values) => KernelBasis::new(values),
        None => identity_indicator_basis(&g),
    };
    let max_residual = verify_invariance(&arch, &params, &basis, &g, trials, common.seed)?;
    Ok(residual_outcome("invariance", common, trials, max_residual))
}

fn run_selftest(common: &CommonArgs) -> CliResult {
    if common.format == Format::Csv {
        return Err(UsageError("selftest has no CSV projection; use --format json".into()));
    }
    let report = run_all(common.seed);
    let verified = report.all_passed;
    Ok(Outcome { payload: envelope("selftest", common, report), verified })
}

fn run(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Bounds { spec, constants, common } => {
            run_bounds(spec, constants.as_deref(), common)
        }
        Command::Shatter { group, spec, blocks, interval, sample, common } => run_shatter(
            group.as_deref(),
            spec.as_deref(),
            *blocks,
            interval.as_deref(),
            *sample,
            common,
        ),
        Command::LiftCheck { spec, trials, common } => run_lift_check(spec, *trials, common),
        Command::Invariance { spec, trials, common } => run_invariance(spec, *trials, common),
        Command::Selftest { common } => run_selftest(common),
    }
}

fn common_of(cli: &Cli) -> &CommonArgs {
    match &cli.command {
        Command::Bounds { common, .. }
        | Command::Shatter { common, .. }
        | Command::LiftCheck { common, .. }
        | Command::Invariance { common, .. }
        | Command::Selftest { common } => common,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            // the report is complete before anything is written
            match &common_of(&cli).out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, format!("{}\n", outcome.payload)) {
                        eprintln!("gcnnvc: cannot write {}: {e}", path.display());
                        return ExitCode::from(2);
                    }
                }
                None => println!("{}", outcome.payload),
            }
            if outcome.verified {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(UsageError(msg)) => {
            eprintln!("gcnnvc: {msg}");
            ExitCode::from(2)
        }
    }
}
