//! Batch front door for the curvlab library.
//!
//! One invocation runs one command against one declarative JSON run-spec and
//! (optionally) writes a JSON report plus a CSV table of the same results:
//!
//! ```text
//! curvlab <command> --spec <file> [--seed N] [--threads N] [--out DIR]
//! ```
//!
//! The spec's `command` field must match the command on the command line, so
//! a spec file is self-describing and cannot be fed to the wrong runner by
//! accident.  For a fixed (spec, seed, threads) triple the artifacts are
//! byte-identical across runs.
//!
//! Exit codes: `0` all checks passed, `1` a check failed, `2` malformed
//! input, `3` input violating a mathematical hypothesis of the requested
//! computation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

mod report;
mod run;
mod spec;

use spec::Fail;

#[derive(Parser, Debug)]
#[command(name = "curvlab", version, about = "Run curvature-weight checks from a JSON spec")]
struct Args {
    /// What to run; must match the spec's `command` field.
    #[arg(value_enum)]
    command: CommandName,

    /// Path to the JSON run-spec.
    #[arg(long)]
    spec: PathBuf,

    /// Random seed; overrides the spec's `seed` field.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads for the numeric kernels; falls back to the
    /// CURVLAB_THREADS environment variable, then to all cores.
    #[arg(long)]
    threads: Option<usize>,

    /// Directory for the report artifacts (`<stem>.json`, `<stem>.csv`);
    /// nothing is written when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum CommandName {
    WeightEval,
    IdentitySuite,
    OberlinScan,
    InequalityCheck,
    RadonProbe,
    Exponents,
}

impl CommandName {
    fn as_str(self) -> &'static str {
        match self {
            CommandName::WeightEval => "weight-eval",
            CommandName::IdentitySuite => "identity-suite",
            CommandName::OberlinScan => "oberlin-scan",
            CommandName::InequalityCheck => "inequality-check",
            CommandName::RadonProbe => "radon-probe",
            CommandName::Exponents => "exponents",
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match dispatch(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Full pipeline: thread setup, spec load and validation, command run,
/// report emission.  Returns the final pass verdict.
fn dispatch(args: &Args) -> Result<bool, Fail> {
    if let Some(n) = resolve_threads(args.threads)? {
        // The pool can only be installed once per process; a second attempt
        // (e.g. under a test harness) keeps the existing pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let value = spec::load(&args.spec)?;
    spec::validate_envelope(&value, args.command.as_str())?;
    let seed = args.seed.or_else(|| spec::spec_seed(&value)).unwrap_or(spec::DEFAULT_SEED);

    let output = match args.command {
        CommandName::WeightEval => run::weight_eval(&value, seed)?,
        CommandName::IdentitySuite => run::identity_suite(&value, seed)?,
        CommandName::OberlinScan => run::oberlin_scan(&value, seed)?,
        CommandName::InequalityCheck => run::inequality_check(&value, seed)?,
        CommandName::RadonProbe => run::radon_probe(&value, seed)?,
        CommandName::Exponents => run::exponents(&value, seed)?,
    };

    report::emit(args.command.as_str(), seed, &output, args.out.as_deref())?;
    Ok(output.pass)
}

fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>, Fail> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var("CURVLAB_THREADS") {
        Ok(raw) => {
            let n: usize = raw
                .parse()
                .map_err(|_| Fail::Spec(format!("CURVLAB_THREADS must be an integer, got {raw:?}")))?;
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}
