use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use opfun::commands::{run, Context};
use opfun::config::{CommandName, Config};
use opfun::output::Out;
use opfun::{init_threads, CliError, EXIT_FAIL, EXIT_PASS, EXIT_USAGE};

/// Operator-function calculus on finite Hermitian matrices.
#[derive(Parser, Debug)]
#[command(name = "opfun", version)]
struct Args {
    /// Suite to run.
    #[arg(value_enum)]
    command: CommandName,
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Report directory (default: config output.dir, else ./opfun-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fail when a function is outside the class its command needs.
    #[arg(long)]
    strict_classes: bool,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_PASS
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match execute(&args) {
        Ok(0) => ExitCode::from(EXIT_PASS as u8),
        Ok(n) => {
            eprintln!("{n} check(s) failed");
            ExitCode::from(EXIT_FAIL as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(args: &Args) -> Result<usize, CliError> {
    init_threads()?;
    let mut cfg = match &args.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(c) = cfg.command {
        if c != args.command {
            return Err(CliError::Usage(format!(
                "config is for '{}', not '{}'",
                c.label(),
                args.command.label()
            )));
        }
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let base = args
        .config
        .as_deref()
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("opfun-out"));
    let mut out = Out::new(&dir, &cfg.output.formats)?;
    let ctx = Context {
        cfg: &cfg,
        base: &base,
        strict_classes: args.strict_classes,
    };
    let outcome = run(args.command, &ctx, &mut out)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{}: {} checks, {} failed; reports in {}",
        args.command.label(),
        outcome.checks,
        outcome.failures,
        dir.display()
    );
    Ok(outcome.failures)
}
