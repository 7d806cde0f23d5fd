use clap::{Args, Parser, Subcommand};
use fpt_cli::commands::{run_command, Command};
use fpt_cli::config::parse_config;
use fpt_cli::{effective_seed, CliError};
use std::path::PathBuf;
use std::process::ExitCode;

/// First-passage time, overshoot and undershoot of a jump diffusion:
/// estimator runs, raw samples and the validation suite, all emitting CSV.
#[derive(Parser)]
#[command(name = "fpt", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// Config file with [model] and [run] sections.
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path (default: the config's `out`, else stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the shard count from the config.
    #[arg(long)]
    shards: Option<u32>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Passage-time density on the configured t grid.
    Density(RunArgs),
    /// Jump part of the joint (tau, overshoot, undershoot) law on the (t, l) grids.
    Joint(RunArgs),
    /// Closed-form time-zero components of the passage law.
    Zero(RunArgs),
    /// Hit probability by each configured horizon.
    Mass(RunArgs),
    /// Run the validation suite; exit 4 if any check fails.
    Validate(RunArgs),
    /// Raw per-path hitting records.
    Sample(RunArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's own help/version output exits 0.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let (cmd, args) = match cli.command {
        Cmd::Density(a) => (Command::Density, a),
        Cmd::Joint(a) => (Command::Joint, a),
        Cmd::Zero(a) => (Command::Zero, a),
        Cmd::Mass(a) => (Command::Mass, a),
        Cmd::Validate(a) => (Command::Validate, a),
        Cmd::Sample(a) => (Command::Sample, a),
    };
    match run(cmd, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fpt: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Command, args: RunArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = parse_config(&text)?;
    cfg.seed = effective_seed(cfg.seed)?;
    if let Some(shards) = args.shards {
        if shards == 0 {
            return Err(CliError::Usage("--shards must be positive".into()));
        }
        cfg.shards = shards;
    }
    if args.out.is_some() {
        cfg.out = args.out;
    }
    let output = run_command(cmd, &cfg)?;
    match &cfg.out {
        Some(path) => std::fs::write(path, &output.csv)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{}", output.csv),
    }
    if output.validation_failed {
        return Err(CliError::Validation);
    }
    Ok(())
}
