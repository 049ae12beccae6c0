use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;
use vlasov_decay::cli::{parse_config, run_experiment, Subcommand};

/// Linear-response and characteristics experiments for screened
/// Vlasov–Poisson.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Args {
    /// Subcommand; overrides `subcommand` in the config file.
    #[arg(value_parser = parse_subcommand)]
    subcommand: Option<Subcommand>,
    /// Config file in the `key = value` grammar.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output` in the config file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Only report errors.
    #[arg(long)]
    quiet: bool,
    /// Littlewood–Paley blocks for `green`.
    #[arg(long)]
    blocks: bool,
}

fn parse_subcommand(s: &str) -> Result<Subcommand, String> {
    s.parse()
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let mut config = match parse_config(&text) {
        Ok(c) => c,
        Err(errors) => {
            eprint!("{}: {errors}", args.config.display());
            return ExitCode::from(2);
        }
    };
    if let Some(sub) = args.subcommand {
        config.subcommand = sub;
    }
    if let Some(out) = args.out {
        config.output = out;
    }
    config.blocks |= args.blocks;
    match run_experiment(&config, args.quiet) {
        Ok(summary) => {
            if !args.quiet {
                println!("{} finished in {:.2} s", summary.subcommand.name(), summary.wall_time);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
