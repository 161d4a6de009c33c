use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ppsd::config::{self, ExperimentConfig, Outcome};
use ppsd::Error;

#[derive(Parser)]
#[command(name = "ppsd", version, about = "Privacy-preserving push-pull simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm and write run.csv and run.json.
    Run(Common),
    /// Run the decomposed method and the baseline side by side.
    Compare(Common),
    /// Shadow-execution audits, eavesdropper sweep and inference attack.
    PrivacyAudit(Common),
    /// Evaluate bound constants and search for a certified step size.
    Advise(Common),
    /// Print the JSON schema for experiment configs.
    Schema,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to $PPSD_OUT_DIR or ./ppsd-out.
    #[arg(long, env = "PPSD_OUT_DIR", default_value = "ppsd-out")]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    quiet: bool,
}

type Handler = fn(&ExperimentConfig, &Path) -> ppsd::Result<Outcome>;

fn execute(c: &Common, f: Handler) -> ExitCode {
    let cfg = match ExperimentConfig::load(&c.config) {
        Ok(cfg) => cfg.with_seed(c.seed),
        Err(e) => {
            eprintln!("ppsd: {e}");
            return ExitCode::from(2);
        }
    };
    match f(&cfg, &c.out) {
        Ok(outcome) => {
            if !c.quiet {
                // A closed pipe downstream is not a failure of the run.
                let mut out = std::io::stdout().lock();
                for line in &outcome.summary {
                    let _ = writeln!(out, "{line}");
                }
                for p in &outcome.files {
                    let _ = writeln!(out, "wrote {}", p.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("ppsd: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("ppsd: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(c) => execute(c, config::cmd_run),
        Command::Compare(c) => execute(c, config::cmd_compare),
        Command::PrivacyAudit(c) => execute(c, config::cmd_privacy_audit),
        Command::Advise(c) => execute(c, config::cmd_advise),
        Command::Schema => {
            let _ = std::io::stdout().write_all(config::SCHEMA.as_bytes());
            ExitCode::SUCCESS
        }
    }
}
