use std::path::PathBuf;
use std::process::ExitCode;

use alignrec::{commands, parallel, Error, Result, RunConfig};
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Prepare,
    Train,
    Eval,
    Intermediate,
    Recommend,
    Grid,
}

/// Multimodal recommendation training and evaluation.
#[derive(Debug, Parser)]
#[command(name = "alignrec", version)]
struct Cli {
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// Checkpoint to resume from (train) or to score with (eval, recommend).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    user: Option<String>,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Overrides `train.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(cli: &Cli) -> Result<String> {
    let mut cfg = RunConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
    }
    let pool = parallel::pool(parallel::threads_from_env()?)?;
    let ck = cli.checkpoint.as_deref();
    pool.install(|| match cli.command {
        Command::Prepare => commands::prepare(&cfg),
        Command::Train => commands::train(&cfg, ck),
        Command::Eval => commands::evaluate(&cfg, ck),
        Command::Intermediate => commands::intermediate(&cfg),
        Command::Recommend => {
            let user = cli
                .user
                .as_deref()
                .ok_or_else(|| Error::Config("recommend needs --user".into()))?;
            commands::recommend(&cfg, ck, user, cli.k)
        }
        Command::Grid => commands::grid(&cfg),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
