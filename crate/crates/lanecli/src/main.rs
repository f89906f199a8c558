use std::process::ExitCode;

use clap::Parser;
use lanecli::Command;

#[derive(Debug, Parser)]
#[command(name = "lanecli", version, about = "Affinity-field lane detection toolkit")]
struct Cli {
    /// Worker threads for frame-level work; `LANECLI_JOBS` takes precedence.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

fn jobs(flag: Option<usize>) -> usize {
    if let Ok(v) = std::env::var("LANECLI_JOBS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => return n,
            _ => log::warn!("ignoring LANECLI_JOBS={v:?}"),
        }
    }
    flag.filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs(cli.jobs)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(4);
        }
    };
    match pool.install(|| cli.command.run()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
