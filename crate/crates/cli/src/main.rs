mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;
use skillrecall_core::{Error, Result};

use args::{AnalyzeCommand, Cli, Command};

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let seed = cli.seed;
    match &cli.command {
        Command::Prepare(a) => commands::prepare(a, seed),
        Command::Stats(a) => commands::stats(a, seed),
        Command::Encode(a) => commands::encode(a, seed),
        Command::Train(a) => commands::train_cmd(a, seed),
        Command::Cv(a) => commands::cv(a, seed),
        Command::Ablate(a) => commands::ablate(a, seed),
        Command::Analyze(AnalyzeCommand::Slopes(a)) => commands::slopes(a, seed),
        Command::Analyze(AnalyzeCommand::Recall(a)) => commands::recall(a),
        Command::ScheduleSim(a) => commands::schedule_sim(a, seed),
        Command::Generate(a) => commands::generate(a, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error[{}]: {}", err.category(), err.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
