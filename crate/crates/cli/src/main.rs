mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match &cli.command {
        Command::Playout(a) => commands::playout(cli, a),
        Command::Split(a) => commands::split_cmd(cli, a),
        Command::Train(a) => commands::train(cli, a),
        Command::Sample(a) => commands::sample(cli, a),
        Command::Eval(a) => commands::eval(cli, a),
        Command::Sweep(a) => commands::sweep(cli, a),
        Command::Report(a) => commands::report_cmd(cli, a),
        Command::Pipeline(a) => commands::pipeline(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
