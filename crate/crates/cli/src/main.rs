mod cli;
mod commands;
mod config;
mod error;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use crate::cli::{Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| writeln!(buf, "[{}] {}", record.level(), record.args()))
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Extract(a) => commands::extract(a),
        Command::Train(a) => commands::train(a),
        Command::Export(a) => commands::export(a),
        Command::Embed(a) => commands::embed(a),
        Command::EvalCluster(a) => commands::eval_cluster(a),
        Command::EvalClassify(a) => commands::eval_classify(a),
        Command::EvalLink(a) => commands::eval_link(a),
        Command::InspectVocab(a) => commands::inspect_vocab(a),
        Command::RebuildNoise(a) => commands::rebuild_noise(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.broken_pipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
