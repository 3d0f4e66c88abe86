use std::process::ExitCode;

use clap::Parser;
use txnfm::cli::Cli;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let threads = match cli.resolve_config() {
        Ok(cfg) => cfg.threads,
        Err(_) => 0,
    };
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::warn!("could not cap worker threads: {e}");
        }
    }
    match cli.run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("txnfm: error[{}]: {e}", e.kind());
            match e {
                txnfm::Error::InvalidConfig(_) | txnfm::Error::Prerequisite(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
