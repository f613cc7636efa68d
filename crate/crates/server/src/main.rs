use std::path::PathBuf;
use std::process::ExitCode;

use guiyun::Ledger;
use guiyun_server::{serve, AppState, Config, Resources};

#[tokio::main]
async fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let path = std::env::args_os().nth(1).map(PathBuf::from);
    let config = match Config::load(path.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let started = Resources::load(&config).map_err(|e| e.to_string()).and_then(|r| {
        let ledger = Ledger::open(&config.ledger).map_err(|e| format!("{}: {e}", config.ledger.display()))?;
        Ok(AppState::new(r, ledger, &config))
    });
    let state = match started {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match serve(&config, state).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
