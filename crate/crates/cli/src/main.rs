use std::process::ExitCode;

use clap::error::ErrorKind;
use oscar_cli::config::RunConfig;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cfg = match RunConfig::from_args(std::env::args_os()) {
        Ok(c) => c,
        Err(e) => {
            if let Some(c) = e.downcast_ref::<clap::Error>() {
                let code = match c.kind() {
                    ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                    _ => 2,
                };
                let _ = c.print();
                return ExitCode::from(code);
            }
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match oscar_cli::execute(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
