use std::process::ExitCode;

use fbaqc::cli::{execute, parse_config, Parsed};

fn main() -> ExitCode {
    let result = parse_config(std::env::args_os()).and_then(|parsed| match parsed {
        Parsed::Info(text) => {
            print!("{text}");
            Ok(())
        }
        Parsed::Config(config) => execute(&config).map(|report| {
            println!("{}", report.summary);
            for path in &report.outputs {
                println!("wrote {}", path.display());
            }
        }),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fbaqc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
