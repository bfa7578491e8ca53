use clap::Parser;

use gapkit::cli::{exit_code, run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => {}
        Ok(false) => std::process::exit(5),
        Err(err) => {
            let body = serde_json::json!({
                "schema": gapkit::cli::SCHEMA,
                "error": err.to_string(),
                "code": exit_code(&err),
            });
            eprintln!("{body}");
            std::process::exit(exit_code(&err));
        }
    }
}
