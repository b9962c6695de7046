use std::process::ExitCode;

use clap::Parser;
use iswerm_lab::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) if outcome.passed => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            // Core errors embed their source in the message; skip links
            // already printed as part of the previous one.
            let mut msg = String::new();
            let mut prev = String::new();
            for link in e.chain().map(|c| c.to_string()) {
                if !prev.ends_with(&link) {
                    if !msg.is_empty() {
                        msg.push_str(": ");
                    }
                    msg.push_str(&link);
                }
                prev = link;
            }
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
