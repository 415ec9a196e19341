mod args;
mod commands;

use std::fs;
use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Format};

/// What a verb produced.
pub struct Outcome {
    pub artifact: Artifact,
    pub summary: String,
    /// False when a domain check failed; the artifact is still emitted.
    pub valid: bool,
}

pub enum Artifact {
    Json(serde_json::Value),
    Csv(String),
}

#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or unreadable input files.
    Usage(String),
    /// The library rejected the request.
    Domain(qwparadox::Error),
}

impl From<qwparadox::Error> for Failure {
    fn from(e: qwparadox::Error) -> Self {
        Failure::Domain(e)
    }
}

fn emit(cli: &Cli, outcome: &Outcome) -> std::io::Result<()> {
    let text = match &outcome.artifact {
        Artifact::Json(v) => serde_json::to_string_pretty(v).expect("json value serializes") + "\n",
        Artifact::Csv(s) => s.clone(),
    };
    match &cli.global.out {
        Some(path) => {
            fs::write(path, text)?;
            println!("{}", outcome.summary);
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            eprintln!("{}", outcome.summary);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match commands::dispatch(&cli) {
        Ok(outcome) => {
            if let Err(e) = emit(&cli, &outcome) {
                eprintln!("error: cannot write output: {e}");
                return ExitCode::from(1);
            }
            if outcome.valid {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("Run `qwparadox --help` for usage.");
            ExitCode::from(1)
        }
        Err(Failure::Domain(e)) => {
            let report = serde_json::json!({ "error": format!("{e:?}"), "message": e.to_string() });
            eprintln!("{}", serde_json::to_string_pretty(&report).expect("json value serializes"));
            ExitCode::from(2)
        }
    }
}

pub fn require_json(format: Format, verb: &str) -> Result<(), Failure> {
    match format {
        Format::Json => Ok(()),
        Format::Csv => {
            Err(Failure::Usage(format!("`{verb}` only produces JSON; CSV is available for `experiment run`")))
        }
    }
}
