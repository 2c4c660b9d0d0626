//! Stager CLI: check credentials for a submit file, or stage them into a
//! job sandbox.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use job_stager::{ensure_credentials, parse_submit_description, stage_sandbox, EnsureOutcome};

const DEFAULT_CREDMON_URL: &str = "http://127.0.0.1:9680";

#[derive(Parser)]
#[command(
    name = "stager",
    about = "Credential checks and sandbox staging for submit files"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check whether credentials for a submit file are vaulted; print the
    /// key URL to visit when they are not.
    Check {
        submit_file: PathBuf,

        /// Submitting user.
        #[arg(long)]
        user: String,

        /// Credential service base URL.
        #[arg(long, env = "CREDMON_URL", default_value = DEFAULT_CREDMON_URL)]
        credmon: String,
    },
    /// Stage `.use` files into a sandbox and print the `_CONDOR_CREDS`
    /// assignment.
    Stage {
        submit_file: PathBuf,

        /// Submitting user.
        #[arg(long)]
        user: String,

        /// Sandbox directory to stage into.
        #[arg(long)]
        sandbox: PathBuf,

        /// Credential store root.
        #[arg(long, env = "CREDMON_STORE")]
        store: PathBuf,

        /// Credential service base URL.
        #[arg(long, env = "CREDMON_URL", default_value = DEFAULT_CREDMON_URL)]
        credmon: String,
    },
}

fn main() {
    let args = Args::parse();
    let code = match run(args) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            2
        }
    };
    std::process::exit(code);
}

fn run(args: Args) -> Result<i32, Box<dyn std::error::Error>> {
    match args.command {
        Command::Check {
            submit_file,
            user,
            credmon,
        } => {
            let text = std::fs::read_to_string(&submit_file)?;
            let desc = parse_submit_description(&text)?;
            println!("Hello, {user}.");
            match ensure_credentials(&credmon, &desc, &user)? {
                EnsureOutcome::Ready => {
                    println!("Ready");
                    Ok(0)
                }
                EnsureOutcome::MustVisit { url } => {
                    println!("Please visit: {url}");
                    Ok(1)
                }
            }
        }
        Command::Stage {
            submit_file,
            user,
            sandbox,
            store,
            credmon,
        } => {
            let text = std::fs::read_to_string(&submit_file)?;
            let desc = parse_submit_description(&text)?;
            match ensure_credentials(&credmon, &desc, &user)? {
                EnsureOutcome::Ready => {}
                EnsureOutcome::MustVisit { url } => {
                    println!("Please visit: {url}");
                    return Ok(1);
                }
            }
            let creds_dir = stage_sandbox(&store, &desc, &user, &sandbox)?;
            println!("_CONDOR_CREDS={}", creds_dir.display());
            Ok(0)
        }
    }
}
