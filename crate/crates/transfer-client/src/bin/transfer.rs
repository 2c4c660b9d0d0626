//! Transfer CLI: `transfer <source-url> <dest>`.
//!
//! Downloads by default; `--direction upload` pushes a local file to a
//! remote URL (`transfer ./results.tar onedrive:///results.tar
//! --direction upload`). Exit codes are documented per error class in the
//! README; 0 means the transfer completed.

use std::path::PathBuf;
use std::time::Duration;

use clap::Parser;
use transfer_client::{
    api_base_from_env, locate_credentials, parse_source_url, Client, ClientOptions, Direction,
    TransferSpec,
};

#[derive(Parser)]
#[command(
    name = "transfer",
    about = "Download or upload files via staged bearer credentials",
    after_help = "Environment:\n  _CONDOR_CREDS    credentials directory holding <provider>.use files\n  GRAPH_API_BASE   override the provider API endpoint (default https://graph.microsoft.com)"
)]
struct Args {
    /// Remote URL (downloads) or local file (uploads).
    source: String,

    /// Local destination (downloads) or remote URL (uploads).
    dest: String,

    /// Transfer direction.
    #[arg(long, value_enum, default_value_t = Direction::Download)]
    direction: Direction,

    /// Connect/read timeout in seconds.
    #[arg(long, default_value_t = 30)]
    timeout: u64,

    /// Emit the transfer report as JSON on stdout.
    #[arg(long)]
    json_report: bool,
}

fn run(args: &Args) -> transfer_client::Result<transfer_client::TransferReport> {
    let (remote, local) = match args.direction {
        Direction::Download => (&args.source, &args.dest),
        Direction::Upload => (&args.dest, &args.source),
    };
    let (provider, remote_path) = parse_source_url(remote)?;
    let spec = TransferSpec {
        provider: provider.clone(),
        remote_path,
        local_dest: PathBuf::from(local),
        direction: args.direction,
    };

    let token = locate_credentials(&provider)?;
    let mut options = ClientOptions::new(api_base_from_env()?);
    options.timeout = Duration::from_secs(args.timeout);
    let client = Client::new(options)?;

    match args.direction {
        Direction::Download => client.download(&spec, &token),
        Direction::Upload => client.upload(&spec, &token),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();

    match run(&args) {
        Ok(report) => {
            if args.json_report {
                println!(
                    "{}",
                    serde_json::to_string(&report).expect("report serializes")
                );
            } else {
                let verb = match args.direction {
                    Direction::Download => "downloaded",
                    Direction::Upload => "uploaded",
                };
                println!(
                    "{verb} {} bytes in {:.2}s ({:.1} mbps, {} retries)",
                    report.bytes,
                    report.elapsed_s,
                    report.mbps(),
                    report.retries
                );
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
