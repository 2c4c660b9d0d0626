//! Credential-manager service CLI.

use std::path::PathBuf;
use std::time::Duration;

use clap::{Parser, Subcommand};
use credmon::ServeOptions;
use url::Url;

#[derive(Parser)]
#[command(name = "credmon", about = "OAuth credential-manager service")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the service: consent pages, OAuth callbacks, token refresher.
    Serve {
        /// Provider configuration file (KEY = value format).
        #[arg(long)]
        config: PathBuf,

        /// Credential store root (defaults to $CREDMON_STORE).
        #[arg(long, env = "CREDMON_STORE")]
        store: PathBuf,

        /// Allow plain-http provider endpoints and redirect URIs
        /// (test mode; production runs behind a TLS terminator).
        #[arg(long)]
        insecure_http: bool,

        /// Loopback port to listen on (0 picks an ephemeral port).
        #[arg(long, default_value_t = 9680)]
        port: u16,

        /// Public base URL shown to users in key URLs.
        /// Defaults to https://127.0.0.1:<port>.
        #[arg(long)]
        public_url: Option<Url>,

        /// Seconds before expiry at which access tokens are refreshed.
        #[arg(long, default_value_t = 300)]
        refresh_margin: i64,

        /// Seconds between refresher passes.
        #[arg(long, default_value_t = 60)]
        refresh_interval: u64,
    },
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();

    let args = Args::parse();
    let Command::Serve {
        config,
        store,
        insecure_http,
        port,
        public_url,
        refresh_margin,
        refresh_interval,
    } = args.command;

    let providers = token_core::load_provider_config(&config, insecure_http)?;
    if providers.is_empty() {
        anyhow::bail!("no providers configured in {}", config.display());
    }

    let mut options = ServeOptions::new(providers, store);
    options.insecure_http = insecure_http;
    options.port = port;
    options.public_base = public_url;
    options.refresh_margin = refresh_margin;
    options.refresh_interval = Duration::from_secs(refresh_interval);

    let service = credmon::spawn(options).await?;
    println!("listening on {}", service.base_url());
    println!("key urls at  {}", service.state().key_url("<key-id>"));

    tokio::signal::ctrl_c().await?;
    drop(service);
    Ok(())
}
