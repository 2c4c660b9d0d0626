//! Standalone mock provider server.

use std::path::PathBuf;

use clap::Parser;
use mock_provider::{FaultMode, MockConfig, MockProvider};

#[derive(Parser)]
#[command(name = "mock-provider", about = "OAuth2 + drive-content test double")]
struct Args {
    /// Directory served as the drive root.
    #[arg(long)]
    root: PathBuf,

    /// Port to listen on (0 picks an ephemeral port).
    #[arg(long, default_value_t = 0)]
    port: u16,

    /// Download bandwidth cap in bytes per second.
    #[arg(long)]
    bandwidth: Option<u64>,

    /// Access-token lifetime in seconds.
    #[arg(long, default_value_t = 3600)]
    token_lifetime: u64,

    /// Fault to inject.
    #[arg(long, value_enum, default_value_t = FaultMode::None)]
    fault: FaultMode,

    /// Serve downloads directly instead of 302-ing to pre-signed URLs.
    #[arg(long)]
    no_redirect: bool,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();

    let args = Args::parse();
    let mut config = MockConfig::new(&args.root)
        .token_lifetime(args.token_lifetime)
        .fault_mode(args.fault)
        .redirect_downloads(!args.no_redirect);
    if let Some(limit) = args.bandwidth {
        config = config.bandwidth_limit(limit);
    }

    let server = MockProvider::start_on(config, args.port).await?;
    println!("listening on {}", server.base_url());
    println!("authorize: {}", server.authorize_url());
    println!("token:     {}", server.token_url());

    tokio::signal::ctrl_c().await?;
    Ok(())
}
