use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use cuedr_service::{http, AuthService, ServiceConfig};
use tracing_subscriber::EnvFilter;

use crate::CmdResult;

pub fn run(config: Option<PathBuf>, json_logs: bool) -> CmdResult {
    let filter = EnvFilter::try_from_env("CUEDR_LOG").unwrap_or_else(|_| EnvFilter::new("info"));
    let builder = tracing_subscriber::fmt().with_env_filter(filter);
    if json_logs {
        builder.json().init();
    } else {
        builder.init();
    }

    let path = config.or_else(|| std::env::var_os("CUEDR_CONFIG").map(PathBuf::from));
    let config = ServiceConfig::load(path.as_deref())?;
    let service = Arc::new(AuthService::open(&config)?);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    runtime.block_on(http::serve(service, config.listen))?;
    tracing::info!("shut down");
    Ok(ExitCode::SUCCESS)
}
