use std::net::SocketAddr;
use std::path::PathBuf;

use featurelens_core::ingest::load_manifest;
use tokio::net::TcpListener;

use crate::api::router;
use crate::state::AppState;

pub const DEFAULT_HOST: &str = "127.0.0.1";
pub const DEFAULT_PORT: u16 = 8765;

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub manifest: PathBuf,
    pub host: String,
    pub port: u16,
    pub open_browser: bool,
}

/// Binds the listener; a busy port is reported here, before any data loads.
pub async fn bind(host: &str, port: u16) -> Result<TcpListener, String> {
    TcpListener::bind((host, port))
        .await
        .map_err(|e| format!("cannot listen on {host}:{port}: {e}"))
}

fn open_browser(url: &str) {
    let cmd = if cfg!(target_os = "macos") {
        "open"
    } else if cfg!(windows) {
        "explorer"
    } else {
        "xdg-open"
    };
    if std::process::Command::new(cmd).arg(url).spawn().is_err() {
        eprintln!("could not open a browser; visit {url}");
    }
}

pub async fn serve(config: ServeConfig) -> Result<(), String> {
    let listener = bind(&config.host, config.port).await?;
    let collection = load_manifest(&config.manifest).map_err(|e| e.to_string())?;
    let addr: SocketAddr = listener.local_addr().map_err(|e| e.to_string())?;
    let url = format!("http://{addr}/");
    eprintln!(
        "serving {} ({} systems, {} atoms, {} voxels) at {url}",
        config.manifest.display(),
        collection.systems().len(),
        collection.total(featurelens_core::model::DataKind::Atom),
        collection.total(featurelens_core::model::DataKind::Voxel),
    );
    if config.open_browser {
        open_browser(&url);
    }
    let app = router(AppState::new(collection));
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| e.to_string())
}
