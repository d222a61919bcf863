//! HTTP gateway and command-line pipeline for the persona system.

pub mod api;
pub mod cli;
pub mod config;
pub mod providers;

use std::sync::Arc;

use anyhow::Context;

use persona_core::clock::SystemClock;
use persona_core::generate::PersonaStore;
use persona_core::session::{SessionDeps, SessionManager};

use api::AppState;
use config::GatewayConfig;

/// Loads the index, corpus statistics and providers named by `cfg`.
pub fn build_state(cfg: &GatewayConfig) -> anyhow::Result<AppState> {
    let loaded = providers::load_engine(cfg)?;
    let personas = PersonaStore::new(&cfg.persona_dir);
    let provider_ids = loaded.engine.provider_ids();
    let deps = SessionDeps {
        engine: loaded.engine,
        store: personas.clone(),
        clock: Arc::new(SystemClock),
    };
    let sessions = SessionManager::new(deps, &cfg.session_dir)
        .with_context(|| format!("opening session store {}", cfg.session_dir.display()))?;
    Ok(AppState {
        sessions: Arc::new(sessions),
        personas,
        index: loaded.index,
        prevalence: Arc::new(loaded.prevalence),
        provider_ids,
    })
}

pub async fn serve(cfg: GatewayConfig) -> anyhow::Result<()> {
    let state = build_state(&cfg)?;
    log::info!("index holds {} chunks; providers {:?}", state.index.snapshot().len(), state.provider_ids);
    let app = api::router(state, cfg.cors_origin.as_deref()).map_err(anyhow::Error::msg)?;
    let addr = std::net::SocketAddr::new(cfg.bind, cfg.port);
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
