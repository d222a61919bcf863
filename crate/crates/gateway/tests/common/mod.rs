#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use persona_gateway::config::GatewayConfig;

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

pub fn persona(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_persona"))
        .args(args)
        .current_dir(repo_root())
        .output()
        .expect("spawn persona")
}

pub fn persona_ok(args: &[&str]) -> String {
    let out = persona(args);
    assert!(
        out.status.success(),
        "persona {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Runs ingest (replayed), curate and index into `dir`.
pub fn build_data(dir: &Path) {
    let store = repo_root().join("fixtures/store");
    let apps = store.join("apps.jsonl");
    let http = store.join("http");
    for (id, file) in [("steam", "steam.jsonl"), ("metaquest", "meta.jsonl")] {
        persona_ok(&[
            "ingest", "--store", id, "--apps", s(&apps), "--replay", s(&http), "--out", s(&dir.join(file)),
        ]);
    }
    persona_ok(&[
        "curate",
        "--in",
        s(&dir.join("steam.jsonl")),
        "--in",
        s(&dir.join("meta.jsonl")),
        "--out",
        s(&dir.join("curated.jsonl")),
    ]);
    persona_ok(&["index", "--in", s(&dir.join("curated.jsonl")), "--out", s(&dir.join("index"))]);
}

pub fn config_for(dir: &Path) -> GatewayConfig {
    GatewayConfig {
        index_dir: dir.join("index"),
        corpus: dir.join("curated.jsonl"),
        persona_dir: dir.join("personas"),
        session_dir: dir.join("sessions"),
        ..GatewayConfig::default()
    }
}
