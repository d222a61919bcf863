use std::fs;
use std::path::{Path, PathBuf};

use super::{GenerateError, Persona};
use crate::jsonl::write_atomic;

/// Writes `persona.json` and `persona_card.json` under `dir/{persona_id}/`
/// and returns that directory.
pub fn write_persona_files(dir: &Path, persona: &Persona) -> Result<PathBuf, GenerateError> {
    let out = dir.join(&persona.persona_id);
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| GenerateError::Io { path, source }
    };
    fs::create_dir_all(&out).map_err(io(&out))?;
    for (name, bytes) in [
        ("persona.json", pretty(persona)?),
        ("persona_card.json", pretty(&persona.card())?),
    ] {
        let path = out.join(name);
        write_atomic(&path, &bytes).map_err(io(&path))?;
    }
    Ok(out)
}

fn pretty<T: serde::Serialize>(value: &T) -> Result<Vec<u8>, GenerateError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| GenerateError::Invariant(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Persona artifacts on disk, served byte-for-byte.
#[derive(Debug, Clone)]
pub struct PersonaStore {
    root: PathBuf,
}

pub fn valid_persona_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
}

impl PersonaStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn save(&self, persona: &Persona) -> Result<PathBuf, GenerateError> {
        write_persona_files(&self.root, persona)
    }

    /// `None` when the id is malformed or unknown.
    pub fn persona_bytes(&self, id: &str) -> Result<Option<Vec<u8>>, GenerateError> {
        self.read(id, "persona.json")
    }

    pub fn card_bytes(&self, id: &str) -> Result<Option<Vec<u8>>, GenerateError> {
        self.read(id, "persona_card.json")
    }

    pub fn load(&self, id: &str) -> Result<Option<Persona>, GenerateError> {
        match self.persona_bytes(id)? {
            Some(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| GenerateError::Invariant(format!("persona {id}: {e}"))),
            None => Ok(None),
        }
    }

    fn read(&self, id: &str, name: &str) -> Result<Option<Vec<u8>>, GenerateError> {
        if !valid_persona_id(id) {
            return Ok(None);
        }
        let path = self.root.join(id).join(name);
        match fs::read(&path) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(source) => Err(GenerateError::Io { path, source }),
        }
    }
}
