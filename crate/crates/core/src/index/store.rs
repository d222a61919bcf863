//! Flat in-memory vector index with exhaustive cosine search and an
//! on-disk snapshot (`manifest.json` + `entries.jsonl`).

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use super::chunk::Chunk;
use super::embed::{normalize, Embedding};
use super::IndexError;
use crate::curation::{DisabilityDimension, VrCategory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub vector: Vec<f32>,
    pub chunk: Chunk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dim: usize,
    provider_id: String,
    entries: BTreeMap<String, IndexEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub dim: usize,
    pub provider_id: String,
    pub count: usize,
}

/// One line of `entries.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryRecord {
    pub chunk_id: String,
    pub vector: Vec<f32>,
    pub metadata: Chunk,
}

/// Every present field must hold for a chunk to be a candidate.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchFilter {
    pub category: Option<VrCategory>,
    /// Candidate must share at least one dimension with this set.
    pub dimensions: Option<BTreeSet<DisabilityDimension>>,
    pub exclude_apps: BTreeSet<String>,
}

impl SearchFilter {
    pub fn matches(&self, chunk: &Chunk) -> bool {
        self.category.is_none_or(|c| chunk.category == c)
            && self
                .dimensions
                .as_ref()
                .is_none_or(|ds| !ds.is_disjoint(&chunk.dimensions))
            && !self.exclude_apps.contains(&chunk.app_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub chunk: Chunk,
    pub score: f64,
}

/// Score descending, then chunk id ascending.
pub fn hit_order(a: &RetrievalHit, b: &RetrievalHit) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.chunk.chunk_id.cmp(&b.chunk.chunk_id))
}

/// Where to stop a persist early; used to test crash recovery.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PersistFault {
    None,
    /// Staging snapshot fully written, nothing renamed yet.
    AfterStaging,
    /// Live snapshot moved aside, staging not yet moved in.
    AfterBackup,
}

impl VectorIndex {
    pub fn new(dim: usize, provider_id: impl Into<String>) -> Self {
        Self {
            dim,
            provider_id: provider_id.into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, chunk_id: &str) -> Option<&IndexEntry> {
        self.entries.get(chunk_id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &IndexEntry> {
        self.entries.values()
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            dim: self.dim,
            provider_id: self.provider_id.clone(),
            count: self.entries.len(),
        }
    }

    /// Inserts or replaces entries by chunk id. All-or-nothing: nothing is
    /// written if any item fails validation.
    pub fn upsert(&mut self, items: impl IntoIterator<Item = (Chunk, Embedding)>) -> Result<(), IndexError> {
        let mut staged = Vec::new();
        for (chunk, emb) in items {
            if emb.dim() != self.dim {
                return Err(IndexError::DimensionMismatch {
                    expected: self.dim,
                    got: emb.dim(),
                });
            }
            if emb.provider_id != self.provider_id {
                return Err(IndexError::ProviderMismatch {
                    expected: self.provider_id.clone(),
                    got: emb.provider_id,
                });
            }
            let vector = normalize(&emb.vector)
                .ok_or_else(|| IndexError::Persistence(format!("zero vector for {}", chunk.chunk_id)))?;
            staged.push((chunk.chunk_id.clone(), IndexEntry { vector, chunk }));
        }
        self.entries.extend(staged);
        Ok(())
    }

    /// Top `k` candidates by cosine similarity to `query`.
    pub fn search(&self, query: &Embedding, filter: &SearchFilter, k: usize) -> Result<Vec<RetrievalHit>, IndexError> {
        if query.dim() != self.dim {
            return Err(IndexError::DimensionMismatch {
                expected: self.dim,
                got: query.dim(),
            });
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        let q: Vec<f64> = match normalize(&query.vector) {
            Some(v) => v.into_iter().map(f64::from).collect(),
            None => vec![0.0; self.dim],
        };
        let order = |a: &(f64, &IndexEntry), b: &(f64, &IndexEntry)| {
            b.0.total_cmp(&a.0).then_with(|| a.1.chunk.chunk_id.cmp(&b.1.chunk.chunk_id))
        };
        let mut scored: Vec<(f64, &IndexEntry)> = self
            .entries
            .values()
            .filter(|e| filter.matches(&e.chunk))
            .map(|e| {
                let dot = e.vector.iter().zip(&q).map(|(a, b)| f64::from(*a) * b).sum::<f64>();
                (dot.clamp(-1.0, 1.0), e)
            })
            .collect();
        if scored.len() > k {
            scored.select_nth_unstable_by(k - 1, order);
            scored.truncate(k);
        }
        scored.sort_by(order);
        Ok(scored
            .into_iter()
            .map(|(score, e)| RetrievalHit {
                chunk: e.chunk.clone(),
                score,
            })
            .collect())
    }

    pub fn to_entries_jsonl(&self) -> Result<String, IndexError> {
        let mut out = String::new();
        for e in self.entries.values() {
            let rec = EntryRecord {
                chunk_id: e.chunk.chunk_id.clone(),
                vector: e.vector.clone(),
                metadata: e.chunk.clone(),
            };
            out.push_str(&serde_json::to_string(&rec).map_err(|e| IndexError::Persistence(e.to_string()))?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn persist(&self, dir: &Path) -> Result<(), IndexError> {
        self.persist_with_fault(dir, PersistFault::None)
    }

    /// Writes a full snapshot into a sibling staging directory, then swaps
    /// it in: live -> `.prev`, staging -> live, drop `.prev`. A crash at any
    /// point leaves either the old or the new snapshot loadable.
    #[doc(hidden)]
    pub fn persist_with_fault(&self, dir: &Path, fault: PersistFault) -> Result<(), IndexError> {
        let (staging, backup) = sibling_paths(dir)?;
        let io = |what: &str, p: &Path, e: std::io::Error| IndexError::Persistence(format!("{what} {}: {e}", p.display()));

        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| io("clear", &staging, e))?;
        }
        fs::create_dir_all(&staging).map_err(|e| io("create", &staging, e))?;
        let manifest = serde_json::to_string_pretty(&self.manifest()).map_err(|e| IndexError::Persistence(e.to_string()))?;
        write_synced(&staging.join("entries.jsonl"), self.to_entries_jsonl()?.as_bytes())
            .map_err(|e| io("write", &staging, e))?;
        write_synced(&staging.join("manifest.json"), format!("{manifest}\n").as_bytes())
            .map_err(|e| io("write", &staging, e))?;
        if fault == PersistFault::AfterStaging {
            return Err(IndexError::Persistence("injected fault after staging".into()));
        }

        if backup.exists() {
            fs::remove_dir_all(&backup).map_err(|e| io("clear", &backup, e))?;
        }
        if dir.exists() {
            fs::rename(dir, &backup).map_err(|e| io("move aside", dir, e))?;
        }
        if fault == PersistFault::AfterBackup {
            return Err(IndexError::Persistence("injected fault after backup".into()));
        }
        fs::rename(&staging, dir).map_err(|e| io("move in", &staging, e))?;
        if backup.exists() {
            fs::remove_dir_all(&backup).map_err(|e| io("remove", &backup, e))?;
        }
        Ok(())
    }

    /// Loads a snapshot, recovering from an interrupted swap if needed.
    pub fn load(dir: &Path) -> Result<Self, IndexError> {
        let (_, backup) = sibling_paths(dir)?;
        if !dir.join("manifest.json").exists() && backup.join("manifest.json").exists() {
            log::warn!("recovering index snapshot from {}", backup.display());
            if dir.exists() {
                fs::remove_dir_all(dir).map_err(|e| IndexError::Persistence(e.to_string()))?;
            }
            fs::rename(&backup, dir).map_err(|e| IndexError::Persistence(e.to_string()))?;
        }
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read_to_string(&p).map_err(|e| IndexError::Persistence(format!("{}: {e}", p.display())))
        };
        let manifest: Manifest = serde_json::from_str(&read("manifest.json")?)
            .map_err(|e| IndexError::Persistence(format!("manifest.json: {e}")))?;
        Self::from_parts(&manifest, &read("entries.jsonl")?)
    }

    /// Rebuilds an index from a manifest and `entries.jsonl` text, checking
    /// count, dimensionality and id consistency.
    pub fn from_parts(manifest: &Manifest, entries_jsonl: &str) -> Result<Self, IndexError> {
        let mut index = Self::new(manifest.dim, manifest.provider_id.clone());
        for (i, line) in entries_jsonl.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let rec = parse_entry_line(line).map_err(|e| IndexError::Persistence(format!("entries.jsonl:{}: {e}", i + 1)))?;
            if rec.vector.len() != manifest.dim {
                return Err(IndexError::DimensionMismatch {
                    expected: manifest.dim,
                    got: rec.vector.len(),
                });
            }
            index.entries.insert(
                rec.chunk_id,
                IndexEntry {
                    vector: rec.vector,
                    chunk: rec.metadata,
                },
            );
        }
        if index.len() != manifest.count {
            return Err(IndexError::Persistence(format!(
                "manifest says {} entries, found {}",
                manifest.count,
                index.len()
            )));
        }
        Ok(index)
    }
}

/// Parses and sanity-checks one `entries.jsonl` line.
pub fn parse_entry_line(line: &str) -> Result<EntryRecord, String> {
    let rec: EntryRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if rec.chunk_id != rec.metadata.chunk_id {
        return Err(format!("chunk_id {} disagrees with metadata {}", rec.chunk_id, rec.metadata.chunk_id));
    }
    if rec.vector.iter().any(|x| !x.is_finite()) {
        return Err(format!("non-finite component in {}", rec.chunk_id));
    }
    Ok(rec)
}

fn write_synced(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    use std::io::Write;
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    f.sync_all()
}

fn sibling_paths(dir: &Path) -> Result<(PathBuf, PathBuf), IndexError> {
    let name = dir
        .file_name()
        .ok_or_else(|| IndexError::Persistence(format!("index path {} has no directory name", dir.display())))?
        .to_string_lossy()
        .into_owned();
    Ok((dir.with_file_name(format!("{name}.staging")), dir.with_file_name(format!("{name}.prev"))))
}

/// Readers take cheap `Arc` snapshots; a writer swaps in a new version.
/// A search holding a snapshot never observes a concurrent update.
#[derive(Debug, Clone)]
pub struct SharedIndex(Arc<RwLock<Arc<VectorIndex>>>);

impl SharedIndex {
    pub fn new(index: VectorIndex) -> Self {
        Self(Arc::new(RwLock::new(Arc::new(index))))
    }

    pub fn snapshot(&self) -> Arc<VectorIndex> {
        self.0.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    /// Applies `update` to a copy and publishes it.
    pub fn update<R>(&self, update: impl FnOnce(&mut VectorIndex) -> Result<R, IndexError>) -> Result<R, IndexError> {
        let mut guard = self.0.write().unwrap_or_else(|p| p.into_inner());
        let mut next = (**guard).clone();
        let r = update(&mut next)?;
        *guard = Arc::new(next);
        Ok(r)
    }
}
