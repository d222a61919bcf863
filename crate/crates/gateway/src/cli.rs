//! The `persona` command line: one subcommand per pipeline stage.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use persona_core::curation::{
    curate, prevalence, CategoryRules, CuratedReview, CurationRules, DenyLists, KeywordLexicon, Prevalence,
};
use persona_core::generate::{write_persona_files, PersonaEngine, ProjectContext};
use persona_core::index::{build_index, ChunkSize, SharedIndex};
use persona_core::ingest::{
    ingest_store, load_catalog, read_corpus, write_corpus, FetchPolicy, HttpTransport, IngestOptions, RawReview,
    RecordingTransport, ReplayTransport, SelectorProfile, StoreId, ThrottledTransport, Transport,
};
use persona_core::{DisabilityDimension, VrCategory};

use crate::config::{EmbedBackend, GatewayConfig, LlmBackend};
use crate::providers;

#[derive(Debug, Parser)]
#[command(name = "persona", version, about = "Accessibility persona pipeline for VR app reviews")]
pub struct Cli {
    /// Log filter when RUST_LOG is unset.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fetch reviews for the top apps of one store.
    Ingest(IngestArgs),
    /// Filter, categorize and label a raw review corpus.
    Curate(CurateArgs),
    /// Chunk and embed a curated corpus into a vector index.
    Index(IndexArgs),
    /// Generate one persona without a chat session.
    Generate(GenerateArgs),
    /// Run the HTTP API.
    Serve(ServeArgs),
    /// Print the prevalence map of a curated corpus.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub store: StoreId,
    /// App catalog (JSONL of app descriptors).
    #[arg(long)]
    pub apps: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub top: usize,
    #[arg(long, default_value_t = 10)]
    pub page_limit: u32,
    #[arg(long)]
    pub out: PathBuf,
    /// Serve HTTP from recorded fixtures instead of the network.
    #[arg(long, conflicts_with = "record")]
    pub replay: Option<PathBuf>,
    /// Record every fetched response into this directory.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Selector profile for scraped stores.
    #[arg(long, default_value = "config/selectors/metaquest.toml")]
    pub profile: PathBuf,
    /// Minimum spacing between requests to one host.
    #[arg(long, default_value_t = 1000)]
    pub min_interval_ms: u64,
}

#[derive(Debug, Args)]
pub struct CurateArgs {
    /// Raw corpus files; repeat to merge several stores.
    #[arg(long = "in", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value = "config/lexicon.toml")]
    pub lexicon: PathBuf,
    #[arg(long, default_value = "config/categories.toml")]
    pub categories: PathBuf,
    /// Directory holding advertisement.txt and abusive.txt.
    #[arg(long, default_value = "config/deny")]
    pub deny: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the prevalence map here.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Curated corpus.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub provider: EmbedBackend,
    #[arg(long, default_value_t = persona_core::index::HashingEmbedder::DEFAULT_DIM)]
    pub dim: usize,
    #[arg(long, default_value_t = persona_core::index::DEFAULT_MAX_TOKENS)]
    pub chunk_tokens: usize,
    /// Index directory (manifest.json + entries.jsonl).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Generate outside any chat session (the only mode offered here).
    #[arg(long)]
    pub session_less: bool,
    #[arg(long)]
    pub category: VrCategory,
    /// Defaults to the category's most prevalent dimension.
    #[arg(long)]
    pub dimension: Option<DisabilityDimension>,
    #[arg(long, default_value = "")]
    pub description: String,
    #[arg(long, default_value = "data/index")]
    pub index: PathBuf,
    /// Curated corpus for the prevalence map.
    #[arg(long, default_value = "data/curated.jsonl")]
    pub corpus: PathBuf,
    /// Precomputed prevalence map; used instead of --corpus when given.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    #[arg(long, default_value = "data/personas")]
    pub out: PathBuf,
    /// Offline scripted LLM and hashing embedder.
    #[arg(long, conflicts_with_all = ["replay", "record"])]
    pub mock_providers: bool,
    /// Replay recorded completions from this directory.
    #[arg(long, conflicts_with = "record")]
    pub replay: Option<PathBuf>,
    /// Call the remote LLM and record completions here.
    #[arg(long)]
    pub record: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    pub embedder: EmbedBackend,
    #[arg(long, default_value_t = persona_core::generate::DEFAULT_EVIDENCE_K)]
    pub k: usize,
    #[arg(long, default_value_t = persona_core::generate::DEFAULT_GROUNDING_RETRIES)]
    pub retries: usize,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured port.
    #[arg(long)]
    pub port: Option<u16>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Curated corpus.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Curate(a) => curate_cmd(a),
        Command::Index(a) => index(a),
        Command::Generate(a) => generate(a),
        Command::Serve(a) => serve(a),
        Command::Stats(a) => stats(a),
    }
}

fn ingest(a: IngestArgs) -> anyhow::Result<()> {
    let catalog = load_catalog(&a.apps).with_context(|| format!("reading app catalog {}", a.apps.display()))?;
    let profile = match a.store {
        StoreId::MetaQuest => Some(
            SelectorProfile::load(&a.profile)
                .with_context(|| format!("reading selector profile {}", a.profile.display()))?,
        ),
        StoreId::Steam => None,
    };
    let (transport, policy): (Box<dyn Transport>, FetchPolicy) = match (&a.replay, &a.record) {
        (Some(dir), _) => (Box::new(ReplayTransport::new(dir)), FetchPolicy::immediate()),
        (None, record) => {
            let http = ThrottledTransport::new(HttpTransport::new(Duration::from_secs(30)), Duration::from_millis(a.min_interval_ms));
            let t: Box<dyn Transport> = match record {
                Some(dir) => Box::new(RecordingTransport::new(http, dir)),
                None => Box::new(http),
            };
            (t, FetchPolicy::default())
        }
    };
    let opts = IngestOptions {
        store: a.store,
        top: a.top,
        page_limit: a.page_limit,
        policy,
        profile: profile.as_ref(),
    };
    let corpus = ingest_store(transport.as_ref(), &catalog, &opts)?;
    write_corpus(&a.out, &corpus).with_context(|| format!("writing {}", a.out.display()))?;
    println!("{} reviews from {} written to {}", corpus.len(), a.store, a.out.display());
    Ok(())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    persona_core::jsonl::write_atomic(path, &bytes).with_context(|| format!("writing {}", path.display()))
}

fn curate_cmd(a: CurateArgs) -> anyhow::Result<()> {
    let rules = CurationRules {
        lexicon: KeywordLexicon::load(&a.lexicon)?,
        categories: CategoryRules::load(&a.categories)?,
        deny: DenyLists::load_dir(&a.deny)?,
    };
    let mut raw: Vec<RawReview> = Vec::new();
    for path in &a.inputs {
        raw.extend(read_corpus(path)?);
    }
    let curated = curate(&raw, &rules)?;
    persona_core::jsonl::write_jsonl(&a.out, &curated)?;
    let kept = curated.iter().filter(|c| c.is_kept()).count();
    if let Some(path) = &a.stats {
        write_json(path, &prevalence(&curated))?;
    }
    println!("{kept} of {} reviews kept; written to {}", curated.len(), a.out.display());
    Ok(())
}

fn index(a: IndexArgs) -> anyhow::Result<()> {
    let corpus = providers::load_curated(&a.input)?;
    let chunk_size = ChunkSize::new(a.chunk_tokens)
        .with_context(|| format!("--chunk-tokens must be at least {}", ChunkSize::MIN))?;
    let embedder = providers::embedder(a.provider, a.dim)?;
    let built = build_index(&corpus, embedder.as_ref(), chunk_size)?;
    built.persist(&a.out).with_context(|| format!("writing index {}", a.out.display()))?;
    println!("{} chunks indexed with {} into {}", built.len(), built.provider_id(), a.out.display());
    Ok(())
}

fn load_prevalence(stats: Option<&Path>, corpus: &Path) -> anyhow::Result<Prevalence> {
    match stats {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
        }
        None => {
            let curated: Vec<CuratedReview> = providers::load_curated(corpus)?;
            Ok(prevalence(&curated))
        }
    }
}

fn generate(a: GenerateArgs) -> anyhow::Result<()> {
    if !a.session_less {
        bail!("the command line only generates session-less personas; pass --session-less or use `persona serve`");
    }
    let index = providers::load_index(&a.index)?;
    let embedder = providers::embedder(if a.mock_providers { EmbedBackend::Test } else { a.embedder }, index.dim())?;
    if embedder.provider_id() != index.provider_id() {
        bail!(
            "index {} was built with {} but the query embedder is {}",
            a.index.display(),
            index.provider_id(),
            embedder.provider_id()
        );
    }
    let (backend, fixtures) = match (&a.replay, &a.record, a.mock_providers) {
        (Some(dir), _, _) => (LlmBackend::Replay, Some(dir.as_path())),
        (None, Some(dir), _) => (LlmBackend::Remote, Some(dir.as_path())),
        (None, None, true) => (LlmBackend::Mock, None),
        (None, None, false) => (LlmBackend::Remote, None),
    };
    let llm = providers::llm(backend, fixtures)?;
    let prev = load_prevalence(a.stats.as_deref(), &a.corpus)?;
    let mut engine = PersonaEngine::new(SharedIndex::new(index), embedder, llm, prev);
    engine.config.k = a.k;
    engine.config.grounding_retries = a.retries;
    let ctx = ProjectContext::new(a.category, a.description, a.dimension)?;
    let persona = engine.generate(&ctx)?;
    let dir = write_persona_files(&a.out, &persona)?;
    println!("{}", dir.join("persona.json").display());
    Ok(())
}

fn serve(a: ServeArgs) -> anyhow::Result<()> {
    let mut cfg = match &a.config {
        Some(path) => GatewayConfig::load(path)?,
        None => GatewayConfig::default(),
    };
    if let Some(port) = a.port {
        cfg.port = port;
    }
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(crate::serve(cfg))
}

fn stats(a: StatsArgs) -> anyhow::Result<()> {
    let curated = providers::load_curated(&a.input)?;
    let prev = prevalence(&curated);
    match &a.out {
        Some(path) => write_json(path, &prev)?,
        None => {
            let text = serde_json::to_string_pretty(&prev)?;
            let mut out = std::io::stdout().lock();
            if let Err(e) = writeln!(out, "{text}") {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(e.into());
                }
            }
        }
    }
    Ok(())
}

