mod common;

use std::sync::{Mutex, OnceLock};

use chrono::{TimeZone, Utc};
use proptest::prelude::*;
use proptest::sample::select;
use serde_json::{json, Value};

use persona_core::clock::FixedClock;
use persona_core::curation::{
    curate, detect_language, match_dimensions, prevalence, CuratedReview, Exclusion, Language, Prevalence,
};
use persona_core::generate::{
    compile_persona, extract_dimension_values, select_dimension, EvidenceBundle, GenerateError, LlmError,
    LlmProvider, PersonaEngine, PersonaStore, ProjectContext, PromptTemplates, ScriptedLlm,
};
use persona_core::index::{hit_order, Chunk, Embedding, SearchFilter, VectorIndex};
use persona_core::ingest::{AppDescriptor, RawReview, StoreId};
use persona_core::session::{advance, classify_turn, Session, SessionState};
use persona_core::{DisabilityDimension as Dim, VrCategory};

// ---------------------------------------------------------------------------
// curation

const FILLER: &[&str] = &[
    "the", "game", "is", "really", "fun", "and", "i", "played", "it", "with", "my", "friends", "for", "hours",
    "graphics", "look", "great", "but", "menus", "are", "slow", "on", "quest", "this", "was", "worth", "price",
];

const SIGNALS: &[&str] = &[
    "motion sickness",
    "motoin sickness",
    "nausea",
    "subtitles",
    "subtitels",
    "hearing aid",
    "colorblind",
    "low vision",
    "one hand",
    "wheelchair",
    "stutter",
    "adhd",
    "dyslexia",
];

const NOISE: &[&str] = &["buy now", "discount code", "idiot", "ゲーム", "とても", "楽しい", "juego", "muy"];

fn body_strategy() -> impl Strategy<Value = String> {
    let word = prop_oneof![
        8 => select(FILLER).prop_map(str::to_string),
        2 => select(SIGNALS).prop_map(str::to_string),
        1 => select(NOISE).prop_map(str::to_string),
    ];
    (prop::collection::vec(word, 1..40), select(&[" ", "  ", "\n", " \t "][..]))
        .prop_map(|(words, sep)| format!(" {} ", words.join(sep)))
}

fn app() -> AppDescriptor {
    AppDescriptor {
        store: StoreId::Steam,
        app_id: "100610".into(),
        title: "Fixture Climb".into(),
        official_description: String::new(),
        raw_tags: vec!["Action".into()],
        popularity_rank: 1,
    }
}

fn raw_reviews(bodies: Vec<String>) -> Vec<RawReview> {
    let at = Utc.with_ymd_and_hms(2026, 1, 1, 0, 0, 0).unwrap();
    bodies
        .into_iter()
        .enumerate()
        .map(|(i, body)| RawReview {
            review_id: format!("r{i}"),
            app: app(),
            body,
            rating: None,
            posted_at: at,
            fetched_at: at,
        })
        .collect()
}

/// First failing rule, re-applied rule by rule from the primitives.
fn expected_exclusion(body: &str, rules: &persona_core::curation::CurationRules) -> Option<Exclusion> {
    let lowered = body.to_lowercase();
    if body.split_whitespace().count() < 20 {
        Some(Exclusion::TooShort)
    } else if detect_language(body) != Language::English {
        Some(Exclusion::NonEnglish)
    } else if rules.deny.is_advertisement(&lowered) {
        Some(Exclusion::Advertisement)
    } else if rules.deny.is_abusive(&lowered) {
        Some(Exclusion::Abusive)
    } else if match_dimensions(body, &rules.lexicon).is_empty() {
        Some(Exclusion::NoDisabilitySignal)
    } else {
        None
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn curation_partitions_and_keeps_only_valid_reviews(bodies in prop::collection::vec(body_strategy(), 1..30)) {
        let rules = common::rules();
        let raw = raw_reviews(bodies);
        let curated = curate(&raw, &rules).unwrap();

        prop_assert_eq!(curated.len(), raw.len());
        for (r, c) in raw.iter().zip(&curated) {
            prop_assert_eq!(&r.review_id, &c.review_id);
            let normalized = r.body.split_whitespace().collect::<Vec<_>>().join(" ");
            prop_assert_eq!(&c.body, &normalized);
            prop_assert_eq!(c.exclusion, expected_exclusion(&normalized, &rules));
            if c.is_kept() {
                prop_assert!(c.word_count >= 20);
                prop_assert!(!c.dimensions.is_empty());
                prop_assert_eq!(&c.dimensions, &match_dimensions(&c.body, &rules.lexicon));
            }
        }
        let again = curate(&raw, &rules).unwrap();
        prop_assert_eq!(
            serde_json::to_string(&curated).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
    }
}

// ---------------------------------------------------------------------------
// dimension selection

fn prevalence_from(counts: &[usize]) -> Prevalence {
    let mut p = Prevalence::default();
    for (i, d) in Dim::ALL.iter().enumerate() {
        p.set(VrCategory::Puzzle, *d, counts[i]);
    }
    p
}

proptest! {
    #[test]
    fn select_dimension_is_scale_invariant(
        counts in prop::collection::vec(0usize..6, Dim::ALL.len()),
        factor in 1usize..1000,
    ) {
        let ctx = ProjectContext::new(VrCategory::Puzzle, "", None).unwrap();
        let base = select_dimension(&ctx, &prevalence_from(&counts));
        let scaled: Vec<usize> = counts.iter().map(|c| c * factor).collect();
        let scaled = select_dimension(&ctx, &prevalence_from(&scaled));

        let max = *counts.iter().max().unwrap();
        if max == 0 {
            prop_assert!(matches!(base, Err(GenerateError::NoEvidence { .. })), "expected no evidence");
            prop_assert!(matches!(scaled, Err(GenerateError::NoEvidence { .. })), "expected no evidence");
        } else {
            let want = Dim::ALL[counts.iter().position(|c| *c == max).unwrap()];
            prop_assert_eq!(base.unwrap(), want);
            prop_assert_eq!(scaled.unwrap(), want);
        }
    }
}

// ---------------------------------------------------------------------------
// index

fn chunk_strategy() -> impl Strategy<Value = (Chunk, Vec<f32>)> {
    (
        0usize..10_000,
        select(VrCategory::ALL),
        prop::collection::btree_set(select(Dim::ALL), 1..3),
        0u8..5,
        prop::collection::vec(-1.0f32..1.0, 8),
    )
        .prop_filter("zero vector", |t| t.4.iter().any(|x| x.abs() > 1e-3))
        .prop_map(|(n, category, dimensions, app, vector)| {
            (
                Chunk {
                    chunk_id: format!("r{n:05}#0"),
                    review_id: format!("r{n:05}"),
                    span: (0, 4),
                    text: "text".into(),
                    category,
                    dimensions,
                    app_id: format!("steam/{app}"),
                },
                vector,
            )
        })
}

fn filter_strategy() -> impl Strategy<Value = SearchFilter> {
    (
        prop::option::of(select(VrCategory::ALL)),
        prop::option::of(prop::collection::btree_set(select(Dim::ALL), 1..3)),
        prop::collection::btree_set((0u8..5).prop_map(|a| format!("steam/{a}")), 0..2),
    )
        .prop_map(|(category, dims, exclude_apps)| SearchFilter {
            category,
            dimensions: dims,
            exclude_apps,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn search_is_sound_ordered_and_survives_persistence(
        items in prop::collection::vec(chunk_strategy(), 1..60),
        query in prop::collection::vec(-1.0f32..1.0, 8).prop_filter("zero", |v| v.iter().any(|x| x.abs() > 1e-3)),
        filter in filter_strategy(),
        k in 1usize..20,
    ) {
        let mut index = VectorIndex::new(8, "prop");
        let emb = |v: Vec<f32>| Embedding { vector: v, provider_id: "prop".into() };
        index.upsert(items.iter().map(|(c, v)| (c.clone(), emb(v.clone())))).unwrap();
        for e in index.entries() {
            let norm = e.vector.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() <= 1e-6);
        }

        let q = emb(query);
        let hits = index.search(&q, &filter, k).unwrap();
        let candidates = index.entries().filter(|e| filter.matches(&e.chunk)).count();
        prop_assert_eq!(hits.len(), k.min(candidates));
        for h in &hits {
            prop_assert!(filter.category.is_none_or(|c| h.chunk.category == c));
            prop_assert!(filter.dimensions.as_ref().is_none_or(|d| !d.is_disjoint(&h.chunk.dimensions)));
            prop_assert!(!filter.exclude_apps.contains(&h.chunk.app_id));
        }
        for w in hits.windows(2) {
            prop_assert!(hit_order(&w[0], &w[1]).is_le());
        }

        let dir = tempfile::tempdir().unwrap();
        index.persist(dir.path()).unwrap();
        let reloaded = VectorIndex::load(dir.path()).unwrap();
        prop_assert_eq!(&reloaded, &index);
        prop_assert_eq!(reloaded.search(&q, &filter, k).unwrap(), hits);
    }
}

// ---------------------------------------------------------------------------
// grounding

fn fixture_corpus() -> &'static [CuratedReview] {
    static CORPUS: OnceLock<Vec<CuratedReview>> = OnceLock::new();
    CORPUS.get_or_init(common::curated_fixture_store)
}

fn bundles() -> &'static [EvidenceBundle] {
    static BUNDLES: OnceLock<Vec<EvidenceBundle>> = OnceLock::new();
    BUNDLES.get_or_init(|| {
        let corpus = fixture_corpus();
        let engine = common::mock_engine(corpus);
        let prev = prevalence(corpus);
        let mut out = Vec::new();
        for cat in VrCategory::ALL {
            for dim in Dim::ALL {
                if prev.get(*cat, *dim) > 0 {
                    let ctx = ProjectContext::new(*cat, "a game", Some(*dim)).unwrap();
                    out.extend(engine.evidence(&ctx).ok());
                }
            }
        }
        assert!(out.len() >= 6);
        out
    })
}

#[derive(Debug, Clone)]
enum QuoteSpec {
    /// Substring `[start, start+len)` (chars, clamped) of hit `hit`.
    Slice { hit: usize, start: usize, len: usize },
    /// Same slice with one extra word spliced in.
    Spliced { hit: usize, start: usize, len: usize },
    /// Slice of one hit cited as another.
    Miscited { hit: usize, start: usize, len: usize, cite: usize },
    Foreign(String),
    Blank,
}

fn slice(bundle: &EvidenceBundle, hit: usize, start: usize, len: usize) -> String {
    let text = &bundle.hits[hit % bundle.hits.len()].chunk.text;
    let n = text.chars().count();
    let start = start % n;
    text.chars().skip(start).take(len.max(1)).collect()
}

fn quote_strategy() -> impl Strategy<Value = QuoteSpec> {
    prop_oneof![
        4 => (0usize..8, 0usize..400, 1usize..120).prop_map(|(hit, start, len)| QuoteSpec::Slice { hit, start, len }),
        1 => (0usize..8, 0usize..400, 1usize..120).prop_map(|(hit, start, len)| QuoteSpec::Spliced { hit, start, len }),
        1 => (0usize..8, 0usize..400, 1usize..120, 1usize..8)
            .prop_map(|(hit, start, len, cite)| QuoteSpec::Miscited { hit, start, len, cite }),
        1 => "[a-z ]{1,40}".prop_map(QuoteSpec::Foreign),
        1 => Just(QuoteSpec::Blank),
    ]
}

/// Scripted replies with the quotes of every compile reply replaced.
struct QuotingLlm {
    bundle: EvidenceBundle,
    attempts: Vec<Vec<QuoteSpec>>,
    /// (text, cited chunk id) of every compile reply sent.
    emitted: Mutex<Vec<Vec<(String, String)>>>,
}

impl LlmProvider for QuotingLlm {
    fn provider_id(&self) -> &str {
        "quoting-mock"
    }

    fn generate(&self, prompt: &str, schema_hint: &str) -> Result<String, LlmError> {
        let reply = ScriptedLlm.generate(prompt, schema_hint)?;
        if !prompt.contains("TASK: compile") {
            return Ok(reply);
        }
        let mut emitted = self.emitted.lock().unwrap();
        let specs = &self.attempts[emitted.len().min(self.attempts.len() - 1)];
        let b = &self.bundle;
        let id = |i: usize| b.hits[i % b.hits.len()].chunk.chunk_id.clone();
        let quotes: Vec<Value> = specs
            .iter()
            .map(|s| match s {
                QuoteSpec::Slice { hit, start, len } => json!({"text": slice(b, *hit, *start, *len), "source_chunk_id": id(*hit)}),
                QuoteSpec::Spliced { hit, start, len } => {
                    let text = slice(b, *hit, *start, *len);
                    let mid = text.chars().count() / 2;
                    let spliced: String =
                        text.chars().take(mid).chain(" zqxv ".chars()).chain(text.chars().skip(mid)).collect();
                    json!({"text": spliced, "source_chunk_id": id(*hit)})
                }
                QuoteSpec::Miscited { hit, start, len, cite } => {
                    json!({"text": slice(b, *hit, *start, *len), "source_chunk_id": id(hit + cite)})
                }
                QuoteSpec::Foreign(t) => json!({"text": t, "source_chunk_id": "elsewhere#0"}),
                QuoteSpec::Blank => json!({"text": "  ", "source_chunk_id": id(0)}),
            })
            .collect();
        emitted.push(
            quotes
                .iter()
                .map(|q| (q["text"].as_str().unwrap().to_string(), q["source_chunk_id"].as_str().unwrap().to_string()))
                .collect(),
        );
        let mut v: Value = serde_json::from_str(&reply).unwrap();
        v["quotes"] = Value::Array(quotes);
        Ok(v.to_string())
    }
}

fn grounded(quote: &str, chunk_id: &str, persona_ids: &[String], bundle: &EvidenceBundle) -> bool {
    let norm = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
    let q = norm(quote);
    !q.is_empty()
        && persona_ids.iter().any(|id| id == chunk_id)
        && bundle
            .hits
            .iter()
            .any(|h| h.chunk.chunk_id == chunk_id && norm(&h.chunk.text).contains(&q))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn compiled_personas_are_always_grounded(
        which in any::<prop::sample::Index>(),
        attempts in prop::collection::vec(prop::collection::vec(quote_strategy(), 0..4), 1..4),
    ) {
        let bundle = which.get(bundles()).clone();
        let templates = PromptTemplates::default();
        let record = extract_dimension_values(&bundle, &ScriptedLlm, &templates).unwrap();
        let llm = QuotingLlm { bundle: bundle.clone(), attempts, emitted: Mutex::new(Vec::new()) };
        let result = compile_persona(&record, &bundle, &llm, None, &templates, 2);
        let emitted = llm.emitted.lock().unwrap().clone();
        let calls = emitted.len();
        prop_assert!(calls <= 3);

        let ids = bundle.chunk_ids();
        let clean_at = emitted
            .iter()
            .position(|qs| !qs.is_empty() && qs.iter().all(|(t, id)| grounded(t, id, &ids, &bundle)));
        match result {
            Ok(p) => {
                prop_assert_eq!(p.dimension, bundle.dimension);
                prop_assert!(!p.quotes.is_empty());
                for q in &p.quotes {
                    prop_assert!(grounded(&q.text, &q.source_chunk_id, &p.evidence_chunk_ids, &bundle));
                }
                prop_assert!(p.evidence_chunk_ids.iter().all(|id| bundle.chunk_text(id).is_some()));
                prop_assert_eq!(Some(calls - 1), clean_at);
            }
            Err(e) => {
                prop_assert!(
                    matches!(e, GenerateError::Grounding { .. } | GenerateError::ExtractionParse { .. }),
                    "unexpected error {}",
                    e
                );
                prop_assert_eq!(clean_at, None);
                prop_assert_eq!(calls, 3);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// sessions

const TURN_TEXTS: &[&str] = &[
    "my project is an action climbing game",
    "I am building a social hangout app",
    "we make a horror escape room",
    "a puzzle game with floating blocks",
    "make a persona",
    "generate a persona for hearing",
    "create a persona about motion sickness",
    "what are the requirements?",
    "what does this persona need?",
    "show me related personas from other apps",
    "thanks",
    "hmm",
];

struct SessionEnv {
    _dir: tempfile::TempDir,
    engine: PersonaEngine,
    store: PersonaStore,
}

fn env() -> &'static SessionEnv {
    static ENV: OnceLock<SessionEnv> = OnceLock::new();
    ENV.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let store = PersonaStore::new(dir.path().join("personas"));
        SessionEnv {
            engine: common::mock_engine(fixture_corpus()),
            store,
            _dir: dir,
        }
    })
}

fn clock() -> FixedClock {
    FixedClock(Utc.with_ymd_and_hms(2026, 3, 1, 12, 0, 0).unwrap())
}

fn turns() -> impl Strategy<Value = Vec<&'static str>> {
    prop::collection::vec(select(TURN_TEXTS), 1..14)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn transcript_grows_and_state_stays_defined(script in turns()) {
        let env = env();
        let mut s = Session::new("s-prop");
        for text in script {
            let before = s.clone();
            let out = advance(&mut s, &classify_turn(text), &env.engine, &env.store, &clock());
            prop_assert_eq!(s.transcript.len(), before.transcript.len() + 2);
            prop_assert_eq!(&s.transcript[..before.transcript.len()], &before.transcript[..]);
            prop_assert!(SessionState::ALL.contains(&s.state));
            prop_assert!(s.is_consistent());
            prop_assert!(s.ctx.is_some() == (s.state != SessionState::AwaitingProject));
            prop_assert_eq!(&s.personas[..before.personas.len()], &before.personas[..]);
            prop_assert!(s.personas.len() <= before.personas.len() + 1);
            if let Some(p) = out.persona {
                prop_assert_eq!(s.personas.last(), Some(&p.persona_id));
                prop_assert!(matches!(env.store.load(&p.persona_id), Ok(Some(_))));
            }
        }
    }

    #[test]
    fn interleaved_sessions_do_not_interfere(a in turns(), b in turns(), picks in prop::collection::vec(any::<bool>(), 28)) {
        let env = env();
        let run_alone = |script: &[&str], id: &str| {
            let mut s = Session::new(id);
            for t in script {
                advance(&mut s, &classify_turn(t), &env.engine, &env.store, &clock());
            }
            s
        };
        let (alone_a, alone_b) = (run_alone(&a, "s-a"), run_alone(&b, "s-b"));

        let (mut sa, mut sb) = (Session::new("s-a"), Session::new("s-b"));
        let (mut ia, mut ib) = (a.iter(), b.iter());
        let mut pick = picks.iter().cycle();
        loop {
            let next = if *pick.next().unwrap() { ia.next().map(|t| (&mut sa, t)) } else { ib.next().map(|t| (&mut sb, t)) };
            match next {
                Some((s, t)) => {
                    advance(s, &classify_turn(t), &env.engine, &env.store, &clock());
                }
                None if ia.len() == 0 && ib.len() == 0 => break,
                None => {}
            }
        }
        prop_assert_eq!(serde_json::to_value(&sa).unwrap(), serde_json::to_value(&alone_a).unwrap());
        prop_assert_eq!(serde_json::to_value(&sb).unwrap(), serde_json::to_value(&alone_b).unwrap());
    }
}

// ---------------------------------------------------------------------------
// ingest

/// Replays fixtures with a per-URL delay so app fetchers finish in varying order.
struct JitteredReplay {
    inner: persona_core::ingest::ReplayTransport,
    delays: Vec<u8>,
}

impl persona_core::ingest::Transport for JitteredReplay {
    fn get(&self, url: &str) -> Result<persona_core::ingest::HttpResponse, persona_core::ingest::IngestError> {
        let slot = persona_core::text::fnv1a64(url.as_bytes()) as usize % self.delays.len();
        std::thread::sleep(std::time::Duration::from_millis(u64::from(self.delays[slot])));
        self.inner.get(url)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn ingest_output_is_independent_of_fetch_timing(delays in prop::collection::vec(0u8..12, 4..16)) {
        use persona_core::ingest::{ingest_store, load_catalog, FetchPolicy, IngestOptions, ReplayTransport, SelectorProfile};
        let store = common::fixtures_dir().join("store");
        let catalog = load_catalog(&store.join("apps.jsonl")).unwrap();
        let profile = SelectorProfile::load(&common::config_dir().join("selectors/metaquest.toml")).unwrap();
        let transport = JitteredReplay { inner: ReplayTransport::new(store.join("http")), delays };
        let mut got = Vec::new();
        for store_id in [StoreId::Steam, StoreId::MetaQuest] {
            let opts = IngestOptions {
                store: store_id,
                top: 50,
                page_limit: 10,
                policy: FetchPolicy::immediate(),
                profile: Some(&profile),
            };
            got.extend(ingest_store(&transport, &catalog, &opts).unwrap());
        }
        let baseline = fixture_raw();
        prop_assert_eq!(serde_json::to_string(&got).unwrap(), serde_json::to_string(baseline).unwrap());
    }
}

fn fixture_raw() -> &'static [RawReview] {
    static RAW: OnceLock<Vec<RawReview>> = OnceLock::new();
    RAW.get_or_init(common::ingest_fixture_store)
}
