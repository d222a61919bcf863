use std::collections::{BTreeSet, HashMap};

use super::llm::{prompt_hash, LlmError, LlmProvider};
use super::prompt::{self, PromptTemplates, COMPILE_SCHEMA, EXTRACT_SCHEMA};
use super::{
    Demographic, DimensionValueRecord, EvidenceBundle, GenerateError, Persona, ProjectContext, ProviderTrace, Quote,
};
use crate::curation::{DisabilityDimension, Prevalence};
use crate::index::{embed, hit_order, EmbeddingProvider, RetrievalHit, SearchFilter, VectorIndex};
use crate::text::{normalize_ws, sha256_hex};

pub const DEMOGRAPHIC_KEYS: [&str; 4] = ["age", "gender", "occupation", "vr_experience"];
pub const UNSPECIFIED: &str = "unspecified";

/// The requested dimension if any, else the category's most prevalent one
/// (ties go to the earlier dimension in declaration order).
pub fn select_dimension(ctx: &ProjectContext, prevalence: &Prevalence) -> Result<DisabilityDimension, GenerateError> {
    if let Some(d) = ctx.requested_dimension {
        return Ok(d);
    }
    let mut best: Option<(DisabilityDimension, usize)> = None;
    for (dim, count) in prevalence.row(ctx.vr_category) {
        if count > 0 && best.is_none_or(|(_, b)| count > b) {
            best = Some((dim, count));
        }
    }
    best.map(|(d, _)| d).ok_or_else(|| {
        GenerateError::NoEvidence(format!("no curated reviews for {} applications", ctx.vr_category))
    })
}

/// Top-`k` chunks of the context's category carrying `dimension`, queried
/// with the project description plus the dimension's gloss phrase.
pub fn build_evidence(
    ctx: &ProjectContext,
    dimension: DisabilityDimension,
    gloss: &str,
    index: &VectorIndex,
    embedder: &dyn EmbeddingProvider,
    k: usize,
) -> Result<EvidenceBundle, GenerateError> {
    let query_text = format!("{} {gloss}", ctx.description).trim().to_string();
    let query = embed(&[query_text], embedder)?.remove(0);
    let filter = SearchFilter {
        category: Some(ctx.vr_category),
        dimensions: Some(BTreeSet::from([dimension])),
        ..Default::default()
    };
    let hits = index.search(&query, &filter, k.max(1))?;
    if hits.is_empty() {
        return Err(GenerateError::NoEvidence(format!(
            "no {dimension} evidence for {} applications",
            ctx.vr_category
        )));
    }
    Ok(EvidenceBundle {
        hits,
        dimension,
        category: ctx.vr_category,
    })
}

fn keep_grounded_demographics(
    provided: &std::collections::BTreeMap<String, String>,
    bundle: &EvidenceBundle,
) -> Vec<Demographic> {
    let evidence: Vec<String> = bundle.hits.iter().map(|h| normalize_ws(&h.chunk.text).to_lowercase()).collect();
    DEMOGRAPHIC_KEYS
        .iter()
        .map(|key| {
            let value = provided
                .get(*key)
                .map(|v| normalize_ws(v))
                .filter(|v| !v.is_empty() && !v.eq_ignore_ascii_case(UNSPECIFIED))
                .filter(|v| {
                    let needle = v.to_lowercase();
                    evidence.iter().any(|e| e.contains(&needle))
                })
                .unwrap_or_else(|| UNSPECIFIED.to_string());
            Demographic {
                key: key.to_string(),
                value,
            }
        })
        .collect()
}

/// First generation stage: intermediate summary and dimension-value pairs.
///
/// A reply that violates the schema gets one corrective reprompt. The record
/// always carries the bundle's dimension whatever the provider says, and a
/// demographic value survives only if it literally occurs in the evidence.
pub fn extract_dimension_values(
    bundle: &EvidenceBundle,
    provider: &dyn LlmProvider,
    templates: &PromptTemplates,
) -> Result<DimensionValueRecord, GenerateError> {
    if bundle.hits.is_empty() {
        return Err(GenerateError::NoEvidence("empty evidence bundle".into()));
    }
    let base = templates.render_extract(bundle);
    let mut prompt = base.clone();
    let mut last_error = String::new();
    for _ in 0..2 {
        let reply = provider.generate(&prompt, EXTRACT_SCHEMA)?;
        match prompt::parse_extraction(&reply) {
            Ok(parsed) => {
                if let Some(claimed) = parsed.dimension.as_deref() {
                    if claimed.parse::<DisabilityDimension>().ok() != Some(bundle.dimension) {
                        log::debug!("provider labelled {} evidence as {claimed:?}; keeping {}", bundle.dimension, bundle.dimension);
                    }
                }
                return Ok(DimensionValueRecord {
                    dimension: bundle.dimension,
                    summary: parsed.summary,
                    requirements: parsed.requirements,
                    pain_points: parsed.pain_points,
                    demographics: keep_grounded_demographics(&parsed.demographics, bundle),
                });
            }
            Err(e) => {
                last_error = e;
                prompt = prompt::with_rejection(&base, &last_error);
            }
        }
    }
    Err(GenerateError::ExtractionParse(format!("extraction: {last_error}")))
}

/// Optional profile picture generator; without one a placeholder is used.
pub trait PhotoProvider: Send + Sync {
    fn provider_id(&self) -> &str;
    fn generate(&self, brief: &str) -> Result<String, LlmError>;
}

pub fn placeholder_photo(dimension: DisabilityDimension) -> String {
    format!("placeholder:persona-{dimension}.svg")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroundingVerdict {
    Pass,
    Fail(Vec<Quote>),
}

impl GroundingVerdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, GroundingVerdict::Pass)
    }
}

/// Every quote must be a non-empty, whitespace-normalized substring of the
/// chunk it cites, and that chunk must be part of both the bundle and the
/// persona's evidence list.
pub fn validate_grounding(persona: &Persona, bundle: &EvidenceBundle) -> GroundingVerdict {
    let offending: Vec<Quote> = persona
        .quotes
        .iter()
        .filter(|q| {
            let quote = normalize_ws(&q.text);
            let cited = persona.evidence_chunk_ids.contains(&q.source_chunk_id);
            let grounded = bundle
                .chunk_text(&q.source_chunk_id)
                .is_some_and(|text| normalize_ws(text).contains(&quote));
            quote.is_empty() || !cited || !grounded
        })
        .cloned()
        .collect();
    if offending.is_empty() {
        GroundingVerdict::Pass
    } else {
        GroundingVerdict::Fail(offending)
    }
}

enum Failure {
    Parse(String),
    Ungrounded(Vec<Quote>),
}

/// Second generation stage: biography and quotes around the record.
///
/// Quotes go through [`validate_grounding`]; an ungrounded or malformed reply
/// is regenerated up to `retries` times with the reason appended to the
/// prompt, after which the call fails.
pub fn compile_persona(
    record: &DimensionValueRecord,
    bundle: &EvidenceBundle,
    provider: &dyn LlmProvider,
    photo: Option<&dyn PhotoProvider>,
    templates: &PromptTemplates,
    retries: usize,
) -> Result<Persona, GenerateError> {
    if record.dimension != bundle.dimension {
        return Err(GenerateError::Invariant(format!(
            "record dimension {} differs from bundle dimension {}",
            record.dimension, bundle.dimension
        )));
    }
    if bundle.hits.is_empty() {
        return Err(GenerateError::NoEvidence("empty evidence bundle".into()));
    }
    let base = templates.render_compile(record, bundle);
    let mut prompt = base.clone();
    let mut failure = Failure::Parse(String::new());
    for _attempt in 0..=retries {
        let reply = provider.generate(&prompt, COMPILE_SCHEMA)?;
        let parsed = match prompt::parse_compile(&reply) {
            Ok(p) => p,
            Err(e) => {
                prompt = prompt::with_rejection(&base, &e);
                failure = Failure::Parse(e);
                continue;
            }
        };
        let mut persona = Persona {
            persona_id: format!("p-{}", &sha256_hex(format!("{prompt}\u{0}{reply}"))[..16]),
            display_name: parsed.display_name,
            photo: None,
            biography: parsed.biography,
            pain_points: record.pain_points.clone(),
            requirements: record.requirements.clone(),
            demographics: record.demographics.clone(),
            quotes: parsed.quotes,
            dimension: bundle.dimension,
            vr_category: bundle.category,
            evidence_chunk_ids: bundle.chunk_ids(),
            provider_trace: ProviderTrace {
                llm_provider_id: provider.provider_id().to_string(),
                prompt_sha256: prompt_hash(&prompt),
                template_sha256: templates.fingerprint(),
            },
        };
        match validate_grounding(&persona, bundle) {
            GroundingVerdict::Pass => {
                persona.photo = Some(photo_for(&persona, photo));
                return Ok(persona);
            }
            GroundingVerdict::Fail(offending) => {
                let listed: Vec<String> = offending
                    .iter()
                    .map(|q| format!("{:?} (cited {})", q.text, q.source_chunk_id))
                    .collect();
                log::info!("rejecting ungrounded quotes: {}", listed.join("; "));
                prompt = prompt::with_rejection(
                    &base,
                    &format!(
                        "these quotes are not verbatim text of the cited evidence chunk: {}",
                        listed.join("; ")
                    ),
                );
                failure = Failure::Ungrounded(offending);
            }
        }
    }
    Err(match failure {
        Failure::Parse(e) => GenerateError::ExtractionParse(format!("compile: {e}")),
        Failure::Ungrounded(offending) => GenerateError::Grounding { offending },
    })
}

fn photo_for(persona: &Persona, provider: Option<&dyn PhotoProvider>) -> String {
    let Some(provider) = provider else {
        return placeholder_photo(persona.dimension);
    };
    let brief: Vec<String> = persona
        .demographics
        .iter()
        .filter(|d| d.value != UNSPECIFIED)
        .map(|d| format!("{}: {}", d.key, d.value))
        .collect();
    match provider.generate(&format!("Profile photo of {}. {}", persona.display_name, brief.join(", "))) {
        Ok(asset) => asset,
        Err(e) => {
            log::warn!("photo provider {} failed ({e}); using placeholder", provider.provider_id());
            placeholder_photo(persona.dimension)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RelatedMode {
    /// Same dimension, evidence from apps the persona was not built from.
    SameDimensionOtherApps,
    /// Chunks closest to a requirement phrase, any category or dimension.
    ByRequirement(String),
}

/// Evidence bundles related to an existing persona.
///
/// `SameDimensionOtherApps` returns up to `k` bundles, one per other app,
/// ordered by each app's best hit. `ByRequirement` returns one bundle per
/// dimension present among the top hits for the requirement text.
pub fn recommend_related(
    persona: &Persona,
    index: &VectorIndex,
    embedder: &dyn EmbeddingProvider,
    mode: &RelatedMode,
    k: usize,
    per_bundle: usize,
) -> Result<Vec<EvidenceBundle>, GenerateError> {
    let per_bundle = per_bundle.max(1);
    let bundles = match mode {
        RelatedMode::SameDimensionOtherApps => {
            let exclude_apps: BTreeSet<String> = persona
                .evidence_chunk_ids
                .iter()
                .filter_map(|id| index.get(id).map(|e| e.chunk.app_id.clone()))
                .collect();
            let query_text = format!("{} {}", persona.requirements.join(" "), persona.pain_points.join(" "));
            let query = embed(&[query_text], embedder)?.remove(0);
            let filter = SearchFilter {
                dimensions: Some(BTreeSet::from([persona.dimension])),
                exclude_apps,
                ..Default::default()
            };
            let hits = index.search(&query, &filter, index.len().max(1))?;
            let mut order: Vec<String> = Vec::new();
            let mut per_app: HashMap<String, Vec<RetrievalHit>> = HashMap::new();
            for hit in hits {
                let app = hit.chunk.app_id.clone();
                if !per_app.contains_key(&app) {
                    order.push(app.clone());
                }
                let slot = per_app.entry(app).or_default();
                if slot.len() < per_bundle {
                    slot.push(hit);
                }
            }
            order
                .into_iter()
                .take(k)
                .map(|app| {
                    let hits = per_app.remove(&app).unwrap_or_default();
                    EvidenceBundle {
                        category: hits[0].chunk.category,
                        dimension: persona.dimension,
                        hits,
                    }
                })
                .collect::<Vec<_>>()
        }
        RelatedMode::ByRequirement(text) => {
            let query = embed(&[text.clone()], embedder)?.remove(0);
            let hits = index.search(&query, &SearchFilter::default(), per_bundle)?;
            let mut dims: Vec<DisabilityDimension> = Vec::new();
            for h in &hits {
                for d in &h.chunk.dimensions {
                    if !dims.contains(d) {
                        dims.push(*d);
                    }
                }
            }
            dims.into_iter()
                .take(k)
                .map(|dim| {
                    let mut mine: Vec<RetrievalHit> =
                        hits.iter().filter(|h| h.chunk.dimensions.contains(&dim)).cloned().collect();
                    mine.sort_by(hit_order);
                    EvidenceBundle {
                        category: mine[0].chunk.category,
                        dimension: dim,
                        hits: mine,
                    }
                })
                .collect()
        }
    };
    if bundles.is_empty() {
        return Err(GenerateError::NoEvidence(match mode {
            RelatedMode::SameDimensionOtherApps => {
                format!("no {} evidence from other applications", persona.dimension)
            }
            RelatedMode::ByRequirement(t) => format!("nothing related to {t:?}"),
        }));
    }
    Ok(bundles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curation::VrCategory;
    use crate::generate::ScriptedLlm;
    use crate::index::{Chunk, HashingEmbedder};

    fn chunk(id: &str, app: &str, category: VrCategory, dim: DisabilityDimension, text: &str) -> Chunk {
        Chunk {
            chunk_id: format!("{id}#0"),
            review_id: id.into(),
            span: (0, text.chars().count()),
            text: text.into(),
            category,
            dimensions: BTreeSet::from([dim]),
            app_id: app.into(),
        }
    }

    fn motion_index() -> VectorIndex {
        let e = HashingEmbedder::default();
        let chunks = vec![
            chunk("r1", "steam/1", VrCategory::Action, DisabilityDimension::Vestibular,
                "Smooth locomotion gave me motion sickness within minutes. I had to stop playing."),
            chunk("r2", "steam/1", VrCategory::Action, DisabilityDimension::Vestibular,
                "I am 34 years old and get nausea from the forced camera turns. Please add snap turning."),
            chunk("r3", "steam/2", VrCategory::Action, DisabilityDimension::Vestibular,
                "No teleport option so I felt dizzy the whole time."),
            chunk("r4", "steam/3", VrCategory::Action, DisabilityDimension::Hearing,
                "There are no subtitles for the story so I missed everything as a deaf player."),
        ];
        let texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
        let mut index = VectorIndex::new(e.dim(), e.provider_id());
        index.upsert(chunks.into_iter().zip(embed(&texts, &e).unwrap())).unwrap();
        index
    }

    fn ctx() -> ProjectContext {
        ProjectContext::new(VrCategory::Action, "A fast arena shooter with smooth locomotion", None).unwrap()
    }

    fn prevalence() -> Prevalence {
        let mut p = Prevalence::default();
        p.set(VrCategory::Action, DisabilityDimension::Vestibular, 3);
        p.set(VrCategory::Action, DisabilityDimension::Hearing, 1);
        p
    }

    #[test]
    fn dimension_selection() {
        assert_eq!(select_dimension(&ctx(), &prevalence()).unwrap(), DisabilityDimension::Vestibular);
        let mut tie = Prevalence::default();
        tie.set(VrCategory::Action, DisabilityDimension::Motor, 2);
        tie.set(VrCategory::Action, DisabilityDimension::Hearing, 2);
        assert_eq!(select_dimension(&ctx(), &tie).unwrap(), DisabilityDimension::Hearing);
        let requested = ProjectContext::new(VrCategory::Action, "x", Some(DisabilityDimension::Speech)).unwrap();
        assert_eq!(select_dimension(&requested, &tie).unwrap(), DisabilityDimension::Speech);
        assert!(matches!(select_dimension(&ctx(), &Prevalence::default()), Err(GenerateError::NoEvidence(_))));
    }

    #[test]
    fn grounded_persona_from_scripted_provider() {
        let index = motion_index();
        let e = HashingEmbedder::default();
        let bundle = build_evidence(&ctx(), DisabilityDimension::Vestibular, "motion sickness", &index, &e, 8).unwrap();
        assert_eq!(bundle.hits.len(), 3);
        assert!(bundle.hits.iter().all(|h| h.chunk.dimensions.contains(&DisabilityDimension::Vestibular)));
        let t = PromptTemplates::default();
        let record = extract_dimension_values(&bundle, &ScriptedLlm, &t).unwrap();
        assert_eq!(record.demographics[0].value, "34");
        assert!(record.demographics[1..].iter().all(|d| d.value == UNSPECIFIED));
        let persona = compile_persona(&record, &bundle, &ScriptedLlm, None, &t, 2).unwrap();
        assert!(validate_grounding(&persona, &bundle).is_pass());
        assert_eq!(persona.photo.as_deref(), Some("placeholder:persona-vestibular.svg"));
        let again = compile_persona(&record, &bundle, &ScriptedLlm, None, &t, 2).unwrap();
        assert_eq!(persona, again);
    }

    struct Fabricating;
    impl LlmProvider for Fabricating {
        fn provider_id(&self) -> &str {
            "fabricating"
        }
        fn generate(&self, prompt: &str, hint: &str) -> Result<String, LlmError> {
            if prompt.contains("TASK: compile") {
                Ok(r#"{"display_name":"X","biography":"b","quotes":[{"text":"VR cured my nausea","source_chunk_id":"r1#0"}]}"#.into())
            } else {
                ScriptedLlm.generate(prompt, hint)
            }
        }
    }

    #[test]
    fn fabricated_quotes_are_rejected() {
        let index = motion_index();
        let e = HashingEmbedder::default();
        let bundle = build_evidence(&ctx(), DisabilityDimension::Vestibular, "", &index, &e, 8).unwrap();
        let t = PromptTemplates::default();
        let record = extract_dimension_values(&bundle, &Fabricating, &t).unwrap();
        match compile_persona(&record, &bundle, &Fabricating, None, &t, 2) {
            Err(GenerateError::Grounding { offending }) => assert_eq!(offending[0].text, "VR cured my nausea"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn related_excludes_source_apps() {
        let index = motion_index();
        let e = HashingEmbedder::default();
        let bundle = build_evidence(&ctx(), DisabilityDimension::Vestibular, "", &index, &e, 2).unwrap();
        let t = PromptTemplates::default();
        let record = extract_dimension_values(&bundle, &ScriptedLlm, &t).unwrap();
        let persona = compile_persona(&record, &bundle, &ScriptedLlm, None, &t, 2).unwrap();
        let source_apps: BTreeSet<String> = bundle.hits.iter().map(|h| h.chunk.app_id.clone()).collect();
        let related =
            recommend_related(&persona, &index, &e, &RelatedMode::SameDimensionOtherApps, 5, 8).unwrap_or_default();
        for b in &related {
            assert!(b.hits.iter().all(|h| !source_apps.contains(&h.chunk.app_id)));
            assert_eq!(b.dimension, DisabilityDimension::Vestibular);
        }
        let by_req =
            recommend_related(&persona, &index, &e, &RelatedMode::ByRequirement("subtitles for deaf".into()), 6, 4)
                .unwrap();
        assert!(by_req.iter().any(|b| b.dimension == DisabilityDimension::Hearing));
    }
}
