//! The five structured evidence operators. Each returns a typed [`ToolRecord`]
//! that both the controller and the critic read.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::iconclass::{directed_set_distance, normalize_codes, CodeSet, ConceptGraph, DecayConfig};
use crate::manifold::{artist_signature, manifold_distance, project_f32, ArtistSignature, WolfflinBasis};
use crate::model::{ClaimPayload, Corpus, DirectedPair, EvidenceClaim, Lifespan};
use crate::retrieval::timeline_gate;
use crate::store::{dot, EmbeddingMatrix};
use crate::text::{redact, sentences, PhraseMatcher, TextEmbedder};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToolError {
    #[error("artist {0} has no embedded artworks")]
    EmptyPortfolio(String),
    #[error("artist {0} has no biography documents")]
    MissingBiography(String),
    #[error("no formal signature for artist {0}")]
    MissingSignature(String),
    #[error("no iconographic codes for artist {0}")]
    MissingCodes(String),
    #[error("unknown artist {0}")]
    UnknownArtist(String),
    #[error("tool {0} is not registered")]
    NotRegistered(String),
    #[error("unknown tool {0}")]
    UnknownTool(String),
    #[error("{0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ToolName {
    VisualAnalyzer,
    BiographyReader,
    TimelineGate,
    StyleComparator,
    ConceptRetriever,
}

impl ToolName {
    pub const ALL: [ToolName; 5] = [
        ToolName::TimelineGate,
        ToolName::VisualAnalyzer,
        ToolName::BiographyReader,
        ToolName::StyleComparator,
        ToolName::ConceptRetriever,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ToolName::VisualAnalyzer => "VisualAnalyzer",
            ToolName::BiographyReader => "BiographyReader",
            ToolName::TimelineGate => "TimelineGate",
            ToolName::StyleComparator => "StyleComparator",
            ToolName::ConceptRetriever => "ConceptRetriever",
        }
    }
}

impl fmt::Display for ToolName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ToolName {
    type Err = ToolError;

    fn from_str(s: &str) -> Result<Self, ToolError> {
        let norm: String = s.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase();
        ToolName::ALL
            .into_iter()
            .find(|t| t.as_str().to_lowercase() == norm)
            .ok_or_else(|| ToolError::UnknownTool(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtworkMatch {
    pub source_artwork: String,
    pub target_artwork: String,
    pub cosine: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualBody {
    pub matches: Vec<ArtworkMatch>,
    pub max_cosine: f64,
    /// Jaccard overlap of the matched artworks' normalized code sets.
    pub motif_overlap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CueCategory {
    CoLocation,
    Institution,
    ExplicitReference,
    SharedTerminology,
    Exhibition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueHit {
    pub category: CueCategory,
    pub snippet: String,
    pub doc_id: String,
    /// Lexicon entry that triggered the hit.
    pub term: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathwayCues {
    pub hits: Vec<CueHit>,
    pub pathway_score: f64,
    pub masked: bool,
}

impl PathwayCues {
    pub fn from_hits(hits: Vec<CueHit>, masked: bool) -> Self {
        let categories: BTreeSet<CueCategory> = hits.iter().map(|h| h.category).collect();
        let pathway_score = 1.0 - 0.5f64.powi(categories.len() as i32);
        Self {
            hits,
            pathway_score,
            masked,
        }
    }

    pub fn count(&self, category: CueCategory) -> usize {
        self.hits.iter().filter(|h| h.category == category).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineBody {
    pub source: Lifespan,
    pub target: Lifespan,
    pub delta_years: i32,
    pub passed: bool,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleBody {
    pub source_mu: Vec<f64>,
    pub target_mu: Vec<f64>,
    pub distance: f64,
    /// `target - source` per axis.
    pub axis_deltas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptBody {
    pub source_codes: BTreeSet<String>,
    pub target_codes: BTreeSet<String>,
    /// Directed set distance source -> target on the unnormalized unions.
    pub forward_distance: f64,
    pub backward_distance: f64,
    pub shared_ancestors: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tool", content = "body")]
pub enum ToolBody {
    VisualAnalyzer(VisualBody),
    BiographyReader(PathwayCues),
    TimelineGate(TimelineBody),
    StyleComparator(StyleBody),
    ConceptRetriever(ConceptBody),
}

impl ToolBody {
    pub fn tool(&self) -> ToolName {
        match self {
            ToolBody::VisualAnalyzer(_) => ToolName::VisualAnalyzer,
            ToolBody::BiographyReader(_) => ToolName::BiographyReader,
            ToolBody::TimelineGate(_) => ToolName::TimelineGate,
            ToolBody::StyleComparator(_) => ToolName::StyleComparator,
            ToolBody::ConceptRetriever(_) => ToolName::ConceptRetriever,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolRecord {
    pub pair: DirectedPair,
    #[serde(flatten)]
    pub body: ToolBody,
    pub summary_score: Option<f64>,
}

impl ToolRecord {
    pub fn tool(&self) -> ToolName {
        self.body.tool()
    }

    pub fn to_claim(&self) -> EvidenceClaim {
        let payload = match &self.body {
            ToolBody::VisualAnalyzer(b) => ClaimPayload::VisualSimilarity(b.clone()),
            ToolBody::BiographyReader(b) => ClaimPayload::Pathway(b.clone()),
            ToolBody::TimelineGate(b) => ClaimPayload::Timeline(b.clone()),
            ToolBody::StyleComparator(b) => ClaimPayload::Style(b.clone()),
            ToolBody::ConceptRetriever(b) => ClaimPayload::Concept(b.clone()),
        };
        EvidenceClaim::new(self.tool().as_str(), payload, self.summary_score)
    }
}

/// Rule lexicons for cue extraction and leakage masking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicons {
    pub mask: Vec<String>,
    pub explicit_reference: Vec<String>,
    pub cities: Vec<String>,
    pub institutions: Vec<String>,
    pub terminology: Vec<String>,
    pub exhibition: Vec<String>,
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

const INFLUENCE_PREDICATES: &[&str] = &[
    "influenced by",
    "influenced",
    "inspired by",
    "studied under",
    "admired",
    "imitated",
    "copied the work of",
    "was a pupil of",
    "learned from",
    "emulated",
];

impl Default for Lexicons {
    fn default() -> Self {
        Self {
            mask: strings(INFLUENCE_PREDICATES),
            explicit_reference: strings(INFLUENCE_PREDICATES),
            cities: strings(&[
                "Paris", "Rome", "Florence", "Venice", "Antwerp", "Amsterdam", "Haarlem", "Delft",
                "Madrid", "Seville", "London", "Edo", "Kyoto", "Munich", "Vienna", "Barcelona",
                "Arles", "Brussels", "Berlin", "Dresden", "Naples", "Bruges", "Ghent", "Utrecht",
            ]),
            institutions: strings(&[
                "Academie des Beaux-Arts", "Royal Academy", "Accademia di San Luca", "Bauhaus",
                "Guild of Saint Luke", "Academie Julian", "Ecole des Beaux-Arts", "Prado",
                "Uffizi", "Kunstakademie",
            ]),
            terminology: strings(&[
                "Japanese prints", "ukiyo-e", "woodblock", "chiaroscuro", "sfumato", "tenebrism",
                "impasto", "plein air", "pointillism", "tessellation", "perspective studies",
                "flattened planes", "sacred geometry", "still life",
            ]),
            exhibition: strings(&[
                "exhibition", "exhibited", "Salon", "exposition", "retrospective", "shown alongside",
            ]),
        }
    }
}

impl Lexicons {
    const FILES: [&'static str; 6] = [
        "mask",
        "explicit_reference",
        "cities",
        "institutions",
        "terminology",
        "exhibition",
    ];

    fn field_mut(&mut self, name: &str) -> &mut Vec<String> {
        match name {
            "mask" => &mut self.mask,
            "explicit_reference" => &mut self.explicit_reference,
            "cities" => &mut self.cities,
            "institutions" => &mut self.institutions,
            "terminology" => &mut self.terminology,
            "exhibition" => &mut self.exhibition,
            _ => unreachable!("fixed file list"),
        }
    }

    /// Loads `<category>.json` files (`{"category": .., "patterns": [..]}`) from
    /// `dir`; missing files keep their defaults.
    pub fn load_dir(dir: &Path) -> std::io::Result<Self> {
        let mut lex = Self::default();
        for name in Self::FILES {
            let path = dir.join(format!("{name}.json"));
            if !path.exists() {
                continue;
            }
            let file: LexiconFile = serde_json::from_str(&fs::read_to_string(&path)?)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))?;
            *lex.field_mut(name) = file.patterns;
        }
        Ok(lex)
    }

    pub fn write_dir(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut copy = self.clone();
        for name in Self::FILES {
            let file = LexiconFile {
                category: name.to_string(),
                patterns: copy.field_mut(name).clone(),
            };
            fs::write(
                dir.join(format!("{name}.json")),
                serde_json::to_string_pretty(&file).expect("lexicon serializes") + "\n",
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LexiconFile {
    category: String,
    patterns: Vec<String>,
}

/// Influence-predicate lexicon used by the leakage protocol.
#[derive(Debug, Clone)]
pub struct MaskLexicon {
    matcher: PhraseMatcher,
}

impl MaskLexicon {
    /// Rejects empty lexicons and patterns that would match inside the
    /// redaction token (which would break idempotence).
    pub fn new(patterns: &[String]) -> Result<Self, ToolError> {
        let matcher = PhraseMatcher::new(patterns);
        if matcher.is_empty() {
            return Err(ToolError::Internal("mask lexicon is empty".into()));
        }
        if matcher.is_match(crate::text::REDACTION_TOKEN)
            || matcher.patterns().iter().any(|p| p.contains('[') || p.contains(']'))
        {
            return Err(ToolError::Internal("mask pattern overlaps the redaction token".into()));
        }
        Ok(Self { matcher })
    }

    pub fn matcher(&self) -> &PhraseMatcher {
        &self.matcher
    }
}

pub fn mask_text(text: &str, lexicon: &MaskLexicon) -> String {
    redact(text, &lexicon.matcher)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiographyDoc {
    pub doc_id: String,
    pub artist_id: String,
    pub text: String,
}

/// Tunables read by the tools.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToolParams {
    pub delta_years: i32,
    pub visual_top_matches: usize,
    pub biography_top_passages: usize,
    pub code_min_level: u32,
    pub decay: DecayConfig,
}

impl Default for ToolParams {
    fn default() -> Self {
        Self {
            delta_years: 20,
            visual_top_matches: 5,
            biography_top_passages: 4,
            code_min_level: 3,
            decay: DecayConfig::default(),
        }
    }
}

/// Immutable inputs shared by every tool invocation.
pub struct EvidenceContext {
    pub corpus: Arc<Corpus>,
    pub visual: Arc<EmbeddingMatrix>,
    pub signatures: BTreeMap<String, ArtistSignature>,
    pub code_sets: BTreeMap<String, BTreeSet<String>>,
    pub graph: Arc<ConceptGraph>,
    pub biographies: Vec<BiographyDoc>,
    pub embedder: Arc<dyn TextEmbedder>,
    pub lexicons: Lexicons,
    pub mask: Option<MaskLexicon>,
    pub params: ToolParams,
    matchers: CueMatchers,
}

#[derive(Debug, Clone)]
struct CueMatchers {
    explicit: PhraseMatcher,
    cities: PhraseMatcher,
    institutions: PhraseMatcher,
    terminology: PhraseMatcher,
    exhibition: PhraseMatcher,
}

impl CueMatchers {
    fn new(lex: &Lexicons) -> Self {
        Self {
            explicit: PhraseMatcher::new(&lex.explicit_reference),
            cities: PhraseMatcher::new(&lex.cities),
            institutions: PhraseMatcher::new(&lex.institutions),
            terminology: PhraseMatcher::new(&lex.terminology),
            exhibition: PhraseMatcher::new(&lex.exhibition),
        }
    }
}

/// Per-artist formal signatures from the visual store projected on `basis`.
pub fn compute_signatures(
    corpus: &Corpus,
    visual: &EmbeddingMatrix,
    basis: &WolfflinBasis,
) -> BTreeMap<String, ArtistSignature> {
    let mut out = BTreeMap::new();
    for artist in &corpus.artists {
        let coords: Vec<_> = corpus
            .portfolio(&artist.artist_id)
            .into_iter()
            .filter_map(|a| visual.get(&a.embedding_key))
            .filter_map(|z| project_f32(z, basis).ok())
            .collect();
        if let Ok(sig) = artist_signature(&artist.artist_id, &coords) {
            out.insert(artist.artist_id.clone(), sig);
        }
    }
    out
}

pub struct ContextParts {
    pub corpus: Arc<Corpus>,
    pub visual: Arc<EmbeddingMatrix>,
    pub basis: WolfflinBasis,
    pub code_sets: Vec<CodeSet>,
    pub graph: Arc<ConceptGraph>,
    pub biographies: Vec<BiographyDoc>,
    pub embedder: Arc<dyn TextEmbedder>,
    pub lexicons: Lexicons,
    pub masked: bool,
    pub params: ToolParams,
}

impl EvidenceContext {
    pub fn new(parts: ContextParts) -> Result<Self, ToolError> {
        let signatures = compute_signatures(&parts.corpus, &parts.visual, &parts.basis);
        let code_sets = parts
            .code_sets
            .into_iter()
            .map(|c| (c.artwork_id, c.codes))
            .collect();
        let mask = if parts.masked {
            Some(MaskLexicon::new(&parts.lexicons.mask)?)
        } else {
            None
        };
        let matchers = CueMatchers::new(&parts.lexicons);
        Ok(Self {
            corpus: parts.corpus,
            visual: parts.visual,
            signatures,
            code_sets,
            graph: parts.graph,
            biographies: parts.biographies,
            embedder: parts.embedder,
            lexicons: parts.lexicons,
            mask,
            params: parts.params,
            matchers,
        })
    }

    fn lifespan(&self, artist: &str) -> Result<Lifespan, ToolError> {
        self.corpus
            .artist(artist)
            .map(|a| a.lifespan())
            .ok_or_else(|| ToolError::UnknownArtist(artist.to_string()))
    }

    fn embedded_portfolio(&self, artist: &str) -> Result<Vec<(&str, &[f32])>, ToolError> {
        if self.corpus.artist(artist).is_none() {
            return Err(ToolError::UnknownArtist(artist.to_string()));
        }
        let works: Vec<_> = self
            .corpus
            .portfolio(artist)
            .into_iter()
            .filter_map(|a| self.visual.get(&a.embedding_key).map(|z| (a.artwork_id.as_str(), z)))
            .collect();
        if works.is_empty() {
            return Err(ToolError::EmptyPortfolio(artist.to_string()));
        }
        Ok(works)
    }

    fn normalized_codes(&self, artwork: &str) -> BTreeSet<String> {
        let Some(raw) = self.code_sets.get(artwork) else {
            return BTreeSet::new();
        };
        let set = CodeSet {
            artwork_id: artwork.to_string(),
            codes: raw.iter().filter(|c| self.graph.contains(c)).cloned().collect(),
        };
        normalize_codes(&set, &self.graph, self.params.code_min_level)
            .map(|s| s.codes)
            .unwrap_or_default()
    }

    fn artist_codes(&self, artist: &str) -> (BTreeSet<String>, BTreeSet<String>) {
        let mut raw = BTreeSet::new();
        let mut normalized = BTreeSet::new();
        for work in self.corpus.portfolio(artist) {
            if let Some(codes) = self.code_sets.get(&work.artwork_id) {
                raw.extend(codes.iter().filter(|c| self.graph.contains(c)).cloned());
                normalized.extend(self.normalized_codes(&work.artwork_id));
            }
        }
        (raw, normalized)
    }

    /// Biography text of `artist`, redacted when masking is active.
    fn documents(&self, artist: &str) -> Vec<(String, String)> {
        self.biographies
            .iter()
            .filter(|d| d.artist_id == artist)
            .map(|d| {
                let text = match &self.mask {
                    Some(m) => mask_text(&d.text, m),
                    None => d.text.clone(),
                };
                (d.doc_id.clone(), text)
            })
            .collect()
    }
}

/// Cross-portfolio visual evidence.
pub fn visual_analyzer(ctx: &EvidenceContext, pair: &DirectedPair) -> Result<ToolRecord, ToolError> {
    let src = ctx.embedded_portfolio(&pair.source_artist_id)?;
    let tgt = ctx.embedded_portfolio(&pair.target_artist_id)?;
    let mut matches = Vec::with_capacity(src.len() * tgt.len());
    for (a, za) in &src {
        for (b, zb) in &tgt {
            matches.push(ArtworkMatch {
                source_artwork: a.to_string(),
                target_artwork: b.to_string(),
                cosine: dot(za, zb).clamp(-1.0, 1.0),
            });
        }
    }
    matches.sort_by(|x, y| {
        y.cosine
            .total_cmp(&x.cosine)
            .then_with(|| x.source_artwork.cmp(&y.source_artwork))
            .then_with(|| x.target_artwork.cmp(&y.target_artwork))
    });
    matches.truncate(ctx.params.visual_top_matches.max(1));
    let max_cosine = matches[0].cosine;

    let mut src_codes = BTreeSet::new();
    let mut tgt_codes = BTreeSet::new();
    for m in &matches {
        src_codes.extend(ctx.normalized_codes(&m.source_artwork));
        tgt_codes.extend(ctx.normalized_codes(&m.target_artwork));
    }
    let union = src_codes.union(&tgt_codes).count();
    let motif_overlap = if union == 0 {
        0.0
    } else {
        src_codes.intersection(&tgt_codes).count() as f64 / union as f64
    };

    Ok(ToolRecord {
        pair: pair.clone(),
        summary_score: Some((max_cosine + 1.0) / 2.0),
        body: ToolBody::VisualAnalyzer(VisualBody {
            matches,
            max_cosine,
            motif_overlap,
        }),
    })
}

/// Transmission-pathway cues from the two artists' biographies.
pub fn biography_reader(ctx: &EvidenceContext, pair: &DirectedPair) -> Result<ToolRecord, ToolError> {
    let (s_id, t_id) = (&pair.source_artist_id, &pair.target_artist_id);
    let source = ctx
        .corpus
        .artist(s_id)
        .ok_or_else(|| ToolError::UnknownArtist(s_id.clone()))?;
    let target = ctx
        .corpus
        .artist(t_id)
        .ok_or_else(|| ToolError::UnknownArtist(t_id.clone()))?;
    let src_docs = ctx.documents(s_id);
    let tgt_docs = ctx.documents(t_id);
    if src_docs.is_empty() {
        return Err(ToolError::MissingBiography(s_id.clone()));
    }
    if tgt_docs.is_empty() {
        return Err(ToolError::MissingBiography(t_id.clone()));
    }
    let src_all: String = src_docs.iter().map(|(_, t)| t.as_str()).collect::<Vec<_>>().join(" ");
    let tgt_all: String = tgt_docs.iter().map(|(_, t)| t.as_str()).collect::<Vec<_>>().join(" ");

    let mut hits = Vec::new();
    // passages of each side are retrieved with the other side's name + context
    for (docs, other_name, other_context) in [
        (&tgt_docs, &source.name, &src_all),
        (&src_docs, &target.name, &tgt_all),
    ] {
        let query = ctx.embedder.embed(&format!("{other_name} {other_context}"));
        let passages = top_passages(ctx, docs, &query, other_name);
        for (doc_id, passage) in passages {
            extract_cues(ctx, &doc_id, passage, other_name, other_context, &mut hits);
        }
    }
    hits.sort_by(|a, b| {
        (a.category, &a.doc_id, &a.snippet, &a.term).cmp(&(b.category, &b.doc_id, &b.snippet, &b.term))
    });
    hits.dedup();
    let cues = PathwayCues::from_hits(hits, ctx.mask.is_some());
    Ok(ToolRecord {
        pair: pair.clone(),
        summary_score: Some(cues.pathway_score),
        body: ToolBody::BiographyReader(cues),
    })
}

fn surname(name: &str) -> &str {
    name.split_whitespace().last().unwrap_or(name)
}

/// Top passages by embedding similarity; passages naming the other artist are
/// always retained.
fn top_passages<'d>(
    ctx: &EvidenceContext,
    docs: &'d [(String, String)],
    query: &[f32],
    other_name: &str,
) -> Vec<(String, &'d str)> {
    let name_matcher = PhraseMatcher::new([other_name, surname(other_name)]);
    let mut scored: Vec<(f64, usize, String, &str, bool)> = Vec::new();
    for (doc_id, text) in docs {
        for passage in sentences(text) {
            let sim = dot(&ctx.embedder.embed(passage), query);
            let named = name_matcher.is_match(passage);
            scored.push((sim, scored.len(), doc_id.clone(), passage, named));
        }
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let k = ctx.params.biography_top_passages;
    let mut out: Vec<(usize, String, &str)> = Vec::new();
    for (rank, (_, order, doc, passage, named)) in scored.into_iter().enumerate() {
        if rank < k || named {
            out.push((order, doc, passage));
        }
    }
    out.sort_by_key(|(order, _, _)| *order);
    out.into_iter().map(|(_, d, p)| (d, p)).collect()
}

fn extract_cues(
    ctx: &EvidenceContext,
    doc_id: &str,
    passage: &str,
    other_name: &str,
    other_context: &str,
    hits: &mut Vec<CueHit>,
) {
    let m = &ctx.matchers;
    let names_other = PhraseMatcher::new([other_name, surname(other_name)]).is_match(passage);
    let mut push = |category, term: String| {
        hits.push(CueHit {
            category,
            snippet: passage.to_string(),
            doc_id: doc_id.to_string(),
            term,
        })
    };
    let other_lower = other_context.to_lowercase();
    let shared = |matcher: &PhraseMatcher| -> Vec<String> {
        matcher
            .distinct_matches(passage)
            .into_iter()
            .filter(|t| other_lower.contains(t.as_str()))
            .collect()
    };
    let cities = shared(&m.cities);
    for term in &cities {
        push(CueCategory::CoLocation, term.clone());
    }
    for term in shared(&m.institutions) {
        push(CueCategory::Institution, term);
    }
    for term in shared(&m.terminology) {
        push(CueCategory::SharedTerminology, term);
    }
    if names_other {
        if let Some(term) = m.explicit.first_match(passage) {
            push(CueCategory::ExplicitReference, term.to_ascii_lowercase());
        }
    }
    if names_other || !cities.is_empty() {
        if let Some(term) = m.exhibition.first_match(passage) {
            push(CueCategory::Exhibition, term.to_ascii_lowercase());
        }
    }
}

/// Chronological feasibility certificate.
pub fn timeline_tool(ctx: &EvidenceContext, pair: &DirectedPair) -> Result<ToolRecord, ToolError> {
    timeline_record(
        pair,
        ctx.lifespan(&pair.source_artist_id)?,
        ctx.lifespan(&pair.target_artist_id)?,
        ctx.params.delta_years,
    )
}

pub fn timeline_record(
    pair: &DirectedPair,
    source: Lifespan,
    target: Lifespan,
    delta_years: i32,
) -> Result<ToolRecord, ToolError> {
    let gate = timeline_gate(source, target, delta_years);
    Ok(ToolRecord {
        pair: pair.clone(),
        summary_score: Some(if gate.passed { 1.0 } else { 0.0 }),
        body: ToolBody::TimelineGate(TimelineBody {
            source,
            target,
            delta_years,
            passed: gate.passed,
            reason: gate.reason,
        }),
    })
}

/// Formal-profile proximity on the manifold.
pub fn style_comparator(ctx: &EvidenceContext, pair: &DirectedPair) -> Result<ToolRecord, ToolError> {
    let get = |id: &String| {
        ctx.signatures
            .get(id)
            .ok_or_else(|| ToolError::MissingSignature(id.clone()))
    };
    Ok(style_record(pair, get(&pair.source_artist_id)?, get(&pair.target_artist_id)?))
}

pub fn style_record(pair: &DirectedPair, source: &ArtistSignature, target: &ArtistSignature) -> ToolRecord {
    let distance = manifold_distance(source, target);
    ToolRecord {
        pair: pair.clone(),
        summary_score: Some((-distance).exp()),
        body: ToolBody::StyleComparator(StyleBody {
            source_mu: source.mu.clone(),
            target_mu: target.mu.clone(),
            distance,
            axis_deltas: source.mu.iter().zip(&target.mu).map(|(s, t)| t - s).collect(),
        }),
    }
}

/// Iconographic proximity on the concept graph.
pub fn concept_retriever(ctx: &EvidenceContext, pair: &DirectedPair) -> Result<ToolRecord, ToolError> {
    let (s_raw, s_norm) = ctx.artist_codes(&pair.source_artist_id);
    let (t_raw, t_norm) = ctx.artist_codes(&pair.target_artist_id);
    if s_raw.is_empty() {
        return Err(ToolError::MissingCodes(pair.source_artist_id.clone()));
    }
    if t_raw.is_empty() {
        return Err(ToolError::MissingCodes(pair.target_artist_id.clone()));
    }
    let err = |e: crate::iconclass::ConceptError| ToolError::Internal(e.to_string());
    let forward = directed_set_distance(&s_raw, &t_raw, &ctx.graph, ctx.params.decay).map_err(err)?;
    let backward = directed_set_distance(&t_raw, &s_raw, &ctx.graph, ctx.params.decay).map_err(err)?;
    let shared_ancestors = s_norm
        .intersection(&t_norm)
        .filter(|c| !(s_raw.contains(*c) && t_raw.contains(*c)))
        .cloned()
        .collect();
    Ok(ToolRecord {
        pair: pair.clone(),
        summary_score: Some((-forward).exp()),
        body: ToolBody::ConceptRetriever(ConceptBody {
            source_codes: s_norm,
            target_codes: t_norm,
            forward_distance: forward,
            backward_distance: backward,
            shared_ancestors,
        }),
    })
}

/// Dispatches by tool name.
pub fn run_tool(ctx: &EvidenceContext, tool: ToolName, pair: &DirectedPair) -> Result<ToolRecord, ToolError> {
    match tool {
        ToolName::VisualAnalyzer => visual_analyzer(ctx, pair),
        ToolName::BiographyReader => biography_reader(ctx, pair),
        ToolName::TimelineGate => timeline_tool(ctx, pair),
        ToolName::StyleComparator => style_comparator(ctx, pair),
        ToolName::ConceptRetriever => concept_retriever(ctx, pair),
    }
}

/// The set of tools the controller may call, over one shared context.
#[derive(Clone)]
pub struct ToolRegistry {
    context: Arc<EvidenceContext>,
    enabled: BTreeSet<ToolName>,
}

impl ToolRegistry {
    pub fn new(context: Arc<EvidenceContext>) -> Self {
        Self {
            context,
            enabled: ToolName::ALL.into_iter().collect(),
        }
    }

    pub fn without(mut self, tool: ToolName) -> Self {
        self.enabled.remove(&tool);
        self
    }

    pub fn context(&self) -> &EvidenceContext {
        &self.context
    }

    pub fn is_registered(&self, tool: ToolName) -> bool {
        self.enabled.contains(&tool)
    }

    /// Registered tools in their canonical calling order.
    pub fn available(&self) -> Vec<ToolName> {
        ToolName::ALL
            .into_iter()
            .filter(|t| self.enabled.contains(t))
            .collect()
    }

    pub fn call(&self, tool: ToolName, pair: &DirectedPair) -> Result<ToolRecord, ToolError> {
        if !self.is_registered(tool) {
            return Err(ToolError::NotRegistered(tool.to_string()));
        }
        run_tool(&self.context, tool, pair)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iconclass::parse_graph;
    use crate::manifold::{build_basis, PoleAxis};
    use crate::model::{ArtistProfile, ArtworkRecord};
    use crate::store::l2_normalize;
    use crate::text::HashingEmbedder;

    fn artist(id: &str, name: &str, birth: i32, death: i32) -> ArtistProfile {
        ArtistProfile {
            artist_id: id.into(),
            name: name.into(),
            birth_year: birth,
            death_year: death,
            bio_doc_ids: vec![format!("{id}-bio")],
            artwork_ids: vec![],
        }
    }

    fn work(id: &str, artist: &str) -> ArtworkRecord {
        ArtworkRecord {
            artwork_id: id.into(),
            artist_id: artist.into(),
            year: None,
            title: id.into(),
            medium: "oil".into(),
            embedding_key: id.into(),
        }
    }

    fn basis(dim: usize) -> WolfflinBasis {
        let axes: Vec<PoleAxis> = (0..5)
            .map(|i| {
                let mut v = vec![0.0; dim];
                v[i] = 1.0;
                PoleAxis::from_direction(i + 1, v)
            })
            .collect();
        build_basis(&axes).unwrap()
    }

    /// h (Hokusai-like) -> v (Van Gogh-like), d/e with a planted 0.72 match,
    /// o with an orthogonal portfolio, c a clone of h.
    fn context(masked: bool) -> EvidenceContext {
        let s = (1.0f32 - 0.72 * 0.72).sqrt();
        let rows = vec![
            ("h1", vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            ("v1", vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0]),
            ("c1", vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            ("o1", vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
            ("d1", vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0]),
            ("e1", vec![0.0, 0.0, 0.72, s, 0.0, 0.0]),
        ];
        let visual = Arc::new(l2_normalize(&EmbeddingMatrix::from_rows(6, rows).unwrap()).unwrap());
        let corpus = Corpus::new(
            vec![
                artist("h", "Katsushika Hokusai", 1760, 1849),
                artist("v", "Vincent van Gogh", 1853, 1890),
                artist("c", "Hokusai Clone", 1760, 1849),
                artist("o", "Orthogonal Painter", 1760, 1849),
                artist("d", "Salvador Dali", 1904, 1989),
                artist("e", "Maurits Escher", 1898, 1972),
            ],
            ["h1", "v1", "c1", "o1", "d1", "e1"]
                .iter()
                .map(|w| work(w, &w[..1]))
                .collect(),
        );
        let biographies = vec![
            BiographyDoc {
                doc_id: "h-bio".into(),
                artist_id: "h".into(),
                text: "Hokusai worked in Edo. His woodblock designs circulated as Japanese prints across Europe. His prints reached Paris.".into(),
            },
            BiographyDoc {
                doc_id: "v-bio".into(),
                artist_id: "v".into(),
                text: "Van Gogh moved to Paris in 1886. He collected Japanese prints with his brother. Van Gogh was influenced by Hokusai.".into(),
            },
            BiographyDoc {
                doc_id: "d-bio".into(),
                artist_id: "d".into(),
                text: "Dali lived in Figueres. He painted melting clocks.".into(),
            },
            BiographyDoc {
                doc_id: "e-bio".into(),
                artist_id: "e".into(),
                text: "Escher lived in Baarn. He drew impossible staircases.".into(),
            },
        ];
        let graph = Arc::new(parse_graph("7\n73\n73D\n73D1\n2\n25\n25F\n", None).unwrap());
        let code_sets = vec![
            CodeSet::new("h1", ["73D1"]),
            CodeSet::new("v1", ["73D"]),
            CodeSet::new("c1", ["73D1"]),
            CodeSet::new("d1", ["73D1"]),
            CodeSet::new("e1", ["25F"]),
        ];
        EvidenceContext::new(ContextParts {
            corpus: Arc::new(corpus),
            visual,
            basis: basis(6),
            code_sets,
            graph,
            biographies,
            embedder: Arc::new(HashingEmbedder::default()),
            lexicons: Lexicons::default(),
            masked,
            params: ToolParams::default(),
        })
        .unwrap()
    }

    fn pair(s: &str, t: &str) -> DirectedPair {
        DirectedPair::new(s, t)
    }

    #[test]
    fn visual_examples() {
        let ctx = context(false);
        let r = visual_analyzer(&ctx, &pair("h", "c")).unwrap();
        assert!((r.summary_score.unwrap() - 1.0).abs() < 1e-6);
        let r = visual_analyzer(&ctx, &pair("h", "o")).unwrap();
        assert!((r.summary_score.unwrap() - 0.5).abs() < 1e-9);
        let r = visual_analyzer(&ctx, &pair("d", "e")).unwrap();
        assert!((r.summary_score.unwrap() - 0.86).abs() < 1e-6);
        let ToolBody::VisualAnalyzer(body) = &r.body else { panic!() };
        assert!((body.max_cosine - 0.72).abs() < 1e-6);
        assert_eq!(body.motif_overlap, 0.0);
    }

    #[test]
    fn biography_cues_for_japonisme() {
        let ctx = context(false);
        let r = biography_reader(&ctx, &pair("h", "v")).unwrap();
        let ToolBody::BiographyReader(cues) = &r.body else { panic!() };
        assert!(cues.count(CueCategory::CoLocation) > 0);
        assert!(cues.count(CueCategory::SharedTerminology) > 0);
        assert!(cues.count(CueCategory::ExplicitReference) > 0);
        assert!(cues.pathway_score > 0.0);
    }

    #[test]
    fn masked_mode_drops_explicit_references() {
        let ctx = context(true);
        let r = biography_reader(&ctx, &pair("h", "v")).unwrap();
        let ToolBody::BiographyReader(cues) = &r.body else { panic!() };
        assert!(cues.masked);
        assert_eq!(cues.count(CueCategory::ExplicitReference), 0);
        // context outside the predicate survives
        assert!(cues.count(CueCategory::CoLocation) > 0);
    }

    #[test]
    fn no_overlap_means_no_cues() {
        let ctx = context(false);
        let r = biography_reader(&ctx, &pair("d", "e")).unwrap();
        let ToolBody::BiographyReader(cues) = &r.body else { panic!() };
        assert!(cues.hits.is_empty());
        assert_eq!(cues.pathway_score, 0.0);
        assert!(matches!(
            biography_reader(&ctx, &pair("h", "o")),
            Err(ToolError::MissingBiography(_))
        ));
    }

    #[test]
    fn timeline_examples() {
        let ctx = context(false);
        let r = timeline_tool(&ctx, &pair("h", "v")).unwrap();
        assert_eq!(r.summary_score, Some(1.0));
        let r = timeline_tool(&ctx, &pair("v", "h")).unwrap();
        assert_eq!(r.summary_score, Some(0.0));
        let ToolBody::TimelineGate(b) = &r.body else { panic!() };
        assert_eq!(b.reason, crate::retrieval::GATE_PRECEDENCE);
        let r = timeline_record(&pair("a", "b"), Lifespan::new(1700, 1780), Lifespan::new(1780, 1850), 0).unwrap();
        assert_eq!(r.summary_score, Some(1.0));
    }

    #[test]
    fn style_examples() {
        let sig = |mu: Vec<f64>| ArtistSignature { artist_id: "x".into(), mu, n_works: 1 };
        let a = sig(vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let r = style_record(&pair("a", "b"), &a, &a);
        assert_eq!(r.summary_score, Some(1.0));
        let b = sig(vec![0.0, 1.0, 0.0, 0.0, 0.0]);
        let r = style_record(&pair("a", "b"), &a, &b);
        assert!((r.summary_score.unwrap() - 0.2431).abs() < 1e-4);
        let mut prev = 1.0;
        for step in 1..6 {
            let moved = sig(vec![1.0 + step as f64 * 0.3, 0.0, 0.0, 0.0, 0.0]);
            let s = style_record(&pair("a", "b"), &a, &moved).summary_score.unwrap();
            assert!(s < prev);
            prev = s;
        }
        let ctx = context(false);
        assert!(style_comparator(&ctx, &pair("h", "v")).is_ok());
    }

    #[test]
    fn concept_examples() {
        let ctx = context(false);
        let r = concept_retriever(&ctx, &pair("h", "c")).unwrap();
        assert_eq!(r.summary_score, Some(1.0));
        let r = concept_retriever(&ctx, &pair("h", "v")).unwrap();
        let ToolBody::ConceptRetriever(b) = &r.body else { panic!() };
        assert!((b.forward_distance - 0.512).abs() < 1e-12);
        assert!((r.summary_score.unwrap() - (-0.512f64).exp()).abs() < 1e-12);
        // 73D1 vs 25F: 73D1->73D->73->7->root->2->25->25F
        let r = concept_retriever(&ctx, &pair("d", "e")).unwrap();
        let ToolBody::ConceptRetriever(b) = &r.body else { panic!() };
        assert_eq!(b.forward_distance, 7.0);
        assert!(r.summary_score.unwrap() < (-1.0f64).exp());
        assert!(matches!(
            concept_retriever(&ctx, &pair("h", "o")),
            Err(ToolError::MissingCodes(_))
        ));
    }

    #[test]
    fn records_round_trip_through_json() {
        let ctx = context(false);
        for tool in ToolName::ALL {
            let r = run_tool(&ctx, tool, &pair("h", "v")).unwrap();
            let back: ToolRecord = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
            assert_eq!(back, r);
            let s = r.summary_score.unwrap();
            assert!((0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn registry_respects_disabled_tools() {
        let reg = ToolRegistry::new(Arc::new(context(false))).without(ToolName::TimelineGate);
        assert!(!reg.available().contains(&ToolName::TimelineGate));
        assert!(matches!(
            reg.call(ToolName::TimelineGate, &pair("h", "v")),
            Err(ToolError::NotRegistered(_))
        ));
        assert_eq!("style-comparator".parse::<ToolName>().unwrap(), ToolName::StyleComparator);
    }

    #[test]
    fn mask_lexicon_rejects_token_collisions() {
        assert!(MaskLexicon::new(&[]).is_err());
        assert!(MaskLexicon::new(&["redacted".to_string()]).is_err());
        assert!(MaskLexicon::new(&["influenced by".to_string()]).is_ok());
    }

    #[test]
    fn lexicon_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut lex = Lexicons::default();
        lex.cities = vec!["Atlantis".into()];
        lex.write_dir(dir.path()).unwrap();
        assert_eq!(Lexicons::load_dir(dir.path()).unwrap(), lex);
    }
}
