//! Domain entities shared by every stage of the pipeline: artists, artworks,
//! directed hypotheses, evidence claims and verdicts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::agent::CounterHypothesisReport;
use crate::tools::{ConceptBody, PathwayCues, StyleBody, TimelineBody, VisualBody};

/// Schema tag carried by every corpus document on disk.
pub const CORPUS_SCHEMA: &str = "artjudge-corpus/1";

/// Influence score reported for pairs rejected by the chronological gate.
/// The reported confidence in the NO verdict is `1 - TEMPORAL_REJECTION_SCORE`.
pub const TEMPORAL_REJECTION_SCORE: f64 = 0.05;

/// Provisional score used when the controller never concludes.
pub const FALLBACK_SCORE: f64 = 0.50;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtistProfile {
    pub artist_id: String,
    pub name: String,
    pub birth_year: i32,
    pub death_year: i32,
    #[serde(default)]
    pub bio_doc_ids: Vec<String>,
    #[serde(default)]
    pub artwork_ids: Vec<String>,
}

impl ArtistProfile {
    pub fn lifespan(&self) -> Lifespan {
        Lifespan {
            birth: self.birth_year,
            death: self.death_year,
        }
    }
}

/// Closed interval of calendar years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lifespan {
    pub birth: i32,
    pub death: i32,
}

impl Lifespan {
    pub fn new(birth: i32, death: i32) -> Self {
        Self { birth, death }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtworkRecord {
    pub artwork_id: String,
    pub artist_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    pub title: String,
    pub medium: String,
    pub embedding_key: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
}

/// Difficulty stratum of a negative pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tier {
    Hard,
    Medium,
    Easy,
    TemporalImpossible,
}

impl Tier {
    pub const ALL: [Tier; 4] = [Tier::Hard, Tier::Medium, Tier::Easy, Tier::TemporalImpossible];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Hard => "Hard",
            Tier::Medium => "Medium",
            Tier::Easy => "Easy",
            Tier::TemporalImpossible => "TemporalImpossible",
        }
    }
}

/// A directed influence hypothesis `source -> target`, optionally labeled.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DirectedPair {
    #[serde(rename = "source")]
    pub source_artist_id: String,
    #[serde(rename = "target")]
    pub target_artist_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tier: Option<Tier>,
}

impl DirectedPair {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            source_artist_id: source.into(),
            target_artist_id: target.into(),
            label: None,
            tier: None,
        }
    }

    pub fn labeled(mut self, label: Label, tier: Option<Tier>) -> Self {
        self.label = Some(label);
        self.tier = tier;
        self
    }

    /// Stable key `source->target`, used to key scripts, trajectories and graph edges.
    pub fn key(&self) -> String {
        format!("{}->{}", self.source_artist_id, self.target_artist_id)
    }

    pub fn check(&self) -> Result<(), String> {
        if self.source_artist_id == self.target_artist_id {
            return Err(format!("pair {} has source == target", self.key()));
        }
        if self.tier.is_some() && self.label != Some(Label::Negative) {
            return Err(format!("pair {} carries a tier but is not a negative", self.key()));
        }
        Ok(())
    }
}

impl fmt::Display for DirectedPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.source_artist_id, self.target_artist_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "YES")]
    Yes,
    #[serde(rename = "NO")]
    No,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Yes => "YES",
            Verdict::No => "NO",
        })
    }
}

/// Verdict and confidence-in-verdict derived from a single plausibility-of-YES score.
///
/// Inputs are clamped to `[0, 1]`. The verdict is YES only when the score is
/// strictly above the threshold, so a score equal to the threshold yields NO.
pub fn derive_verdict(influence_score: f64, threshold: f64) -> (Verdict, f64) {
    let s = clamp01(influence_score);
    let t = clamp01(threshold);
    if s > t {
        (Verdict::Yes, s)
    } else {
        (Verdict::No, 1.0 - s)
    }
}

/// Inverse of [`derive_verdict`]: recovers the influence score.
pub fn influence_from(verdict: Verdict, confidence: f64) -> f64 {
    match verdict {
        Verdict::Yes => confidence,
        Verdict::No => 1.0 - confidence,
    }
}

pub(crate) fn clamp01(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(0.0, 1.0)
    }
}

/// Metadata seeded into the evidence set before the ReAct loop starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataBody {
    pub source_name: String,
    pub target_name: String,
    pub source_lifespan: Lifespan,
    pub target_lifespan: Lifespan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_similarity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Typed payload of an evidence claim; the serialized `kind` tag always agrees
/// with the payload because it is derived from the variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum ClaimPayload {
    Metadata(MetadataBody),
    VisualSimilarity(VisualBody),
    Timeline(TimelineBody),
    Pathway(PathwayCues),
    Style(StyleBody),
    Concept(ConceptBody),
    CriticChallenge(CounterHypothesisReport),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClaimKind {
    Metadata,
    VisualSimilarity,
    Timeline,
    Pathway,
    Style,
    Concept,
    CriticChallenge,
}

impl ClaimPayload {
    pub fn kind(&self) -> ClaimKind {
        match self {
            ClaimPayload::Metadata(_) => ClaimKind::Metadata,
            ClaimPayload::VisualSimilarity(_) => ClaimKind::VisualSimilarity,
            ClaimPayload::Timeline(_) => ClaimKind::Timeline,
            ClaimPayload::Pathway(_) => ClaimKind::Pathway,
            ClaimPayload::Style(_) => ClaimKind::Style,
            ClaimPayload::Concept(_) => ClaimKind::Concept,
            ClaimPayload::CriticChallenge(_) => ClaimKind::CriticChallenge,
        }
    }
}

/// One atomic piece of evidence attached to a verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceClaim {
    pub source_tool: String,
    #[serde(flatten)]
    pub payload: ClaimPayload,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl EvidenceClaim {
    pub fn new(source_tool: impl Into<String>, payload: ClaimPayload, score: Option<f64>) -> Self {
        Self {
            source_tool: source_tool.into(),
            payload,
            score: score.map(clamp01),
        }
    }

    pub fn kind(&self) -> ClaimKind {
        self.payload.kind()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictTuple {
    pub verdict: Verdict,
    pub confidence: f64,
    pub influence_score: f64,
    pub evidence: Vec<EvidenceClaim>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_ref: Option<String>,
}

impl VerdictTuple {
    pub fn from_score(influence_score: f64, threshold: f64, evidence: Vec<EvidenceClaim>) -> Self {
        let influence_score = clamp01(influence_score);
        let (verdict, confidence) = derive_verdict(influence_score, threshold);
        Self {
            verdict,
            confidence,
            influence_score,
            evidence,
            trajectory_ref: None,
        }
    }
}

/// An in-memory corpus of artists and artworks with id lookups.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub artists: Vec<ArtistProfile>,
    pub artworks: Vec<ArtworkRecord>,
    artist_index: BTreeMap<String, usize>,
    artwork_index: BTreeMap<String, usize>,
}

impl Corpus {
    /// Builds lookups; later duplicates shadow earlier ones (validation reports them).
    pub fn new(artists: Vec<ArtistProfile>, artworks: Vec<ArtworkRecord>) -> Self {
        let artist_index = artists
            .iter()
            .enumerate()
            .map(|(i, a)| (a.artist_id.clone(), i))
            .collect();
        let artwork_index = artworks
            .iter()
            .enumerate()
            .map(|(i, a)| (a.artwork_id.clone(), i))
            .collect();
        Self {
            artists,
            artworks,
            artist_index,
            artwork_index,
        }
    }

    pub fn artist(&self, id: &str) -> Option<&ArtistProfile> {
        self.artist_index.get(id).map(|&i| &self.artists[i])
    }

    pub fn artwork(&self, id: &str) -> Option<&ArtworkRecord> {
        self.artwork_index.get(id).map(|&i| &self.artworks[i])
    }

    /// Artworks authored by `artist_id`, in corpus order.
    pub fn portfolio(&self, artist_id: &str) -> Vec<&ArtworkRecord> {
        self.artworks.iter().filter(|a| a.artist_id == artist_id).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "issue", rename_all = "snake_case")]
pub enum ValidationIssue {
    DuplicateArtistId { artist_id: String },
    DuplicateArtworkId { artwork_id: String },
    InvalidLifespan { artist_id: String, birth_year: i32, death_year: i32 },
    DanglingArtist { artwork_id: String, artist_id: String },
    DanglingEmbedding { artwork_id: String, embedding_key: String },
    DanglingArtworkRef { artist_id: String, artwork_id: String },
    ForeignArtworkRef { artist_id: String, artwork_id: String, owner: String },
    DuplicateArtworkRef { artist_id: String, artwork_id: String },
    YearOutsideLifespan { artwork_id: String, year: i32, birth_year: i32, death_year: i32 },
    InvalidPair { message: String },
    UnknownCode { artwork_id: String, code: String },
}

impl ValidationIssue {
    pub fn subject(&self) -> &str {
        match self {
            ValidationIssue::DuplicateArtistId { artist_id }
            | ValidationIssue::InvalidLifespan { artist_id, .. } => artist_id,
            ValidationIssue::DuplicateArtworkId { artwork_id }
            | ValidationIssue::DanglingArtist { artwork_id, .. }
            | ValidationIssue::DanglingEmbedding { artwork_id, .. }
            | ValidationIssue::DanglingArtworkRef { artwork_id, .. }
            | ValidationIssue::ForeignArtworkRef { artwork_id, .. }
            | ValidationIssue::DuplicateArtworkRef { artwork_id, .. }
            | ValidationIssue::YearOutsideLifespan { artwork_id, .. }
            | ValidationIssue::UnknownCode { artwork_id, .. } => artwork_id,
            ValidationIssue::InvalidPair { message } => message,
        }
    }
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationIssue::DuplicateArtistId { artist_id } => {
                write!(f, "duplicate artist_id {artist_id}")
            }
            ValidationIssue::DuplicateArtworkId { artwork_id } => {
                write!(f, "duplicate artwork_id {artwork_id}")
            }
            ValidationIssue::InvalidLifespan { artist_id, birth_year, death_year } => {
                write!(f, "artist {artist_id}: birth {birth_year} after death {death_year}")
            }
            ValidationIssue::DanglingArtist { artwork_id, artist_id } => {
                write!(f, "artwork {artwork_id} references missing artist {artist_id}")
            }
            ValidationIssue::DanglingEmbedding { artwork_id, embedding_key } => {
                write!(f, "artwork {artwork_id} references missing embedding {embedding_key}")
            }
            ValidationIssue::DanglingArtworkRef { artist_id, artwork_id } => {
                write!(f, "artist {artist_id} lists missing artwork {artwork_id}")
            }
            ValidationIssue::ForeignArtworkRef { artist_id, artwork_id, owner } => {
                write!(f, "artist {artist_id} lists artwork {artwork_id} owned by {owner}")
            }
            ValidationIssue::DuplicateArtworkRef { artist_id, artwork_id } => {
                write!(f, "artist {artist_id} lists artwork {artwork_id} twice")
            }
            ValidationIssue::YearOutsideLifespan { artwork_id, year, birth_year, death_year } => {
                write!(
                    f,
                    "artwork {artwork_id} dated {year} outside lifespan {birth_year}-{death_year}"
                )
            }
            ValidationIssue::InvalidPair { message } => f.write_str(message),
            ValidationIssue::UnknownCode { artwork_id, code } => {
                write!(f, "artwork {artwork_id} carries unknown code {code}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<ValidationIssue>,
    pub warnings: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn accepted(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty() && self.warnings.is_empty()
    }
}

/// Checks keys, lifespans and cross references. `embedding_keys` is the id set
/// of the visual store the artworks point into.
pub fn validate_corpus(
    artists: &[ArtistProfile],
    artworks: &[ArtworkRecord],
    embedding_keys: &BTreeSet<&str>,
) -> ValidationReport {
    let mut report = ValidationReport::default();

    let mut artist_by_id: BTreeMap<&str, &ArtistProfile> = BTreeMap::new();
    for artist in artists {
        if artist_by_id.insert(&artist.artist_id, artist).is_some() {
            report.errors.push(ValidationIssue::DuplicateArtistId {
                artist_id: artist.artist_id.clone(),
            });
        }
        if artist.birth_year > artist.death_year {
            report.errors.push(ValidationIssue::InvalidLifespan {
                artist_id: artist.artist_id.clone(),
                birth_year: artist.birth_year,
                death_year: artist.death_year,
            });
        }
    }

    let mut artwork_by_id: BTreeMap<&str, &ArtworkRecord> = BTreeMap::new();
    for artwork in artworks {
        if artwork_by_id.insert(&artwork.artwork_id, artwork).is_some() {
            report.errors.push(ValidationIssue::DuplicateArtworkId {
                artwork_id: artwork.artwork_id.clone(),
            });
        }
        if !embedding_keys.contains(artwork.embedding_key.as_str()) {
            report.errors.push(ValidationIssue::DanglingEmbedding {
                artwork_id: artwork.artwork_id.clone(),
                embedding_key: artwork.embedding_key.clone(),
            });
        }
        match artist_by_id.get(artwork.artist_id.as_str()) {
            None => report.errors.push(ValidationIssue::DanglingArtist {
                artwork_id: artwork.artwork_id.clone(),
                artist_id: artwork.artist_id.clone(),
            }),
            Some(artist) => {
                if let Some(year) = artwork.year {
                    if year < artist.birth_year || year > artist.death_year {
                        report.warnings.push(ValidationIssue::YearOutsideLifespan {
                            artwork_id: artwork.artwork_id.clone(),
                            year,
                            birth_year: artist.birth_year,
                            death_year: artist.death_year,
                        });
                    }
                }
            }
        }
    }

    for artist in artists {
        let mut seen = BTreeSet::new();
        for id in &artist.artwork_ids {
            if !seen.insert(id.as_str()) {
                report.errors.push(ValidationIssue::DuplicateArtworkRef {
                    artist_id: artist.artist_id.clone(),
                    artwork_id: id.clone(),
                });
                continue;
            }
            match artwork_by_id.get(id.as_str()) {
                None => report.errors.push(ValidationIssue::DanglingArtworkRef {
                    artist_id: artist.artist_id.clone(),
                    artwork_id: id.clone(),
                }),
                Some(work) if work.artist_id != artist.artist_id => {
                    report.errors.push(ValidationIssue::ForeignArtworkRef {
                        artist_id: artist.artist_id.clone(),
                        artwork_id: id.clone(),
                        owner: work.artist_id.clone(),
                    })
                }
                Some(_) => {}
            }
        }
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn artist(id: &str, birth: i32, death: i32, works: &[&str]) -> ArtistProfile {
        ArtistProfile {
            artist_id: id.into(),
            name: id.to_uppercase(),
            birth_year: birth,
            death_year: death,
            bio_doc_ids: vec![],
            artwork_ids: works.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn work(id: &str, artist: &str, year: Option<i32>) -> ArtworkRecord {
        ArtworkRecord {
            artwork_id: id.into(),
            artist_id: artist.into(),
            year,
            title: format!("Untitled {id}"),
            medium: "oil on canvas".into(),
            embedding_key: id.into(),
        }
    }

    fn fixture() -> (Vec<ArtistProfile>, Vec<ArtworkRecord>) {
        (
            vec![
                artist("a", 1700, 1770, &["w1", "w2"]),
                artist("b", 1720, 1790, &["w3"]),
                artist("c", 1760, 1830, &["w4"]),
            ],
            vec![
                work("w1", "a", Some(1730)),
                work("w2", "a", None),
                work("w3", "b", Some(1750)),
                work("w4", "c", Some(1800)),
            ],
        )
    }

    fn keys(works: &[ArtworkRecord]) -> BTreeSet<&str> {
        works.iter().map(|w| w.embedding_key.as_str()).collect()
    }

    #[test]
    fn well_formed_fixture_is_accepted() {
        let (artists, works) = fixture();
        let report = validate_corpus(&artists, &works, &keys(&works));
        assert!(report.is_empty());
        assert!(report.accepted());
    }

    #[test]
    fn missing_artist_is_hard_error() {
        let (artists, mut works) = fixture();
        works.push(work("w9", "ghost", None));
        let report = validate_corpus(&artists, &works, &keys(&works));
        assert!(!report.accepted());
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].subject(), "w9");
    }

    #[test]
    fn dangling_embedding_and_duplicate_artist() {
        let (mut artists, works) = fixture();
        artists.push(artist("a", 1700, 1770, &[]));
        let mut emb = keys(&works);
        emb.remove("w3");
        let report = validate_corpus(&artists, &works, &emb);
        assert!(report
            .errors
            .contains(&ValidationIssue::DuplicateArtistId { artist_id: "a".into() }));
        assert!(report.errors.iter().any(
            |e| matches!(e, ValidationIssue::DanglingEmbedding { artwork_id, .. } if artwork_id == "w3")
        ));
    }

    #[test]
    fn out_of_lifespan_year_is_warning_only() {
        let (artists, mut works) = fixture();
        works[0].year = Some(1900);
        let report = validate_corpus(&artists, &works, &keys(&works));
        assert!(report.accepted());
        assert_eq!(report.warnings.len(), 1);
        assert_eq!(report.warnings[0].subject(), "w1");
    }

    #[test]
    fn validation_is_idempotent() {
        let (artists, mut works) = fixture();
        works[0].year = Some(1600);
        let k = keys(&works);
        assert_eq!(
            validate_corpus(&artists, &works, &k),
            validate_corpus(&artists, &works, &k)
        );
    }

    #[test]
    fn verdict_examples() {
        assert_eq!(derive_verdict(0.88, 0.5), (Verdict::Yes, 0.88));
        let (v, c) = derive_verdict(0.35, 0.5);
        assert_eq!(v, Verdict::No);
        assert!((c - 0.65).abs() < 1e-12);
        let (v, c) = derive_verdict(TEMPORAL_REJECTION_SCORE, 0.5);
        assert_eq!(v, Verdict::No);
        assert!((c - 0.95).abs() < 1e-12);
        // tie resolves to NO
        assert_eq!(derive_verdict(0.5, 0.5), (Verdict::No, 0.5));
    }

    #[test]
    fn pair_checks() {
        assert!(DirectedPair::new("a", "a").check().is_err());
        let p = DirectedPair::new("a", "b").labeled(Label::Positive, Some(Tier::Hard));
        assert!(p.check().is_err());
        let p = DirectedPair::new("a", "b").labeled(Label::Negative, Some(Tier::Hard));
        assert!(p.check().is_ok());
    }

    proptest! {
        #[test]
        fn verdict_flips_strictly_above_threshold(s in 0.0f64..=1.0, t in 0.0f64..=1.0) {
            let (v, c) = derive_verdict(s, t);
            prop_assert_eq!(v == Verdict::Yes, s > t);
            prop_assert!((0.0..=1.0).contains(&c));
            prop_assert!((influence_from(v, c) - s).abs() < 1e-12);
        }
    }
}
