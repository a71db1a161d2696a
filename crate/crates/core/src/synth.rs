//! Deterministic synthetic corpora: the 60-pair mini benchmark shipped with
//! the repository, a leakage corpus with planted influence sentences, and
//! random concept taxonomies for property suites.
//!
//! Every pair kind plants a known evidence profile (visual proximity, shared
//! biography cues, iconographic theme) so tool outputs separate the classes
//! in a predictable way.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::RunConfig;
use crate::iconclass::{write_code_sets, CodeSet};
use crate::manifold::{AXIS_COUNT, DEFAULT_POLE_PROMPTS};
use crate::model::{ArtistProfile, ArtworkRecord, DirectedPair, Label, Tier};
use crate::store::{write_store, EmbeddingMatrix};
use crate::tools::{BiographyDoc, Lexicons};
use crate::workspace::{self, WorkspaceError};

/// Shape of a generated corpus. Positive kinds differ in which biography
/// cues they plant; negative kinds in how close the pair is visually and
/// iconographically.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub dim: usize,
    pub works_per_artist: usize,
    /// Shared city, institution and terminology, explicit reference, joint exhibition.
    pub strong_positives: usize,
    /// Shared city and terminology only.
    pub partial_positives: usize,
    /// Only an explicit influence sentence.
    pub explicit_positives: usize,
    pub hard_negatives: usize,
    /// How many hard negatives share a city by coincidence.
    pub hard_colocated: usize,
    pub medium_negatives: usize,
    pub easy_negatives: usize,
    /// Reversed positives (target born before source).
    pub temporal_negatives: usize,
    /// Influence sentences planted per strong or explicit positive.
    pub influence_sentences: usize,
}

impl SynthSpec {
    /// 30 positives; negatives Hard 10 / Medium 10 / Easy 5 / TemporalImpossible 5.
    pub fn mini_benchmark() -> Self {
        Self {
            seed: 7,
            dim: 512,
            works_per_artist: 4,
            strong_positives: 20,
            partial_positives: 6,
            explicit_positives: 4,
            hard_negatives: 10,
            hard_colocated: 3,
            medium_negatives: 10,
            easy_negatives: 5,
            temporal_negatives: 5,
            influence_sentences: 1,
        }
    }

    /// 50 strong positives with two planted influence sentences each.
    pub fn leakage() -> Self {
        Self {
            seed: 11,
            dim: 64,
            works_per_artist: 2,
            strong_positives: 50,
            partial_positives: 0,
            explicit_positives: 0,
            hard_negatives: 0,
            hard_colocated: 0,
            medium_negatives: 0,
            easy_negatives: 0,
            temporal_negatives: 0,
            influence_sentences: 2,
        }
    }

    /// 50 positives, every one also present reversed as a temporal-impossible negative.
    pub fn temporal() -> Self {
        Self {
            seed: 13,
            dim: 64,
            works_per_artist: 2,
            strong_positives: 50,
            temporal_negatives: 50,
            ..Self::leakage()
        }
    }

    pub fn positives(&self) -> usize {
        self.strong_positives + self.partial_positives + self.explicit_positives
    }

    pub fn negatives(&self) -> usize {
        self.hard_negatives + self.medium_negatives + self.easy_negatives + self.temporal_negatives
    }

    fn check(&self) -> Result<(), String> {
        if self.dim < AXIS_COUNT * 2 {
            return Err(format!("dim must be at least {}", AXIS_COUNT * 2));
        }
        if self.works_per_artist == 0 {
            return Err("works_per_artist must be positive".into());
        }
        if self.temporal_negatives > self.positives() {
            return Err("temporal negatives reverse positives; not enough positives".into());
        }
        if self.hard_colocated > self.hard_negatives {
            return Err("hard_colocated exceeds hard_negatives".into());
        }
        if 2 * (self.positives() + self.hard_negatives + self.medium_negatives + self.easy_negatives) > NAME_CAPACITY {
            return Err(format!("at most {NAME_CAPACITY} artists can be named"));
        }
        Ok(())
    }
}

/// Planted evidence profile of one generated artist pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    Strong,
    Partial,
    Explicit,
    Hard { colocated: bool },
    Medium,
    Easy,
}

impl PairKind {
    fn label(self) -> (Label, Option<Tier>) {
        match self {
            PairKind::Strong | PairKind::Partial | PairKind::Explicit => (Label::Positive, None),
            PairKind::Hard { .. } => (Label::Negative, Some(Tier::Hard)),
            PairKind::Medium => (Label::Negative, Some(Tier::Medium)),
            PairKind::Easy => (Label::Negative, Some(Tier::Easy)),
        }
    }

    /// Visual mixing weight of the source style in the target style.
    fn visual_mix(self) -> f64 {
        match self {
            PairKind::Medium => 0.6,
            PairKind::Easy => 0.0,
            _ => 0.9,
        }
    }
}

/// In-memory generated corpus; [`SynthCorpus::write`] lays it out as a workspace.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub artists: Vec<ArtistProfile>,
    pub artworks: Vec<ArtworkRecord>,
    pub pairs: Vec<DirectedPair>,
    /// Kind of each generated artist pair, in generation order (source, target, kind).
    pub kinds: Vec<(String, String, PairKind)>,
    pub visual: EmbeddingMatrix,
    pub poles: EmbeddingMatrix,
    pub generic_poles: EmbeddingMatrix,
    pub biographies: Vec<BiographyDoc>,
    pub code_list: String,
    pub code_sets: Vec<CodeSet>,
    /// Number of planted influence sentences across all biographies.
    pub planted_sentences: usize,
}

const FIRST_NAMES: [&str; 26] = [
    "Aurel", "Benedikt", "Casimir", "Dorothea", "Emmerich", "Florian", "Gisela", "Hilarion", "Ilse",
    "Jorin", "Konstanz", "Leopold", "Marit", "Nikodem", "Ottilie", "Pieter", "Quirin", "Rosalind",
    "Severin", "Thekla", "Ulrich", "Valentin", "Wendelin", "Xaver", "Yolanthe", "Zeno",
];
const SURNAME_HEADS: [&str; 12] = ["Var", "Mol", "Kest", "Brin", "Thal", "Quor", "Zem", "Lud", "Hov", "Pask", "Fen", "Gor"];
const SURNAME_TAILS: [&str; 10] = ["enko", "ovic", "arde", "isse", "mont", "wald", "ancy", "etti", "umar", "oble"];
const NAME_CAPACITY: usize = SURNAME_HEADS.len() * SURNAME_TAILS.len();

const PREDICATES: [&str; 9] = [
    "was influenced by",
    "was inspired by",
    "studied under",
    "admired",
    "imitated",
    "learned from",
    "emulated",
    "copied the work of",
    "was a pupil of",
];

const FILLERS: [&str; 4] = [
    "favoured muted harbour views on oak panel",
    "kept a small workshop with two assistants",
    "produced altarpieces and drawings for private patrons",
    "preferred narrow vertical formats and cool greys",
];

const MEDIA: [&str; 4] = ["oil on canvas", "tempera on panel", "etching", "watercolour"];

fn surname(index: usize) -> String {
    format!(
        "{}{}",
        SURNAME_HEADS[index % SURNAME_HEADS.len()],
        SURNAME_TAILS[index / SURNAME_HEADS.len()]
    )
}

fn gaussian_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    normalize(v)
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn mix(a: &[f64], b: &[f64], weight: f64) -> Vec<f64> {
    let w2 = (1.0 - weight * weight).max(0.0).sqrt();
    normalize(a.iter().zip(b).map(|(x, y)| weight * x + w2 * y).collect())
}

struct Styles {
    directions: Vec<Vec<f64>>,
}

impl Styles {
    /// A style with a deliberate component inside the formal subspace.
    fn center(&self, rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        let u = gaussian_unit(rng, AXIS_COUNT);
        let g = gaussian_unit(rng, dim);
        let mut c: Vec<f64> = g.iter().map(|x| 0.8 * x).collect();
        for (k, d) in self.directions.iter().enumerate() {
            for (ci, di) in c.iter_mut().zip(d) {
                *ci += 0.6 * u[k] * di;
            }
        }
        normalize(c)
    }
}

fn pole_store(rng: &mut ChaCha8Rng, dim: usize) -> (EmbeddingMatrix, Vec<Vec<f64>>) {
    let mut rows = Vec::new();
    let mut directions = Vec::new();
    for k in 1..=AXIS_COUNT {
        let pos = gaussian_unit(rng, dim);
        let neg = gaussian_unit(rng, dim);
        directions.push(normalize(pos.iter().zip(&neg).map(|(p, n)| p - n).collect()));
        rows.push((format!("axis{k}+"), pos.iter().map(|&x| x as f32).collect()));
        rows.push((format!("axis{k}-"), neg.iter().map(|&x| x as f32).collect()));
    }
    (EmbeddingMatrix::from_rows(dim, rows).expect("consistent rows"), directions)
}

/// Four-level taxonomy `d`, `dd`, `ddL`, `ddLd` (9·5·4·3 leaves).
fn taxonomy() -> (String, Vec<String>) {
    let mut list = String::new();
    let mut themes = Vec::new();
    for top in 1..=9 {
        list.push_str(&format!("{top}\n"));
        for mid in 1..=5 {
            list.push_str(&format!("{top}{mid}\n"));
            for letter in ['A', 'B', 'C', 'D'] {
                let theme = format!("{top}{mid}{letter}");
                list.push_str(&format!("{theme}\n"));
                for leaf in 1..=3 {
                    list.push_str(&format!("{theme}{leaf}\n"));
                }
                themes.push(theme);
            }
        }
    }
    (list, themes)
}

fn related_theme(rng: &mut ChaCha8Rng, theme: &str, kind: PairKind) -> String {
    let top = &theme[..1];
    let mid = &theme[1..2];
    match kind {
        PairKind::Medium => {
            let letters: Vec<char> = ['A', 'B', 'C', 'D'].into_iter().filter(|c| !theme.ends_with(*c)).collect();
            format!("{top}{mid}{}", letters[rng.gen_range(0..letters.len())])
        }
        PairKind::Easy => {
            let tops: Vec<u32> = (1..=9).filter(|t| t.to_string() != top).collect();
            let t = tops[rng.gen_range(0..tops.len())];
            format!("{t}{}{}", rng.gen_range(1..=5), ['A', 'B', 'C', 'D'][rng.gen_range(0..4)])
        }
        _ => theme.to_string(),
    }
}

/// Picks `(a, b)` from `pool`, equal when `shared`.
fn pick_pair<'a>(rng: &mut ChaCha8Rng, pool: &'a [String], shared: bool) -> (&'a str, &'a str) {
    let a = rng.gen_range(0..pool.len());
    if shared {
        return (&pool[a], &pool[a]);
    }
    let mut b = rng.gen_range(0..pool.len() - 1);
    if b >= a {
        b += 1;
    }
    (&pool[a], &pool[b])
}

struct ArtistDraft {
    profile: ArtistProfile,
    center: Vec<f64>,
    theme: String,
    sentences: Vec<String>,
}

/// Generates the corpus described by `spec`.
pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus, String> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dim = spec.dim;
    let (poles, directions) = pole_store(&mut rng, dim);
    let (generic_poles, _) = pole_store(&mut rng, dim);
    let styles = Styles { directions };
    let (code_list, themes) = taxonomy();
    let lex = Lexicons::default();
    // institutions that are substrings of each other would fake sharing
    let institutions: Vec<String> = lex
        .institutions
        .iter()
        .filter(|i| !i.contains("Beaux-Arts"))
        .cloned()
        .collect();
    let terms: Vec<String> = lex.terminology.iter().filter(|t| t.as_str() != "woodblock").cloned().collect();

    let mut kinds = Vec::new();
    kinds.extend(std::iter::repeat_n(PairKind::Strong, spec.strong_positives));
    kinds.extend(std::iter::repeat_n(PairKind::Partial, spec.partial_positives));
    kinds.extend(std::iter::repeat_n(PairKind::Explicit, spec.explicit_positives));
    for i in 0..spec.hard_negatives {
        kinds.push(PairKind::Hard {
            colocated: i < spec.hard_colocated,
        });
    }
    kinds.extend(std::iter::repeat_n(PairKind::Medium, spec.medium_negatives));
    kinds.extend(std::iter::repeat_n(PairKind::Easy, spec.easy_negatives));

    let mut drafts: Vec<ArtistDraft> = Vec::new();
    let mut kind_log = Vec::new();
    let mut pairs = Vec::new();
    let mut planted = 0;
    for (p, &kind) in kinds.iter().enumerate() {
        let base = 1480 + ((p * 6) % 360) as i32;
        let a_birth = base;
        let a_death = base + 58 + rng.gen_range(0..15);
        let b_birth = base + 12 + rng.gen_range(0..20);
        let b_death = b_birth + 50 + rng.gen_range(0..20);

        let (share_city, share_inst, share_term) = match kind {
            PairKind::Strong => (true, true, true),
            PairKind::Partial => (true, false, true),
            PairKind::Hard { colocated } => (colocated, false, false),
            _ => (false, false, false),
        };
        let (city_a, city_b) = pick_pair(&mut rng, &lex.cities, share_city);
        let (inst_a, inst_b) = pick_pair(&mut rng, &institutions, share_inst);
        let (term_a, term_b) = pick_pair(&mut rng, &terms, share_term);

        let a_center = styles.center(&mut rng, dim);
        let fresh = styles.center(&mut rng, dim);
        let b_center = if kind.visual_mix() > 0.0 {
            mix(&a_center, &fresh, kind.visual_mix())
        } else {
            fresh
        };
        let a_theme = themes[rng.gen_range(0..themes.len())].clone();
        let b_theme = related_theme(&mut rng, &a_theme, kind);

        let ids = [2 * p, 2 * p + 1];
        let names: Vec<(String, String)> = ids
            .iter()
            .map(|&i| {
                let sn = surname(i);
                (format!("{} {sn}", FIRST_NAMES[i % FIRST_NAMES.len()]), sn)
            })
            .collect();
        let mut make = |idx: usize, birth: i32, death: i32, city: &str, inst: &str, term: &str, center: Vec<f64>, theme: String| {
            let id = format!("syn{idx:03}");
            let name = &names[idx - 2 * p].0;
            let sentences = vec![
                format!("{name} was born in {birth}."),
                format!("{name} worked mainly in {city} and trained at the {inst}."),
                format!("{name} became known for {term}."),
                format!("{name} {}.", FILLERS[rng.gen_range(0..FILLERS.len())]),
            ];
            ArtistDraft {
                profile: ArtistProfile {
                    artist_id: id.clone(),
                    name: name.clone(),
                    birth_year: birth,
                    death_year: death,
                    bio_doc_ids: vec![format!("{id}-bio")],
                    artwork_ids: (0..spec.works_per_artist).map(|j| format!("{id}-w{j}")).collect(),
                },
                center,
                theme,
                sentences,
            }
        };
        let a = make(ids[0], a_birth, a_death, city_a, inst_a, term_a, a_center, a_theme);
        let mut b = make(ids[1], b_birth, b_death, city_b, inst_b, term_b, b_center, b_theme);
        if matches!(kind, PairKind::Strong | PairKind::Explicit) {
            for s in 0..spec.influence_sentences {
                let pred = PREDICATES[(p + s) % PREDICATES.len()];
                let form = if s % 2 == 0 { &names[0].0 } else { &names[0].1 };
                b.sentences.push(format!("{} {pred} {form}.", names[1].0));
                planted += 1;
            }
        }
        if kind == PairKind::Strong {
            b.sentences.push(format!("{} exhibited alongside {} at the Salon.", names[1].0, names[0].1));
        }
        let (label, tier) = kind.label();
        pairs.push(DirectedPair::new(&a.profile.artist_id, &b.profile.artist_id).labeled(label, tier));
        kind_log.push((a.profile.artist_id.clone(), b.profile.artist_id.clone(), kind));
        drafts.push(a);
        drafts.push(b);
    }
    let positives: Vec<DirectedPair> = pairs.iter().filter(|p| p.label == Some(Label::Positive)).cloned().collect();
    for pos in positives.iter().take(spec.temporal_negatives) {
        pairs.push(
            DirectedPair::new(&pos.target_artist_id, &pos.source_artist_id)
                .labeled(Label::Negative, Some(Tier::TemporalImpossible)),
        );
    }

    let mut artworks = Vec::new();
    let mut rows = Vec::new();
    let mut code_sets = Vec::new();
    let mut biographies = Vec::new();
    for d in &drafts {
        for (j, wid) in d.profile.artwork_ids.iter().enumerate() {
            artworks.push(ArtworkRecord {
                artwork_id: wid.clone(),
                artist_id: d.profile.artist_id.clone(),
                year: Some(d.profile.birth_year + 25 + 5 * j as i32),
                title: format!("Composition {}", j + 1),
                medium: MEDIA[j % MEDIA.len()].into(),
                embedding_key: wid.clone(),
            });
            let row: Vec<f64> = d
                .center
                .iter()
                .map(|c| c + 0.015 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            rows.push((wid.clone(), normalize(row).into_iter().map(|x| x as f32).collect::<Vec<f32>>()));
            let mut leaves = [1, 2, 3];
            leaves.shuffle(&mut rng);
            code_sets.push(CodeSet::new(wid.clone(), leaves[..2].iter().map(|l| format!("{}{l}", d.theme))));
        }
        biographies.push(BiographyDoc {
            doc_id: d.profile.bio_doc_ids[0].clone(),
            artist_id: d.profile.artist_id.clone(),
            text: d.sentences.join(" "),
        });
    }
    Ok(SynthCorpus {
        artists: drafts.into_iter().map(|d| d.profile).collect(),
        artworks,
        pairs,
        kinds: kind_log,
        visual: EmbeddingMatrix::from_rows(dim, rows).map_err(|e| e.to_string())?,
        poles,
        generic_poles,
        biographies,
        code_list,
        code_sets,
        planted_sentences: planted,
    })
}

impl SynthCorpus {
    /// Writes a complete workspace directory loadable by [`workspace::Workspace::load`].
    pub fn write(&self, dir: &Path) -> Result<(), WorkspaceError> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| WorkspaceError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        workspace::write_collection(&dir.join(workspace::ARTISTS_FILE), "artists", &self.artists)?;
        workspace::write_collection(&dir.join(workspace::ARTWORKS_FILE), "artworks", &self.artworks)?;
        workspace::write_jsonl(&dir.join(workspace::PAIRS_JSONL), &self.pairs)?;
        workspace::write_jsonl(&dir.join(workspace::BIOGRAPHIES_FILE), &self.biographies)?;
        for (matrix, file) in [
            (&self.visual, workspace::VISUAL_STORE),
            (&self.poles, workspace::POLE_STORE),
            (&self.generic_poles, workspace::GENERIC_POLE_STORE),
        ] {
            let path = dir.join(file);
            write_store(matrix, &path).map_err(|source| WorkspaceError::Store {
                path: path.display().to_string(),
                source,
            })?;
        }
        let prompts: String = DEFAULT_POLE_PROMPTS.iter().map(|(p, n)| format!("{p}\t{n}\n")).collect();
        let path = dir.join(workspace::POLE_PROMPTS);
        fs::write(&path, prompts).map_err(io(&path))?;
        let path = dir.join(workspace::CODE_LIST);
        fs::write(&path, &self.code_list).map_err(io(&path))?;
        write_code_sets(&self.code_sets, &dir.join(workspace::CODE_SETS))?;
        let path = dir.join(workspace::LEXICON_DIR);
        Lexicons::default().write_dir(&path).map_err(io(&path))?;
        let path = dir.join(workspace::CONFIG_FILE);
        fs::write(&path, RunConfig::default().to_toml()).map_err(io(&path))?;
        Ok(())
    }
}

/// Random prefix-coded taxonomy with extra cross-links: `(code list, edge list)`
/// in the formats read by [`crate::iconclass::parse_graph`].
pub fn random_taxonomy(seed: u64, size: usize, extra_edges: usize) -> (String, String) {
    const ALPHABET: &[u8] = b"0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ";
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut codes: Vec<String> = Vec::new();
    let mut child_count: Vec<usize> = Vec::new();
    let mut root_children = 0usize;
    while codes.len() < size {
        let parent = rng.gen_range(0..=codes.len());
        let code = if parent == codes.len() {
            if root_children == ALPHABET.len() {
                continue;
            }
            root_children += 1;
            (ALPHABET[root_children - 1] as char).to_string()
        } else {
            if child_count[parent] == ALPHABET.len() {
                continue;
            }
            child_count[parent] += 1;
            format!("{}{}", codes[parent], ALPHABET[child_count[parent] - 1] as char)
        };
        codes.push(code);
        child_count.push(0);
    }
    let mut edges = String::new();
    if codes.len() > 1 {
        for _ in 0..extra_edges {
            // codes are created parents-first, so linking to an earlier code keeps the graph acyclic
            let child = rng.gen_range(1..codes.len());
            let parent = rng.gen_range(0..child);
            edges.push_str(&format!("{} {}\n", codes[child], codes[parent]));
        }
    }
    let mut list = codes.join("\n");
    list.push('\n');
    (list, edges)
}

/// `n` independent unit vectors of dimension `dim`.
pub fn random_unit_vectors(n: usize, dim: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n).map(|i| {
        let v = gaussian_unit(&mut rng, dim);
        (format!("v{i}"), v.into_iter().map(|x| x as f32).collect::<Vec<f32>>())
    });
    EmbeddingMatrix::from_rows(dim, rows).expect("consistent rows")
}

/// `n` unit vectors shaped like learned embeddings: a random `rank`-dimensional
/// signal subspace of the ambient space plus isotropic noise of relative
/// magnitude `noise`. Rows from one call share the subspace.
pub fn low_rank_unit_vectors(n: usize, dim: usize, rank: usize, noise: f64, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis: Vec<Vec<f64>> = (0..rank).map(|_| gaussian_unit(&mut rng, dim)).collect();
    let keep = (1.0 - noise * noise).max(0.0).sqrt();
    let rows = (0..n).map(|i| {
        let mut signal = vec![0.0; dim];
        for b in &basis {
            let w: f64 = rng.sample(StandardNormal);
            signal.iter_mut().zip(b).for_each(|(s, x)| *s += w * x);
        }
        let signal = normalize(signal);
        let jitter = gaussian_unit(&mut rng, dim);
        let v = normalize(signal.iter().zip(&jitter).map(|(s, j)| keep * s + noise * j).collect());
        (format!("v{i}"), v.into_iter().map(|x| x as f32).collect::<Vec<f32>>())
    });
    EmbeddingMatrix::from_rows(dim, rows).expect("consistent rows")
}
