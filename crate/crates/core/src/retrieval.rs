//! Nearest-neighbour retrieval over visual embeddings and the candidate
//! proposal filter: cross-artist, cosine threshold, chronological gate.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Corpus, Lifespan};
use crate::store::{dot_f32, EmbeddingMatrix, StoreError};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("cannot index an empty matrix")]
    EmptyMatrix,
    #[error("matrix rows must be l2-normalized before indexing")]
    NotNormalized,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("unknown artist {0}")]
    UnknownArtist(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

pub type Result<T> = std::result::Result<T, RetrievalError>;

/// Outcome of the chronological feasibility check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateOutcome {
    pub passed: bool,
    pub reason: String,
}

pub const GATE_PASS: &str = "pass";
pub const GATE_PRECEDENCE: &str = "precedence violated";
pub const GATE_WINDOW: &str = "death before exposure window";

/// Source can influence target iff it was born no later than the target and
/// was still alive `delta` years before the target's birth.
pub fn timeline_gate(source: Lifespan, target: Lifespan, delta: i32) -> GateOutcome {
    let (passed, reason) = if source.birth > target.birth {
        (false, GATE_PRECEDENCE)
    } else if source.death < target.birth - delta {
        (false, GATE_WINDOW)
    } else {
        (true, GATE_PASS)
    };
    GateOutcome {
        passed,
        reason: reason.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Backend {
    ExactScan,
    #[default]
    SmallWorldGraph,
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "exact" | "exactscan" | "exact-scan" => Ok(Backend::ExactScan),
            "hnsw" | "smallworldgraph" | "small-world-graph" => Ok(Backend::SmallWorldGraph),
            other => Err(format!("unknown backend {other:?} (expected exact or hnsw)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexParams {
    /// Neighbours kept per node on upper layers; layer 0 keeps twice as many.
    pub m: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
    pub seed: u64,
}

impl Default for IndexParams {
    fn default() -> Self {
        Self {
            m: 32,
            ef_construction: 200,
            ef_search: 64,
            seed: 0x5eed,
        }
    }
}

/// A ranked hit: store id and cosine similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: String,
    pub cosine: f64,
}

pub struct VectorIndex {
    backend: Backend,
    params: IndexParams,
    matrix: Arc<EmbeddingMatrix>,
    graph: Option<SmallWorldGraph>,
}

impl std::fmt::Debug for VectorIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorIndex")
            .field("backend", &self.backend)
            .field("params", &self.params)
            .field("count", &self.matrix.count())
            .finish()
    }
}

pub fn build_index(
    matrix: Arc<EmbeddingMatrix>,
    backend: Backend,
    params: IndexParams,
) -> Result<VectorIndex> {
    if matrix.is_empty() {
        return Err(RetrievalError::EmptyMatrix);
    }
    if !matrix.is_normalized() {
        return Err(RetrievalError::NotNormalized);
    }
    let graph = match backend {
        Backend::ExactScan => None,
        Backend::SmallWorldGraph => Some(SmallWorldGraph::build(&matrix, params)),
    };
    Ok(VectorIndex {
        backend,
        params,
        matrix,
        graph,
    })
}

impl VectorIndex {
    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn matrix(&self) -> &EmbeddingMatrix {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.matrix.count()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    pub fn set_ef_search(&mut self, ef: usize) {
        self.params.ef_search = ef.max(1);
    }

    /// Top-`k` stored vectors by cosine, descending; ties by insertion order.
    pub fn query_topk(&self, query: &[f32], k: usize) -> Result<Vec<Hit>> {
        if query.len() != self.matrix.dim() {
            return Err(RetrievalError::DimMismatch {
                expected: self.matrix.dim(),
                found: query.len(),
            });
        }
        if k == 0 {
            return Err(RetrievalError::ZeroK);
        }
        let ranked = match &self.graph {
            None => exact_topk(&self.matrix, query, k),
            Some(g) => g.search(&self.matrix, query, k, self.params.ef_search.max(k)),
        };
        Ok(ranked
            .into_iter()
            .map(|(sim, i)| Hit {
                id: self.matrix.ids()[i as usize].clone(),
                cosine: sim as f64,
            })
            .collect())
    }

    pub fn query_id(&self, id: &str, k: usize) -> Result<Vec<Hit>> {
        let row = self.matrix.require(id)?;
        self.query_topk(row, k)
    }
}

fn rank(a: &(f32, u32), b: &(f32, u32)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

fn exact_topk(matrix: &EmbeddingMatrix, query: &[f32], k: usize) -> Vec<(f32, u32)> {
    let mut all: Vec<(f32, u32)> = (0..matrix.count())
        .map(|i| (dot_f32(query, matrix.row(i)), i as u32))
        .collect();
    let k = k.min(all.len());
    if k < all.len() {
        all.select_nth_unstable_by(k - 1, rank);
        all.truncate(k);
    }
    all.sort_by(rank);
    all
}

/// Distance/id pair ordered by distance, then id, for the search heaps.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Cand {
    dist: f32,
    id: u32,
}

impl Eq for Cand {}

impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Hierarchical navigable small-world graph over cosine distance `1 - dot`.
struct SmallWorldGraph {
    m: usize,
    m0: usize,
    /// `links[node][layer]` lists the node's neighbours on that layer.
    links: Vec<Vec<Vec<u32>>>,
    entry: u32,
    top_layer: usize,
}

struct Visited {
    marks: Vec<u32>,
    epoch: u32,
}

impl Visited {
    fn new(n: usize) -> Self {
        Self {
            marks: vec![0; n],
            epoch: 0,
        }
    }

    fn reset(&mut self) {
        self.epoch += 1;
    }

    /// Returns true the first time `id` is seen in the current epoch.
    fn insert(&mut self, id: u32) -> bool {
        let slot = &mut self.marks[id as usize];
        if *slot == self.epoch {
            false
        } else {
            *slot = self.epoch;
            true
        }
    }
}

impl SmallWorldGraph {
    fn build(matrix: &EmbeddingMatrix, params: IndexParams) -> Self {
        let n = matrix.count();
        let m = params.m.max(2);
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let level_mult = 1.0 / (m as f64).ln();
        let levels: Vec<usize> = (0..n)
            .map(|_| {
                let u: f64 = rng.gen_range(f64::EPSILON..1.0);
                (-u.ln() * level_mult).floor() as usize
            })
            .collect();
        let mut g = SmallWorldGraph {
            m,
            m0: 2 * m,
            links: levels.iter().map(|&l| vec![Vec::new(); l + 1]).collect(),
            entry: 0,
            top_layer: levels[0],
        };
        let mut visited = Visited::new(n);
        for (i, &level) in levels.iter().enumerate().skip(1) {
            g.insert(matrix, i as u32, level, params.ef_construction.max(m), &mut visited);
        }
        g
    }

    fn dist(matrix: &EmbeddingMatrix, q: &[f32], id: u32) -> f32 {
        1.0 - dot_f32(q, matrix.row(id as usize))
    }

    fn max_links(&self, layer: usize) -> usize {
        if layer == 0 {
            self.m0
        } else {
            self.m
        }
    }

    fn insert(&mut self, matrix: &EmbeddingMatrix, id: u32, level: usize, ef: usize, visited: &mut Visited) {
        let q = matrix.row(id as usize);
        let mut ep = Cand {
            dist: Self::dist(matrix, q, self.entry),
            id: self.entry,
        };
        for layer in (level + 1..=self.top_layer).rev() {
            ep = self.greedy(matrix, q, ep, layer);
        }
        let mut eps = vec![ep];
        for layer in (0..=level.min(self.top_layer)).rev() {
            let found = self.search_layer(matrix, q, &eps, ef, layer, visited);
            let chosen = self.select_neighbors(matrix, &found, self.m);
            self.links[id as usize][layer] = chosen.iter().map(|c| c.id).collect();
            for c in &chosen {
                self.connect(matrix, c.id, id, layer);
            }
            eps = found;
        }
        if level > self.top_layer {
            self.top_layer = level;
            self.entry = id;
        }
    }

    fn connect(&mut self, matrix: &EmbeddingMatrix, node: u32, new: u32, layer: usize) {
        let cap = self.max_links(layer);
        let list = &mut self.links[node as usize][layer];
        list.push(new);
        if list.len() <= cap {
            return;
        }
        let base = matrix.row(node as usize);
        let mut cands: Vec<Cand> = list
            .iter()
            .map(|&o| Cand {
                dist: Self::dist(matrix, base, o),
                id: o,
            })
            .collect();
        cands.sort();
        let kept = self.select_neighbors(matrix, &cands, cap);
        self.links[node as usize][layer] = kept.iter().map(|c| c.id).collect();
    }

    /// Diversity heuristic: keep a candidate only if it is closer to the base
    /// than to every already-kept neighbour, then top up with the closest rejects.
    fn select_neighbors(&self, matrix: &EmbeddingMatrix, sorted: &[Cand], m: usize) -> Vec<Cand> {
        let mut kept: Vec<Cand> = Vec::with_capacity(m);
        let mut rejected = Vec::new();
        for &c in sorted {
            if kept.len() >= m {
                break;
            }
            let row = matrix.row(c.id as usize);
            if kept.iter().all(|k| Self::dist(matrix, row, k.id) > c.dist) {
                kept.push(c);
            } else {
                rejected.push(c);
            }
        }
        for c in rejected {
            if kept.len() >= m {
                break;
            }
            kept.push(c);
        }
        kept
    }

    fn greedy(&self, matrix: &EmbeddingMatrix, q: &[f32], mut cur: Cand, layer: usize) -> Cand {
        loop {
            let mut improved = false;
            for &nb in &self.links[cur.id as usize][layer] {
                let d = Self::dist(matrix, q, nb);
                let cand = Cand { dist: d, id: nb };
                if cand < cur {
                    cur = cand;
                    improved = true;
                }
            }
            if !improved {
                return cur;
            }
        }
    }

    /// Best-first beam search on one layer; returns up to `ef` results, closest first.
    fn search_layer(
        &self,
        matrix: &EmbeddingMatrix,
        q: &[f32],
        entry: &[Cand],
        ef: usize,
        layer: usize,
        visited: &mut Visited,
    ) -> Vec<Cand> {
        visited.reset();
        let mut frontier: BinaryHeap<std::cmp::Reverse<Cand>> = BinaryHeap::new();
        let mut best: BinaryHeap<Cand> = BinaryHeap::new();
        for &e in entry {
            if visited.insert(e.id) {
                frontier.push(std::cmp::Reverse(e));
                best.push(e);
            }
        }
        while best.len() > ef {
            best.pop();
        }
        while let Some(std::cmp::Reverse(c)) = frontier.pop() {
            let worst = best.peek().copied().expect("non-empty");
            if c > worst && best.len() >= ef {
                break;
            }
            for &nb in &self.links[c.id as usize][layer] {
                if !visited.insert(nb) {
                    continue;
                }
                let cand = Cand {
                    dist: Self::dist(matrix, q, nb),
                    id: nb,
                };
                if best.len() < ef || cand < *best.peek().expect("non-empty") {
                    frontier.push(std::cmp::Reverse(cand));
                    best.push(cand);
                    if best.len() > ef {
                        best.pop();
                    }
                }
            }
        }
        best.into_sorted_vec()
    }

    fn search(&self, matrix: &EmbeddingMatrix, q: &[f32], k: usize, ef: usize) -> Vec<(f32, u32)> {
        let mut visited = Visited::new(matrix.count());
        let mut ep = Cand {
            dist: Self::dist(matrix, q, self.entry),
            id: self.entry,
        };
        for layer in (1..=self.top_layer).rev() {
            ep = self.greedy(matrix, q, ep, layer);
        }
        let found = self.search_layer(matrix, q, &[ep], ef, 0, &mut visited);
        let mut out: Vec<(f32, u32)> = found
            .into_iter()
            .map(|c| (dot_f32(q, matrix.row(c.id as usize)), c.id))
            .collect();
        out.sort_by(rank);
        out.truncate(k);
        out
    }
}

/// Mean recall@k of `index` against exact search over the same matrix.
pub fn recall_at_k(index: &VectorIndex, queries: &[Vec<f32>], k: usize) -> Result<f64> {
    let exact = build_index(index.matrix.clone(), Backend::ExactScan, index.params)?;
    let mut total = 0.0;
    for q in queries {
        let truth: std::collections::HashSet<String> =
            exact.query_topk(q, k)?.into_iter().map(|h| h.id).collect();
        let got = index.query_topk(q, k)?;
        total += got.iter().filter(|h| truth.contains(&h.id)).count() as f64 / truth.len() as f64;
    }
    Ok(total / queries.len().max(1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    #[serde(rename = "source")]
    pub source_artist_id: String,
    #[serde(rename = "target")]
    pub target_artist_id: String,
    pub seed_similarity: f64,
    /// `(source artwork, target artwork)` realizing the seed similarity.
    #[serde(rename = "witness")]
    pub witness_artworks: (String, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateParams {
    pub k: usize,
    pub gamma_v: f64,
    pub delta_years: i32,
}

impl Default for CandidateParams {
    fn default() -> Self {
        Self {
            k: 10,
            gamma_v: 0.70,
            delta_years: 20,
        }
    }
}

/// Proposes directed artist pairs from each artwork's top-`k` cross-artist
/// neighbours. Output is sorted by `(source, target)`.
pub fn generate_candidates(
    corpus: &Corpus,
    index: &VectorIndex,
    params: CandidateParams,
) -> Result<Vec<CandidatePair>> {
    let by_key: HashMap<&str, usize> = corpus
        .artworks
        .iter()
        .enumerate()
        .map(|(i, a)| (a.embedding_key.as_str(), i))
        .collect();

    // (anchor artwork, neighbour artwork, cosine), per anchor in corpus order
    let hits: Vec<Vec<(usize, usize, f64)>> = corpus
        .artworks
        .par_iter()
        .enumerate()
        .map(|(ai, art)| -> Result<Vec<(usize, usize, f64)>> {
            let Some(row) = index.matrix().get(&art.embedding_key) else {
                return Ok(Vec::new());
            };
            let found = index.query_topk(row, params.k + 1)?;
            Ok(found
                .into_iter()
                .filter(|h| h.id != art.embedding_key)
                .take(params.k)
                .filter_map(|h| by_key.get(h.id.as_str()).map(|&bi| (ai, bi, h.cosine)))
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut best: BTreeMap<(String, String), CandidatePair> = BTreeMap::new();
    for (ai, bi, cos) in hits.into_iter().flatten() {
        let (a, b) = (&corpus.artworks[ai], &corpus.artworks[bi]);
        if a.artist_id == b.artist_id || cos < params.gamma_v {
            continue;
        }
        let (Some(artist_a), Some(artist_b)) = (corpus.artist(&a.artist_id), corpus.artist(&b.artist_id)) else {
            continue;
        };
        for (src, tgt, ws, wt) in [(artist_a, artist_b, a, b), (artist_b, artist_a, b, a)] {
            if !timeline_gate(src.lifespan(), tgt.lifespan(), params.delta_years).passed {
                continue;
            }
            let key = (src.artist_id.clone(), tgt.artist_id.clone());
            let replace = best.get(&key).is_none_or(|c| cos > c.seed_similarity);
            if replace {
                best.insert(
                    key,
                    CandidatePair {
                        source_artist_id: src.artist_id.clone(),
                        target_artist_id: tgt.artist_id.clone(),
                        seed_similarity: cos,
                        witness_artworks: (ws.artwork_id.clone(), wt.artwork_id.clone()),
                    },
                );
            }
        }
    }
    Ok(best.into_values().collect())
}

/// Brute-force maximum cosine over the full portfolio cross product, with the
/// witnessing artwork pair.
pub fn exact_seed_similarity(
    corpus: &Corpus,
    store: &EmbeddingMatrix,
    source: &str,
    target: &str,
) -> Result<Option<(f64, (String, String))>> {
    for id in [source, target] {
        if corpus.artist(id).is_none() {
            return Err(RetrievalError::UnknownArtist(id.to_string()));
        }
    }
    let mut best: Option<(f64, (String, String))> = None;
    for a in corpus.portfolio(source) {
        let Some(za) = store.get(&a.embedding_key) else { continue };
        for b in corpus.portfolio(target) {
            let Some(zb) = store.get(&b.embedding_key) else { continue };
            let c = crate::store::cosine(za, zb)?;
            if best.as_ref().is_none_or(|(s, _)| c > *s) {
                best = Some((c, (a.artwork_id.clone(), b.artwork_id.clone())));
            }
        }
    }
    Ok(best)
}

/// Re-checks every emitted pair against the three promotion conditions and
/// returns a description of each violation.
pub fn audit_candidates(
    corpus: &Corpus,
    store: &EmbeddingMatrix,
    pairs: &[CandidatePair],
    params: CandidateParams,
) -> Vec<String> {
    let mut violations = Vec::new();
    for p in pairs {
        let key = format!("{}->{}", p.source_artist_id, p.target_artist_id);
        if p.source_artist_id == p.target_artist_id {
            violations.push(format!("{key}: self pair"));
        }
        if p.seed_similarity < params.gamma_v {
            violations.push(format!("{key}: similarity {} below threshold", p.seed_similarity));
        }
        match (corpus.artist(&p.source_artist_id), corpus.artist(&p.target_artist_id)) {
            (Some(s), Some(t)) => {
                if !timeline_gate(s.lifespan(), t.lifespan(), params.delta_years).passed {
                    violations.push(format!("{key}: fails timeline gate"));
                }
            }
            _ => violations.push(format!("{key}: unknown artist")),
        }
        let (ws, wt) = &p.witness_artworks;
        match (corpus.artwork(ws), corpus.artwork(wt)) {
            (Some(a), Some(b)) if a.artist_id == p.source_artist_id && b.artist_id == p.target_artist_id => {
                if let (Some(za), Some(zb)) = (store.get(&a.embedding_key), store.get(&b.embedding_key)) {
                    let c = crate::store::dot(za, zb);
                    if (c - p.seed_similarity).abs() > 1e-4 {
                        violations.push(format!("{key}: witness cosine {c} != seed {}", p.seed_similarity));
                    }
                }
            }
            _ => violations.push(format!("{key}: witness does not belong to the pair")),
        }
    }
    violations
}
