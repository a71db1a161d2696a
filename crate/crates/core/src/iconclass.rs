//! ICONCLASS-style concept DAG: parsing, hierarchical normalization of code
//! sets, topology-aware distances and code-alignment metrics.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Code string of the virtual super-root joining all top-level branches.
pub const ROOT: &str = "";

#[derive(Debug, Error)]
pub enum ConceptError {
    #[error("cycle through code {0}")]
    Cycle(String),
    #[error("edge references unknown code {0}")]
    OrphanCode(String),
    #[error("unknown code {0}")]
    UnknownCode(String),
    #[error("empty code set")]
    EmptySet,
    #[error("misaligned lists: {0}")]
    MisalignedLists(String),
    #[error("decay factor must lie in (0, 1], got {0}")]
    InvalidDecay(f64),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, ConceptError>;

#[derive(Debug, Clone, PartialEq)]
pub struct ConceptGraph {
    codes: Vec<String>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    depth: Vec<u32>,
}

impl ConceptGraph {
    pub fn len(&self) -> usize {
        self.codes.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, code: &str) -> bool {
        code != ROOT && self.index.contains_key(code)
    }

    /// All codes except the virtual root, in input order.
    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.codes[1..].iter().map(String::as_str)
    }

    pub fn depth(&self, code: &str) -> Result<u32> {
        Ok(self.depth[self.id(code)?])
    }

    pub fn parents(&self, code: &str) -> Result<Vec<&str>> {
        Ok(self.parents[self.id(code)?]
            .iter()
            .map(|&p| self.codes[p].as_str())
            .collect())
    }

    /// Child -> parent edges, including edges into the virtual root.
    pub fn edges(&self) -> Vec<(&str, &str)> {
        let mut out = Vec::new();
        for (c, ps) in self.parents.iter().enumerate().skip(1) {
            for &p in ps {
                out.push((self.codes[c].as_str(), self.codes[p].as_str()));
            }
        }
        out
    }

    fn id(&self, code: &str) -> Result<usize> {
        if code == ROOT {
            return Ok(0);
        }
        self.index
            .get(code)
            .copied()
            .ok_or_else(|| ConceptError::UnknownCode(code.to_string()))
    }

    /// Every ancestor of `node` (itself included) with its shortest upward hop count.
    fn ancestors_of(&self, node: usize) -> HashMap<usize, u32> {
        let mut hops = HashMap::new();
        hops.insert(node, 0);
        let mut queue = VecDeque::from([node]);
        while let Some(n) = queue.pop_front() {
            let h = hops[&n];
            for &p in &self.parents[n] {
                if let std::collections::hash_map::Entry::Vacant(e) = hops.entry(p) {
                    e.insert(h + 1);
                    queue.push_back(p);
                }
            }
        }
        hops
    }

    /// Ancestors of `code` (inclusive) whose depth is at least `min_level`.
    pub fn ancestors_at_or_below(&self, code: &str, min_level: u32) -> Result<BTreeSet<&str>> {
        let id = self.id(code)?;
        Ok(self
            .ancestors_of(id)
            .into_keys()
            .filter(|&a| a != 0 && self.depth[a] >= min_level)
            .map(|a| self.codes[a].as_str())
            .collect())
    }

    /// Deepest common ancestor; ties go to the lexicographically smallest code.
    pub fn lowest_common_ancestor(&self, a: &str, b: &str) -> Result<&str> {
        let (ia, ib) = (self.id(a)?, self.id(b)?);
        let (lca, _, _) = self.lca_with_hops(ia, ib);
        Ok(self.codes[lca].as_str())
    }

    fn lca_with_hops(&self, a: usize, b: usize) -> (usize, u32, u32) {
        let up_a = self.ancestors_of(a);
        let up_b = self.ancestors_of(b);
        let mut best: Option<usize> = None;
        for (&n, _) in up_a.iter().filter(|(n, _)| up_b.contains_key(n)) {
            best = match best {
                None => Some(n),
                Some(cur) => {
                    let better = self.depth[n] > self.depth[cur]
                        || (self.depth[n] == self.depth[cur] && self.codes[n] < self.codes[cur]);
                    Some(if better { n } else { cur })
                }
            };
        }
        // the virtual root is a common ancestor of everything
        let lca = best.unwrap_or(0);
        (lca, up_a[&lca], up_b[&lca])
    }
}

/// Parses a code list (one code per line, `#` comments) and an optional edge
/// list of `child parent` lines for relations the prefix structure misses.
pub fn parse_graph(code_list: &str, extra_edges: Option<&str>) -> Result<ConceptGraph> {
    let mut codes = vec![ROOT.to_string()];
    let mut index = HashMap::new();
    for line in code_list.lines() {
        let code = line.trim();
        if code.is_empty() || code.starts_with('#') {
            continue;
        }
        if !index.contains_key(code) {
            index.insert(code.to_string(), codes.len());
            codes.push(code.to_string());
        }
    }

    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); codes.len()];
    for (i, code) in codes.iter().enumerate().skip(1) {
        // longest proper prefix present in the list
        let parent = code
            .char_indices()
            .map(|(pos, _)| &code[..pos])
            .rev()
            .find_map(|prefix| index.get(prefix).copied())
            .unwrap_or(0);
        parents[i].push(parent);
    }

    if let Some(edges) = extra_edges {
        for (n, line) in edges.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(child), Some(parent), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(ConceptError::Parse {
                    line: n + 1,
                    message: "expected `child parent`".into(),
                });
            };
            let c = *index
                .get(child)
                .ok_or_else(|| ConceptError::OrphanCode(child.to_string()))?;
            let p = *index
                .get(parent)
                .ok_or_else(|| ConceptError::OrphanCode(parent.to_string()))?;
            if c == p {
                return Err(ConceptError::Cycle(child.to_string()));
            }
            if !parents[c].contains(&p) {
                parents[c].push(p);
            }
        }
    }

    // an explicit edge makes the prefix-root fallback redundant
    for ps in parents.iter_mut().skip(1) {
        if ps.len() > 1 {
            ps.retain(|&p| p != 0);
        }
    }

    check_acyclic(&codes, &parents)?;
    let depth = depths(&parents);
    Ok(ConceptGraph {
        codes,
        index,
        parents,
        depth,
    })
}

pub fn read_graph(code_path: &Path, edge_path: Option<&Path>) -> Result<ConceptGraph> {
    let codes = fs::read_to_string(code_path)?;
    let edges = edge_path.map(fs::read_to_string).transpose()?;
    parse_graph(&codes, edges.as_deref())
}

fn check_acyclic(codes: &[String], parents: &[Vec<usize>]) -> Result<()> {
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; codes.len()];
    for start in 0..codes.len() {
        if state[start] != 0 {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        state[start] = 1;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if let Some(&p) = parents[node].get(*next) {
                *next += 1;
                match state[p] {
                    0 => {
                        state[p] = 1;
                        stack.push((p, 0));
                    }
                    1 => return Err(ConceptError::Cycle(codes[p].clone())),
                    _ => {}
                }
            } else {
                state[node] = 2;
                stack.pop();
            }
        }
    }
    Ok(())
}

/// Shortest hop count from the virtual root.
fn depths(parents: &[Vec<usize>]) -> Vec<u32> {
    let mut children = vec![Vec::new(); parents.len()];
    for (c, ps) in parents.iter().enumerate() {
        for &p in ps {
            children[p].push(c);
        }
    }
    let mut depth = vec![u32::MAX; parents.len()];
    depth[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(n) = queue.pop_front() {
        for &c in &children[n] {
            if depth[c] == u32::MAX {
                depth[c] = depth[n] + 1;
                queue.push_back(c);
            }
        }
    }
    depth
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSet {
    pub artwork_id: String,
    pub codes: BTreeSet<String>,
}

impl CodeSet {
    pub fn new<I, S>(artwork_id: impl Into<String>, codes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            artwork_id: artwork_id.into(),
            codes: codes.into_iter().map(Into::into).collect(),
        }
    }
}

pub fn read_code_sets(path: &Path) -> Result<Vec<CodeSet>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ConceptError::Parse {
            line: n + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_code_sets(sets: &[CodeSet], path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    for s in sets {
        writeln!(f, "{}", serde_json::to_string(s).expect("code set serializes"))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayConfig {
    pub lambda: f64,
}

impl DecayConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        if lambda > 0.0 && lambda <= 1.0 {
            Ok(Self { lambda })
        } else {
            Err(ConceptError::InvalidDecay(lambda))
        }
    }
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self { lambda: 0.8 }
    }
}

/// Adds every ancestor of depth `>= min_level` to the set.
pub fn normalize_codes(codes: &CodeSet, graph: &ConceptGraph, min_level: u32) -> Result<CodeSet> {
    let mut out = codes.codes.clone();
    for code in &codes.codes {
        out.extend(
            graph
                .ancestors_at_or_below(code, min_level)?
                .into_iter()
                .map(str::to_string),
        );
    }
    Ok(CodeSet {
        artwork_id: codes.artwork_id.clone(),
        codes: out,
    })
}

/// Path length through the deepest common ancestor, discounted by
/// `lambda^depth(lca)` so that deeper shared concepts count as closer.
pub fn code_distance(a: &str, b: &str, graph: &ConceptGraph, decay: DecayConfig) -> Result<f64> {
    let (ia, ib) = (graph.id(a)?, graph.id(b)?);
    if ia == ib {
        return Ok(0.0);
    }
    let (lca, up, down) = graph.lca_with_hops(ia, ib);
    Ok((up + down) as f64 * decay.lambda.powi(graph.depth[lca] as i32))
}

/// One-sided chamfer distance: mean over `from` of the nearest code in `to`.
pub fn directed_set_distance(
    from: &BTreeSet<String>,
    to: &BTreeSet<String>,
    graph: &ConceptGraph,
    decay: DecayConfig,
) -> Result<f64> {
    if from.is_empty() || to.is_empty() {
        return Err(ConceptError::EmptySet);
    }
    let mut total = 0.0;
    for c in from {
        let mut best = f64::INFINITY;
        for d in to {
            best = best.min(code_distance(c, d, graph, decay)?);
        }
        total += best;
    }
    Ok(total / from.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlignmentLevel {
    /// Exact code equality.
    ExactLeaf,
    /// Exact equality or a shared ancestor at depth `>= min_depth`.
    Ancestor { min_depth: u32 },
}

impl AlignmentLevel {
    pub const ANCESTOR_L3: AlignmentLevel = AlignmentLevel::Ancestor { min_depth: 3 };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Micro-averaged precision, recall and F1 of predicted codes against gold codes.
pub fn alignment_metrics(
    predicted: &[CodeSet],
    gold: &[CodeSet],
    graph: &ConceptGraph,
    level: AlignmentLevel,
) -> Result<AlignmentScores> {
    if predicted.len() != gold.len() {
        return Err(ConceptError::MisalignedLists(format!(
            "{} predicted vs {} gold",
            predicted.len(),
            gold.len()
        )));
    }
    let (mut pred_hit, mut pred_total, mut gold_hit, mut gold_total) = (0usize, 0usize, 0usize, 0usize);
    for (p, g) in predicted.iter().zip(gold) {
        if p.artwork_id != g.artwork_id {
            return Err(ConceptError::MisalignedLists(format!(
                "{} vs {}",
                p.artwork_id, g.artwork_id
            )));
        }
        let matcher = Matcher::new(graph, level, &p.codes, &g.codes)?;
        pred_total += p.codes.len();
        gold_total += g.codes.len();
        pred_hit += p.codes.iter().filter(|c| matcher.matches(c, &g.codes)).count();
        gold_hit += g.codes.iter().filter(|c| matcher.matches(c, &p.codes)).count();
    }
    let precision = ratio(pred_hit, pred_total);
    let recall = ratio(gold_hit, gold_total);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(AlignmentScores {
        precision,
        recall,
        f1,
    })
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

struct Matcher<'g> {
    level: AlignmentLevel,
    ancestors: BTreeMap<&'g str, BTreeSet<&'g str>>,
}

impl<'g> Matcher<'g> {
    fn new(
        graph: &'g ConceptGraph,
        level: AlignmentLevel,
        a: &'g BTreeSet<String>,
        b: &'g BTreeSet<String>,
    ) -> Result<Self> {
        let mut ancestors = BTreeMap::new();
        for code in a.iter().chain(b) {
            if !graph.contains(code) {
                return Err(ConceptError::UnknownCode(code.clone()));
            }
            if let AlignmentLevel::Ancestor { min_depth } = level {
                ancestors.insert(code.as_str(), graph.ancestors_at_or_below(code, min_depth)?);
            }
        }
        Ok(Self { level, ancestors })
    }

    fn matches(&self, code: &str, others: &BTreeSet<String>) -> bool {
        if others.contains(code) {
            return true;
        }
        match self.level {
            AlignmentLevel::ExactLeaf => false,
            AlignmentLevel::Ancestor { .. } => {
                let mine = &self.ancestors[code];
                others
                    .iter()
                    .any(|o| !mine.is_disjoint(&self.ancestors[o.as_str()]))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> ConceptGraph {
        parse_graph("7\n73\n73D\n73D1\n", None).unwrap()
    }

    fn set(codes: &[&str]) -> BTreeSet<String> {
        codes.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn prefix_chain_depths() {
        let g = chain();
        for (code, d) in [("7", 1), ("73", 2), ("73D", 3), ("73D1", 4)] {
            assert_eq!(g.depth(code).unwrap(), d);
        }
        assert_eq!(g.parents("73D1").unwrap(), vec!["73D"]);
        assert_eq!(g.parents("7").unwrap(), vec![ROOT]);
    }

    #[test]
    fn cycle_is_rejected() {
        let err = parse_graph("a\nb\n", Some("a b\nb a\n")).unwrap_err();
        assert!(matches!(err, ConceptError::Cycle(_)));
    }

    #[test]
    fn orphan_edge_is_rejected() {
        let err = parse_graph("a\n", Some("a zz\n")).unwrap_err();
        assert!(matches!(err, ConceptError::OrphanCode(ref c) if c == "zz"));
    }

    #[test]
    fn empty_source_gives_root_only() {
        let g = parse_graph("", None).unwrap();
        assert!(g.is_empty());
        assert!(g.edges().is_empty());
    }

    #[test]
    fn normalization_examples() {
        let g = chain();
        let out = normalize_codes(&CodeSet::new("w", ["73D1"]), &g, 3).unwrap();
        assert_eq!(out.codes, set(&["73D1", "73D"]));
        let out = normalize_codes(&CodeSet::new("w", ["73"]), &g, 3).unwrap();
        assert_eq!(out.codes, set(&["73"]));
        let empty: [&str; 0] = [];
        assert!(normalize_codes(&CodeSet::new("w", empty), &g, 3).unwrap().codes.is_empty());
        assert!(matches!(
            normalize_codes(&CodeSet::new("w", ["99"]), &g, 3),
            Err(ConceptError::UnknownCode(_))
        ));
    }

    #[test]
    fn normalization_is_idempotent() {
        let g = parse_graph("1\n11\n11A\n11A2\n11B\n2\n25\n25F\n25F3\n", None).unwrap();
        let s = CodeSet::new("w", ["11A2", "25F3", "2"]);
        let once = normalize_codes(&s, &g, 2).unwrap();
        assert!(once.codes.is_superset(&s.codes));
        assert_eq!(normalize_codes(&once, &g, 2).unwrap(), once);
    }

    #[test]
    fn distance_examples() {
        let g = chain();
        let decay = DecayConfig::new(0.8).unwrap();
        assert_eq!(code_distance("73D", "73D", &g, decay).unwrap(), 0.0);
        let d = code_distance("73D1", "73D", &g, decay).unwrap();
        assert!((d - 0.512).abs() < 1e-12);
        assert_eq!(d, code_distance("73D", "73D1", &g, decay).unwrap());

        let two = parse_graph("1\n11\n11A\n2\n25\n", None).unwrap();
        let flat = DecayConfig::new(1.0).unwrap();
        // 11A -> 11 -> 1 -> root -> 2 -> 25
        assert_eq!(code_distance("11A", "25", &two, flat).unwrap(), 5.0);
        assert_eq!(two.lowest_common_ancestor("11A", "25").unwrap(), ROOT);
    }

    #[test]
    fn multi_parent_lca_prefers_deepest_then_smallest() {
        let g = parse_graph("1\n11\n2\n22\nX\n", Some("X 11\nX 22\n")).unwrap();
        assert_eq!(g.depth("X").unwrap(), 3);
        // 11 and 22 share depth 2: the tie resolves to "11"
        assert_eq!(g.lowest_common_ancestor("X", "X").unwrap(), "X");
        let g2 = parse_graph("1\n11\n2\n22\nX\nY\n", Some("X 11\nX 22\nY 11\nY 22\n")).unwrap();
        assert_eq!(g2.lowest_common_ancestor("X", "Y").unwrap(), "11");
    }

    #[test]
    fn set_distance_examples() {
        let g = chain();
        let decay = DecayConfig::default();
        let a = set(&["73D1", "73"]);
        assert_eq!(directed_set_distance(&a, &a, &g, decay).unwrap(), 0.0);
        assert_eq!(
            directed_set_distance(&set(&["73D1"]), &set(&["73D"]), &g, decay).unwrap(),
            code_distance("73D1", "73D", &g, decay).unwrap()
        );
        // 73 vs 73D: lca 73 at depth 2, one hop -> 0.8^2
        let expected = (0.512 + 0.64) / 2.0;
        let got = directed_set_distance(&a, &set(&["73D"]), &g, decay).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!(matches!(
            directed_set_distance(&BTreeSet::new(), &a, &g, decay),
            Err(ConceptError::EmptySet)
        ));
    }

    #[test]
    fn alignment_examples() {
        let g = chain();
        let gold = vec![CodeSet::new("w", ["73D1"])];
        for level in [AlignmentLevel::ExactLeaf, AlignmentLevel::ANCESTOR_L3] {
            let s = alignment_metrics(&gold, &gold, &g, level).unwrap();
            assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        }
        let pred = vec![CodeSet::new("w", ["73D"])];
        let exact = alignment_metrics(&pred, &gold, &g, AlignmentLevel::ExactLeaf).unwrap();
        assert_eq!((exact.precision, exact.recall, exact.f1), (0.0, 0.0, 0.0));
        let anc = alignment_metrics(&pred, &gold, &g, AlignmentLevel::ANCESTOR_L3).unwrap();
        assert_eq!((anc.precision, anc.recall, anc.f1), (1.0, 1.0, 1.0));

        let other = vec![CodeSet::new("v", ["73D"])];
        assert!(matches!(
            alignment_metrics(&other, &gold, &g, AlignmentLevel::ExactLeaf),
            Err(ConceptError::MisalignedLists(_))
        ));
        assert!(alignment_metrics(&[], &gold, &g, AlignmentLevel::ExactLeaf).is_err());
    }

    #[test]
    fn code_sets_round_trip_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("codes.jsonl");
        let sets = vec![CodeSet::new("a", ["73D1", "7"]), CodeSet::new("b", ["73"])];
        write_code_sets(&sets, &path).unwrap();
        assert_eq!(read_code_sets(&path).unwrap(), sets);
    }
}
