//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs without the libtest harness so the lines always print.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use artjudge::agent::{adjudicate_pair, AgentConfig, Backend, Role, ScriptedBackend};
use artjudge::bench::{always_yes, compute_metrics, heuristic_backends, run_arm, run_benchmark, BenchOptions, BenchmarkDataset, Confusion, MetricBundle, Switch, ThresholdMode};
use artjudge::iconclass::{alignment_metrics, code_distance, parse_graph, AlignmentLevel, CodeSet, ConceptGraph, DecayConfig};
use artjudge::manifold::{build_basis, build_basis_with_order, project, PoleAxis, AXIS_COUNT};
use artjudge::model::{Label, Tier, Verdict};
use artjudge::retrieval::{build_index, generate_candidates, recall_at_k, Backend as IndexBackend, IndexParams};
use artjudge::store::EmbeddingMatrix;
use artjudge::synth::{generate, low_rank_unit_vectors, random_taxonomy, SynthSpec};
use artjudge::tools::{biography_reader, CueCategory, ToolBody};
use artjudge::workspace::{ContextOptions, Workspace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(detail.into())
    }
}

fn within(name: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    check((got - want).abs() <= tol, format!("{name} = {got:.6}, expected {want} ± {tol}"))
}

fn mini() -> Workspace {
    Workspace::load(&common::fixture_dir()).expect("fixture loads")
}

fn synth_workspace(spec: &SynthSpec, dir: &Path) -> (artjudge::synth::SynthCorpus, Workspace) {
    let corpus = generate(spec).expect("synthetic corpus");
    corpus.write(dir).expect("workspace written");
    let ws = Workspace::load(dir).expect("synthetic workspace loads");
    (corpus, ws)
}

fn metric_oracle() -> Outcome {
    let m = MetricBundle::from_confusion(Confusion::new(860, 195, 805, 140), 0.5);
    within("precision", m.precision, 0.815, 1e-3)?;
    within("recall", m.recall, 0.860, 1e-3)?;
    within("specificity", m.specificity, 0.805, 1e-3)?;
    within("f1_pos", m.f1_pos, 0.837, 1e-3)?;
    within("mcc", m.mcc, 0.666, 1e-3)?;
    Ok(format!(
        "P={:.4} R={:.4} Spec={:.4} F1={:.4} MCC={:.4}",
        m.precision, m.recall, m.specificity, m.f1_pos, m.mcc
    ))
}

fn always_yes_bound() -> Outcome {
    let ws = mini();
    let labels: Vec<Label> = ws.pairs.iter().map(|p| p.label.expect("labeled")).collect();
    let m = compute_metrics(&always_yes(labels.len()), &labels).map_err(|e| e.to_string())?;
    within("precision", m.precision, 0.5, 1e-12)?;
    within("recall", m.recall, 1.0, 1e-12)?;
    within("specificity", m.specificity, 0.0, 1e-12)?;
    within("f1_pos", m.f1_pos, 2.0 / 3.0, 1e-12)?;
    within("macro_f1", m.macro_f1, 1.0 / 3.0, 1e-12)?;
    within("mcc", m.mcc, 0.0, 1e-12)?;
    Ok(format!("{} balanced pairs: F1={:.3} macroF1={:.3} MCC={:.3}", labels.len(), m.f1_pos, m.macro_f1, m.mcc))
}

fn temporal_tier() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (_, ws) = synth_workspace(&SynthSpec::temporal(), dir.path());
    let pairs: Vec<_> = ws
        .pairs
        .iter()
        .filter(|p| p.tier == Some(Tier::TemporalImpossible))
        .cloned()
        .collect();
    check(pairs.len() == 50, format!("fixture has {} impossible pairs", pairs.len()))?;
    let registry = ws.registry(ContextOptions::default()).map_err(|e| e.to_string())?;
    let controller = ScriptedBackend::heuristic(Role::Controller);
    let critic = ScriptedBackend::heuristic(Role::Critic);
    let mut rejected = 0;
    for p in &pairs {
        let t = adjudicate_pair(p, &registry, &controller, &critic, &AgentConfig::default());
        if t.verdict().is_some_and(|v| v.verdict == Verdict::No) {
            rejected += 1;
        }
    }
    let calls = controller.invocations() + critic.invocations();
    check(rejected == pairs.len(), format!("rejected {rejected}/{}", pairs.len()))?;
    check(calls == 0, format!("{calls} backend invocations"))?;
    Ok(format!("{rejected}/{} rejected, {calls} backend invocations", pairs.len()))
}

fn gamma_monotonicity() -> Outcome {
    let ws = mini();
    let dataset = BenchmarkDataset::new(ws.pairs.clone(), true).map_err(|e| e.to_string())?;
    let options = BenchOptions {
        threshold_mode: ThresholdMode::Fixed,
        ..BenchOptions::default()
    };
    let mut rows = Vec::new();
    for g in [0.0, 1.0, 2.0, 4.0] {
        let r = run_arm(&ws, &dataset, &options, &[Switch::Gamma(g)], &heuristic_backends).map_err(|e| e.to_string())?;
        rows.push((g, r.yes_count, r.overall.specificity, r.overall.recall));
    }
    for w in rows.windows(2) {
        let ((g0, y0, s0, r0), (g1, y1, s1, r1)) = (w[0], w[1]);
        check(y1 <= y0, format!("YES count rose from {y0} to {y1} between gamma {g0} and {g1}"))?;
        check(s1 >= s0, format!("specificity fell between gamma {g0} and {g1}"))?;
        check(r1 <= r0, format!("recall rose between gamma {g0} and {g1}"))?;
    }
    let detail: Vec<String> = rows
        .iter()
        .map(|(g, y, s, r)| format!("γ={g}: yes={y} spec={s:.3} rec={r:.3}"))
        .collect();
    Ok(detail.join("; "))
}

fn manifold_suite() -> Outcome {
    const DIM: usize = 512;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let gaussian = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..DIM).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()
    };
    let (mut worst_gram, mut worst_lin, mut worst_perm) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let axes: Vec<PoleAxis> = (0..AXIS_COUNT)
            .map(|i| PoleAxis::new(i, gaussian(&mut rng), gaussian(&mut rng)).expect("distinct poles"))
            .collect();
        let basis = build_basis(&axes).map_err(|e| e.to_string())?;
        worst_gram = worst_gram.max(basis.orthonormality_error());

        let (x, y) = (gaussian(&mut rng), gaussian(&mut rng));
        let (a, b) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let (px, py, pc) = (
            project(&x, &basis).map_err(|e| e.to_string())?,
            project(&y, &basis).map_err(|e| e.to_string())?,
            project(&combo, &basis).map_err(|e| e.to_string())?,
        );
        for k in 0..AXIS_COUNT {
            worst_lin = worst_lin.max((pc.0[k] - (a * px.0[k] + b * py.0[k])).abs());
        }

        let mut order: Vec<usize> = (0..AXIS_COUNT).collect();
        for i in (1..AXIS_COUNT).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let permuted = build_basis_with_order(&axes, &order).map_err(|e| e.to_string())?;
        let pp = project(&x, &permuted).map_err(|e| e.to_string())?;
        worst_perm = worst_perm.max((pp.norm() - px.norm()).abs());
    }
    check(worst_gram <= 1e-9, format!("Gram error {worst_gram:e}"))?;
    check(worst_lin <= 1e-7, format!("linearity error {worst_lin:e}"))?;
    check(worst_perm <= 1e-7, format!("permutation error {worst_perm:e}"))?;
    Ok(format!(
        "1000 draws: gram {worst_gram:.1e}, linearity {worst_lin:.1e}, permutation {worst_perm:.1e}"
    ))
}

fn retrieval_oracle() -> Outcome {
    // embedding-shaped data: 64-dimensional signal subspace, 20% isotropic noise;
    // the last 100 rows are held out as queries
    let all = low_rank_unit_vectors(10_100, 512, 64, 0.2, 99);
    let store = Arc::new(
        EmbeddingMatrix::from_rows(512, (0..10_000).map(|i| (all.ids()[i].clone(), all.row(i).to_vec())))
            .map_err(|e| e.to_string())?,
    );
    let queries: Vec<Vec<f32>> = (10_000..all.count()).map(|i| all.row(i).to_vec()).collect();
    let started = Instant::now();
    let index = build_index(Arc::clone(&store), IndexBackend::SmallWorldGraph, IndexParams::default()).map_err(|e| e.to_string())?;
    let build = started.elapsed().as_secs_f64();
    let recall = recall_at_k(&index, &queries, 10).map_err(|e| e.to_string())?;
    check(recall >= 0.95, format!("recall@10 = {recall:.4}"))?;

    let ws = mini();
    let params = ws.config.candidate_params();
    let mut sets = Vec::new();
    for backend in [IndexBackend::ExactScan, IndexBackend::SmallWorldGraph] {
        let idx = build_index(Arc::clone(&ws.visual), backend, ws.config.index_params()).map_err(|e| e.to_string())?;
        let pairs = generate_candidates(&ws.corpus, &idx, params).map_err(|e| e.to_string())?;
        sets.push(
            pairs
                .into_iter()
                .map(|p| (p.source_artist_id, p.target_artist_id))
                .collect::<BTreeSet<_>>(),
        );
    }
    let inter = sets[0].intersection(&sets[1]).count();
    let union = sets[0].union(&sets[1]).count();
    let jaccard = if union == 0 { 1.0 } else { inter as f64 / union as f64 };
    check(union > 0, "no candidates on the mini corpus")?;
    check(jaccard >= 0.9, format!("candidate Jaccard = {jaccard:.4}"))?;
    Ok(format!(
        "recall@10 = {recall:.4} over {} queries (build {build:.1}s), candidate Jaccard = {jaccard:.4} over {union} pairs",
        queries.len()
    ))
}

/// Parent lists recovered from the raw taxonomy text, independent of the parser.
fn oracle_parents(codes: &str, edges: &str) -> HashMap<String, Vec<String>> {
    let list: Vec<&str> = codes.lines().filter(|l| !l.is_empty()).collect();
    let known: HashSet<&str> = list.iter().copied().collect();
    let mut parents: HashMap<String, Vec<String>> = HashMap::new();
    for c in &list {
        let prefix = (1..c.len()).rev().map(|n| &c[..n]).find(|p| known.contains(p));
        parents.insert(c.to_string(), vec![prefix.unwrap_or("").to_string()]);
    }
    for line in edges.lines().filter(|l| !l.is_empty()) {
        let (c, p) = line.split_once(' ').expect("child parent");
        let ps = parents.get_mut(c).expect("known child");
        if !ps.iter().any(|x| x == p) {
            ps.push(p.to_string());
        }
    }
    for ps in parents.values_mut() {
        if ps.len() > 1 {
            ps.retain(|x| !x.is_empty());
        }
    }
    parents
}

fn upward_hops(code: &str, parents: &HashMap<String, Vec<String>>) -> HashMap<String, u32> {
    let mut hops = HashMap::from([(code.to_string(), 0)]);
    let mut queue = VecDeque::from([code.to_string()]);
    while let Some(n) = queue.pop_front() {
        let h = hops[&n];
        for p in parents.get(&n).into_iter().flatten() {
            if !hops.contains_key(p) {
                hops.insert(p.clone(), h + 1);
                queue.push_back(p.clone());
            }
        }
    }
    hops
}

/// Hop count between two codes in a pure tree: undirected BFS through the root.
fn undirected_hops(a: &str, b: &str, parents: &HashMap<String, Vec<String>>) -> u32 {
    let mut adj: HashMap<&str, Vec<&str>> = HashMap::new();
    for (c, ps) in parents {
        for p in ps {
            adj.entry(c).or_default().push(p);
            adj.entry(p).or_default().push(c);
        }
    }
    let mut dist = HashMap::from([(a, 0u32)]);
    let mut queue = VecDeque::from([a]);
    while let Some(n) = queue.pop_front() {
        if n == b {
            return dist[n];
        }
        for &m in adj.get(n).into_iter().flatten() {
            if !dist.contains_key(m) {
                dist.insert(m, dist[n] + 1);
                queue.push_back(m);
            }
        }
    }
    panic!("{a} and {b} are disconnected")
}

/// Shared-ancestor hop count for DAGs: deepest common ancestor (ties to the
/// smallest code), shortest upward hops from each side.
fn dag_hops(a: &str, b: &str, g: &ConceptGraph, parents: &HashMap<String, Vec<String>>) -> u32 {
    let (ua, ub) = (upward_hops(a, parents), upward_hops(b, parents));
    let depth = |c: &str| if c.is_empty() { 0 } else { g.depth(c).expect("known") };
    let lca = ua
        .keys()
        .filter(|c| ub.contains_key(*c))
        .max_by(|x, y| depth(x).cmp(&depth(y)).then(y.cmp(x)))
        .expect("root is shared");
    ua[lca] + ub[lca]
}

fn random_code_sets(g: &ConceptGraph, rng: &mut ChaCha8Rng, n: usize) -> (Vec<CodeSet>, Vec<CodeSet>) {
    let codes: Vec<&str> = g.codes().collect();
    let draw = |rng: &mut ChaCha8Rng| -> Vec<String> {
        (0..rng.gen_range(1..5)).map(|_| codes[rng.gen_range(0..codes.len())].to_string()).collect()
    };
    let mut pred = Vec::new();
    let mut gold = Vec::new();
    for i in 0..n {
        pred.push(CodeSet::new(format!("w{i}"), draw(rng)));
        gold.push(CodeSet::new(format!("w{i}"), draw(rng)));
    }
    (pred, gold)
}

fn concept_suite() -> Outcome {
    let unit = DecayConfig::new(1.0).expect("lambda 1");
    let decay = DecayConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (mut pairs_checked, mut dags) = (0usize, 0usize);
    for seed in 0..500u64 {
        let extra = if seed % 2 == 0 { 0 } else { 1 + (seed as usize % 7) };
        dags += usize::from(extra > 0);
        let (codes, edges) = random_taxonomy(seed, 20 + (seed as usize % 21), extra);
        let g = parse_graph(&codes, Some(&edges)).map_err(|e| format!("graph {seed}: {e}"))?;
        let parents = oracle_parents(&codes, &edges);
        let list: Vec<&str> = g.codes().collect();
        for (i, a) in list.iter().enumerate() {
            check(code_distance(a, a, &g, decay).unwrap() == 0.0, format!("graph {seed}: d({a},{a}) != 0"))?;
            for b in &list[i + 1..] {
                let ab = code_distance(a, b, &g, decay).unwrap();
                let ba = code_distance(b, a, &g, decay).unwrap();
                check(ab >= 0.0 && ab == ba, format!("graph {seed}: d({a},{b})={ab}, d({b},{a})={ba}"))?;
                let hops = code_distance(a, b, &g, unit).unwrap();
                let oracle = if extra == 0 {
                    undirected_hops(a, b, &parents)
                } else {
                    dag_hops(a, b, &g, &parents)
                };
                check(hops == oracle as f64, format!("graph {seed}: λ=1 d({a},{b})={hops}, oracle {oracle}"))?;
                pairs_checked += 1;
            }
        }
        let (pred, gold) = random_code_sets(&g, &mut rng, 12);
        let exact = alignment_metrics(&pred, &gold, &g, AlignmentLevel::ExactLeaf).unwrap();
        let anc = alignment_metrics(&pred, &gold, &g, AlignmentLevel::ANCESTOR_L3).unwrap();
        check(
            anc.precision >= exact.precision && anc.recall >= exact.recall,
            format!("graph {seed}: ancestor {anc:?} vs exact {exact:?}"),
        )?;
    }
    Ok(format!("500 graphs ({dags} with cross-links), {pairs_checked} code pairs"))
}

fn bench_files(ws: &Workspace) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let dataset = BenchmarkDataset::new(ws.pairs.clone(), true).map_err(|e| e.to_string())?;
    let registry = ws.registry(ContextOptions::default()).map_err(|e| e.to_string())?;
    let controller = ScriptedBackend::heuristic(Role::Controller);
    let critic = ScriptedBackend::heuristic(Role::Critic);
    let report = run_benchmark(&dataset, &registry, &controller, &critic, &BenchOptions::from_config(&ws.config))
        .map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    report.write(dir.path(), Some(&ws.config.to_toml())).map_err(|e| e.to_string())?;
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir.path()).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        files.insert(name, std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    Ok(files)
}

fn determinism() -> Outcome {
    let first = bench_files(&mini())?;
    let second = bench_files(&mini())?;
    check(first.contains_key("trajectories.jsonl"), format!("missing trajectory log in {:?}", first.keys()))?;
    check(first.keys().eq(second.keys()), "different file sets")?;
    for (name, bytes) in &first {
        check(second[name] == *bytes, format!("{name} differs between runs"))?;
    }
    let total: usize = first.values().map(Vec::len).sum();
    Ok(format!("{} files, {total} bytes identical", first.len()))
}

fn leakage() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (corpus, ws) = synth_workspace(&SynthSpec::leakage(), dir.path());
    check(corpus.planted_sentences == 100, format!("{} planted sentences", corpus.planted_sentences))?;
    let count = |masked: bool| -> Result<usize, String> {
        let registry = ws.registry(ContextOptions { masked, ..Default::default() }).map_err(|e| e.to_string())?;
        let mut n = 0;
        for p in ws.pairs.iter().filter(|p| p.label == Some(Label::Positive)) {
            let rec = biography_reader(registry.context(), p).map_err(|e| e.to_string())?;
            let ToolBody::BiographyReader(cues) = rec.body else {
                return Err("unexpected tool body".into());
            };
            n += cues.count(CueCategory::ExplicitReference);
        }
        Ok(n)
    };
    let (masked, open) = (count(true)?, count(false)?);
    check(open > 0, "unmasked reader finds no explicit references; the fixture is vacuous")?;
    check(masked == 0, format!("{masked} explicit references survive masking"))?;
    Ok(format!("masked: {masked} explicit cues; unmasked: {open}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("metric oracle", metric_oracle),
        ("always-YES lower bound", always_yes_bound),
        ("temporal-impossible tier", temporal_tier),
        ("critic-penalty monotonicity", gamma_monotonicity),
        ("manifold suite", manifold_suite),
        ("retrieval oracle", retrieval_oracle),
        ("concept-distance suite", concept_suite),
        ("end-to-end determinism", determinism),
        ("biography masking leakage", leakage),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {name} [{secs:.2}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} [{secs:.2}s]: {detail}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
