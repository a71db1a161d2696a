//! Benchmark harness: datasets, stratified folds, the metric suite,
//! tier-stratified rejection, the Always-YES baseline, full runs and
//! ablations.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{adjudicate_pair, AgentConfig, Backend, BackendError, Outcome, Role, Trajectory};
use crate::model::{derive_verdict, DirectedPair, Label, Tier, Verdict};
use crate::tools::{ToolName, ToolRegistry};
use crate::workspace::{read_pairs, ContextOptions, Workspace, WorkspaceError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unbalanced dataset: {positives} positives vs {negatives} negatives")]
    Imbalance { positives: usize, negatives: usize },
    #[error("cannot stratify: {0}")]
    Stratification(String),
    #[error("length mismatch: {0} predictions vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("negative pair {0} has no tier")]
    MissingTier(String),
    #[error("pair {0} has no label")]
    Unlabeled(String),
    #[error("invalid pair: {0}")]
    InvalidPair(String),
    #[error("unknown ablation switch {0:?}")]
    UnknownSwitch(String),
    #[error("backend: {0}")]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("thread pool: {0}")]
    Pool(String),
}

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkDataset {
    pub pairs: Vec<DirectedPair>,
    pub positives: usize,
    pub negatives: usize,
    pub tier_counts: BTreeMap<Tier, usize>,
}

impl BenchmarkDataset {
    /// Every pair must be labeled and well-formed; `balanced` demands equal
    /// class counts.
    pub fn new(pairs: Vec<DirectedPair>, balanced: bool) -> Result<Self> {
        let mut positives = 0;
        let mut negatives = 0;
        let mut tier_counts = BTreeMap::new();
        for p in &pairs {
            p.check().map_err(BenchError::InvalidPair)?;
            match p.label {
                Some(Label::Positive) => positives += 1,
                Some(Label::Negative) => {
                    negatives += 1;
                    if let Some(t) = p.tier {
                        *tier_counts.entry(t).or_insert(0) += 1;
                    }
                }
                None => return Err(BenchError::Unlabeled(p.key())),
            }
        }
        if balanced && positives != negatives {
            return Err(BenchError::Imbalance { positives, negatives });
        }
        Ok(Self {
            pairs,
            positives,
            negatives,
            tier_counts,
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.pairs.iter().map(|p| p.label.expect("validated")).collect()
    }
}

/// Loads a JSON Lines or JSON pairs file.
pub fn load_dataset(path: &Path, balanced: bool) -> Result<BenchmarkDataset> {
    BenchmarkDataset::new(read_pairs(path)?, balanced)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub k: usize,
    pub seed: u64,
    /// Fold index per dataset pair, aligned with `dataset.pairs`.
    pub assignments: Vec<usize>,
}

impl FoldSpec {
    pub fn members(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        (0..self.k).map(|f| self.members(f).len()).collect()
    }
}

fn stratum(p: &DirectedPair) -> (Label, Option<Tier>) {
    (p.label.expect("validated"), p.tier)
}

/// Seeded stratified assignment: each (label, tier) stratum is shuffled and
/// dealt round-robin, continuing the dealer position across strata so fold
/// sizes differ by at most one.
pub fn make_folds(dataset: &BenchmarkDataset, k: usize, seed: u64) -> Result<FoldSpec> {
    if k < 2 {
        return Err(BenchError::Stratification(format!("need at least 2 folds, got {k}")));
    }
    let mut strata: BTreeMap<(Label, Option<Tier>), Vec<usize>> = BTreeMap::new();
    for (i, p) in dataset.pairs.iter().enumerate() {
        strata.entry(stratum(p)).or_default().push(i);
    }
    for (key, members) in &strata {
        if members.len() < k {
            return Err(BenchError::Stratification(format!(
                "stratum {key:?} has {} pairs, fewer than {k} folds",
                members.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0; dataset.len()];
    let mut dealer = 0;
    for members in strata.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assignments[i] = dealer % k;
            dealer += 1;
        }
    }
    Ok(FoldSpec { k, seed, assignments })
}

/// Checks the per-fold class and tier proportions. Tolerances are widened to
/// one pair's share of a fold when folds are too small to meet them exactly.
pub fn check_stratification(dataset: &BenchmarkDataset, folds: &FoldSpec) -> Result<()> {
    let n = dataset.len() as f64;
    let global_pos = dataset.positives as f64 / n;
    for f in 0..folds.k {
        let members = folds.members(f);
        let size = members.len() as f64;
        let slack = 1.0 / size;
        let pos = members
            .iter()
            .filter(|&&i| dataset.pairs[i].label == Some(Label::Positive))
            .count() as f64;
        if (pos / size - global_pos).abs() > 0.02f64.max(slack) + 1e-12 {
            return Err(BenchError::Stratification(format!(
                "fold {f}: positive ratio {:.3} vs global {global_pos:.3}",
                pos / size
            )));
        }
        let negs: Vec<_> = members
            .iter()
            .filter(|&&i| dataset.pairs[i].label == Some(Label::Negative))
            .collect();
        for (&tier, &count) in &dataset.tier_counts {
            let global = count as f64 / dataset.negatives as f64;
            let local = negs.iter().filter(|&&&i| dataset.pairs[i].tier == Some(tier)).count() as f64
                / negs.len().max(1) as f64;
            if (local - global).abs() > 0.05f64.max(1.0 / negs.len().max(1) as f64) + 1e-12 {
                return Err(BenchError::Stratification(format!(
                    "fold {f}: tier {} share {local:.3} vs global {global:.3}",
                    tier.as_str()
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn new(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn from_verdicts(verdicts: &[Verdict], labels: &[Label]) -> Result<Self> {
        if verdicts.len() != labels.len() {
            return Err(BenchError::LengthMismatch(verdicts.len(), labels.len()));
        }
        let mut c = Confusion::default();
        for (v, l) in verdicts.iter().zip(labels) {
            match (v, l) {
                (Verdict::Yes, Label::Positive) => c.tp += 1,
                (Verdict::Yes, Label::Negative) => c.fp += 1,
                (Verdict::No, Label::Negative) => c.tn += 1,
                (Verdict::No, Label::Positive) => c.fn_ += 1,
            }
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub balanced_accuracy: f64,
    pub f1_pos: f64,
    pub macro_f1: f64,
    pub mcc: f64,
    pub roc_auc: f64,
    pub confusion: Confusion,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl MetricBundle {
    /// Every confusion-derived metric; `roc_auc` is supplied by the caller.
    /// Zero denominators yield 0 (for MCC: any zero factor).
    pub fn from_confusion(c: Confusion, roc_auc: f64) -> Self {
        let Confusion { tp, fp, tn, fn_ } = c;
        let recall = ratio(tp, tp + fn_);
        let specificity = ratio(tn, tn + fp);
        let f1_pos = ratio(2 * tp, 2 * tp + fp + fn_);
        let f1_neg = ratio(2 * tn, 2 * tn + fn_ + fp);
        let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
        let mcc = if factors.contains(&0) {
            0.0
        } else {
            let den = factors.iter().map(|&f| f as f64).product::<f64>().sqrt();
            (tp as f64 * tn as f64 - fp as f64 * fn_ as f64) / den
        };
        Self {
            precision: ratio(tp, tp + fp),
            recall,
            specificity,
            balanced_accuracy: (recall + specificity) / 2.0,
            f1_pos,
            macro_f1: (f1_pos + f1_neg) / 2.0,
            mcc,
            roc_auc,
            confusion: c,
        }
    }

    pub const FIELDS: [&'static str; 8] = [
        "precision",
        "recall",
        "specificity",
        "balanced_accuracy",
        "f1_pos",
        "macro_f1",
        "mcc",
        "roc_auc",
    ];

    pub fn values(&self) -> [f64; 8] {
        [
            self.precision,
            self.recall,
            self.specificity,
            self.balanced_accuracy,
            self.f1_pos,
            self.macro_f1,
            self.mcc,
            self.roc_auc,
        ]
    }
}

/// Confusion from verdicts, ROC-AUC from influence scores.
pub fn compute_metrics(predictions: &[(Verdict, f64)], labels: &[Label]) -> Result<MetricBundle> {
    let verdicts: Vec<Verdict> = predictions.iter().map(|p| p.0).collect();
    let confusion = Confusion::from_verdicts(&verdicts, labels)?;
    let scores: Vec<f64> = predictions.iter().map(|p| p.1).collect();
    Ok(MetricBundle::from_confusion(confusion, roc_auc(&scores, labels)?))
}

/// ROC curve points `(fpr, tpr, threshold)`, one per distinct score, from
/// `(0,0)` to `(1,1)`. Tied scores move diagonally.
pub fn roc_points(scores: &[f64], labels: &[Label]) -> Result<Vec<(f64, f64, f64)>> {
    if scores.len() != labels.len() {
        return Err(BenchError::LengthMismatch(scores.len(), labels.len()));
    }
    let pos = labels.iter().filter(|l| **l == Label::Positive).count();
    let neg = labels.len() - pos;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0, f64::INFINITY)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            match labels[order[i]] {
                Label::Positive => tp += 1,
                Label::Negative => fp += 1,
            }
            i += 1;
        }
        points.push((ratio(fp, neg), ratio(tp, pos), s));
    }
    Ok(points)
}

/// Trapezoidal area under the ROC curve; 0.5 when a class is absent.
pub fn roc_auc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    let pos = labels.iter().filter(|l| **l == Label::Positive).count();
    if pos == 0 || pos == labels.len() {
        if scores.len() != labels.len() {
            return Err(BenchError::LengthMismatch(scores.len(), labels.len()));
        }
        return Ok(0.5);
    }
    let pts = roc_points(scores, labels)?;
    Ok(pts
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierRate {
    pub rejected: usize,
    pub total: usize,
    pub rate: f64,
}

/// NO-rate among negatives of each tier.
pub fn tier_rejection(
    verdicts: &[Verdict],
    labels: &[Label],
    tiers: &[Option<Tier>],
) -> Result<BTreeMap<Tier, TierRate>> {
    if verdicts.len() != labels.len() || tiers.len() != labels.len() {
        return Err(BenchError::LengthMismatch(verdicts.len(), labels.len()));
    }
    let mut out: BTreeMap<Tier, TierRate> = BTreeMap::new();
    for (i, ((v, l), t)) in verdicts.iter().zip(labels).zip(tiers).enumerate() {
        if *l != Label::Negative {
            continue;
        }
        let tier = t.ok_or_else(|| BenchError::MissingTier(format!("#{i}")))?;
        let e = out.entry(tier).or_insert(TierRate {
            rejected: 0,
            total: 0,
            rate: 0.0,
        });
        e.total += 1;
        if *v == Verdict::No {
            e.rejected += 1;
        }
    }
    for r in out.values_mut() {
        r.rate = ratio(r.rejected, r.total);
    }
    Ok(out)
}

/// The trivial lower bound: YES for everything, with score 1.
pub fn always_yes(n: usize) -> Vec<(Verdict, f64)> {
    vec![(Verdict::Yes, 1.0); n]
}

/// Threshold maximizing MCC over the distinct scores; ties go to the smaller
/// threshold.
pub fn tune_threshold(scores: &[f64], labels: &[Label]) -> f64 {
    let mut grid: Vec<f64> = scores.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut best = (f64::NEG_INFINITY, 0.5);
    for &theta in &grid {
        let verdicts: Vec<Verdict> = scores.iter().map(|&s| derive_verdict(s, theta).0).collect();
        let c = Confusion::from_verdicts(&verdicts, labels).expect("aligned");
        let mcc = MetricBundle::from_confusion(c, 0.5).mcc;
        if mcc > best.0 {
            best = (mcc, theta);
        }
    }
    best.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Tune on each round's development fold.
    TunedPerFold,
    /// Use the configured threshold everywhere.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub folds: usize,
    pub seed: u64,
    pub agent: AgentConfig,
    pub threshold_mode: ThresholdMode,
    pub in_flight: usize,
    pub balanced: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            folds: 5,
            seed: 42,
            agent: AgentConfig::default(),
            threshold_mode: ThresholdMode::TunedPerFold,
            in_flight: 8,
            balanced: true,
        }
    }
}

impl BenchOptions {
    pub fn from_config(cfg: &crate::config::RunConfig) -> Self {
        Self {
            folds: cfg.bench.folds,
            seed: cfg.bench.seed,
            agent: cfg.agent_config(),
            threshold_mode: if cfg.bench.tune_threshold {
                ThresholdMode::TunedPerFold
            } else {
                ThresholdMode::Fixed
            },
            in_flight: cfg.bench.in_flight,
            balanced: cfg.bench.balanced,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub pair: DirectedPair,
    pub fold: usize,
    /// `None` for NoVerdict outcomes.
    pub influence_score: Option<f64>,
    pub verdict: Option<Verdict>,
    pub confidence: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundResult {
    pub dev_fold: usize,
    pub threshold: f64,
    pub eval_pairs: usize,
    pub metrics: MetricBundle,
    pub tiers: BTreeMap<Tier, TierRate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: BTreeMap<String, f64>,
    pub sd: BTreeMap<String, f64>,
}

fn summarize(rounds: &[RoundResult]) -> MetricSummary {
    let mut mean = BTreeMap::new();
    let mut sd = BTreeMap::new();
    let n = rounds.len() as f64;
    for (j, name) in MetricBundle::FIELDS.iter().enumerate() {
        let xs: Vec<f64> = rounds.iter().map(|r| r.metrics.values()[j]).collect();
        let m = xs.iter().sum::<f64>() / n;
        // sample standard deviation
        let v = if xs.len() > 1 {
            xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        mean.insert(name.to_string(), m);
        sd.insert(name.to_string(), v.sqrt());
    }
    MetricSummary { mean, sd }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub options: BenchOptions,
    pub controller: String,
    pub critic: String,
    pub pairs: usize,
    pub positives: usize,
    pub negatives: usize,
    pub tier_counts: BTreeMap<Tier, usize>,
    pub rounds: Vec<RoundResult>,
    pub summary: MetricSummary,
    /// All verdict-bearing pairs at the configured threshold.
    pub overall: MetricBundle,
    pub overall_tiers: BTreeMap<Tier, TierRate>,
    pub yes_count: usize,
    pub always_yes: MetricBundle,
    pub no_verdict: Vec<String>,
    pub backend_calls: usize,
    #[serde(skip)]
    pub results: Vec<PairResult>,
    #[serde(skip)]
    pub trajectories: Vec<Trajectory>,
}

/// Adjudicates every pair (at most `in_flight` concurrently), then evaluates
/// each cross-validation round: fold `r` is the development fold, the others
/// are evaluated.
pub fn run_benchmark(
    dataset: &BenchmarkDataset,
    registry: &ToolRegistry,
    controller: &dyn Backend,
    critic: &dyn Backend,
    options: &BenchOptions,
) -> Result<BenchReport> {
    let folds = make_folds(dataset, options.folds, options.seed)?;
    let calls_before = controller.invocations() + critic.invocations();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.in_flight.max(1))
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))?;
    let trajectories: Vec<Trajectory> = pool.install(|| {
        dataset
            .pairs
            .par_iter()
            .map(|p| adjudicate_pair(p, registry, controller, critic, &options.agent))
            .collect()
    });
    let backend_calls = controller.invocations() + critic.invocations() - calls_before;

    let results: Vec<PairResult> = dataset
        .pairs
        .iter()
        .zip(&trajectories)
        .enumerate()
        .map(|(i, (pair, t))| match &t.outcome {
            Outcome::Verdict { termination, tuple } => PairResult {
                pair: pair.clone(),
                fold: folds.assignments[i],
                influence_score: Some(tuple.influence_score),
                verdict: Some(tuple.verdict),
                confidence: Some(tuple.confidence),
                note: serde_json::to_value(termination)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
            },
            Outcome::NoVerdict { reason } => PairResult {
                pair: pair.clone(),
                fold: folds.assignments[i],
                influence_score: None,
                verdict: None,
                confidence: None,
                note: reason.clone(),
            },
        })
        .collect();

    let scored: Vec<&PairResult> = results.iter().filter(|r| r.influence_score.is_some()).collect();
    let no_verdict = results
        .iter()
        .filter(|r| r.influence_score.is_none())
        .map(|r| r.pair.key())
        .collect();
    let label_of = |r: &PairResult| r.pair.label.expect("validated");

    let evaluate = |subset: &[&PairResult], theta: f64| -> Result<(MetricBundle, BTreeMap<Tier, TierRate>)> {
        let preds: Vec<(Verdict, f64)> = subset
            .iter()
            .map(|r| {
                let s = r.influence_score.expect("scored");
                (derive_verdict(s, theta).0, s)
            })
            .collect();
        let labels: Vec<Label> = subset.iter().map(|r| label_of(r)).collect();
        let tiers: Vec<Option<Tier>> = subset.iter().map(|r| r.pair.tier).collect();
        let verdicts: Vec<Verdict> = preds.iter().map(|p| p.0).collect();
        let tier_table = if tiers.iter().zip(&labels).any(|(t, l)| *l == Label::Negative && t.is_none()) {
            BTreeMap::new()
        } else {
            tier_rejection(&verdicts, &labels, &tiers)?
        };
        Ok((compute_metrics(&preds, &labels)?, tier_table))
    };

    let mut rounds = Vec::with_capacity(folds.k);
    for dev in 0..folds.k {
        let dev_set: Vec<&PairResult> = scored.iter().copied().filter(|r| r.fold == dev).collect();
        let eval_set: Vec<&PairResult> = scored.iter().copied().filter(|r| r.fold != dev).collect();
        let threshold = match options.threshold_mode {
            ThresholdMode::Fixed => options.agent.threshold,
            ThresholdMode::TunedPerFold => {
                let s: Vec<f64> = dev_set.iter().map(|r| r.influence_score.expect("scored")).collect();
                let l: Vec<Label> = dev_set.iter().map(|r| label_of(r)).collect();
                if s.is_empty() {
                    options.agent.threshold
                } else {
                    tune_threshold(&s, &l)
                }
            }
        };
        let (metrics, tiers) = evaluate(&eval_set, threshold)?;
        rounds.push(RoundResult {
            dev_fold: dev,
            threshold,
            eval_pairs: eval_set.len(),
            metrics,
            tiers,
        });
    }

    let (overall, overall_tiers) = evaluate(&scored, options.agent.threshold)?;
    let yes_count = overall.confusion.tp + overall.confusion.fp;
    let labels: Vec<Label> = scored.iter().map(|r| label_of(r)).collect();
    let always = compute_metrics(&always_yes(labels.len()), &labels)?;

    Ok(BenchReport {
        options: *options,
        controller: controller.identity(),
        critic: critic.identity(),
        pairs: dataset.len(),
        positives: dataset.positives,
        negatives: dataset.negatives,
        tier_counts: dataset.tier_counts.clone(),
        summary: summarize(&rounds),
        rounds,
        overall,
        overall_tiers,
        yes_count,
        always_yes: always,
        no_verdict,
        backend_calls,
        results,
        trajectories,
    })
}

impl BenchReport {
    pub fn metrics_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("row,threshold,");
        out.push_str(&MetricBundle::FIELDS.join(","));
        out.push_str(",tp,fp,tn,fn\n");
        let mut row = |name: String, theta: String, m: &MetricBundle| {
            let vals: Vec<String> = m.values().iter().map(|v| format!("{v:.6}")).collect();
            let c = m.confusion;
            let _ = writeln!(out, "{name},{theta},{},{},{},{},{}", vals.join(","), c.tp, c.fp, c.tn, c.fn_);
        };
        for r in &self.rounds {
            row(format!("fold{}", r.dev_fold), format!("{:.6}", r.threshold), &r.metrics);
        }
        row("overall".into(), format!("{:.6}", self.options.agent.threshold), &self.overall);
        row("always_yes".into(), String::new(), &self.always_yes);
        for (label, map) in [("mean", &self.summary.mean), ("sd", &self.summary.sd)] {
            let vals: Vec<String> = MetricBundle::FIELDS.iter().map(|f| format!("{:.6}", map[*f])).collect();
            let _ = writeln!(out, "{label},,{},,,,", vals.join(","));
        }
        out
    }

    pub fn verdicts_jsonl(&self) -> String {
        self.results
            .iter()
            .map(|r| serde_json::to_string(r).expect("result serializes") + "\n")
            .collect()
    }

    pub fn roc_csv(&self) -> String {
        let scored: Vec<&PairResult> = self.results.iter().filter(|r| r.influence_score.is_some()).collect();
        let scores: Vec<f64> = scored.iter().map(|r| r.influence_score.unwrap_or_default()).collect();
        let labels: Vec<Label> = scored.iter().map(|r| r.pair.label.expect("validated")).collect();
        let mut out = String::from("fpr,tpr,threshold\n");
        for (fpr, tpr, t) in roc_points(&scores, &labels).unwrap_or_default() {
            let _ = writeln!(out, "{fpr:.6},{tpr:.6},{t}");
        }
        out
    }

    pub fn trajectories_jsonl(&self) -> String {
        self.trajectories.iter().map(Trajectory::to_jsonl).collect()
    }

    /// Writes metrics.json, metrics.csv, verdicts.jsonl, roc_points.csv and
    /// trajectories.jsonl (plus config.toml when given) into `dir`.
    pub fn write(&self, dir: &Path, resolved_config: Option<&str>) -> Result<()> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| BenchError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let mut files = vec![
            ("metrics.json", self.metrics_json()),
            ("metrics.csv", self.metrics_csv()),
            ("verdicts.jsonl", self.verdicts_jsonl()),
            ("roc_points.csv", self.roc_csv()),
            ("trajectories.jsonl", self.trajectories_jsonl()),
        ];
        if let Some(cfg) = resolved_config {
            files.push(("config.toml", cfg.to_string()));
        }
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body).map_err(io(&path))?;
        }
        Ok(())
    }
}

/// One ablation arm modifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "switch", content = "value", rename_all = "snake_case")]
pub enum Switch {
    DisableTool(ToolName),
    Gamma(f64),
    MaskBio,
    GenericPrompts,
}

impl FromStr for Switch {
    type Err = BenchError;

    /// `disable_tool=<Tool>`, `gamma=<x>`, `mask_bio`, `generic_prompts`.
    fn from_str(s: &str) -> Result<Self> {
        let unknown = || BenchError::UnknownSwitch(s.to_string());
        let (name, value) = match s.split_once('=') {
            Some((n, v)) => (n.trim(), Some(v.trim())),
            None => (s.trim(), None),
        };
        match (name.replace('-', "_").as_str(), value) {
            ("disable_tool", Some(v)) => Ok(Switch::DisableTool(v.parse().map_err(|_| unknown())?)),
            ("gamma", Some(v)) => {
                let g: f64 = v.parse().map_err(|_| unknown())?;
                if g.is_finite() && g >= 0.0 {
                    Ok(Switch::Gamma(g))
                } else {
                    Err(unknown())
                }
            }
            ("mask_bio", None) => Ok(Switch::MaskBio),
            ("generic_prompts", None) => Ok(Switch::GenericPrompts),
            _ => Err(unknown()),
        }
    }
}

impl std::fmt::Display for Switch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Switch::DisableTool(t) => write!(f, "disable_tool={t}"),
            Switch::Gamma(g) => write!(f, "gamma={g}"),
            Switch::MaskBio => f.write_str("mask_bio"),
            Switch::GenericPrompts => f.write_str("generic_prompts"),
        }
    }
}

/// Constructs a fresh backend for a role; called once per arm.
pub type BackendFactory<'a> = dyn Fn(Role) -> std::result::Result<Box<dyn Backend>, BackendError> + Sync + 'a;

/// Runs one benchmark arm over the workspace with `switches` applied.
pub fn run_arm(
    ws: &Workspace,
    dataset: &BenchmarkDataset,
    options: &BenchOptions,
    switches: &[Switch],
    backends: &BackendFactory<'_>,
) -> Result<BenchReport> {
    let mut ctx = ContextOptions::default();
    let mut opts = *options;
    let mut disabled = Vec::new();
    for s in switches {
        match s {
            Switch::DisableTool(t) => disabled.push(*t),
            Switch::Gamma(g) => opts.agent.critic.gamma = *g,
            Switch::MaskBio => ctx.masked = true,
            Switch::GenericPrompts => ctx.generic_prompts = true,
        }
    }
    let mut registry = ws.registry(ctx)?;
    for t in disabled {
        registry = registry.without(t);
    }
    let controller = backends(Role::Controller)?;
    let critic = backends(Role::Critic)?;
    run_benchmark(dataset, &registry, controller.as_ref(), critic.as_ref(), &opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationArm {
    pub switch: String,
    pub overall: MetricBundle,
    pub mean: BTreeMap<String, f64>,
    /// Arm minus baseline, per mean metric.
    pub delta: BTreeMap<String, f64>,
    pub overall_tiers: BTreeMap<Tier, TierRate>,
    pub yes_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub baseline: BenchReport,
    pub arms: Vec<AblationArm>,
}

/// Baseline plus one arm per switch, all on identical folds and seeds.
pub fn ablate(
    ws: &Workspace,
    dataset: &BenchmarkDataset,
    options: &BenchOptions,
    switches: &[Switch],
    backends: &BackendFactory<'_>,
) -> Result<AblationReport> {
    let baseline = run_arm(ws, dataset, options, &[], backends)?;
    let mut arms = Vec::new();
    for s in switches {
        let r = run_arm(ws, dataset, options, std::slice::from_ref(s), backends)?;
        let delta = r
            .summary
            .mean
            .iter()
            .map(|(k, v)| (k.clone(), v - baseline.summary.mean[k]))
            .collect();
        arms.push(AblationArm {
            switch: s.to_string(),
            overall: r.overall,
            mean: r.summary.mean.clone(),
            delta,
            overall_tiers: r.overall_tiers.clone(),
            yes_count: r.yes_count,
        });
    }
    Ok(AblationReport { baseline, arms })
}

impl AblationReport {
    pub fn write(&self, dir: &Path) -> Result<()> {
        self.baseline.write(&dir.join("baseline"), None)?;
        let path = dir.join("ablation.json");
        let body = serde_json::to_string_pretty(&self.arms).expect("arms serialize") + "\n";
        fs::write(&path, body).map_err(|source| BenchError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Factory for the deterministic heuristic controller/critic pair.
pub fn heuristic_backends(role: Role) -> std::result::Result<Box<dyn Backend>, BackendError> {
    Ok(Box::new(crate::agent::ScriptedBackend::heuristic(role)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-3
    }

    #[test]
    fn headline_confusion() {
        let m = MetricBundle::from_confusion(Confusion::new(860, 195, 805, 140), 0.5);
        assert!(close(m.precision, 0.815));
        assert!(close(m.recall, 0.860));
        assert!(close(m.specificity, 0.805));
        assert!(close(m.f1_pos, 0.837));
        assert!(close(m.mcc, 0.666));
    }

    #[test]
    fn always_yes_bound() {
        let labels: Vec<Label> = (0..20)
            .map(|i| if i % 2 == 0 { Label::Positive } else { Label::Negative })
            .collect();
        let m = compute_metrics(&always_yes(20), &labels).unwrap();
        assert_eq!(m.precision, 0.5);
        assert_eq!(m.recall, 1.0);
        assert_eq!(m.specificity, 0.0);
        assert_eq!(m.f1_pos, 2.0 / 3.0);
        assert_eq!(m.macro_f1, 1.0 / 3.0);
        assert_eq!(m.mcc, 0.0);
        assert_eq!(m.roc_auc, 0.5);
    }

    #[test]
    fn auc_example() {
        let labels = [Label::Positive, Label::Negative, Label::Positive, Label::Negative];
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &labels).unwrap(), 0.75);
        assert!(compute_metrics(&[(Verdict::Yes, 1.0)], &labels).is_err());
    }

    fn dataset(pos: usize, neg_tiers: &[(Tier, usize)]) -> BenchmarkDataset {
        let mut pairs = Vec::new();
        for i in 0..pos {
            pairs.push(DirectedPair::new(format!("p{i}"), format!("q{i}")).labeled(Label::Positive, None));
        }
        for &(tier, n) in neg_tiers {
            for i in 0..n {
                pairs.push(
                    DirectedPair::new(format!("{tier:?}{i}"), format!("r{i}")).labeled(Label::Negative, Some(tier)),
                );
            }
        }
        BenchmarkDataset::new(pairs, false).unwrap()
    }

    #[test]
    fn folds_are_exactly_stratified_when_divisible() {
        let mut pairs = Vec::new();
        for i in 0..10 {
            pairs.push(DirectedPair::new(format!("p{i}"), "x").labeled(Label::Positive, None));
            pairs.push(DirectedPair::new(format!("n{i}"), "x").labeled(Label::Negative, None));
        }
        let ds = BenchmarkDataset::new(pairs, true).unwrap();
        let f = make_folds(&ds, 5, 1).unwrap();
        for fold in 0..5 {
            let m = f.members(fold);
            let pos = m.iter().filter(|&&i| ds.pairs[i].label == Some(Label::Positive)).count();
            assert_eq!((pos, m.len() - pos), (2, 2));
        }
        assert_eq!(make_folds(&ds, 5, 1).unwrap(), f);
        assert_ne!(make_folds(&ds, 5, 2).unwrap(), f);
        check_stratification(&ds, &f).unwrap();
    }

    #[test]
    fn imbalance_and_small_strata_are_rejected() {
        let mut pairs = Vec::new();
        for i in 0..11 {
            pairs.push(DirectedPair::new(format!("p{i}"), "x").labeled(Label::Positive, None));
        }
        for i in 0..9 {
            pairs.push(DirectedPair::new(format!("n{i}"), "x").labeled(Label::Negative, None));
        }
        assert!(matches!(
            BenchmarkDataset::new(pairs, true),
            Err(BenchError::Imbalance { positives: 11, negatives: 9 })
        ));
        let ds = dataset(10, &[(Tier::Hard, 7), (Tier::Easy, 3)]);
        assert!(matches!(make_folds(&ds, 5, 0), Err(BenchError::Stratification(_))));
    }

    #[test]
    fn mini_set_folds_hold_tier_proportions() {
        let ds = dataset(
            30,
            &[(Tier::Hard, 10), (Tier::Medium, 10), (Tier::Easy, 5), (Tier::TemporalImpossible, 5)],
        );
        let f = make_folds(&ds, 5, 42).unwrap();
        assert_eq!(f.fold_sizes(), vec![12; 5]);
        check_stratification(&ds, &f).unwrap();
    }

    #[test]
    fn tier_table_requires_tiers() {
        let r = tier_rejection(&[Verdict::No], &[Label::Negative], &[None]);
        assert!(matches!(r, Err(BenchError::MissingTier(_))));
        let t = tier_rejection(
            &[Verdict::No, Verdict::No],
            &[Label::Negative, Label::Negative],
            &[Some(Tier::Hard), Some(Tier::Easy)],
        )
        .unwrap();
        assert!(t.values().all(|r| r.rate == 1.0));
    }

    #[test]
    fn threshold_tuning_prefers_smaller_on_ties() {
        let labels = [Label::Positive, Label::Negative];
        // any threshold in [0.2, 0.9) separates perfectly; the smallest is 0.2
        assert_eq!(tune_threshold(&[0.9, 0.2], &labels), 0.2);
    }

    #[test]
    fn switches_parse() {
        assert_eq!("gamma=0".parse::<Switch>().unwrap(), Switch::Gamma(0.0));
        assert_eq!(
            "disable_tool=TimelineGate".parse::<Switch>().unwrap(),
            Switch::DisableTool(ToolName::TimelineGate)
        );
        assert_eq!("mask_bio".parse::<Switch>().unwrap(), Switch::MaskBio);
        assert_eq!("generic-prompts".parse::<Switch>().unwrap(), Switch::GenericPrompts);
        assert!(matches!("turbo".parse::<Switch>(), Err(BenchError::UnknownSwitch(_))));
        assert!("gamma=-1".parse::<Switch>().is_err());
    }

    /// Probability that a random positive outranks a random negative, ties ½.
    fn concordance(scores: &[f64], labels: &[Label]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] == Label::Positive && labels[j] == Label::Negative {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    fn labeled_scores() -> impl Strategy<Value = (Vec<f64>, Vec<Label>)> {
        (2usize..200).prop_flat_map(|n| {
            (
                proptest::collection::vec((0u8..10).prop_map(|x| x as f64 / 10.0), n),
                proptest::collection::vec(any::<bool>(), n),
            )
                .prop_filter_map("both classes", |(s, b)| {
                    let labels: Vec<Label> = b
                        .into_iter()
                        .map(|p| if p { Label::Positive } else { Label::Negative })
                        .collect();
                    let pos = labels.iter().filter(|l| **l == Label::Positive).count();
                    (pos > 0 && pos < labels.len()).then_some((s, labels))
                })
        })
    }

    proptest! {
        #[test]
        fn auc_equals_concordance((scores, labels) in labeled_scores()) {
            let auc = roc_auc(&scores, &labels).unwrap();
            prop_assert!((auc - concordance(&scores, &labels)).abs() < 1e-12);
        }

        #[test]
        fn bundle_identities(tp in 0usize..50, fp in 0usize..50, tn in 0usize..50, fn_ in 0usize..50) {
            let m = MetricBundle::from_confusion(Confusion::new(tp, fp, tn, fn_), 0.5);
            prop_assert_eq!(m.balanced_accuracy, (m.recall + m.specificity) / 2.0);
            prop_assert!((-1.0..=1.0).contains(&m.mcc));
            for v in [m.precision, m.recall, m.specificity, m.f1_pos, m.macro_f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if tp + fp == 0 || tn + fn_ == 0 {
                prop_assert_eq!(m.mcc, 0.0);
            }
        }

        #[test]
        fn tier_rates_recombine_to_specificity(
            rows in proptest::collection::vec((any::<bool>(), 0usize..4, any::<bool>()), 1..120)
        ) {
            let labels: Vec<Label> = rows.iter().map(|r| if r.0 { Label::Positive } else { Label::Negative }).collect();
            prop_assume!(labels.contains(&Label::Negative));
            let tiers: Vec<Option<Tier>> = rows.iter().map(|r| if r.0 { None } else { Some(Tier::ALL[r.1]) }).collect();
            let verdicts: Vec<Verdict> = rows.iter().map(|r| if r.2 { Verdict::Yes } else { Verdict::No }).collect();
            let table = tier_rejection(&verdicts, &labels, &tiers).unwrap();
            let c = Confusion::from_verdicts(&verdicts, &labels).unwrap();
            let spec = MetricBundle::from_confusion(c, 0.5).specificity;
            let negs: usize = table.values().map(|r| r.total).sum();
            let weighted: f64 = table.values().map(|r| r.rate * r.total as f64).sum::<f64>() / negs as f64;
            prop_assert!((weighted - spec).abs() < 1e-12);
        }

        #[test]
        fn fold_assignment_is_seeded(seed in any::<u64>()) {
            let ds = dataset(10, &[(Tier::Hard, 5), (Tier::Easy, 5)]);
            let a = make_folds(&ds, 5, seed).unwrap();
            prop_assert_eq!(&a, &make_folds(&ds, 5, seed).unwrap());
            prop_assert!(check_stratification(&ds, &a).is_ok());
        }
    }
}
