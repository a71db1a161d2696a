//! Four-phase adjudication: timeline gate, evidence-gathering loop, critic
//! falsification and verdict derivation, plus the controller/critic backends.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    clamp01, derive_verdict, ClaimKind, ClaimPayload, DirectedPair, EvidenceClaim, MetadataBody, Verdict,
    VerdictTuple, FALLBACK_SCORE, TEMPORAL_REJECTION_SCORE,
};
use crate::retrieval::exact_seed_similarity;
use crate::tools::{timeline_record, ToolName, ToolRecord, ToolRegistry};

/// Step budget of the evidence loop.
pub const DEFAULT_MAX_STEPS: usize = 8;
/// Serialized-context budget: 600 tokens at roughly four characters each.
pub const DEFAULT_CONTEXT_CHARS: usize = 2400;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited: {0}")]
    RateLimit(String),
    #[error("unparseable backend response ({message}): {raw}")]
    Parse { raw: String, message: String },
    #[error("no scripted response for pair {pair} at step {step}")]
    UnscriptedContext { pair: String, step: usize },
    #[error("backend answered with the wrong response type for role {0:?}")]
    WrongRole(Role),
    #[error("invalid backend configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Controller,
    Critic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "lowercase")]
pub enum AgentAction {
    Call {
        tool: ToolName,
        #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
        args: serde_json::Value,
    },
    Conclude {
        verdict: Verdict,
        score: f64,
    },
}

impl AgentAction {
    pub fn call(tool: ToolName) -> Self {
        AgentAction::Call {
            tool,
            args: serde_json::Value::Null,
        }
    }

    pub fn conclude(score: f64) -> Self {
        AgentAction::Conclude {
            verdict: derive_verdict(score, 0.5).0,
            score,
        }
    }
}

/// One controller utterance: optional free thought plus an action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerTurn {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thought: Option<String>,
    #[serde(flatten)]
    pub action: AgentAction,
}

impl From<AgentAction> for ControllerTurn {
    fn from(action: AgentAction) -> Self {
        Self { thought: None, action }
    }
}

/// Raw critic answer: plausibilities for H2 (intermediary), H3 (convergent
/// development) and H4 (common source).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticReply {
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
    #[serde(default)]
    pub rationale: BTreeMap<String, String>,
}

impl CriticReply {
    pub fn new(p: [f64; 3]) -> Self {
        Self {
            p2: p[0],
            p3: p[1],
            p4: p[2],
            rationale: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HypothesisId {
    H2,
    H3,
    H4,
}

impl HypothesisId {
    pub const ALL: [HypothesisId; 3] = [HypothesisId::H2, HypothesisId::H3, HypothesisId::H4];

    pub fn as_str(self) -> &'static str {
        match self {
            HypothesisId::H2 => "H2",
            HypothesisId::H3 => "H3",
            HypothesisId::H4 => "H4",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            HypothesisId::H2 => "influence mediated by an intermediary artist",
            HypothesisId::H3 => "independent convergent development",
            HypothesisId::H4 => "shared exposure to a common source",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSignal {
    pub id: HypothesisId,
    pub plausibility: f64,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterHypothesisReport {
    pub hypotheses: Vec<HypothesisSignal>,
    pub provisional_verdict: Verdict,
    pub provisional_score: f64,
    pub gamma: f64,
    pub penalty: f64,
    pub final_score: f64,
}

impl CounterHypothesisReport {
    pub fn plausibilities(&self) -> [f64; 3] {
        let mut p = [0.0; 3];
        for h in &self.hypotheses {
            p[h.id as usize] = h.plausibility;
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticConfig {
    pub gamma: f64,
    pub omega: [f64; 3],
}

impl Default for CriticConfig {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            omega: [1.0 / 3.0; 3],
        }
    }
}

impl CriticConfig {
    pub fn with_gamma(gamma: f64) -> Self {
        Self {
            gamma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(format!("gamma must be a finite non-negative number, got {}", self.gamma));
        }
        if self.omega.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(format!("omega weights must be non-negative, got {:?}", self.omega));
        }
        Ok(())
    }

    /// `clip(c0 - gamma * sum(omega_k * p_k))` to `[0, 1]`.
    pub fn penalize(&self, c0: f64, p: [f64; 3]) -> (f64, f64) {
        let penalty = self.gamma * self.omega.iter().zip(p).map(|(w, p)| w * p).sum::<f64>();
        (penalty, clamp01(c0 - penalty))
    }
}

/// What a backend is shown at one invocation.
#[derive(Debug, Clone)]
pub struct BackendRequest<'a> {
    pub role: Role,
    pub pair: &'a DirectedPair,
    pub step: usize,
    /// Role-specific text rendering (see [`serialize_context`]).
    pub context: String,
    pub evidence: &'a [EvidenceClaim],
    pub available_tools: &'a [ToolName],
    pub provisional: Option<(Verdict, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BackendResponse {
    Turn(ControllerTurn),
    Critique(CriticReply),
}

/// A reasoning backend playing one role. Implementations must be shareable
/// across the pair-level fan-out.
pub trait Backend: Send + Sync {
    fn role(&self) -> Role;
    fn identity(&self) -> String;
    fn is_deterministic(&self) -> bool;
    fn invoke(&self, request: &BackendRequest<'_>) -> Result<BackendResponse, BackendError>;
    /// Total invocations so far.
    fn invocations(&self) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContextView {
    Controller,
    /// The critic sees only the provisional verdict and score.
    Critic { verdict: Verdict, score: f64 },
}

const CONTROLLER_PREAMBLE: &str = "ROLE: controller. Decide whether the SOURCE artist influenced the TARGET artist. \
Reply with one JSON object: {\"thought\": str, \"action\": \"call\", \"tool\": <tool>} or \
{\"thought\": str, \"action\": \"conclude\", \"verdict\": \"YES\"|\"NO\", \"score\": <0..1>}.\n";
const CRITIC_PREAMBLE: &str = "ROLE: critic. Challenge the provisional verdict. Score the plausibility of each \
counter-hypothesis: H2 intermediary, H3 convergent development, H4 common source. Reply with one JSON object: \
{\"p2\": <0..1>, \"p3\": <0..1>, \"p4\": <0..1>, \"rationale\": {\"H2\": str, \"H3\": str, \"H4\": str}}.\n";

fn render_claim(index: usize, claim: &EvidenceClaim) -> String {
    let payload = serde_json::to_value(&claim.payload)
        .ok()
        .and_then(|v| v.get("payload").cloned())
        .unwrap_or(serde_json::Value::Null);
    let score = claim
        .score
        .map(|s| format!("{s:.3}"))
        .unwrap_or_else(|| "-".to_string());
    format!("E{index} [{:?}] tool={} score={score} {payload}\n", claim.kind(), claim.source_tool)
}

/// Deterministic role-specific rendering within `budget` characters.
///
/// Over budget, claims are dropped lowest score first (unscored claims rank as
/// 1.0), oldest first among equal scores; the newest claim is never dropped.
/// The critic view carries only the provisional verdict and the evidence.
pub fn serialize_context(evidence: &[EvidenceClaim], view: ContextView, budget: usize) -> String {
    let mut head = String::new();
    match view {
        ContextView::Controller => head.push_str(CONTROLLER_PREAMBLE),
        ContextView::Critic { verdict, score } => {
            head.push_str(CRITIC_PREAMBLE);
            head.push_str(&format!("PROVISIONAL: verdict={verdict} score={score:.3}\n"));
        }
    }
    if evidence.is_empty() {
        return head;
    }
    let lines: Vec<String> = evidence.iter().enumerate().map(|(i, c)| render_claim(i, c)).collect();
    let mut kept = vec![true; lines.len()];
    let drop_order = retention_drop_order(evidence);
    let note = |n: usize| if n == 0 { String::new() } else { format!("({n} lower-scored claims omitted)\n") };
    let size = |kept: &[bool], dropped: usize| {
        head.len()
            + note(dropped).len()
            + lines.iter().zip(kept).filter(|(_, k)| **k).map(|(l, _)| l.len()).sum::<usize>()
    };
    let mut dropped = 0;
    for idx in drop_order {
        if size(&kept, dropped) <= budget {
            break;
        }
        kept[idx] = false;
        dropped += 1;
    }
    let mut out = head.clone();
    for (line, k) in lines.iter().zip(&kept) {
        if *k {
            out.push_str(line);
        }
    }
    out.push_str(&note(dropped));
    out
}

/// Indices in the order they are dropped under budget pressure (newest excluded).
pub fn retention_drop_order(evidence: &[EvidenceClaim]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..evidence.len().saturating_sub(1)).collect();
    order.sort_by(|&a, &b| {
        let sa = evidence[a].score.unwrap_or(1.0);
        let sb = evidence[b].score.unwrap_or(1.0);
        sa.total_cmp(&sb).then(a.cmp(&b))
    });
    order
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Observation {
    Record(ToolRecord),
    Failure { tool: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub step: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thought: Option<String>,
    pub action: AgentAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<Observation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Phase 0 rejected the pair before any backend call.
    TimelineImpossible,
    Concluded,
    /// Step budget exhausted; the conservative fallback was used.
    StepBudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Verdict {
        termination: Termination,
        tuple: VerdictTuple,
    },
    NoVerdict {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub pair: DirectedPair,
    pub steps: Vec<TrajectoryStep>,
    pub outcome: Outcome,
}

impl Trajectory {
    pub fn verdict(&self) -> Option<&VerdictTuple> {
        match &self.outcome {
            Outcome::Verdict { tuple, .. } => Some(tuple),
            Outcome::NoVerdict { .. } => None,
        }
    }

    pub fn tool_calls(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s.action, AgentAction::Call { .. }))
            .count()
    }

    /// One JSON object per step followed by a terminal outcome object.
    pub fn to_jsonl(&self) -> String {
        let pair = self.pair.key();
        let mut out = String::new();
        for step in &self.steps {
            let line = serde_json::json!({ "pair": pair, "entry": "step", "step": step });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        let line = serde_json::json!({ "pair": pair, "entry": "outcome", "outcome": self.outcome });
        out.push_str(&line.to_string());
        out.push('\n');
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub max_steps: usize,
    pub threshold: f64,
    pub critic: CriticConfig,
    pub context_chars: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            max_steps: DEFAULT_MAX_STEPS,
            threshold: 0.5,
            critic: CriticConfig::default(),
            context_chars: DEFAULT_CONTEXT_CHARS,
        }
    }
}

fn no_verdict(pair: &DirectedPair, steps: Vec<TrajectoryStep>, err: BackendError) -> Trajectory {
    Trajectory {
        pair: pair.clone(),
        steps,
        outcome: Outcome::NoVerdict {
            reason: err.to_string(),
        },
    }
}

/// The fixed Phase-0 rejection tuple, `(NO, 0.95)`.
pub fn timeline_rejection(record: &ToolRecord) -> VerdictTuple {
    let mut claim = record.to_claim();
    claim.source_tool = ToolName::TimelineGate.to_string();
    VerdictTuple {
        verdict: Verdict::No,
        confidence: 1.0 - TEMPORAL_REJECTION_SCORE,
        influence_score: TEMPORAL_REJECTION_SCORE,
        evidence: vec![
            EvidenceClaim::new(
                "TimelineGate",
                ClaimPayload::Metadata(metadata_of(record, None, Some("Timeline impossible".into()))),
                None,
            ),
            claim,
        ],
        trajectory_ref: None,
    }
}

fn metadata_of(record: &ToolRecord, seed: Option<f64>, note: Option<String>) -> MetadataBody {
    let crate::tools::ToolBody::TimelineGate(t) = &record.body else {
        unreachable!("timeline record")
    };
    MetadataBody {
        source_name: record.pair.source_artist_id.clone(),
        target_name: record.pair.target_artist_id.clone(),
        source_lifespan: t.source,
        target_lifespan: t.target,
        seed_similarity: seed,
        note,
    }
}

pub fn trajectory_ref(pair: &DirectedPair) -> String {
    format!("trajectory:{}", pair.key())
}

/// Runs the four phases for one directed pair.
pub fn adjudicate_pair(
    pair: &DirectedPair,
    registry: &ToolRegistry,
    controller: &dyn Backend,
    critic: &dyn Backend,
    config: &AgentConfig,
) -> Trajectory {
    let ctx = registry.context();
    let (Some(source), Some(target)) = (
        ctx.corpus.artist(&pair.source_artist_id),
        ctx.corpus.artist(&pair.target_artist_id),
    ) else {
        return Trajectory {
            pair: pair.clone(),
            steps: Vec::new(),
            outcome: Outcome::NoVerdict {
                reason: format!("pair {pair} references an unknown artist"),
            },
        };
    };
    let gate = timeline_record(pair, source.lifespan(), target.lifespan(), ctx.params.delta_years)
        .expect("timeline record is infallible for known artists");

    // Phase 0: hard chronological gate, no backend involved.
    if registry.is_registered(ToolName::TimelineGate) && gate.summary_score == Some(0.0) {
        let mut tuple = timeline_rejection(&gate);
        tuple.trajectory_ref = Some(trajectory_ref(pair));
        return Trajectory {
            pair: pair.clone(),
            steps: Vec::new(),
            outcome: Outcome::Verdict {
                termination: Termination::TimelineImpossible,
                tuple,
            },
        };
    }

    // Phase 1: seed with metadata and the maximal visual cosine.
    let seed = exact_seed_similarity(&ctx.corpus, &ctx.visual, &pair.source_artist_id, &pair.target_artist_id)
        .ok()
        .flatten()
        .map(|(s, _)| s);
    let mut meta = metadata_of(&gate, seed, None);
    meta.source_name = source.name.clone();
    meta.target_name = target.name.clone();
    let mut evidence = vec![EvidenceClaim::new("Metadata", ClaimPayload::Metadata(meta), None)];
    let available = registry.available();
    let mut steps = Vec::new();

    // Phase 2: evidence loop.
    let mut provisional = None;
    for step in 0..config.max_steps {
        let request = BackendRequest {
            role: Role::Controller,
            pair,
            step,
            context: serialize_context(&evidence, ContextView::Controller, config.context_chars),
            evidence: &evidence,
            available_tools: &available,
            provisional: None,
        };
        let turn = match controller.invoke(&request) {
            Ok(BackendResponse::Turn(t)) => t,
            Ok(BackendResponse::Critique(_)) => {
                return no_verdict(pair, steps, BackendError::WrongRole(Role::Controller))
            }
            Err(e) => return no_verdict(pair, steps, e),
        };
        match &turn.action {
            AgentAction::Call { tool, .. } => {
                let observation = match registry.call(*tool, pair) {
                    Ok(record) => {
                        evidence.push(record.to_claim());
                        Observation::Record(record)
                    }
                    Err(e) => Observation::Failure {
                        tool: tool.to_string(),
                        message: e.to_string(),
                    },
                };
                steps.push(TrajectoryStep {
                    step,
                    thought: turn.thought,
                    action: turn.action,
                    observation: Some(observation),
                });
            }
            AgentAction::Conclude { verdict, score } => {
                provisional = Some((*verdict, clamp01(*score)));
                steps.push(TrajectoryStep {
                    step,
                    thought: turn.thought,
                    action: turn.action,
                    observation: None,
                });
                break;
            }
        }
    }
    let (termination, provisional) = match provisional {
        Some(p) => (Termination::Concluded, p),
        None => (Termination::StepBudgetExhausted, (Verdict::No, FALLBACK_SCORE)),
    };

    // Phase 3: falsification.
    let (final_score, report) = match falsify(pair, provisional, &evidence, critic, &config.critic, config.context_chars) {
        Ok(r) => r,
        Err(e) => return no_verdict(pair, steps, e),
    };
    evidence.push(EvidenceClaim::new(
        "Critic",
        ClaimPayload::CriticChallenge(report),
        Some(final_score),
    ));

    // Phase 4: verdict from the post-critic score.
    let mut tuple = VerdictTuple::from_score(final_score, config.threshold, evidence);
    tuple.trajectory_ref = Some(trajectory_ref(pair));
    Trajectory {
        pair: pair.clone(),
        steps,
        outcome: Outcome::Verdict { termination, tuple },
    }
}

/// Asks the critic for counter-hypothesis plausibilities and applies the
/// clipped penalty. Out-of-range plausibilities are clamped with a warning.
pub fn falsify(
    pair: &DirectedPair,
    provisional: (Verdict, f64),
    evidence: &[EvidenceClaim],
    critic: &dyn Backend,
    config: &CriticConfig,
    context_chars: usize,
) -> Result<(f64, CounterHypothesisReport), BackendError> {
    let c0 = clamp01(provisional.1);
    let view = ContextView::Critic {
        verdict: provisional.0,
        score: c0,
    };
    let request = BackendRequest {
        role: Role::Critic,
        pair,
        step: 0,
        context: serialize_context(evidence, view, context_chars),
        evidence,
        available_tools: &[],
        provisional: Some((provisional.0, c0)),
    };
    let reply = match critic.invoke(&request)? {
        BackendResponse::Critique(r) => r,
        BackendResponse::Turn(_) => return Err(BackendError::WrongRole(Role::Critic)),
    };
    let raw = [reply.p2, reply.p3, reply.p4];
    let mut p = [0.0; 3];
    for (k, value) in raw.into_iter().enumerate() {
        p[k] = clamp01(value);
        if p[k] != value {
            log::warn!("critic plausibility H{} = {value} outside [0,1]; clamped to {}", k + 2, p[k]);
        }
    }
    let (penalty, final_score) = config.penalize(c0, p);
    let hypotheses = HypothesisId::ALL
        .into_iter()
        .zip(p)
        .map(|(id, plausibility)| HypothesisSignal {
            id,
            plausibility,
            rationale: reply
                .rationale
                .get(id.as_str())
                .cloned()
                .unwrap_or_else(|| id.description().to_string()),
        })
        .collect();
    Ok((
        final_score,
        CounterHypothesisReport {
            hypotheses,
            provisional_verdict: provisional.0,
            provisional_score: c0,
            gamma: config.gamma,
            penalty,
            final_score,
        },
    ))
}

/// Scripted policy of a [`ScriptedBackend`].
#[derive(Debug, Clone, PartialEq)]
pub enum Script {
    /// Responses keyed by `(pair key, step)`; the critic uses step 0.
    Table(BTreeMap<(String, usize), BackendResponse>),
    /// Controller: call every available tool in order, then conclude with the
    /// mean tool summary score. Critic: counter-hypotheses weakened by
    /// documented transmission pathways.
    Heuristic,
}

/// Deterministic test double standing in for a temperature-0 model.
pub struct ScriptedBackend {
    role: Role,
    script: Script,
    calls: AtomicUsize,
    log: Mutex<Vec<Invocation>>,
}

/// A recorded backend invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invocation {
    pub pair: String,
    pub step: usize,
    pub context: String,
}

impl ScriptedBackend {
    pub fn new(role: Role, script: Script) -> Self {
        Self {
            role,
            script,
            calls: AtomicUsize::new(0),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn heuristic(role: Role) -> Self {
        Self::new(role, Script::Heuristic)
    }

    /// Every invocation, in call order.
    pub fn invocation_log(&self) -> Vec<Invocation> {
        self.log.lock().expect("log lock").clone()
    }
}

fn summary_of(evidence: &[EvidenceClaim], kind: ClaimKind) -> Option<f64> {
    evidence.iter().rev().find(|c| c.kind() == kind).and_then(|c| c.score)
}

/// Mean summary score over tool claims (metadata excluded).
pub fn mean_tool_score(evidence: &[EvidenceClaim]) -> f64 {
    let scores: Vec<f64> = evidence
        .iter()
        .filter(|c| !matches!(c.kind(), ClaimKind::Metadata | ClaimKind::CriticChallenge))
        .filter_map(|c| c.score)
        .collect();
    if scores.is_empty() {
        FALLBACK_SCORE
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    }
}

/// Heuristic critic plausibilities: each base signal scaled by the squared
/// absence of pathway evidence.
pub fn heuristic_plausibilities(evidence: &[EvidenceClaim]) -> [f64; 3] {
    let pathway = summary_of(evidence, ClaimKind::Pathway).unwrap_or(0.0);
    let damp = (1.0 - pathway).powi(2);
    let visual = summary_of(evidence, ClaimKind::VisualSimilarity).unwrap_or(0.5);
    let concept = summary_of(evidence, ClaimKind::Concept).unwrap_or(0.5);
    [0.5 * damp, visual * damp, concept * damp]
}

impl Backend for ScriptedBackend {
    fn role(&self) -> Role {
        self.role
    }

    fn identity(&self) -> String {
        match self.script {
            Script::Table(_) => format!("scripted-table/{:?}", self.role).to_lowercase(),
            Script::Heuristic => format!("scripted-heuristic/{:?}", self.role).to_lowercase(),
        }
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn invoke(&self, request: &BackendRequest<'_>) -> Result<BackendResponse, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let key = request.pair.key();
        self.log.lock().expect("log lock").push(Invocation {
            pair: key.clone(),
            step: request.step,
            context: request.context.clone(),
        });
        match &self.script {
            Script::Table(table) => table
                .get(&(key.clone(), request.step))
                .cloned()
                .ok_or(BackendError::UnscriptedContext {
                    pair: key,
                    step: request.step,
                }),
            Script::Heuristic => Ok(match self.role {
                Role::Controller => {
                    let turn = match request.available_tools.get(request.step) {
                        Some(&tool) => ControllerTurn {
                            thought: Some(format!("gather {tool} evidence")),
                            action: AgentAction::call(tool),
                        },
                        None => {
                            let score = mean_tool_score(request.evidence);
                            ControllerTurn {
                                thought: Some(format!("mean tool score {score:.3}")),
                                action: AgentAction::conclude(score),
                            }
                        }
                    };
                    BackendResponse::Turn(turn)
                }
                Role::Critic => BackendResponse::Critique(CriticReply::new(heuristic_plausibilities(request.evidence))),
            }),
        }
    }

    fn invocations(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

/// Role prompt templates, editable as `controller.txt` / `critic.txt`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub controller: String,
    pub critic: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            controller: "You adjudicate directed artistic influence hypotheses. Use the tools to gather \
visual, biographical, chronological, formal and iconographic evidence, then conclude. Answer with a single JSON object."
                .into(),
            critic: "You are an adversarial critic. You see only the provisional verdict and the structured evidence. \
Estimate how plausible each alternative explanation is. Answer with a single JSON object."
                .into(),
        }
    }
}

impl PromptTemplates {
    pub fn load_dir(dir: &Path) -> std::io::Result<Self> {
        let mut t = Self::default();
        let c = dir.join("controller.txt");
        if c.exists() {
            t.controller = fs::read_to_string(c)?;
        }
        let c = dir.join("critic.txt");
        if c.exists() {
            t.critic = fs::read_to_string(c)?;
        }
        Ok(t)
    }
}

pub const ENV_ENDPOINT: &str = "ARTJUDGE_ENDPOINT";
pub const ENV_MODEL: &str = "ARTJUDGE_MODEL";
pub const ENV_API_KEY: &str = "ARTJUDGE_API_KEY";

const FORMAT_REMINDER: &str = "\n\nREMINDER: respond with exactly one JSON object matching the grammar above and nothing else.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteConfig {
    /// Chat-completions URL.
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub max_retries: u32,
    pub backoff_base: Duration,
    pub backoff_cap: Duration,
    pub timeout: Duration,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: None,
            max_retries: 3,
            backoff_base: Duration::from_millis(200),
            backoff_cap: Duration::from_secs(5),
            timeout: Duration::from_secs(60),
        }
    }

    pub fn from_env() -> Result<Self, BackendError> {
        let endpoint =
            std::env::var(ENV_ENDPOINT).map_err(|_| BackendError::Config(format!("{ENV_ENDPOINT} is not set")))?;
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| "default".into());
        let mut cfg = Self::new(endpoint, model);
        cfg.api_key = std::env::var(ENV_API_KEY).ok();
        Ok(cfg)
    }

    fn backoff(&self, attempt: u32) -> Duration {
        self.backoff_base
            .saturating_mul(2u32.saturating_pow(attempt))
            .min(self.backoff_cap)
    }
}

/// One logged request/response exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub role: Role,
    pub pair: String,
    pub step: usize,
    pub request: serde_json::Value,
    pub response: Option<String>,
    pub error: Option<String>,
}

/// OpenAI-style chat-completions backend at temperature 0.
pub struct RemoteBackend {
    role: Role,
    config: RemoteConfig,
    templates: PromptTemplates,
    agent: ureq::Agent,
    calls: AtomicUsize,
    exchanges: Mutex<Vec<Exchange>>,
}

impl RemoteBackend {
    pub fn new(role: Role, config: RemoteConfig, templates: PromptTemplates) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            role,
            config,
            templates,
            agent,
            calls: AtomicUsize::new(0),
            exchanges: Mutex::new(Vec::new()),
        }
    }

    pub fn exchanges(&self) -> Vec<Exchange> {
        self.exchanges.lock().expect("exchange lock").clone()
    }

    fn body(&self, context: &str) -> serde_json::Value {
        let system = match self.role {
            Role::Controller => &self.templates.controller,
            Role::Critic => &self.templates.critic,
        };
        serde_json::json!({
            "model": self.config.model,
            "temperature": 0.0,
            "messages": [
                { "role": "system", "content": system },
                { "role": "user", "content": context },
            ],
        })
    }

    /// POST with capped exponential backoff on transport failures, 429 and 5xx.
    fn post(&self, body: &serde_json::Value) -> Result<String, BackendError> {
        let mut last = BackendError::Transport("no attempt made".into());
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.config.backoff(attempt - 1));
            }
            let mut req = self.agent.post(&self.config.endpoint).header("Content-Type", "application/json");
            if let Some(key) = &self.config.api_key {
                req = req.header("Authorization", format!("Bearer {key}"));
            }
            match req.send_json(body) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    let text = resp.body_mut().read_to_string().unwrap_or_default();
                    match status {
                        200..=299 => return extract_content(&text),
                        429 => last = BackendError::RateLimit(format!("status 429: {text}")),
                        500..=599 => last = BackendError::Transport(format!("status {status}: {text}")),
                        _ => return Err(BackendError::Transport(format!("status {status}: {text}"))),
                    }
                }
                Err(e) => last = BackendError::Transport(e.to_string()),
            }
        }
        Err(last)
    }

    fn log(&self, request: &BackendRequest<'_>, body: &serde_json::Value, result: &Result<String, BackendError>) {
        self.exchanges.lock().expect("exchange lock").push(Exchange {
            role: self.role,
            pair: request.pair.key(),
            step: request.step,
            request: body.clone(),
            response: result.as_ref().ok().cloned(),
            error: result.as_ref().err().map(|e| e.to_string()),
        });
    }
}

fn extract_content(text: &str) -> Result<String, BackendError> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| BackendError::Parse {
        raw: text.to_string(),
        message: e.to_string(),
    })?;
    v.pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| BackendError::Parse {
            raw: text.to_string(),
            message: "missing choices[0].message.content".into(),
        })
}

/// Parses the first `{ ... }` object of a reply into the role's grammar.
pub fn parse_reply(role: Role, content: &str) -> Result<BackendResponse, BackendError> {
    let err = |message: String| BackendError::Parse {
        raw: content.to_string(),
        message,
    };
    let start = content.find('{').ok_or_else(|| err("no JSON object".into()))?;
    let end = content.rfind('}').ok_or_else(|| err("no JSON object".into()))?;
    if end < start {
        return Err(err("no JSON object".into()));
    }
    let json = &content[start..=end];
    match role {
        Role::Controller => {
            let turn: ControllerTurn = serde_json::from_str(json).map_err(|e| err(e.to_string()))?;
            if let AgentAction::Conclude { score, .. } = turn.action {
                if !score.is_finite() {
                    return Err(err("non-finite score".into()));
                }
            }
            Ok(BackendResponse::Turn(turn))
        }
        Role::Critic => Ok(BackendResponse::Critique(
            serde_json::from_str(json).map_err(|e| err(e.to_string()))?,
        )),
    }
}

impl Backend for RemoteBackend {
    fn role(&self) -> Role {
        self.role
    }

    fn identity(&self) -> String {
        format!("remote/{}/{}", self.config.model, format!("{:?}", self.role).to_lowercase())
    }

    fn is_deterministic(&self) -> bool {
        false
    }

    fn invoke(&self, request: &BackendRequest<'_>) -> Result<BackendResponse, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let body = self.body(&request.context);
        let content = self.post(&body);
        self.log(request, &body, &content);
        match parse_reply(self.role, &content?) {
            Ok(r) => Ok(r),
            Err(first) => {
                log::warn!("unparseable {:?} reply for {}: {first}; retrying once", self.role, request.pair);
                let body = self.body(&format!("{}{FORMAT_REMINDER}", request.context));
                let content = self.post(&body);
                self.log(request, &body, &content);
                parse_reply(self.role, &content?)
            }
        }
    }

    fn invocations(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("role", &self.role)
            .field("endpoint", &self.config.endpoint)
            .field("model", &self.config.model)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Lifespan;
    use proptest::prelude::*;

    fn claim(score: Option<f64>) -> EvidenceClaim {
        EvidenceClaim::new(
            "Metadata",
            ClaimPayload::Metadata(MetadataBody {
                source_name: "a".into(),
                target_name: "b".into(),
                source_lifespan: Lifespan::new(1800, 1850),
                target_lifespan: Lifespan::new(1820, 1890),
                seed_similarity: None,
                note: Some("x".repeat(200)),
            }),
            score,
        )
    }

    #[test]
    fn penalty_arithmetic() {
        let c = CriticConfig::default();
        assert_eq!(c.penalize(0.7, [0.0; 3]).1, 0.7);
        assert_eq!(c.penalize(0.5, [0.3, 0.6, 0.2]).1, 0.0);
        let (_, s) = c.penalize(0.72, [0.1, 0.6, 0.1]);
        assert!((s - (0.72 - 2.0 * 0.8 / 3.0)).abs() < 1e-12);
        assert_eq!(derive_verdict(s, 0.5).0, Verdict::No);
        let (_, s) = c.penalize(0.95, [0.02, 0.03, 0.05]);
        assert!((s - 0.883_333).abs() < 1e-5);
    }

    #[test]
    fn context_is_deterministic_and_preamble_only_when_empty() {
        let e = serialize_context(&[], ContextView::Controller, 2400);
        assert_eq!(e, CONTROLLER_PREAMBLE);
        let ev = vec![claim(Some(0.3)), claim(None)];
        assert_eq!(
            serialize_context(&ev, ContextView::Controller, 2400),
            serialize_context(&ev, ContextView::Controller, 2400)
        );
    }

    #[test]
    fn truncation_drops_low_scores_first_and_keeps_newest() {
        let scores: Vec<f64> = (0..20).map(|i| ((i * 7) % 20) as f64 / 20.0).collect();
        let ev: Vec<_> = scores.iter().map(|&s| claim(Some(s))).collect();
        let text = serialize_context(&ev, ContextView::Controller, 2400);
        assert!(text.len() <= 2400);
        // oracle: greedily remove (score, index)-ascending among all but the last
        let line_len = render_claim(0, &ev[0]).len();
        let mut kept: Vec<usize> = (0..20).collect();
        let mut order: Vec<usize> = (0..19).collect();
        order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));
        let mut dropped = 0;
        for i in order {
            let note = if dropped == 0 { 0 } else { format!("({dropped} lower-scored claims omitted)\n").len() };
            if CONTROLLER_PREAMBLE.len() + note + kept.len() * line_len <= 2400 {
                break;
            }
            kept.retain(|&k| k != i);
            dropped += 1;
        }
        assert!(kept.contains(&19));
        for i in 0..20 {
            assert_eq!(text.contains(&format!("E{i} ")), kept.contains(&i), "claim {i}");
        }
    }

    #[test]
    fn critic_view_has_provisional_and_no_thoughts() {
        let view = ContextView::Critic {
            verdict: Verdict::Yes,
            score: 0.95,
        };
        let t = serialize_context(&[claim(Some(0.5))], view, 2400);
        assert!(t.contains("PROVISIONAL: verdict=YES score=0.950"));
        assert!(!t.contains("ROLE: controller"));
    }

    #[test]
    fn parse_grammar() {
        let r = parse_reply(Role::Controller, r#"sure: {"thought":"t","action":"call","tool":"VisualAnalyzer"}"#).unwrap();
        assert_eq!(
            r,
            BackendResponse::Turn(ControllerTurn {
                thought: Some("t".into()),
                action: AgentAction::call(ToolName::VisualAnalyzer)
            })
        );
        let r = parse_reply(Role::Controller, r#"{"action":"conclude","verdict":"NO","score":0.2}"#).unwrap();
        assert!(matches!(r, BackendResponse::Turn(ControllerTurn { action: AgentAction::Conclude { .. }, .. })));
        assert!(parse_reply(Role::Controller, "I think yes").is_err());
        assert!(parse_reply(Role::Controller, r#"{"action":"dance"}"#).is_err());
        let r = parse_reply(Role::Critic, r#"{"p2":0.1,"p3":1.5,"p4":0}"#).unwrap();
        assert_eq!(r, BackendResponse::Critique(CriticReply::new([0.1, 1.5, 0.0])));
    }

    #[test]
    fn backoff_is_capped() {
        let c = RemoteConfig::new("http://x", "m");
        assert_eq!(c.backoff(0), Duration::from_millis(200));
        assert_eq!(c.backoff(1), Duration::from_millis(400));
        assert_eq!(c.backoff(10), Duration::from_secs(5));
    }

    #[test]
    fn heuristic_critic_is_silenced_by_pathways() {
        let pathway = EvidenceClaim::new(
            "BiographyReader",
            ClaimPayload::Pathway(crate::tools::PathwayCues::from_hits(vec![], false)),
            Some(1.0),
        );
        assert_eq!(heuristic_plausibilities(&[pathway]), [0.0; 3]);
        assert_eq!(heuristic_plausibilities(&[]), [0.5, 0.5, 0.5]);
    }

    proptest! {
        #[test]
        fn penalty_is_monotone_in_gamma(c0 in 0.0f64..1.0, p in proptest::array::uniform3(0.0f64..1.0),
                                        g1 in 0.0f64..5.0, dg in 0.0f64..5.0) {
            let a = CriticConfig::with_gamma(g1).penalize(c0, p).1;
            let b = CriticConfig::with_gamma(g1 + dg).penalize(c0, p).1;
            prop_assert!(b <= a);
            prop_assert!((0.0..=1.0).contains(&b));
        }

        #[test]
        fn critic_context_never_leaks_thought(thought in "[a-z]{12,20}") {
            // thoughts live only on trajectory steps, never in evidence
            let ev = vec![claim(Some(0.4))];
            let view = ContextView::Critic { verdict: Verdict::No, score: 0.4 };
            prop_assert!(!serialize_context(&ev, view, 2400).contains(&thought));
        }
    }
}
