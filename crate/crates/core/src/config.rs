//! Run configuration: every tunable hyperparameter in one TOML document.
//! Missing sections and keys fall back to defaults.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentConfig, CriticConfig, DEFAULT_CONTEXT_CHARS, DEFAULT_MAX_STEPS};
use crate::iconclass::DecayConfig;
use crate::manifold::TemperatureConfig;
use crate::retrieval::{Backend, CandidateParams, IndexParams};
use crate::tools::ToolParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Parse(String),
    #[error("invalid value: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalSection {
    pub backend: String,
    pub k: usize,
    pub gamma_v: f64,
    pub delta_years: i32,
    pub m: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
    pub seed: u64,
}

impl Default for RetrievalSection {
    fn default() -> Self {
        let c = CandidateParams::default();
        let i = IndexParams::default();
        Self {
            backend: "hnsw".into(),
            k: c.k,
            gamma_v: c.gamma_v,
            delta_years: c.delta_years,
            m: i.m,
            ef_construction: i.ef_construction,
            ef_search: i.ef_search,
            seed: i.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    pub max_steps: usize,
    pub threshold: f64,
    pub gamma: f64,
    pub omega: [f64; 3],
    pub context_chars: usize,
    /// `scripted` (deterministic heuristic) or `remote`.
    pub backend: String,
}

impl Default for AgentSection {
    fn default() -> Self {
        let c = CriticConfig::default();
        Self {
            max_steps: DEFAULT_MAX_STEPS,
            threshold: 0.5,
            gamma: c.gamma,
            omega: c.omega,
            context_chars: DEFAULT_CONTEXT_CHARS,
            backend: "scripted".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvidenceSection {
    pub lambda: f64,
    pub code_min_level: u32,
    pub kappa: f64,
    pub visual_top_matches: usize,
    pub biography_top_passages: usize,
    pub mask_biographies: bool,
}

impl Default for EvidenceSection {
    fn default() -> Self {
        let t = ToolParams::default();
        Self {
            lambda: t.decay.lambda,
            code_min_level: t.code_min_level,
            kappa: TemperatureConfig::default().kappa,
            visual_top_matches: t.visual_top_matches,
            biography_top_passages: t.biography_top_passages,
            mask_biographies: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub folds: usize,
    pub seed: u64,
    pub balanced: bool,
    /// Tune the threshold on each round's development fold.
    pub tune_threshold: bool,
    pub in_flight: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            folds: 5,
            seed: 42,
            balanced: true,
            tune_threshold: true,
            in_flight: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub retrieval: RetrievalSection,
    pub agent: AgentSection,
    pub evidence: EvidenceSection,
    pub bench: BenchSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.index_backend()?;
        if self.retrieval.k == 0 {
            return bad("retrieval.k must be positive".into());
        }
        if !(-1.0..=1.0).contains(&self.retrieval.gamma_v) {
            return bad(format!("retrieval.gamma_v {} outside [-1,1]", self.retrieval.gamma_v));
        }
        if self.retrieval.delta_years < 0 {
            return bad("retrieval.delta_years must be non-negative".into());
        }
        if self.retrieval.m < 2 || self.retrieval.ef_construction == 0 || self.retrieval.ef_search == 0 {
            return bad("index parameters must be positive (m >= 2)".into());
        }
        if self.agent.max_steps == 0 {
            return bad("agent.max_steps must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.agent.threshold) {
            return bad(format!("agent.threshold {} outside [0,1]", self.agent.threshold));
        }
        self.critic().validate().map_err(ConfigError::Invalid)?;
        if !matches!(self.agent.backend.as_str(), "scripted" | "remote") {
            return bad(format!("agent.backend must be scripted or remote, got {}", self.agent.backend));
        }
        DecayConfig::new(self.evidence.lambda).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.evidence.kappa > 0.0) {
            return bad("evidence.kappa must be positive".into());
        }
        if self.bench.folds < 2 {
            return bad("bench.folds must be at least 2".into());
        }
        if self.bench.in_flight == 0 {
            return bad("bench.in_flight must be positive".into());
        }
        Ok(())
    }

    pub fn index_backend(&self) -> Result<Backend, ConfigError> {
        self.retrieval
            .backend
            .parse()
            .map_err(ConfigError::Invalid)
    }

    pub fn index_params(&self) -> IndexParams {
        IndexParams {
            m: self.retrieval.m,
            ef_construction: self.retrieval.ef_construction,
            ef_search: self.retrieval.ef_search,
            seed: self.retrieval.seed,
        }
    }

    pub fn candidate_params(&self) -> CandidateParams {
        CandidateParams {
            k: self.retrieval.k,
            gamma_v: self.retrieval.gamma_v,
            delta_years: self.retrieval.delta_years,
        }
    }

    pub fn critic(&self) -> CriticConfig {
        CriticConfig {
            gamma: self.agent.gamma,
            omega: self.agent.omega,
        }
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            max_steps: self.agent.max_steps,
            threshold: self.agent.threshold,
            critic: self.critic(),
            context_chars: self.agent.context_chars,
        }
    }

    pub fn tool_params(&self) -> ToolParams {
        ToolParams {
            delta_years: self.retrieval.delta_years,
            visual_top_matches: self.evidence.visual_top_matches,
            biography_top_passages: self.evidence.biography_top_passages,
            code_min_level: self.evidence.code_min_level,
            decay: DecayConfig::new(self.evidence.lambda).unwrap_or_default(),
        }
    }
}
