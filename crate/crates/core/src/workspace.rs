//! On-disk corpus directory: loading, writing and wiring into an evidence
//! context.
//!
//! Layout (optional files marked `?`):
//!
//! ```text
//! artists.json  artworks.json  pairs.jsonl | pairs.json
//! visual.ajem   prompts.ajem   prompts_generic.ajem?   prompts.tsv?
//! biographies.jsonl  iconclass.txt  iconclass_edges.txt?  codes.jsonl
//! lexicons/?  templates/?  config.toml?
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::iconclass::{read_code_sets, read_graph, CodeSet, ConceptError, ConceptGraph};
use crate::manifold::{axes_from_store, build_basis, ManifoldError, WolfflinBasis};
use crate::model::{validate_corpus, ArtistProfile, ArtworkRecord, Corpus, DirectedPair, ValidationReport, CORPUS_SCHEMA};
use crate::store::{l2_normalize, read_store, EmbeddingMatrix, StoreError};
use crate::text::HashingEmbedder;
use crate::tools::{BiographyDoc, ContextParts, EvidenceContext, Lexicons, ToolError, ToolRegistry};

pub const ARTISTS_FILE: &str = "artists.json";
pub const ARTWORKS_FILE: &str = "artworks.json";
pub const PAIRS_JSONL: &str = "pairs.jsonl";
pub const PAIRS_JSON: &str = "pairs.json";
pub const VISUAL_STORE: &str = "visual.ajem";
pub const POLE_STORE: &str = "prompts.ajem";
pub const GENERIC_POLE_STORE: &str = "prompts_generic.ajem";
pub const POLE_PROMPTS: &str = "prompts.tsv";
pub const BIOGRAPHIES_FILE: &str = "biographies.jsonl";
pub const CODE_LIST: &str = "iconclass.txt";
pub const CODE_EDGES: &str = "iconclass_edges.txt";
pub const CODE_SETS: &str = "codes.jsonl";
pub const LEXICON_DIR: &str = "lexicons";
pub const TEMPLATE_DIR: &str = "templates";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: unsupported schema {found:?}, expected {CORPUS_SCHEMA}")]
    Schema { path: String, found: String },
    #[error("{path}: {source}")]
    Store { path: String, source: StoreError },
    #[error(transparent)]
    Concept(#[from] ConceptError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Tool(#[from] ToolError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Missing(String),
}

pub type Result<T> = std::result::Result<T, WorkspaceError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> WorkspaceError + '_ {
    move |source| WorkspaceError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads `{"schema": "artjudge-corpus/1", "<key>": [...]}`; a bare JSON
/// array is also accepted.
pub fn read_collection<T: DeserializeOwned>(path: &Path, key: &str) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let parse = |message: String| WorkspaceError::Parse {
        path: path.display().to_string(),
        message,
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| parse(e.to_string()))?;
    let items = match value {
        serde_json::Value::Array(_) => value,
        serde_json::Value::Object(mut map) => {
            let schema = map.get("schema").and_then(|s| s.as_str()).unwrap_or_default().to_string();
            if schema != CORPUS_SCHEMA {
                return Err(WorkspaceError::Schema {
                    path: path.display().to_string(),
                    found: schema,
                });
            }
            map.remove(key).ok_or_else(|| parse(format!("missing key {key:?}")))?
        }
        _ => return Err(parse("expected an object or array".into())),
    };
    serde_json::from_value(items).map_err(|e| parse(e.to_string()))
}

pub fn write_collection<T: Serialize>(path: &Path, key: &str, items: &[T]) -> Result<()> {
    let doc = serde_json::json!({ "schema": CORPUS_SCHEMA, key: items });
    let text = serde_json::to_string_pretty(&doc).expect("collection serializes") + "\n";
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| WorkspaceError::Parse {
                path: path.display().to_string(),
                message: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut text = String::new();
    for item in items {
        text.push_str(&serde_json::to_string(item).expect("record serializes"));
        text.push('\n');
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Reads pairs from JSON Lines or a collection document, by extension.
pub fn read_pairs(path: &Path) -> Result<Vec<DirectedPair>> {
    if path.extension().is_some_and(|e| e == "jsonl") {
        read_jsonl(path)
    } else {
        read_collection(path, "pairs")
    }
}

fn load_store(path: &Path) -> Result<EmbeddingMatrix> {
    read_store(path).map_err(|source| WorkspaceError::Store {
        path: path.display().to_string(),
        source,
    })
}

/// Variations of the evidence context used by ablations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ContextOptions {
    pub masked: bool,
    pub generic_prompts: bool,
}

#[derive(Debug, Clone)]
pub struct Workspace {
    pub root: PathBuf,
    pub config: RunConfig,
    pub corpus: Arc<Corpus>,
    pub visual: Arc<EmbeddingMatrix>,
    pub poles: EmbeddingMatrix,
    pub generic_poles: Option<EmbeddingMatrix>,
    pub graph: Arc<ConceptGraph>,
    pub code_sets: Vec<CodeSet>,
    pub biographies: Vec<BiographyDoc>,
    pub lexicons: Lexicons,
    pub pairs: Vec<DirectedPair>,
}

impl Workspace {
    /// Loads `dir`, using `dir/config.toml` when present.
    pub fn load(dir: &Path) -> Result<Self> {
        let cfg_path = dir.join(CONFIG_FILE);
        let config = if cfg_path.exists() {
            RunConfig::load(&cfg_path)?
        } else {
            RunConfig::default()
        };
        Self::load_with_config(dir, config)
    }

    pub fn load_with_config(dir: &Path, config: RunConfig) -> Result<Self> {
        let artists: Vec<ArtistProfile> = read_collection(&dir.join(ARTISTS_FILE), "artists")?;
        let artworks: Vec<ArtworkRecord> = read_collection(&dir.join(ARTWORKS_FILE), "artworks")?;
        let pairs = if dir.join(PAIRS_JSONL).exists() {
            read_pairs(&dir.join(PAIRS_JSONL))?
        } else if dir.join(PAIRS_JSON).exists() {
            read_pairs(&dir.join(PAIRS_JSON))?
        } else {
            Vec::new()
        };
        let mut visual = load_store(&dir.join(VISUAL_STORE))?;
        if !visual.is_normalized() && !visual.is_empty() {
            log::warn!("visual store is not unit-normalized; normalizing on load");
            visual = l2_normalize(&visual).map_err(|source| WorkspaceError::Store {
                path: dir.join(VISUAL_STORE).display().to_string(),
                source,
            })?;
        }
        let poles = load_store(&dir.join(POLE_STORE))?;
        let generic_path = dir.join(GENERIC_POLE_STORE);
        let generic_poles = if generic_path.exists() {
            Some(load_store(&generic_path)?)
        } else {
            None
        };
        let edges = dir.join(CODE_EDGES);
        let graph = read_graph(&dir.join(CODE_LIST), edges.exists().then_some(edges.as_path()))?;
        let codes_path = dir.join(CODE_SETS);
        let code_sets = if codes_path.exists() {
            read_code_sets(&codes_path)?
        } else {
            Vec::new()
        };
        let bio_path = dir.join(BIOGRAPHIES_FILE);
        let biographies = if bio_path.exists() {
            read_jsonl(&bio_path)?
        } else {
            Vec::new()
        };
        let lex_dir = dir.join(LEXICON_DIR);
        let lexicons = if lex_dir.is_dir() {
            Lexicons::load_dir(&lex_dir).map_err(io_err(&lex_dir))?
        } else {
            Lexicons::default()
        };
        Ok(Self {
            root: dir.to_path_buf(),
            config,
            corpus: Arc::new(Corpus::new(artists, artworks)),
            visual: Arc::new(visual),
            poles,
            generic_poles,
            graph: Arc::new(graph),
            code_sets,
            biographies,
            lexicons,
            pairs,
        })
    }

    /// Corpus validation plus pair and code-set cross references.
    pub fn validate(&self) -> ValidationReport {
        let keys: BTreeSet<&str> = self.visual.ids().iter().map(String::as_str).collect();
        let mut report = validate_corpus(&self.corpus.artists, &self.corpus.artworks, &keys);
        for pair in &self.pairs {
            if let Err(message) = pair.check() {
                report.errors.push(crate::model::ValidationIssue::InvalidPair { message });
            }
            for id in [&pair.source_artist_id, &pair.target_artist_id] {
                if self.corpus.artist(id).is_none() {
                    report.errors.push(crate::model::ValidationIssue::InvalidPair {
                        message: format!("pair {} references unknown artist {id}", pair.key()),
                    });
                }
            }
        }
        for set in &self.code_sets {
            for code in &set.codes {
                if !self.graph.contains(code) {
                    report.warnings.push(crate::model::ValidationIssue::UnknownCode {
                        artwork_id: set.artwork_id.clone(),
                        code: code.clone(),
                    });
                }
            }
        }
        report
    }

    pub fn basis(&self, generic: bool) -> Result<WolfflinBasis> {
        let store = if generic {
            self.generic_poles
                .as_ref()
                .ok_or_else(|| WorkspaceError::Missing(format!("{GENERIC_POLE_STORE} is required for generic prompts")))?
        } else {
            &self.poles
        };
        Ok(build_basis(&axes_from_store(store)?)?)
    }

    pub fn context(&self, options: ContextOptions) -> Result<EvidenceContext> {
        let masked = options.masked || self.config.evidence.mask_biographies;
        Ok(EvidenceContext::new(ContextParts {
            corpus: Arc::clone(&self.corpus),
            visual: Arc::clone(&self.visual),
            basis: self.basis(options.generic_prompts)?,
            code_sets: self.code_sets.clone(),
            graph: Arc::clone(&self.graph),
            biographies: self.biographies.clone(),
            embedder: Arc::new(HashingEmbedder::default()),
            lexicons: self.lexicons.clone(),
            masked,
            params: self.config.tool_params(),
        })?)
    }

    pub fn registry(&self, options: ContextOptions) -> Result<ToolRegistry> {
        Ok(ToolRegistry::new(Arc::new(self.context(options)?)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collections_round_trip_and_accept_bare_arrays() {
        let dir = tempfile::tempdir().unwrap();
        let pairs = vec![DirectedPair::new("a", "b"), DirectedPair::new("b", "c")];
        let path = dir.path().join("pairs.json");
        write_collection(&path, "pairs", &pairs).unwrap();
        assert_eq!(read_pairs(&path).unwrap(), pairs);
        fs::write(&path, serde_json::to_string(&pairs).unwrap()).unwrap();
        assert_eq!(read_pairs(&path).unwrap(), pairs);
        let jsonl = dir.path().join("pairs.jsonl");
        write_jsonl(&jsonl, &pairs).unwrap();
        assert_eq!(read_pairs(&jsonl).unwrap(), pairs);
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("artists.json");
        fs::write(&path, r#"{"schema":"other/9","artists":[]}"#).unwrap();
        assert!(matches!(
            read_collection::<ArtistProfile>(&path, "artists"),
            Err(WorkspaceError::Schema { .. })
        ));
    }
}
