//! Property-graph materialization of verdicts and its file exports.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{Corpus, DirectedPair, Verdict, VerdictTuple};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("verdict for {pair} references unknown artist {artist}")]
    DanglingVerdict { pair: String, artist: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, GraphError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeLabel {
    Artist,
    Artwork,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EdgeType {
    Influenced,
    Authored,
}

impl EdgeType {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeType::Influenced => "INFLUENCED",
            EdgeType::Authored => "AUTHORED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub label: NodeLabel,
    pub properties: BTreeMap<String, Value>,
}

/// Attributes of an adjudicated hypothesis, copied verbatim from its verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceAttributes {
    pub verdict: Verdict,
    pub confidence: f64,
    pub influence_score: f64,
    pub evidence_summary: String,
    pub tool_provenance: Vec<String>,
    pub trajectory_refs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    #[serde(rename = "type")]
    pub edge_type: EdgeType,
    pub source: String,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub influence: Option<InfluenceAttributes>,
}

/// Nodes keyed by id and edges keyed by `(type, source, target)`, so every
/// export is ordered deterministically.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PropertyGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl PropertyGraph {
    pub fn influence_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.edge_type == EdgeType::Influenced)
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }
}

/// One line per scored claim, `tool=score` separated by `; `.
pub fn evidence_summary(tuple: &VerdictTuple) -> String {
    tuple
        .evidence
        .iter()
        .filter_map(|c| c.score.map(|s| format!("{}={s:.3}", c.source_tool)))
        .collect::<Vec<_>>()
        .join("; ")
}

fn provenance(tuple: &VerdictTuple) -> Vec<String> {
    let mut tools: Vec<String> = Vec::new();
    for c in &tuple.evidence {
        if !tools.contains(&c.source_tool) {
            tools.push(c.source_tool.clone());
        }
    }
    tools
}

/// Artist and artwork nodes, AUTHORED edges, and one INFLUENCED edge per
/// adjudicated pair. A later verdict for the same pair overwrites an earlier
/// one while keeping every trajectory reference.
pub fn materialize_graph(verdicts: &[(DirectedPair, VerdictTuple)], corpus: &Corpus) -> Result<PropertyGraph> {
    let mut nodes: BTreeMap<String, Node> = BTreeMap::new();
    for a in &corpus.artists {
        let mut p = BTreeMap::new();
        p.insert("name".into(), Value::from(a.name.clone()));
        p.insert("birth_year".into(), Value::from(a.birth_year));
        p.insert("death_year".into(), Value::from(a.death_year));
        nodes.insert(
            a.artist_id.clone(),
            Node {
                id: a.artist_id.clone(),
                label: NodeLabel::Artist,
                properties: p,
            },
        );
    }
    let mut edges: BTreeMap<(EdgeType, String, String), Edge> = BTreeMap::new();
    for w in &corpus.artworks {
        let mut p = BTreeMap::new();
        p.insert("title".into(), Value::from(w.title.clone()));
        p.insert("medium".into(), Value::from(w.medium.clone()));
        p.insert("artist_id".into(), Value::from(w.artist_id.clone()));
        if let Some(y) = w.year {
            p.insert("year".into(), Value::from(y));
        }
        nodes.insert(
            w.artwork_id.clone(),
            Node {
                id: w.artwork_id.clone(),
                label: NodeLabel::Artwork,
                properties: p,
            },
        );
        if corpus.artist(&w.artist_id).is_some() {
            edges.insert(
                (EdgeType::Authored, w.artist_id.clone(), w.artwork_id.clone()),
                Edge {
                    edge_type: EdgeType::Authored,
                    source: w.artist_id.clone(),
                    target: w.artwork_id.clone(),
                    influence: None,
                },
            );
        }
    }
    for (pair, tuple) in verdicts {
        for id in [&pair.source_artist_id, &pair.target_artist_id] {
            if corpus.artist(id).is_none() {
                return Err(GraphError::DanglingVerdict {
                    pair: pair.key(),
                    artist: id.clone(),
                });
            }
        }
        let key = (
            EdgeType::Influenced,
            pair.source_artist_id.clone(),
            pair.target_artist_id.clone(),
        );
        let mut refs = edges
            .get(&key)
            .and_then(|e| e.influence.as_ref())
            .map(|i| i.trajectory_refs.clone())
            .unwrap_or_default();
        refs.extend(tuple.trajectory_ref.iter().cloned());
        edges.insert(
            key,
            Edge {
                edge_type: EdgeType::Influenced,
                source: pair.source_artist_id.clone(),
                target: pair.target_artist_id.clone(),
                influence: Some(InfluenceAttributes {
                    verdict: tuple.verdict,
                    confidence: tuple.confidence,
                    influence_score: tuple.influence_score,
                    evidence_summary: evidence_summary(tuple),
                    tool_provenance: provenance(tuple),
                    trajectory_refs: refs,
                }),
            },
        );
    }
    Ok(PropertyGraph {
        nodes: nodes.into_values().collect(),
        edges: edges.into_values().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    GraphJson,
    /// Idempotent MERGE statements for graph-database import.
    PropertyGraphScript,
    NodeEdgeCsv,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "json" | "graphjson" => Ok(ExportFormat::GraphJson),
            "script" | "cypher" | "merge" => Ok(ExportFormat::PropertyGraphScript),
            "csv" => Ok(ExportFormat::NodeEdgeCsv),
            other => Err(format!("unknown graph format {other:?} (expected json, script or csv)")),
        }
    }
}

pub const GRAPH_JSON_FILE: &str = "graph.json";
pub const SCRIPT_FILE: &str = "graph.cypher";
pub const NODES_CSV: &str = "nodes.csv";
pub const EDGES_CSV: &str = "edges.csv";
pub const NODE_HEADER: [&str; 4] = ["id", "label", "property", "value"];
pub const EDGE_HEADER: [&str; 9] = [
    "type",
    "source",
    "target",
    "verdict",
    "confidence",
    "influence_score",
    "evidence_summary",
    "tool_provenance",
    "trajectory_refs",
];

pub fn to_graph_json(graph: &PropertyGraph) -> String {
    serde_json::to_string_pretty(graph).expect("graph serializes") + "\n"
}

pub fn from_graph_json(text: &str) -> std::result::Result<PropertyGraph, serde_json::Error> {
    serde_json::from_str(text)
}

fn lit(v: &Value) -> String {
    v.to_string()
}

pub fn to_script(graph: &PropertyGraph) -> String {
    let mut out = String::new();
    for n in &graph.nodes {
        let label = match n.label {
            NodeLabel::Artist => "Artist",
            NodeLabel::Artwork => "Artwork",
        };
        out.push_str(&format!("MERGE (n:{label} {{id: {}}})", lit(&Value::from(n.id.clone()))));
        let sets: Vec<String> = n.properties.iter().map(|(k, v)| format!("n.{k} = {}", lit(v))).collect();
        if !sets.is_empty() {
            out.push_str(" SET ");
            out.push_str(&sets.join(", "));
        }
        out.push_str(";\n");
    }
    for e in &graph.edges {
        let (src_label, tgt_label) = match e.edge_type {
            EdgeType::Influenced => ("Artist", "Artist"),
            EdgeType::Authored => ("Artist", "Artwork"),
        };
        out.push_str(&format!(
            "MATCH (a:{src_label} {{id: {}}}), (b:{tgt_label} {{id: {}}}) MERGE (a)-[r:{}]->(b)",
            lit(&Value::from(e.source.clone())),
            lit(&Value::from(e.target.clone())),
            e.edge_type.as_str()
        ));
        if let Some(i) = &e.influence {
            let v = serde_json::to_value(i).expect("attributes serialize");
            let sets: Vec<String> = v
                .as_object()
                .expect("struct")
                .iter()
                .map(|(k, v)| format!("r.{k} = {}", lit(v)))
                .collect();
            out.push_str(" SET ");
            out.push_str(&sets.join(", "));
        }
        out.push_str(";\n");
    }
    out
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// `nodes.csv` holds one row per node property (`id,label,property,value`);
/// `edges.csv` one row per edge with influence attributes blank on AUTHORED.
pub fn to_csv(graph: &PropertyGraph) -> (Vec<u8>, Vec<u8>) {
    let mut node_rows = Vec::new();
    for n in &graph.nodes {
        let label = format!("{:?}", n.label);
        for (k, v) in &n.properties {
            let value = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            node_rows.push(vec![n.id.clone(), label.clone(), k.clone(), value]);
        }
    }
    let edge_rows = graph
        .edges
        .iter()
        .map(|e| {
            let mut row = vec![e.edge_type.as_str().to_string(), e.source.clone(), e.target.clone()];
            match &e.influence {
                Some(i) => row.extend([
                    i.verdict.to_string(),
                    i.confidence.to_string(),
                    i.influence_score.to_string(),
                    i.evidence_summary.clone(),
                    i.tool_provenance.join("|"),
                    i.trajectory_refs.join("|"),
                ]),
                None => row.extend(std::iter::repeat_n(String::new(), 6)),
            }
            row
        })
        .collect();
    (csv_bytes(&NODE_HEADER, node_rows), csv_bytes(&EDGE_HEADER, edge_rows))
}

/// Writes `graph` into `dir` and returns the created paths.
pub fn export_graph(graph: &PropertyGraph, format: ExportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| GraphError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let files: Vec<(PathBuf, Vec<u8>)> = match format {
        ExportFormat::GraphJson => vec![(dir.join(GRAPH_JSON_FILE), to_graph_json(graph).into_bytes())],
        ExportFormat::PropertyGraphScript => vec![(dir.join(SCRIPT_FILE), to_script(graph).into_bytes())],
        ExportFormat::NodeEdgeCsv => {
            let (n, e) = to_csv(graph);
            vec![(dir.join(NODES_CSV), n), (dir.join(EDGES_CSV), e)]
        }
    };
    let mut paths = Vec::new();
    for (path, body) in files {
        fs::write(&path, body).map_err(io(&path))?;
        paths.push(path);
    }
    Ok(paths)
}

/// One adjudicated pair as written by batch adjudication (`verdicts.jsonl`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub pair: DirectedPair,
    pub verdict: VerdictTuple,
}

pub fn read_verdicts(path: &Path) -> Result<Vec<(DirectedPair, VerdictTuple)>> {
    let text = fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<VerdictRecord>(l)
                .map(|r| (r.pair, r.verdict))
                .map_err(|e| GraphError::Parse {
                    path: path.display().to_string(),
                    message: format!("line {}: {e}", i + 1),
                })
        })
        .collect()
}

pub fn read_graph_json(path: &Path) -> Result<PropertyGraph> {
    let text = fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_graph_json(&text).map_err(|e| GraphError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
