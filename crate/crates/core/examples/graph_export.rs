//! Adjudicate every benchmark pair and export the resulting influence graph
//! as graph JSON, a property-graph MERGE script and node/edge CSV files.
//!
//! `cargo run --example graph_export [out_dir]`

use std::path::PathBuf;

use artjudge::agent::{adjudicate_pair, Role, ScriptedBackend};
use artjudge::graph::{export_graph, materialize_graph, ExportFormat};
use artjudge::workspace::{ContextOptions, Workspace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ws = Workspace::load(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini_wib"))?;
    let registry = ws.registry(ContextOptions::default())?;
    let controller = ScriptedBackend::heuristic(Role::Controller);
    let critic = ScriptedBackend::heuristic(Role::Critic);
    let config = ws.config.agent_config();

    let verdicts: Vec<_> = ws
        .pairs
        .iter()
        .filter_map(|p| {
            let t = adjudicate_pair(p, &registry, &controller, &critic, &config);
            t.verdict().cloned().map(|v| (p.clone(), v))
        })
        .collect();
    let graph = materialize_graph(&verdicts, &ws.corpus)?;
    println!("{} nodes, {} influence edges", graph.nodes.len(), graph.influence_edges().count());

    let scratch = tempfile::tempdir()?;
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| scratch.path().to_path_buf());
    for format in [ExportFormat::GraphJson, ExportFormat::PropertyGraphScript, ExportFormat::NodeEdgeCsv] {
        for path in export_graph(&graph, format, &out)? {
            println!("{format:?}: {} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());
        }
    }
    Ok(())
}
