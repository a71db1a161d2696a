//! Run each evidence tool on one directed pair and print its summary,
//! with and without biography masking.
//!
//! `cargo run --example evidence_tools [source] [target]`

use std::path::PathBuf;

use artjudge::model::DirectedPair;
use artjudge::tools::{ToolBody, ToolName};
use artjudge::workspace::{ContextOptions, Workspace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let pair = DirectedPair::new(
        args.next().unwrap_or_else(|| "syn000".into()),
        args.next().unwrap_or_else(|| "syn001".into()),
    );
    let ws = Workspace::load(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini_wib"))?;
    let registry = ws.registry(ContextOptions::default())?;
    println!("pair {pair}");
    for tool in ToolName::ALL {
        let record = registry.call(tool, &pair)?;
        let score = record.summary_score.map_or("-".into(), |s| format!("{s:.3}"));
        println!("  {:<18} score {score}", tool.as_str());
        if let ToolBody::BiographyReader(cues) = &record.body {
            for hit in &cues.hits {
                println!("      {:?}: {:?} in {}", hit.category, hit.term, hit.doc_id);
            }
        }
    }

    let masked = ws.registry(ContextOptions { masked: true, ..Default::default() })?;
    if let ToolBody::BiographyReader(cues) = masked.call(ToolName::BiographyReader, &pair)?.body {
        println!("masked biography reader: {} cues, pathway {:.3}", cues.hits.len(), cues.pathway_score);
    }
    Ok(())
}
