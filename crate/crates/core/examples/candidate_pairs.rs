//! Propose directed influence candidates from visual nearest neighbours,
//! comparing the graph index against exhaustive search.
//!
//! `cargo run --example candidate_pairs [workspace]`

use std::path::PathBuf;
use std::sync::Arc;

use artjudge::retrieval::{audit_candidates, build_index, generate_candidates, Backend};
use artjudge::workspace::Workspace;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini_wib"));
    let ws = Workspace::load(&root)?;
    let params = ws.config.candidate_params();

    for backend in [Backend::ExactScan, Backend::SmallWorldGraph] {
        let index = build_index(Arc::clone(&ws.visual), backend, ws.config.index_params())?;
        let pairs = generate_candidates(&ws.corpus, &index, params)?;
        let violations = audit_candidates(&ws.corpus, &ws.visual, &pairs, params);
        println!("{backend:?}: {} candidates, {} audit violations", pairs.len(), violations.len());
        for p in pairs.iter().take(5) {
            println!(
                "  {} -> {}  seed {:.3}  via {} / {}",
                p.source_artist_id, p.target_artist_id, p.seed_similarity, p.witness_artworks.0, p.witness_artworks.1
            );
        }
    }
    Ok(())
}
