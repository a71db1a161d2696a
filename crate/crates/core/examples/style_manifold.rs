//! Build the five-axis formal-style basis from pole-prompt embeddings and
//! compare two artists' style signatures.
//!
//! `cargo run --example style_manifold [workspace] [artist] [artist]`

use std::path::PathBuf;

use artjudge::manifold::{artist_signature, manifold_distance, project_f32};
use artjudge::workspace::Workspace;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let root = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini_wib"));
    let a = args.next().unwrap_or_else(|| "syn000".into());
    let b = args.next().unwrap_or_else(|| "syn001".into());
    let ws = Workspace::load(&root)?;

    let basis = ws.basis(false)?;
    println!("basis: {} axes, orthonormality error {:.2e}", basis.len(), basis.orthonormality_error());

    let mut signatures = Vec::new();
    for id in [&a, &b] {
        let coords = ws
            .corpus
            .portfolio(id)
            .iter()
            .map(|w| project_f32(ws.visual.require(&w.embedding_key)?, &basis).map_err(Into::into))
            .collect::<Result<Vec<_>, Box<dyn std::error::Error>>>()?;
        let sig = artist_signature(id, &coords)?;
        let mu: Vec<String> = sig.mu.iter().map(|x| format!("{x:+.3}")).collect();
        println!("{id}: {} works, signature [{}]", sig.n_works, mu.join(", "));
        signatures.push(sig);
    }
    println!("style distance {a} / {b}: {:.4}", manifold_distance(&signatures[0], &signatures[1]));
    Ok(())
}
