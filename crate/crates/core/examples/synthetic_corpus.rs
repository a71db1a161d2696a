//! Generate a synthetic benchmark workspace with planted influence signals
//! and validate it.
//!
//! `cargo run --example synthetic_corpus [out_dir]`

use std::path::PathBuf;

use artjudge::synth::{generate, SynthSpec};
use artjudge::workspace::Workspace;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SynthSpec::mini_benchmark();
    let corpus = generate(&spec)?;
    println!(
        "{} artists, {} artworks, {} pairs, {} planted influence sentences",
        corpus.artists.len(),
        corpus.artworks.len(),
        corpus.pairs.len(),
        corpus.planted_sentences
    );
    for (s, t, kind) in corpus.kinds.iter().step_by(12) {
        println!("  {s} -> {t}: {kind:?}");
    }

    let scratch = tempfile::tempdir()?;
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| scratch.path().to_path_buf());
    corpus.write(&out)?;
    let report = Workspace::load(&out)?.validate();
    println!("workspace at {}: {:?}", out.display(), report);
    Ok(())
}
