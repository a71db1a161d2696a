//! Five-fold cross-validated benchmark with per-fold threshold tuning,
//! against the always-YES lower bound.
//!
//! `cargo run --example benchmark [out_dir]`

use std::path::PathBuf;

use artjudge::agent::{Role, ScriptedBackend};
use artjudge::bench::{run_benchmark, BenchOptions, BenchmarkDataset};
use artjudge::workspace::{ContextOptions, Workspace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ws = Workspace::load(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini_wib"))?;
    let dataset = BenchmarkDataset::new(ws.pairs.clone(), true)?;
    let registry = ws.registry(ContextOptions::default())?;
    let controller = ScriptedBackend::heuristic(Role::Controller);
    let critic = ScriptedBackend::heuristic(Role::Critic);
    let report = run_benchmark(&dataset, &registry, &controller, &critic, &BenchOptions::from_config(&ws.config))?;

    println!("{} pairs ({} positive), tiers {:?}", report.pairs, report.positives, report.tier_counts);
    for r in &report.rounds {
        println!(
            "round {}: theta {:.3}  F1 {:.3}  MCC {:.3}",
            r.dev_fold, r.threshold, r.metrics.f1_pos, r.metrics.mcc
        );
    }
    for name in ["f1_pos", "mcc", "roc_auc", "specificity"] {
        println!("mean {name:<12} {:.3} ± {:.3}", report.summary.mean[name], report.summary.sd[name]);
    }
    println!("always-YES: F1 {:.3}  MCC {:.3}", report.always_yes.f1_pos, report.always_yes.mcc);
    for (tier, rate) in &report.overall_tiers {
        println!("{:<20} rejected {}/{}", tier.as_str(), rate.rejected, rate.total);
    }
    if let Some(out) = std::env::args().nth(1) {
        report.write(&PathBuf::from(&out), Some(&ws.config.to_toml()))?;
        println!("report written to {out}");
    }
    Ok(())
}
