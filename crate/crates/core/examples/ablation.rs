//! Component ablations on identical folds: drop a tool, vary the critic
//! weight, mask biographies, or use generic style prompts.

use std::path::PathBuf;

use artjudge::bench::{ablate, heuristic_backends, BenchOptions, BenchmarkDataset, Switch};
use artjudge::workspace::Workspace;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ws = Workspace::load(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini_wib"))?;
    let dataset = BenchmarkDataset::new(ws.pairs.clone(), true)?;
    let switches: Vec<Switch> = [
        "disable_tool=BiographyReader",
        "disable_tool=VisualAnalyzer",
        "gamma=0",
        "gamma=4",
        "mask_bio",
        "generic_prompts",
    ]
    .iter()
    .map(|s| s.parse())
    .collect::<Result<_, _>>()?;
    let report = ablate(&ws, &dataset, &BenchOptions::from_config(&ws.config), &switches, &heuristic_backends)?;

    let base = &report.baseline.summary.mean;
    println!("{:<30} {:>7} {:>7} {:>5}", "arm", "F1", "MCC", "YES");
    println!("{:<30} {:>7.3} {:>7.3} {:>5}", "baseline", base["f1_pos"], base["mcc"], report.baseline.yes_count);
    for arm in &report.arms {
        println!(
            "{:<30} {:>+7.3} {:>+7.3} {:>5}",
            arm.switch, arm.delta["f1_pos"], arm.delta["mcc"], arm.yes_count
        );
    }
    Ok(())
}
