//! Adjudicate directed pairs end to end with the deterministic heuristic
//! controller and critic, printing each trajectory.
//!
//! `cargo run --example adjudicate [source target]`

use std::path::PathBuf;

use artjudge::agent::{adjudicate_pair, AgentAction, Role, ScriptedBackend};
use artjudge::model::DirectedPair;
use artjudge::workspace::{ContextOptions, Workspace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ws = Workspace::load(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini_wib"))?;
    let args: Vec<String> = std::env::args().skip(1).collect();
    let pairs: Vec<DirectedPair> = match args.as_slice() {
        [s, t] => vec![DirectedPair::new(s.as_str(), t.as_str())],
        // a spread of pairs across positives and negative tiers
        _ => ws.pairs.iter().step_by(17).take(4).cloned().collect(),
    };
    let registry = ws.registry(ContextOptions::default())?;
    let controller = ScriptedBackend::heuristic(Role::Controller);
    let critic = ScriptedBackend::heuristic(Role::Critic);
    let config = ws.config.agent_config();

    for pair in &pairs {
        let t = adjudicate_pair(pair, &registry, &controller, &critic, &config);
        println!("{pair}  (label {:?}, tier {:?})", pair.label, pair.tier);
        for step in &t.steps {
            match &step.action {
                AgentAction::Call { tool, .. } => println!("  call {}", tool.as_str()),
                other => println!("  {other:?}"),
            }
        }
        match t.verdict() {
            Some(v) => println!(
                "  => {:?} confidence {:.3} score {:.3}",
                v.verdict, v.confidence, v.influence_score
            ),
            None => println!("  => no verdict"),
        }
    }
    println!("backend invocations: {}", controller.invocation_log().len() + critic.invocation_log().len());
    Ok(())
}
