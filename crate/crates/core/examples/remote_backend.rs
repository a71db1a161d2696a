//! Adjudicate one pair with a chat-completions model endpoint as controller
//! and critic. Requires `ARTJUDGE_ENDPOINT` (and usually `ARTJUDGE_MODEL`,
//! `ARTJUDGE_API_KEY`); exits quietly when unset.

use std::path::PathBuf;

use artjudge::agent::{adjudicate_pair, PromptTemplates, RemoteBackend, RemoteConfig, Role};
use artjudge::model::DirectedPair;
use artjudge::workspace::{ContextOptions, Workspace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = match RemoteConfig::from_env() {
        Ok(c) => c,
        Err(e) => {
            println!("remote backend not configured ({e}); set ARTJUDGE_ENDPOINT to run this example");
            return Ok(());
        }
    };
    let ws = Workspace::load(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini_wib"))?;
    let registry = ws.registry(ContextOptions::default())?;
    let templates = PromptTemplates::default();
    let controller = RemoteBackend::new(Role::Controller, config.clone(), templates.clone());
    let critic = RemoteBackend::new(Role::Critic, config, templates);

    let pair = DirectedPair::new("syn000", "syn001");
    let t = adjudicate_pair(&pair, &registry, &controller, &critic, &ws.config.agent_config());
    println!("{}", t.to_jsonl());
    for e in controller.exchanges().iter().chain(critic.exchanges().iter()) {
        println!("{e:?}");
    }
    Ok(())
}
