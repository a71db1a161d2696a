//! Evidence-based adjudication of directed artist-influence hypotheses.

pub mod agent;
pub mod bench;
pub mod cli;
pub mod config;
pub mod graph;
pub mod iconclass;
pub mod manifold;
pub mod model;
pub mod retrieval;
pub mod store;
pub mod synth;
pub mod text;
pub mod tools;
pub mod workspace;
