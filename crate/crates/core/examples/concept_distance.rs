//! Distances and alignment scores over a small hierarchical subject
//! classification.

use std::collections::BTreeSet;

use artjudge::iconclass::{
    alignment_metrics, code_distance, directed_set_distance, normalize_codes, parse_graph, AlignmentLevel, CodeSet,
    DecayConfig,
};

const CODES: &str = "\
2
25
25H
25H1
25H2
7
73
73D
73D1
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let graph = parse_graph(CODES, None)?;
    let decay = DecayConfig::default();
    for (a, b) in [("25H1", "25H2"), ("25H1", "25"), ("25H1", "73D1")] {
        println!(
            "d({a}, {b}) = {:.4}   (lca {:?})",
            code_distance(a, b, &graph, decay)?,
            graph.lowest_common_ancestor(a, b)?
        );
    }

    let landscape = CodeSet::new("w1", ["25H1"]);
    println!("normalized {:?}", normalize_codes(&landscape, &graph, 2)?.codes);

    let set = |c: &[&str]| c.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    let d = directed_set_distance(&set(&["25H1", "73D1"]), &set(&["25H2"]), &graph, decay)?;
    println!("set distance {{25H1, 73D1}} -> {{25H2}} = {d:.4}");

    let predicted = [CodeSet::new("w1", ["25H2"]), CodeSet::new("w2", ["73D1"])];
    let gold = [CodeSet::new("w1", ["25H1"]), CodeSet::new("w2", ["73D1"])];
    for level in [AlignmentLevel::ExactLeaf, AlignmentLevel::ANCESTOR_L3] {
        let s = alignment_metrics(&predicted, &gold, &graph, level)?;
        println!("{level:?}: P={:.2} R={:.2} F1={:.2}", s.precision, s.recall, s.f1);
    }
    Ok(())
}
