//! The shipped mini benchmark is exactly what the generator produces.

mod common;

use std::fs;

use artjudge::synth::{generate, SynthSpec};

#[test]
fn shipped_fixture_matches_generator() {
    let dir = tempfile::tempdir().unwrap();
    generate(&SynthSpec::mini_benchmark()).unwrap().write(dir.path()).unwrap();
    let shipped = common::fixture_dir();
    let mut names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for name in names {
        let fresh = dir.path().join(&name);
        if fresh.is_dir() {
            continue;
        }
        assert_eq!(
            fs::read(&fresh).unwrap(),
            fs::read(shipped.join(&name)).unwrap(),
            "{name:?} differs from the generator output"
        );
    }
}
