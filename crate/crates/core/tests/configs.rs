//! The checked-in scenario configs parse, and the rescaled variants are exact parabolic rescalings.

use pinchflow::config::load_config;
use std::path::PathBuf;

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn every_config_parses() {
    let mut count = 0;
    for e in std::fs::read_dir(dir()).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "json") {
            load_config(&p.to_string_lossy()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            count += 1;
        }
    }
    assert!(count >= 11);
}

#[test]
fn rescaled_variants_match() {
    for base in ["geodesic_sphere", "dumbbell", "perturbed_equator"] {
        let b = load_config(&dir().join(format!("{base}.json")).to_string_lossy()).unwrap();
        for (c, tag) in [(0.25, "K0.25"), (4.0, "K4")] {
            let v = load_config(&dir().join(format!("{base}_{tag}.json")).to_string_lossy()).unwrap();
            assert_eq!(v, b.rescaled(c), "{base}_{tag}");
        }
    }
}
