//! Corpus round-trip: every fixture parses, reparses from its canonical
//! print to the same value, and the canonical form is a fixed point.

use std::fs;
use std::path::PathBuf;

use weave_core::{parse_model, print_model};

fn corpus() -> Vec<PathBuf> {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let mut files = Vec::new();
    for dir in [manifest.join("../../fixtures"), manifest.join("patterns")] {
        for entry in fs::read_dir(&dir).unwrap_or_else(|e| panic!("read {}: {e}", dir.display())) {
            let path = entry.unwrap().path();
            if matches!(
                path.extension().and_then(|e| e.to_str()),
                Some("adl" | "qos" | "plat" | "map" | "res")
            ) {
                files.push(path);
            }
        }
    }
    files.sort();
    files
}

#[test]
fn corpus_covers_all_five_document_kinds() {
    let files = corpus();
    assert!(files.len() >= 20, "corpus has only {} files", files.len());
    for ext in ["adl", "qos", "plat", "map", "res"] {
        assert!(
            files
                .iter()
                .any(|p| p.extension().and_then(|e| e.to_str()) == Some(ext)),
            "no .{ext} fixture in corpus"
        );
    }
}

#[test]
fn parse_print_parse_is_identity_on_the_corpus() {
    for path in corpus() {
        let source = fs::read_to_string(&path).unwrap();
        let doc = parse_model(&source).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let printed = print_model(&doc);
        let reparsed = parse_model(&printed)
            .unwrap_or_else(|e| panic!("{} (canonical): {e}\n{printed}", path.display()));
        assert_eq!(doc, reparsed, "round trip drifted for {}", path.display());
    }
}

#[test]
fn canonical_print_is_a_fixed_point() {
    for path in corpus() {
        let source = fs::read_to_string(&path).unwrap();
        let doc = parse_model(&source).unwrap();
        let once = print_model(&doc);
        let twice = print_model(&parse_model(&once).unwrap());
        assert_eq!(
            once,
            twice,
            "print is not idempotent for {}",
            path.display()
        );
    }
}

#[test]
fn parsing_is_deterministic() {
    for path in corpus() {
        let source = fs::read_to_string(&path).unwrap();
        let a = parse_model(&source).unwrap();
        let b = parse_model(&source).unwrap();
        assert_eq!(a, b);
        assert_eq!(print_model(&a), print_model(&b));
    }
}
