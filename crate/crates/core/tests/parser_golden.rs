use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cptrank::analysis::general_param_count;
use cptrank::net::{
    cpt_to_tensor, load_network, parse_json_network, parse_net, parse_net_with, select_cpts, to_net_string,
    ParseOptions,
};
use cptrank::{Error, Network};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

const FIXTURES: [&str; 4] = ["minimal.net", "flat_data.net", "alarm.net", "hailfinder.net"];

fn load(name: &str) -> Network {
    load_network(&fixture(name), &ParseOptions::default()).unwrap().0
}

#[test]
fn every_fixture_parses_and_round_trips() {
    for name in FIXTURES {
        let net = load(name);
        let text = to_net_string(&net);
        let again = parse_net(&text).unwrap_or_else(|e| panic!("{name}: reparse failed: {e}"));
        assert_eq!(again, net, "{name}");
    }
}

#[test]
fn child_sums_are_one() {
    for name in FIXTURES {
        let net = load(name);
        for node in net.nodes() {
            let t = cpt_to_tensor(node, &net).unwrap();
            let child = node.cardinality();
            for (c, column) in t.data().chunks(child).enumerate() {
                let s: f64 = column.iter().sum();
                assert!((s - 1.0).abs() <= 1e-6, "{name}/{} configuration {c} sums to {s}", node.name);
            }
        }
    }
}

#[test]
fn general_param_count_matches_node_shape() {
    for name in FIXTURES {
        let net = load(name);
        for node in net.nodes() {
            let parents: u64 = node.parents.iter().map(|p| net.node(p).unwrap().cardinality() as u64).product();
            let dims = net.cpt_dims(node);
            assert_eq!(general_param_count(&dims), (node.cardinality() as u64 - 1) * parents);
        }
    }
}

#[test]
fn minimal_document_read_off() {
    let net = load("minimal.net");
    assert_eq!(net.name(), "minimal");
    let b = net.node("B").unwrap();
    assert_eq!(b.cpt_data, vec![0.2, 0.8, 0.6, 0.4]);
    let t = cpt_to_tensor(b, &net).unwrap();
    assert_eq!(t.dims(), &[2, 2]);
    assert_eq!(t.get(&[0, 1]), Some(0.8));
    assert_eq!(t.get(&[1, 0]), Some(0.6));

    let c = net.node("C").unwrap();
    let t = cpt_to_tensor(c, &net).unwrap();
    assert_eq!(t.dims(), &[3]);
    assert_eq!(t.data(), &[0.1, 0.2, 0.7]);
}

#[test]
fn flat_data_matches_nested() {
    let flat = load("flat_data.net");
    assert_eq!(flat.name(), "flat");
    let x = flat.node("X").unwrap();
    assert_eq!(flat.cpt_dims(x), vec![2, 3, 2, 2]);
    // emitted text is nested; reparsing gives the same numbers
    let nested = parse_net(&to_net_string(&flat)).unwrap();
    assert_eq!(nested.node("X").unwrap().cpt_data, x.cpt_data);
    let t = cpt_to_tensor(x, &flat).unwrap();
    // P1=0, P2=2, P3=1 is configuration 5
    assert_eq!(t.get(&[0, 2, 1, 0]), Some(0.6));
}

#[test]
fn repository_selections() {
    let alarm = load("alarm.net");
    let hail = load("hailfinder.net");
    assert_eq!(alarm.nodes().len(), 37);
    assert_eq!(hail.nodes().len(), 56);
    let names = |net: &Network| select_cpts(net, 3).iter().map(|n| n.name.clone()).collect::<Vec<_>>();
    assert_eq!(names(&alarm).len(), 3);
    assert_eq!(names(&hail).len(), 6);
    assert!(names(&hail).contains(&"Boundaries".to_string()));
    assert_eq!(select_cpts(&alarm, 0).len(), 37);
}

#[test]
fn boundaries_shape() {
    let net = load("hailfinder.net");
    let node = net.node("Boundaries").unwrap();
    assert_eq!(node.cardinality(), 3);
    let mut parents: BTreeMap<&str, usize> = BTreeMap::new();
    for p in &node.parents {
        parents.insert(p, net.node(p).unwrap().cardinality());
    }
    let expected: BTreeMap<&str, usize> = [("MorningBound", 3), ("OutflowFrMt", 3), ("WndHodograph", 4)].into();
    assert_eq!(parents, expected);
    let mut cards: Vec<usize> = parents.values().copied().collect();
    cards.sort();
    assert_eq!(cards, vec![3, 3, 4]);
    let dims = net.cpt_dims(node);
    assert_eq!(dims.len(), 4);
    assert_eq!(dims[3], 3);
    assert_eq!(dims.iter().product::<usize>(), 108);
}

#[test]
fn json_interchange_round_trip() {
    for name in FIXTURES {
        let net = load(name);
        let json = net.to_json().unwrap();
        let (back, warnings) = parse_json_network(&json, &ParseOptions::default()).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(back, net, "{name}");
    }
}

#[test]
fn json_file_takes_stem_when_unnamed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.json");
    std::fs::write(
        &path,
        r#"{"nodes": [{"name": "A", "states": ["x", "y"], "parents": [], "cpt": [0.25, 0.75]}]}"#,
    )
    .unwrap();
    let (net, _) = load_network(&path, &ParseOptions::default()).unwrap();
    assert_eq!(net.name(), "tiny");
    assert_eq!(net.node("A").unwrap().cpt_data, vec![0.25, 0.75]);
}

const BAD_SUM: &str = "node A { states = (\"a\" \"b\"); }\npotential (A) { data = (0.5 0.6); }\n";

#[test]
fn sum_violation_strict_and_lenient() {
    match parse_net(BAD_SUM) {
        Err(Error::Validation { node, configuration, sum }) => {
            assert_eq!(node, "A");
            assert_eq!(configuration, 0);
            assert!((sum - 1.1).abs() < 1e-12);
        }
        other => panic!("{other:?}"),
    }
    let lenient = ParseOptions {
        lenient: true,
        ..Default::default()
    };
    let (net, warnings) = parse_net_with(BAD_SUM, &lenient).unwrap();
    assert_eq!(warnings.len(), 1);
    assert_eq!(net.node("A").unwrap().cpt_data, vec![0.5, 0.6]);
}

#[test]
fn structural_errors_carry_line_numbers() {
    let unknown_parent = "node A { states = (\"a\" \"b\"); }\n\npotential (A | Z) { data = (0.5 0.5 0.5 0.5); }\n";
    match parse_net(unknown_parent) {
        Err(Error::Parse { line, token, .. }) => {
            assert_eq!(line, 3);
            assert_eq!(token, "Z");
        }
        other => panic!("{other:?}"),
    }
    let duplicate = "node A { states = (\"a\"); }\nnode A { states = (\"a\"); }\n";
    assert!(matches!(parse_net(duplicate), Err(Error::Parse { line: 2, .. })));
    let short = "node A { states = (\"a\" \"b\"); }\npotential (A) {\n data = (1.0); }\n";
    assert!(matches!(parse_net(short), Err(Error::Parse { line: 3, .. })));
    let missing_potential = "node A { states = (\"a\" \"b\"); }\n";
    assert!(parse_net(missing_potential).is_err());
    let garbage = "node A { states = (\"a\" \"b\") }\n";
    assert!(matches!(parse_net(garbage), Err(Error::Parse { .. })));
}

#[test]
fn unsupported_features_are_rejected() {
    for text in [
        "continuous node X { }",
        "decision D { states = (\"a\"); }",
        "utility U { }",
        "node A { states = (\"a\"); }\npotential (A) { model_data = (1); }",
    ] {
        assert!(matches!(parse_net(text), Err(Error::Unsupported { .. })), "{text}");
    }
}

#[test]
fn nesting_must_match_parent_count() {
    // two levels of parentheses for a node with two parents is one too few
    let text = "node A { states = (\"a\" \"b\"); }\nnode B { states = (\"a\" \"b\"); }\nnode C { states = (\"a\" \"b\"); }\n\
        potential (A) { data = (0.5 0.5); }\npotential (B) { data = (0.5 0.5); }\n\
        potential (C | A B) { data = ((0.5 0.5 0.5 0.5) (0.5 0.5 0.5 0.5)); }\n";
    assert!(matches!(parse_net(text), Err(Error::Parse { line: 6, .. })));
}
