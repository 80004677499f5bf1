//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! Randomized criteria run on fixed seeds so every run checks the same
//! cases. Oracles (exhaustive search, closure enumeration, direct
//! summation) are implemented here, independently of the library code
//! they check.

mod common;

use std::collections::BTreeMap;
use std::fs;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{builtin_pattern, exit_code, fixture, snapshot_tree, stderr, weave, workspace_root};
use weave_core::deploy::{plan_deployment, ResourceModel, ResourceNode};
use weave_core::model::{validate_structure, ArchitectureModel, ModelDocument, Scalar, Stage};
use weave_core::pattern::{apply_pattern, Binding};
use weave_core::property::{check_preservation, evaluate, PropertyExpr};
use weave_core::refine::apply_exclude_type;
use weave_core::testgen;
use weave_core::{
    apply_step, model_fingerprint, parse_model, print_model, ElementKind, ElementPath,
};

fn parse_architecture(path: &std::path::Path) -> ArchitectureModel {
    match parse_model(&fs::read_to_string(path).unwrap()).unwrap() {
        ModelDocument::Architecture(m) => m,
        other => panic!(
            "{} is a {}, not an architecture",
            path.display(),
            other.kind()
        ),
    }
}

/// Criterion 1: exclude_type succeeds exactly when the type is declared;
/// on success only the type set shrinks, on failure nothing changes.
/// 500 seeded (model, type) pairs where the chosen type is never in use,
/// so declaredness alone decides the outcome. Zero tolerance.
#[test]
fn acceptance_01_exclude_type_contract() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA1);
    let mut declared_cases = 0;
    let mut undeclared_cases = 0;
    for case in 0..500 {
        let model = testgen::random_model(&mut rng, 4, 2);
        let used: std::collections::BTreeSet<String> = model
            .components
            .iter()
            .flat_map(|c| c.ports.iter().map(|p| p.message_type.clone()))
            .chain(
                model
                    .connectors
                    .iter()
                    .flat_map(|c| c.roles.iter().map(|r| r.message_type.clone())),
            )
            .collect();
        let unused: Vec<String> = model
            .types
            .iter()
            .filter(|t| !used.contains(*t))
            .cloned()
            .collect();
        let t = if !unused.is_empty() && rng.gen_bool(0.5) {
            declared_cases += 1;
            unused[rng.gen_range(0..unused.len())].clone()
        } else {
            undeclared_cases += 1;
            format!("Fresh{}", rng.gen_range(0..1000))
        };
        let pre_held = model.types.contains(&t);
        let before = model_fingerprint(&model);
        match apply_exclude_type(&model, &t) {
            Ok(next) => {
                assert!(
                    pre_held,
                    "case {case}: succeeded though {t} was not declared"
                );
                assert!(
                    !next.types.contains(&t),
                    "case {case}: {t} still declared after exclusion"
                );
                let mut expected = model.clone();
                expected.types.remove(&t);
                assert_eq!(
                    next, expected,
                    "case {case}: more than the type set changed"
                );
            }
            Err(_) => {
                assert!(
                    !pre_held,
                    "case {case}: failed though {t} was declared and unused"
                );
                assert_eq!(
                    model_fingerprint(&model),
                    before,
                    "case {case}: input mutated on failure"
                );
            }
        }
    }
    assert!(
        declared_cases >= 50 && undeclared_cases >= 50,
        "both branches must be exercised"
    );
    println!("acceptance 01 exclude_type contract: 500 cases, 0 violations");
}

/// Criterion 2: the fault-tolerance pattern on the reference fixture.
#[test]
fn acceptance_02_fault_tolerance_pattern() {
    let parent = parse_architecture(&fixture("reference.adl"));
    let pattern = weave_core::pattern::builtin_pattern("fault_tolerance").unwrap();
    let bindings = BTreeMap::from([
        ("target".to_string(), Binding::Element("b".to_string())),
        ("replicas".to_string(), Binding::Integer(2)),
    ]);
    let applied = apply_pattern(&parent, &pattern, &bindings).unwrap();
    let child = &applied.model;

    let replication = PropertyExpr::Replication {
        base: "b".into(),
        min: 2,
    };
    assert!(
        evaluate(child, &replication).unwrap().holds,
        "replication(b) >= 2 must hold"
    );

    let ft_exists = PropertyExpr::Exists {
        kind: ElementKind::Connector,
        pattern: "FTConnector*".into(),
    };
    assert!(
        evaluate(child, &ft_exists).unwrap().holds,
        "an FTConnector* connector must exist"
    );

    // No attachment joins a replica directly to one of its former peers:
    // every attachment touching b_1/b_2 has the FT connector at the other
    // end.
    for a in &child.attachments {
        let heads = [a.from.head(), a.to.head()];
        if heads.iter().any(|h| h.starts_with("b_")) {
            assert!(
                heads.iter().any(|h| h.starts_with("FTConnector")),
                "attachment {a} connects a replica directly to a former peer"
            );
        }
    }

    let report = check_preservation(&parent, child);
    assert!(
        report.preserved,
        "a declared property broke: {:?}",
        report.results
    );
    println!("acceptance 02 fault tolerance pattern: structural assertions hold");
}

/// Criterion 3: 2 QoS sets x 2 platforms produce 4 pairwise distinct GESM
/// outputs, each satisfying its platform's requires list; a second run is
/// byte-identical.
#[test]
fn acceptance_03_build_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("matrix");
    let args: Vec<String> = vec![
        "matrix".into(),
        "--geim".into(),
        fixture("reference.adl").to_string_lossy().into_owned(),
        "--gecm-set".into(),
        format!(
            "{}:target=b,replicas=2",
            builtin_pattern("fault_tolerance").display()
        ),
        "--gecm-set".into(),
        format!(
            "{}:target=collector",
            builtin_pattern("load_balancing").display()
        ),
        "--getm".into(),
        fixture("platformA.plat").to_string_lossy().into_owned(),
        "--getm".into(),
        fixture("platformB.plat").to_string_lossy().into_owned(),
        "--gemm".into(),
        fixture("default.map").to_string_lossy().into_owned(),
        "--out".into(),
        out_dir.to_string_lossy().into_owned(),
    ];
    let argv: Vec<&str> = args.iter().map(String::as_str).collect();
    let first = weave(&argv);
    assert_eq!(exit_code(&first), 0, "{}", stderr(&first));

    let combos = ["combo_1_1", "combo_1_2", "combo_2_1", "combo_2_2"];
    let mut gesms = Vec::new();
    for combo in &combos {
        let path = out_dir.join(combo).join("gesm.adl");
        assert!(path.is_file(), "missing {}", path.display());
        let text = fs::read_to_string(&path).unwrap();
        let model = match parse_model(&text).unwrap() {
            ModelDocument::Architecture(m) => m,
            other => panic!("{combo}: unexpected kind {}", other.kind()),
        };
        assert_eq!(model.stage, Stage::Gesm);
        gesms.push((combo.to_string(), text, model));
    }
    for i in 0..gesms.len() {
        for j in i + 1..gesms.len() {
            assert_ne!(
                gesms[i].2, gesms[j].2,
                "{} and {} are structurally equal",
                gesms[i].0, gesms[j].0
            );
        }
    }

    // Each output satisfies the requires list of the platform that made it.
    for (combo, _, model) in &gesms {
        let platform_file = if combo.ends_with("_1") {
            "platformA.plat"
        } else {
            "platformB.plat"
        };
        let platform =
            match parse_model(&fs::read_to_string(fixture(platform_file)).unwrap()).unwrap() {
                ModelDocument::Platform(p) => p,
                other => panic!("unexpected kind {}", other.kind()),
            };
        for p in &platform.requires {
            assert!(
                evaluate(model, p).unwrap().holds,
                "{combo}: {p} does not hold"
            );
        }
    }

    let snap1 = snapshot_tree(&out_dir);
    let second = weave(&argv);
    assert_eq!(exit_code(&second), 0);
    assert_eq!(
        snap1,
        snapshot_tree(&out_dir),
        "second matrix run is not byte-identical"
    );
    println!("acceptance 03 build matrix: 4 distinct conforming GESMs, reproducible bytes");
}

/// Criterion 4: over 1000 generated steps, success never coexists with a
/// broken declared property (independently re-evaluated), and every
/// successful output is structurally valid. Zero tolerance.
#[test]
fn acceptance_04_preservation_soundness() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA4);
    let mut successes = 0;
    for case in 0..1000 {
        let mut model = testgen::random_model(&mut rng, 4, 2);
        model.properties = testgen::holding_properties(&mut rng, &model);
        let step = testgen::random_step(&mut rng, &model, case);
        if let Ok(outcome) = apply_step(&model, &step, &model.properties) {
            successes += 1;
            assert!(
                validate_structure(&outcome.model).is_clean(),
                "case {case}: successful step produced an invalid model"
            );
            for p in &model.properties {
                let r =
                    evaluate(&outcome.model, p).unwrap_or_else(|e| panic!("case {case}: {p}: {e}"));
                assert!(
                    r.holds,
                    "case {case}: engine claimed success but {p} fails ({})",
                    r.detail
                );
            }
        }
    }
    assert!(
        successes >= 100,
        "only {successes} successful steps; generator drifted"
    );
    println!(
        "acceptance 04 preservation soundness: 1000 steps ({successes} applied), 0 violations"
    );
}

/// Criterion 5: 500 failing steps leave the input untouched. Zero
/// tolerance.
#[test]
fn acceptance_05_step_atomicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA5);
    for case in 0..500 {
        let mut model = testgen::random_model(&mut rng, 4, 2);
        model.properties = testgen::holding_properties(&mut rng, &model);
        let step = testgen::random_failing_step(&mut rng, &model, case);
        let before = model_fingerprint(&model);
        let failure = apply_step(&model, &step, &model.properties)
            .err()
            .unwrap_or_else(|| panic!("case {case}: poisoned step unexpectedly succeeded"));
        assert_eq!(
            model_fingerprint(&model),
            before,
            "case {case}: input mutated"
        );
        assert_eq!(
            failure.trace.len(),
            failure.index + 1,
            "case {case}: trace length mismatch"
        );
        let last = failure.trace.last().unwrap();
        assert!(
            !matches!(
                (&last.pre, &last.post, &last.preserved),
                (
                    weave_core::TraceCheck::Passed,
                    weave_core::TraceCheck::Passed,
                    weave_core::TraceCheck::Passed
                )
            ),
            "case {case}: failing entry shows no failed check"
        );
    }
    println!("acceptance 05 step atomicity: 500 failing steps, input unchanged in every case");
}

/// Criterion 6: parse . print is the identity on the fixture corpus
/// (>= 20 files across all five document kinds).
#[test]
fn acceptance_06_corpus_round_trip() {
    let mut files = Vec::new();
    for dir in [
        workspace_root().join("fixtures"),
        workspace_root().join("crates/core/patterns"),
    ] {
        for entry in fs::read_dir(&dir).unwrap() {
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
    assert!(files.len() >= 20, "corpus has only {} files", files.len());
    for ext in ["adl", "qos", "plat", "map", "res"] {
        assert!(
            files
                .iter()
                .any(|p| p.extension().and_then(|e| e.to_str()) == Some(ext)),
            "no .{ext} fixture"
        );
    }
    for path in &files {
        let doc = parse_model(&fs::read_to_string(path).unwrap())
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let reparsed = parse_model(&print_model(&doc)).unwrap();
        assert_eq!(doc, reparsed, "round trip drifted for {}", path.display());
    }
    println!(
        "acceptance 06 corpus round trip: {} files, all identical after reparse",
        files.len()
    );
}

/// Criterion 7: 200 seeded deployment instances (<= 6 components,
/// <= 3 nodes). The plan never violates capacities, and whenever
/// exhaustive search proves no complete assignment feasible, the planner
/// reports at least one unplaced component.
#[test]
fn acceptance_07_deployment_oracle() {
    // Oracle: try all node choices for every component.
    fn feasible_assignment_exists(loads: &[f64], caps: &[f64]) -> bool {
        fn recurse(loads: &[f64], remaining: &mut Vec<f64>, i: usize) -> bool {
            if i == loads.len() {
                return true;
            }
            for n in 0..remaining.len() {
                if remaining[n] >= loads[i] {
                    remaining[n] -= loads[i];
                    if recurse(loads, remaining, i + 1) {
                        remaining[n] += loads[i];
                        return true;
                    }
                    remaining[n] += loads[i];
                }
            }
            false
        }
        recurse(loads, &mut caps.to_vec(), 0)
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0xA7);
    let mut infeasible_seen = 0;
    for case in 0..200 {
        let (loads, caps) = testgen::random_deployment_instance(&mut rng);
        let mut gesm = ArchitectureModel::empty("deploy");
        gesm.stage = Stage::Gesm;
        for (name, load) in &loads {
            gesm.components.push(weave_core::model::Component {
                name: name.clone(),
                ports: vec![],
                attributes: BTreeMap::from([("load".to_string(), Scalar::Number(*load))]),
            });
        }
        let germ = ResourceModel {
            name: "grid".into(),
            nodes: caps
                .iter()
                .map(|(name, capacity)| ResourceNode {
                    name: name.clone(),
                    capacity: *capacity,
                    attributes: BTreeMap::new(),
                })
                .collect(),
        };
        let plan = plan_deployment(&gesm, &germ);

        // Independent capacity recheck.
        let mut used: BTreeMap<&str, f64> = BTreeMap::new();
        for (component, node) in &plan.assignments {
            let load = loads.iter().find(|(n, _)| n == component).unwrap().1;
            *used.entry(node.as_str()).or_default() += load;
        }
        for (node, total) in &used {
            let cap = caps.iter().find(|(n, _)| n == node).unwrap().1;
            assert!(
                *total <= cap,
                "case {case}: node {node} over capacity ({total} > {cap})"
            );
        }
        assert_eq!(
            plan.assignments.len() + plan.unplaced.len(),
            loads.len(),
            "case {case}: every component must be assigned or reported unplaced"
        );

        let load_values: Vec<f64> = loads.iter().map(|(_, l)| *l).collect();
        let cap_values: Vec<f64> = caps.iter().map(|(_, c)| *c).collect();
        if !feasible_assignment_exists(&load_values, &cap_values) {
            infeasible_seen += 1;
            assert!(
                !plan.unplaced.is_empty(),
                "case {case}: oracle proves infeasibility but the planner placed everything"
            );
        }
    }
    assert!(
        infeasible_seen >= 10,
        "only {infeasible_seen} infeasible instances; generator drifted"
    );
    println!("acceptance 07 deployment oracle: 200 instances ({infeasible_seen} infeasible), capacity law intact");
}

/// Criterion 8: connected(...) agrees with exhaustive closure enumeration
/// and attrSum with direct summation on 200 seeded models of <= 8
/// elements. Exact agreement.
#[test]
fn acceptance_08_property_oracles() {
    // Oracle: boolean transitive closure over the element graph
    // (Floyd-Warshall), a different algorithm from the checker's BFS.
    fn closure(model: &ArchitectureModel) -> (Vec<String>, Vec<Vec<bool>>) {
        let names: Vec<String> = model.element_names().map(String::from).collect();
        let index: BTreeMap<&str, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let n = names.len();
        let mut reach = vec![vec![false; n]; n];
        for (i, row) in reach.iter_mut().enumerate() {
            row[i] = true;
        }
        for a in &model.attachments {
            let (x, y) = (index[a.from.head()], index[a.to.head()]);
            reach[x][y] = true;
            reach[y][x] = true;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if reach[i][k] && reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
        (names, reach)
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0xA8);
    for case in 0..200 {
        let model = testgen::random_model(&mut rng, 5, 3);
        assert!(model.components.len() + model.connectors.len() <= 8);

        let (names, reach) = closure(&model);
        for (i, a) in names.iter().enumerate() {
            for (j, b) in names.iter().enumerate() {
                let p = PropertyExpr::Connected {
                    a: ElementPath::single(a.clone()),
                    b: ElementPath::single(b.clone()),
                };
                let got = evaluate(&model, &p).unwrap().holds;
                assert_eq!(
                    got, reach[i][j],
                    "case {case}: connected({a}, {b}) disagrees with the closure oracle"
                );
            }
        }

        for attribute in ["cost", "load", "absent"] {
            let mut expected = 0.0;
            for c in &model.components {
                if let Some(Scalar::Number(v)) = c.attributes.get(attribute) {
                    expected += v;
                }
            }
            for c in &model.connectors {
                if let Some(Scalar::Number(v)) = c.attributes.get(attribute) {
                    expected += v;
                }
            }
            for slack in [-1.0, 0.0, 1.0] {
                let bound = expected + slack;
                let p = PropertyExpr::AttrSum {
                    attribute: attribute.into(),
                    bound,
                };
                let r = evaluate(&model, &p).unwrap();
                assert_eq!(
                    r.holds,
                    expected <= bound,
                    "case {case}: attrSum({attribute}) <= {bound}"
                );
                assert!(r
                    .detail
                    .contains(&format!("sum={}", weave_core::model::fmt_number(expected))));
            }
        }
    }
    println!("acceptance 08 property oracles: 200 models, exact agreement");
}
