//! Fixture files parse to exactly the values they describe.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::PathBuf;

use weave_core::model::{
    ArchitectureModel, Attachment, Component, Connector, ElementPath, ModelDocument, Port,
    PortDirection, Role, RoleDirection, Scalar, Stage,
};
use weave_core::parse_model;
use weave_core::property::PropertyExpr;

fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn pipeline_fixture_parses_to_the_hand_built_tree() {
    let doc = parse_model(&fixture("pipeline.adl")).unwrap();
    let expected = ArchitectureModel {
        name: "pipeline".into(),
        stage: Stage::Geim,
        types: BTreeSet::from(["Job".to_string()]),
        components: vec![
            Component {
                name: "source".into(),
                ports: vec![Port {
                    name: "out".into(),
                    direction: PortDirection::Requires,
                    message_type: "Job".into(),
                }],
                attributes: BTreeMap::new(),
            },
            Component {
                name: "sink".into(),
                ports: vec![Port {
                    name: "in".into(),
                    direction: PortDirection::Provides,
                    message_type: "Job".into(),
                }],
                attributes: BTreeMap::from([("cost".to_string(), Scalar::Number(2.0))]),
            },
        ],
        connectors: vec![Connector {
            name: "chan".into(),
            roles: vec![
                Role { name: "in".into(), direction: RoleDirection::Accepts, message_type: "Job".into() },
                Role { name: "out".into(), direction: RoleDirection::Emits, message_type: "Job".into() },
            ],
            attributes: BTreeMap::new(),
        }],
        attachments: vec![
            Attachment::new(ElementPath::pair("source", "out"), ElementPath::pair("chan", "in")),
            Attachment::new(ElementPath::pair("chan", "out"), ElementPath::pair("sink", "in")),
        ],
        properties: vec![PropertyExpr::TypeClosed],
        attributes: BTreeMap::new(),
    };
    assert_eq!(doc, ModelDocument::Architecture(expected));
}

#[test]
fn reference_fixture_census() {
    let doc = parse_model(&fixture("reference.adl")).unwrap();
    let m = doc.as_architecture().unwrap();
    assert_eq!(m.name, "jobfarm");
    assert_eq!(m.components.len(), 3);
    assert_eq!(m.connectors.len(), 1);
    assert_eq!(m.attachments.len(), 3);
    assert_eq!(m.properties.len(), 4);
    let total_cost: f64 = m
        .components
        .iter()
        .filter_map(|c| c.attributes.get("cost").and_then(Scalar::as_number))
        .sum();
    assert_eq!(total_cost, 12.0);
}
