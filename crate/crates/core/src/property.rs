//! Structural property evaluation over architecture models.
//!
//! Properties are checkable predicates on the component/connector graph:
//! attachment coverage, type closure, element existence, replication
//! counts, reachability, and attribute-sum bounds. They encode QoS
//! constraints declaratively and drive preservation checking during
//! refinement.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::glob::glob_match;
use crate::model::{fmt_number, ArchitectureModel, ElementKind, ElementPath};

/// A structural property, written `property <form>` in the DSL.
#[derive(Debug, Clone, PartialEq)]
pub enum PropertyExpr {
    /// Every port of every component has at least one incident attachment.
    AllPortsConnected,
    /// Every port/role message type is declared in the model's type set.
    TypeClosed,
    /// At least one element of the kind matches the glob.
    Exists { kind: ElementKind, pattern: String },
    /// At least `min` components named `base` or `base_<i>` exist.
    Replication { base: String, min: i64 },
    /// An undirected path joins the two elements in the attachment graph.
    Connected { a: ElementPath, b: ElementPath },
    /// Sum of an attribute over all elements carrying it stays within the
    /// bound; elements lacking the attribute contribute 0.
    AttrSum { attribute: String, bound: f64 },
}

impl fmt::Display for PropertyExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyExpr::AllPortsConnected => f.write_str("allPortsConnected"),
            PropertyExpr::TypeClosed => f.write_str("typeClosed"),
            PropertyExpr::Exists { kind, pattern } => write!(f, "exists {kind} {pattern}"),
            PropertyExpr::Replication { base, min } => write!(f, "replication({base}) >= {min}"),
            PropertyExpr::Connected { a, b } => write!(f, "connected({a}, {b})"),
            PropertyExpr::AttrSum { attribute, bound } => {
                write!(f, "attrSum({attribute}) <= {}", fmt_number(*bound))
            }
        }
    }
}

/// Outcome of evaluating one property.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub property: PropertyExpr,
    pub holds: bool,
    /// Violating entities when the property fails, satisfying entities
    /// where that is informative (e.g. replication matches).
    pub witnesses: Vec<ElementPath>,
    pub detail: String,
}

impl fmt::Display for PropertyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {}",
            self.property,
            if self.holds { "holds" } else { "fails" }
        )?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PropertyError {
    #[error("unresolved path {path} in connected(...)")]
    UnresolvedPath { path: String },
    #[error("connected(...) expects component or connector paths, got {path}")]
    NotAnElement { path: String },
}

/// Evaluates one property. Pure and deterministic.
pub fn evaluate(
    arch: &ArchitectureModel,
    p: &PropertyExpr,
) -> Result<PropertyResult, PropertyError> {
    let result = |holds: bool, witnesses: Vec<ElementPath>, detail: String| PropertyResult {
        property: p.clone(),
        holds,
        witnesses,
        detail,
    };
    match p {
        PropertyExpr::AllPortsConnected => {
            let mut dangling = Vec::new();
            for c in &arch.components {
                for port in &c.ports {
                    let endpoint = ElementPath::pair(c.name.clone(), port.name.clone());
                    if arch.attachments_at(&endpoint).is_empty() {
                        dangling.push(endpoint);
                    }
                }
            }
            let holds = dangling.is_empty();
            let detail = if holds {
                String::new()
            } else {
                format!("{} unattached port(s)", dangling.len())
            };
            Ok(result(holds, dangling, detail))
        }
        PropertyExpr::TypeClosed => {
            let mut undeclared = Vec::new();
            let mut missing = BTreeSet::new();
            for c in &arch.components {
                for port in &c.ports {
                    if !arch.types.contains(&port.message_type) {
                        undeclared.push(ElementPath::pair(c.name.clone(), port.name.clone()));
                        missing.insert(port.message_type.clone());
                    }
                }
            }
            for c in &arch.connectors {
                for role in &c.roles {
                    if !arch.types.contains(&role.message_type) {
                        undeclared.push(ElementPath::pair(c.name.clone(), role.name.clone()));
                        missing.insert(role.message_type.clone());
                    }
                }
            }
            let holds = undeclared.is_empty();
            let detail = if holds {
                String::new()
            } else {
                format!(
                    "undeclared: {}",
                    missing.into_iter().collect::<Vec<_>>().join(", ")
                )
            };
            Ok(result(holds, undeclared, detail))
        }
        PropertyExpr::Exists { kind, pattern } => {
            let matches: Vec<ElementPath> = match kind {
                ElementKind::Component => arch
                    .components
                    .iter()
                    .filter(|c| glob_match(pattern, &c.name))
                    .map(|c| ElementPath::single(c.name.clone()))
                    .collect(),
                ElementKind::Connector => arch
                    .connectors
                    .iter()
                    .filter(|c| glob_match(pattern, &c.name))
                    .map(|c| ElementPath::single(c.name.clone()))
                    .collect(),
            };
            if matches.is_empty() {
                Ok(result(
                    false,
                    vec![ElementPath::single(pattern.clone())],
                    format!("no {kind} matches {pattern}"),
                ))
            } else {
                Ok(result(true, matches, String::new()))
            }
        }
        PropertyExpr::Replication { base, min } => {
            let matches: Vec<ElementPath> = arch
                .components
                .iter()
                .filter(|c| is_replica_name(base, &c.name))
                .map(|c| ElementPath::single(c.name.clone()))
                .collect();
            let count = matches.len() as i64;
            if count >= *min {
                Ok(result(true, matches, format!("found {count}")))
            } else {
                // The base element itself is the violating entity when no
                // replica carries the name.
                let witnesses = if matches.is_empty() {
                    vec![ElementPath::single(base.clone())]
                } else {
                    matches
                };
                Ok(result(
                    false,
                    witnesses,
                    format!("found {count}, need >= {min}"),
                ))
            }
        }
        PropertyExpr::Connected { a, b } => {
            for path in [a, b] {
                if path.segments.len() != 1 {
                    return Err(PropertyError::NotAnElement {
                        path: path.to_string(),
                    });
                }
                if !arch.has_element(path.head()) {
                    return Err(PropertyError::UnresolvedPath {
                        path: path.to_string(),
                    });
                }
            }
            let holds = attachment_graph_connected(arch, a.head(), b.head());
            let detail = if holds {
                String::new()
            } else {
                "no undirected path".to_string()
            };
            Ok(result(holds, vec![a.clone(), b.clone()], detail))
        }
        PropertyExpr::AttrSum { attribute, bound } => {
            let mut sum = 0.0;
            let mut carriers = Vec::new();
            for c in &arch.components {
                if let Some(v) = c.attributes.get(attribute).and_then(|s| s.as_number()) {
                    sum += v;
                    carriers.push(ElementPath::single(c.name.clone()));
                }
            }
            for c in &arch.connectors {
                if let Some(v) = c.attributes.get(attribute).and_then(|s| s.as_number()) {
                    sum += v;
                    carriers.push(ElementPath::single(c.name.clone()));
                }
            }
            let holds = sum <= *bound;
            let detail = format!("sum={}, bound={}", fmt_number(sum), fmt_number(*bound));
            Ok(result(
                holds,
                if holds { carriers } else { Vec::new() },
                detail,
            ))
        }
    }
}

/// `base` itself or `base_<i>` with a purely numeric suffix.
fn is_replica_name(base: &str, name: &str) -> bool {
    if name == base {
        return true;
    }
    match name
        .strip_prefix(base)
        .and_then(|rest| rest.strip_prefix('_'))
    {
        Some(suffix) => !suffix.is_empty() && suffix.bytes().all(|b| b.is_ascii_digit()),
        None => false,
    }
}

/// Breadth-first search over the undirected element graph induced by
/// attachments (an attachment joins the two elements its endpoints start at).
fn attachment_graph_connected(arch: &ArchitectureModel, a: &str, b: &str) -> bool {
    if a == b {
        return true;
    }
    let mut adjacency: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for att in &arch.attachments {
        let (x, y) = (att.from.head(), att.to.head());
        adjacency.entry(x).or_default().push(y);
        adjacency.entry(y).or_default().push(x);
    }
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([a]);
    seen.insert(a);
    while let Some(node) = queue.pop_front() {
        if node == b {
            return true;
        }
        if let Some(next) = adjacency.get(node) {
            for n in next {
                if seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
    }
    false
}

/// Element-wise [`evaluate`] preserving input order; per-property errors do
/// not abort the rest of the list.
pub fn evaluate_all(
    arch: &ArchitectureModel,
    props: &[PropertyExpr],
) -> Vec<Result<PropertyResult, PropertyError>> {
    props.iter().map(|p| evaluate(arch, p)).collect()
}

/// Per-property verdicts of re-checking a parent's declared properties
/// against a refined child model.
#[derive(Debug, Clone, PartialEq)]
pub struct PreservationReport {
    pub results: Vec<(PropertyExpr, Result<PropertyResult, PropertyError>)>,
    pub preserved: bool,
}

/// Evaluates every property declared on `parent` against `child`.
/// `preserved` is true iff all of them hold; evaluation errors (e.g. a
/// path that no longer resolves) count as not preserved.
pub fn check_preservation(
    parent: &ArchitectureModel,
    child: &ArchitectureModel,
) -> PreservationReport {
    let mut results = Vec::new();
    let mut preserved = true;
    for p in &parent.properties {
        let r = evaluate(child, p);
        preserved &= matches!(&r, Ok(pr) if pr.holds);
        results.push((p.clone(), r));
    }
    PreservationReport { results, preserved }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Attachment, Component, Port, PortDirection, Scalar};
    use std::collections::BTreeMap;

    fn fixture() -> ArchitectureModel {
        let mut m = ArchitectureModel::empty("fix");
        m.types.insert("Job".into());
        let comp = |name: &str, cost: f64| Component {
            name: name.into(),
            ports: vec![],
            attributes: BTreeMap::from([("cost".to_string(), Scalar::Number(cost))]),
        };
        m.components.push(comp("a", 3.0));
        m.components.push(comp("b", 4.0));
        m.components.push(comp("c", 5.0));
        m
    }

    #[test]
    fn all_ports_connected_is_vacuous_on_empty_model() {
        let m = ArchitectureModel::empty("void");
        let r = evaluate(&m, &PropertyExpr::AllPortsConnected).unwrap();
        assert!(r.holds);
        assert!(r.witnesses.is_empty());
    }

    #[test]
    fn all_ports_connected_names_the_dangling_port() {
        let mut m = fixture();
        m.components[0].ports.push(Port {
            name: "p".into(),
            direction: PortDirection::Provides,
            message_type: "Job".into(),
        });
        let r = evaluate(&m, &PropertyExpr::AllPortsConnected).unwrap();
        assert!(!r.holds);
        assert_eq!(r.witnesses, vec![ElementPath::pair("a", "p")]);
    }

    #[test]
    fn attr_sum_reports_computed_sum() {
        // Brute-force oracle: 3 + 4 + 5 = 12.
        let m = fixture();
        let r = evaluate(
            &m,
            &PropertyExpr::AttrSum {
                attribute: "cost".into(),
                bound: 10.0,
            },
        )
        .unwrap();
        assert!(!r.holds);
        assert!(r.detail.contains("sum=12"), "detail: {}", r.detail);
        let r = evaluate(
            &m,
            &PropertyExpr::AttrSum {
                attribute: "cost".into(),
                bound: 12.0,
            },
        )
        .unwrap();
        assert!(r.holds);
    }

    #[test]
    fn attr_sum_ignores_missing_and_textual_attributes() {
        let mut m = fixture();
        m.components[1].attributes.remove("cost");
        m.components[2]
            .attributes
            .insert("cost".into(), Scalar::Text("n/a".into()));
        let r = evaluate(
            &m,
            &PropertyExpr::AttrSum {
                attribute: "cost".into(),
                bound: 3.0,
            },
        )
        .unwrap();
        assert!(r.holds, "{}", r.detail);
    }

    #[test]
    fn replication_counts_base_and_suffixed_names() {
        assert!(is_replica_name("b", "b"));
        assert!(is_replica_name("b", "b_1"));
        assert!(is_replica_name("b", "b_12"));
        assert!(!is_replica_name("b", "b_"));
        assert!(!is_replica_name("b", "b_x"));
        assert!(!is_replica_name("b", "bb"));
        assert!(!is_replica_name("b", "b_1_x"));

        let mut m = fixture();
        m.components.push(Component {
            name: "b_1".into(),
            ..Default::default()
        });
        let r = evaluate(
            &m,
            &PropertyExpr::Replication {
                base: "b".into(),
                min: 2,
            },
        )
        .unwrap();
        assert!(r.holds);
        assert_eq!(r.witnesses.len(), 2);
        let r = evaluate(
            &m,
            &PropertyExpr::Replication {
                base: "b".into(),
                min: 3,
            },
        )
        .unwrap();
        assert!(!r.holds);
        assert!(r.detail.contains("found 2, need >= 3"));
        let r = evaluate(
            &m,
            &PropertyExpr::Replication {
                base: "zz".into(),
                min: 1,
            },
        )
        .unwrap();
        assert!(!r.holds);
        assert_eq!(r.witnesses, vec![ElementPath::single("zz")]);
    }

    #[test]
    fn exists_matches_globs() {
        let m = fixture();
        let holds = |pattern: &str| {
            evaluate(
                &m,
                &PropertyExpr::Exists {
                    kind: ElementKind::Component,
                    pattern: pattern.into(),
                },
            )
            .unwrap()
            .holds
        };
        assert!(holds("a"));
        assert!(holds("*"));
        assert!(!holds("z*"));
        let r = evaluate(
            &m,
            &PropertyExpr::Exists {
                kind: ElementKind::Connector,
                pattern: "*".into(),
            },
        )
        .unwrap();
        assert!(!r.holds);
        assert!(!r.witnesses.is_empty());
    }

    #[test]
    fn connected_requires_resolvable_elements() {
        let m = fixture();
        let p = PropertyExpr::Connected {
            a: ElementPath::single("a"),
            b: ElementPath::single("ghost"),
        };
        assert!(matches!(
            evaluate(&m, &p),
            Err(PropertyError::UnresolvedPath { .. })
        ));
    }

    #[test]
    fn connected_is_reflexive_and_follows_attachments() {
        let mut m = fixture();
        for c in &mut m.components {
            c.ports.push(Port {
                name: "p".into(),
                direction: PortDirection::Provides,
                message_type: "Job".into(),
            });
            c.ports.push(Port {
                name: "q".into(),
                direction: PortDirection::Requires,
                message_type: "Job".into(),
            });
        }
        m.attachments.push(Attachment::new(
            ElementPath::pair("a", "q"),
            ElementPath::pair("b", "p"),
        ));
        let conn = |x: &str, y: &str| {
            evaluate(
                &m,
                &PropertyExpr::Connected {
                    a: ElementPath::single(x),
                    b: ElementPath::single(y),
                },
            )
            .unwrap()
            .holds
        };
        assert!(conn("a", "a"));
        assert!(conn("a", "b"));
        assert!(conn("b", "a"), "connected must be symmetric");
        assert!(!conn("a", "c"));
    }

    #[test]
    fn evaluate_all_keeps_order_and_isolates_errors() {
        let m = fixture();
        let props = vec![
            PropertyExpr::TypeClosed,
            PropertyExpr::Connected {
                a: ElementPath::single("a"),
                b: ElementPath::single("missing"),
            },
            PropertyExpr::AllPortsConnected,
        ];
        let results = evaluate_all(&m, &props);
        assert_eq!(results.len(), 3);
        assert!(results[0].as_ref().unwrap().holds);
        assert!(results[1].is_err());
        assert!(results[2].as_ref().unwrap().holds);
        assert!(evaluate_all(&m, &[]).is_empty());
    }

    #[test]
    fn failing_results_carry_witnesses_except_attr_sum() {
        // attrSum reports its computed sum in detail instead of witnesses;
        // every other form must name at least one entity when it fails.
        let mut m = fixture();
        m.components[0].ports.push(Port {
            name: "p".into(),
            direction: PortDirection::Provides,
            message_type: "Ghost".into(),
        });
        let failing = vec![
            PropertyExpr::AllPortsConnected,
            PropertyExpr::TypeClosed,
            PropertyExpr::Exists {
                kind: ElementKind::Connector,
                pattern: "Nope*".into(),
            },
            PropertyExpr::Replication {
                base: "zz".into(),
                min: 1,
            },
            PropertyExpr::Connected {
                a: ElementPath::single("a"),
                b: ElementPath::single("b"),
            },
        ];
        for p in failing {
            let r = evaluate(&m, &p).unwrap();
            assert!(!r.holds, "{p} unexpectedly holds");
            assert!(!r.witnesses.is_empty(), "{p} failed without witnesses");
        }
        let r = evaluate(
            &m,
            &PropertyExpr::AttrSum {
                attribute: "cost".into(),
                bound: 0.0,
            },
        )
        .unwrap();
        assert!(!r.holds);
        assert!(r.detail.contains("sum="));
    }

    #[test]
    fn preservation_is_vacuous_without_declared_properties() {
        let parent = fixture();
        let child = ArchitectureModel::empty("child");
        assert!(check_preservation(&parent, &child).preserved);
    }

    #[test]
    fn preservation_tracks_replica_naming() {
        // replication(b) >= 1 declared on the parent keeps holding after
        // b is replaced by b_1, b_2.
        let mut parent = fixture();
        parent.properties.push(PropertyExpr::Replication {
            base: "b".into(),
            min: 1,
        });
        let child = crate::refine::apply_replicate(&parent, &ElementPath::single("b"), 2).unwrap();
        let report = check_preservation(&parent, &child);
        assert!(report.preserved, "{:?}", report.results);
        // The replicas themselves are the satisfying witnesses.
        let r = evaluate(&child, &PropertyExpr::Replication { base: "b".into(), min: 2 }).unwrap();
        assert!(r.holds);
        assert_eq!(r.witnesses, vec![ElementPath::single("b_1"), ElementPath::single("b_2")]);
    }

    #[test]
    fn preservation_fails_when_a_declared_property_breaks() {
        let mut parent = fixture();
        parent.properties.push(PropertyExpr::AllPortsConnected);
        let mut child = parent.clone();
        child.components.push(Component {
            name: "loner".into(),
            ports: vec![Port {
                name: "p".into(),
                direction: PortDirection::Provides,
                message_type: "Job".into(),
            }],
            attributes: BTreeMap::new(),
        });
        let report = check_preservation(&parent, &child);
        assert!(!report.preserved);
        let (_, r) = &report.results[0];
        assert_eq!(
            r.as_ref().unwrap().witnesses,
            vec![ElementPath::pair("loner", "p")]
        );
    }
}
