//! Seeded generators for randomized test suites (feature `testgen`).
//!
//! Everything here is deterministic for a fixed RNG seed, so suites that
//! quantify over hundreds of generated cases stay reproducible.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::{
    validate_structure, ArchitectureModel, Attachment, Component, Connector, ElementPath, Port,
    PortDirection, Role, RoleDirection, Scalar,
};
use crate::property::{evaluate, PropertyExpr};
use crate::refine::{
    component_fragment, connector_fragment, RefinementAction, RefinementStep, StepOrigin,
};

const TYPE_POOL: &[&str] = &["T0", "T1", "T2", "T3"];

/// A random structurally valid architecture model.
pub fn random_model(
    rng: &mut impl Rng,
    max_components: usize,
    max_connectors: usize,
) -> ArchitectureModel {
    let mut m = ArchitectureModel::empty("gen");
    let n_types = rng.gen_range(1..=TYPE_POOL.len());
    for t in TYPE_POOL.iter().take(n_types) {
        m.types.insert(t.to_string());
    }
    let types: Vec<String> = m.types.iter().cloned().collect();

    let n_comp = rng.gen_range(1..=max_components.max(1));
    for i in 0..n_comp {
        let mut ports = Vec::new();
        for j in 0..rng.gen_range(0..=3) {
            ports.push(Port {
                name: format!("p{j}"),
                direction: if rng.gen_bool(0.5) {
                    PortDirection::Provides
                } else {
                    PortDirection::Requires
                },
                message_type: types.choose(rng).unwrap().clone(),
            });
        }
        let mut attributes = BTreeMap::new();
        if rng.gen_bool(0.6) {
            attributes.insert(
                "cost".to_string(),
                Scalar::Number(rng.gen_range(0..9) as f64),
            );
        }
        if rng.gen_bool(0.6) {
            attributes.insert(
                "load".to_string(),
                Scalar::Number(rng.gen_range(0..9) as f64),
            );
        }
        m.components.push(Component {
            name: format!("c{i}"),
            ports,
            attributes,
        });
    }

    let n_conn = rng.gen_range(0..=max_connectors);
    for i in 0..n_conn {
        let mut roles = Vec::new();
        for j in 0..rng.gen_range(0..=4) {
            roles.push(Role {
                name: format!("r{j}"),
                direction: if rng.gen_bool(0.5) {
                    RoleDirection::Accepts
                } else {
                    RoleDirection::Emits
                },
                message_type: types.choose(rng).unwrap().clone(),
            });
        }
        m.connectors.push(Connector {
            name: format!("k{i}"),
            roles,
            attributes: BTreeMap::new(),
        });
    }

    // Candidate attachments: (sender, receiver) with equal message types.
    let mut senders: Vec<(ElementPath, String)> = Vec::new();
    let mut receivers: Vec<(ElementPath, String)> = Vec::new();
    for c in &m.components {
        for p in &c.ports {
            let path = ElementPath::pair(c.name.clone(), p.name.clone());
            match p.direction {
                PortDirection::Requires => senders.push((path, p.message_type.clone())),
                PortDirection::Provides => receivers.push((path, p.message_type.clone())),
            }
        }
    }
    for c in &m.connectors {
        for r in &c.roles {
            let path = ElementPath::pair(c.name.clone(), r.name.clone());
            match r.direction {
                RoleDirection::Emits => senders.push((path, r.message_type.clone())),
                RoleDirection::Accepts => receivers.push((path, r.message_type.clone())),
            }
        }
    }
    for (from, ft) in &senders {
        for (to, tt) in &receivers {
            if ft == tt && rng.gen_bool(0.4) {
                m.attachments
                    .push(Attachment::new(from.clone(), to.clone()));
            }
        }
    }

    debug_assert!(validate_structure(&m).is_clean());
    m
}

/// Properties that actually hold on the model right now; used as declared
/// properties for preservation suites.
pub fn holding_properties(rng: &mut impl Rng, m: &ArchitectureModel) -> Vec<PropertyExpr> {
    let mut candidates = vec![PropertyExpr::TypeClosed, PropertyExpr::AllPortsConnected];
    if let Some(c) = m.components.first() {
        candidates.push(PropertyExpr::Exists {
            kind: crate::model::ElementKind::Component,
            pattern: format!("{}*", &c.name[..1]),
        });
        candidates.push(PropertyExpr::Replication {
            base: c.name.clone(),
            min: 1,
        });
    }
    candidates.push(PropertyExpr::AttrSum {
        attribute: "cost".into(),
        bound: 1000.0,
    });
    if m.components.len() >= 2 && rng.gen_bool(0.5) {
        candidates.push(PropertyExpr::Connected {
            a: ElementPath::single(m.components[0].name.clone()),
            b: ElementPath::single(m.components[1].name.clone()),
        });
    }
    candidates
        .into_iter()
        .filter(|p| matches!(evaluate(m, p), Ok(r) if r.holds))
        .collect()
}

/// A plausibly applicable action drawn against the model; it may still
/// fail its precondition, which callers treat as a legitimate outcome.
pub fn random_action(rng: &mut impl Rng, m: &ArchitectureModel, salt: usize) -> RefinementAction {
    let component_names: Vec<String> = m.components.iter().map(|c| c.name.clone()).collect();
    let pick_component = |rng: &mut dyn rand::RngCore| component_names.choose(rng).cloned();
    match rng.gen_range(0..7u32) {
        0 => {
            // Fresh include, occasionally colliding on purpose.
            let name = if rng.gen_bool(0.15) && !component_names.is_empty() {
                component_names[0].clone()
            } else {
                format!("inc{salt}")
            };
            if rng.gen_bool(0.5) {
                RefinementAction::Include {
                    fragment: component_fragment(&name, vec![], BTreeMap::new()),
                }
            } else {
                let types: Vec<String> = m.types.iter().cloned().collect();
                RefinementAction::Include {
                    fragment: connector_fragment(&name, &types),
                }
            }
        }
        1 => {
            let target = pick_component(rng).unwrap_or_else(|| "ghost".to_string());
            RefinementAction::Exclude {
                target: ElementPath::single(target),
            }
        }
        2 => {
            let types: Vec<String> = m.types.iter().cloned().collect();
            let t = if rng.gen_bool(0.3) || types.is_empty() {
                "Tmissing".to_string()
            } else {
                types.choose(rng).unwrap().clone()
            };
            RefinementAction::ExcludeType { type_name: t }
        }
        3 => {
            let target = pick_component(rng).unwrap_or_else(|| "ghost".to_string());
            RefinementAction::Replicate {
                target: ElementPath::single(target),
                count: rng.gen_range(2..=3),
            }
        }
        4 => {
            // Unify an attached port through a connector with a full
            // accepts/emits pair per declared type, included beforehand by
            // step assembly when needed; here we just aim at existing ones.
            let attached: Vec<(String, String)> = m
                .components
                .iter()
                .flat_map(|c| {
                    c.ports
                        .iter()
                        .filter(|p| {
                            !m.attachments_at(&ElementPath::pair(c.name.clone(), p.name.clone()))
                                .is_empty()
                        })
                        .map(|p| (c.name.clone(), p.name.clone()))
                        .collect::<Vec<_>>()
                })
                .collect();
            let connector = m
                .connectors
                .iter()
                .map(|c| c.name.clone())
                .collect::<Vec<_>>();
            match (attached.choose(rng), connector.choose(rng)) {
                (Some((e, p)), Some(k)) => RefinementAction::Unify {
                    connection: ElementPath::new(vec![e.clone(), p.clone(), "connection".into()]),
                    connector: k.clone(),
                },
                _ => RefinementAction::ExcludeType {
                    type_name: "Tmissing".into(),
                },
            }
        }
        5 => {
            // Decompose a component into a two-part fragment mapping each
            // port onto a same-shaped inner port.
            match m
                .components
                .iter()
                .filter(|c| c.name.len() < 20)
                .collect::<Vec<_>>()
                .choose(rng)
            {
                Some(c) => {
                    let inner = Component {
                        name: "core".to_string(),
                        ports: c.ports.clone(),
                        attributes: c.attributes.clone(),
                    };
                    let shell = Component {
                        name: "shell".to_string(),
                        ..Default::default()
                    };
                    let port_map: BTreeMap<String, ElementPath> = c
                        .ports
                        .iter()
                        .map(|p| (p.name.clone(), ElementPath::pair("core", p.name.clone())))
                        .collect();
                    RefinementAction::Decompose {
                        target: ElementPath::single(c.name.clone()),
                        fragment: crate::model::Fragment {
                            components: vec![inner, shell],
                            connectors: vec![],
                            attachments: vec![],
                        },
                        port_map,
                    }
                }
                None => RefinementAction::ExcludeType {
                    type_name: "Tmissing".into(),
                },
            }
        }
        _ => {
            // Substitute a component by a like-shaped replacement.
            match m
                .components
                .iter()
                .filter(|c| c.name.len() < 20)
                .collect::<Vec<_>>()
                .choose(rng)
            {
                Some(c) => {
                    let inner = Component {
                        name: "sub".to_string(),
                        ports: c.ports.clone(),
                        attributes: c.attributes.clone(),
                    };
                    let port_map: BTreeMap<String, ElementPath> = c
                        .ports
                        .iter()
                        .map(|p| (p.name.clone(), ElementPath::pair("sub", p.name.clone())))
                        .collect();
                    RefinementAction::Substitute {
                        target: ElementPath::single(c.name.clone()),
                        fragment: crate::model::Fragment {
                            components: vec![inner],
                            connectors: vec![],
                            attachments: vec![],
                        },
                        port_map,
                    }
                }
                None => RefinementAction::ExcludeType {
                    type_name: "Tmissing".into(),
                },
            }
        }
    }
}

/// A step of 1..=3 random actions.
pub fn random_step(rng: &mut impl Rng, m: &ArchitectureModel, salt: usize) -> RefinementStep {
    let len = rng.gen_range(1..=3);
    let actions = (0..len)
        .map(|i| random_action(rng, m, salt * 10 + i))
        .collect();
    RefinementStep {
        actions,
        origin: StepOrigin::User,
    }
}

/// A step guaranteed to fail regardless of what its prefix does: the last
/// action is unsatisfiable by construction.
pub fn random_failing_step(
    rng: &mut impl Rng,
    m: &ArchitectureModel,
    salt: usize,
) -> RefinementStep {
    let mut actions: Vec<RefinementAction> = Vec::new();
    for i in 0..rng.gen_range(0..=2) {
        actions.push(random_action(rng, m, salt * 100 + i));
    }
    let poison = match rng.gen_range(0..3u32) {
        0 => RefinementAction::ExcludeType {
            type_name: "__never_declared__".into(),
        },
        1 => RefinementAction::Replicate {
            target: ElementPath::single("__ghost__"),
            count: 2,
        },
        _ => RefinementAction::Replicate {
            target: ElementPath::single(
                m.components
                    .first()
                    .map(|c| c.name.clone())
                    .unwrap_or_else(|| "__ghost__".into()),
            ),
            count: 1,
        },
    };
    actions.push(poison);
    RefinementStep {
        actions,
        origin: StepOrigin::User,
    }
}

/// Named weights: component loads or node capacities.
pub type NamedWeights = Vec<(String, f64)>;

/// Deployment instance: component loads and node capacities, all integral.
pub fn random_deployment_instance(rng: &mut impl Rng) -> (NamedWeights, NamedWeights) {
    let n_comp = rng.gen_range(0..=6);
    let loads = (0..n_comp)
        .map(|i| (format!("c{i}"), rng.gen_range(0..=10) as f64))
        .collect();
    let n_nodes = rng.gen_range(1..=3);
    let caps = (0..n_nodes)
        .map(|i| (format!("n{i}"), rng.gen_range(1..=12) as f64))
        .collect();
    (loads, caps)
}
