//! Deployment planning: assign GESM components to resource nodes.
//!
//! First-fit-decreasing over the components' `load` attribute. Components
//! are sorted by load descending (name ascending on ties), nodes are
//! tried in declared order, and a component lands on the first node whose
//! remaining capacity covers its load. Infeasibility is data, not an
//! error: whatever does not fit goes to `unplaced`.

use std::collections::BTreeMap;

use crate::model::{ArchitectureModel, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct ResourceNode {
    pub name: String,
    pub capacity: f64,
    pub attributes: BTreeMap<String, Scalar>,
}

/// Node inventory (`.res` file).
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceModel {
    pub name: String,
    pub nodes: Vec<ResourceNode>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeploymentPlan {
    /// `(component, node)` in assignment order.
    pub assignments: Vec<(String, String)>,
    pub unplaced: Vec<String>,
}

impl DeploymentPlan {
    pub fn node_of(&self, component: &str) -> Option<&str> {
        self.assignments
            .iter()
            .find(|(c, _)| c == component)
            .map(|(_, n)| n.as_str())
    }
}

fn load_of(attributes: &BTreeMap<String, Scalar>) -> f64 {
    attributes
        .get("load")
        .and_then(Scalar::as_number)
        .unwrap_or(0.0)
}

/// Plans placement of every component onto the resource nodes.
pub fn plan_deployment(gesm: &ArchitectureModel, germ: &ResourceModel) -> DeploymentPlan {
    let mut items: Vec<(String, f64)> = gesm
        .components
        .iter()
        .map(|c| (c.name.clone(), load_of(&c.attributes)))
        .collect();
    items.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let mut remaining: Vec<f64> = germ.nodes.iter().map(|n| n.capacity).collect();
    let mut plan = DeploymentPlan::default();
    for (component, load) in items {
        match remaining.iter().position(|&r| r >= load) {
            Some(i) => {
                remaining[i] -= load;
                plan.assignments
                    .push((component, germ.nodes[i].name.clone()));
            }
            None => plan.unplaced.push(component),
        }
    }
    plan
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Component, Stage};

    fn gesm(loads: &[(&str, f64)]) -> ArchitectureModel {
        let mut m = ArchitectureModel::empty("g");
        m.stage = Stage::Gesm;
        for (name, load) in loads {
            m.components.push(Component {
                name: name.to_string(),
                ports: vec![],
                attributes: BTreeMap::from([("load".to_string(), Scalar::Number(*load))]),
            });
        }
        m
    }

    fn nodes(caps: &[(&str, f64)]) -> ResourceModel {
        ResourceModel {
            name: "grid".into(),
            nodes: caps
                .iter()
                .map(|(name, capacity)| ResourceNode {
                    name: name.to_string(),
                    capacity: *capacity,
                    attributes: BTreeMap::new(),
                })
                .collect(),
        }
    }

    #[test]
    fn first_fit_decreasing_reference_case() {
        // Hand-run FFD: 5 -> n1 (rem 2), 4 -> n2 (rem 3), 3 -> n2 (rem 0).
        let plan = plan_deployment(
            &gesm(&[("x", 5.0), ("y", 4.0), ("z", 3.0)]),
            &nodes(&[("n1", 7.0), ("n2", 7.0)]),
        );
        assert_eq!(
            plan.assignments,
            vec![
                ("x".to_string(), "n1".to_string()),
                ("y".to_string(), "n2".to_string()),
                ("z".to_string(), "n2".to_string()),
            ]
        );
        assert!(plan.unplaced.is_empty());
    }

    #[test]
    fn empty_model_yields_empty_plan() {
        let plan = plan_deployment(&gesm(&[]), &nodes(&[("n1", 7.0)]));
        assert!(plan.assignments.is_empty());
        assert!(plan.unplaced.is_empty());
    }

    #[test]
    fn oversized_component_is_reported_unplaced() {
        let plan = plan_deployment(&gesm(&[("big", 10.0)]), &nodes(&[("n1", 5.0)]));
        assert!(plan.assignments.is_empty());
        assert_eq!(plan.unplaced, vec!["big".to_string()]);
    }

    #[test]
    fn ties_break_by_name_and_missing_load_counts_as_zero() {
        let mut m = gesm(&[("beta", 3.0), ("alpha", 3.0)]);
        m.components.push(Component {
            name: "glue".into(),
            ..Default::default()
        });
        let plan = plan_deployment(&m, &nodes(&[("n1", 3.0), ("n2", 3.0)]));
        assert_eq!(plan.assignments[0], ("alpha".to_string(), "n1".to_string()));
        assert_eq!(plan.assignments[1], ("beta".to_string(), "n2".to_string()));
        assert_eq!(plan.assignments[2], ("glue".to_string(), "n1".to_string()));
    }
}
