//! Platform models: conformance properties, adapters, and rewrite rules.
//!
//! Applying a platform is the final architecture-level transformation:
//! every element matched by a rewrite rule is substituted by the rule's
//! replacement fragment, adapters are included, and the platform's
//! `requires` properties are appended and must hold on the result. The
//! output model is the concrete GESM stage.

use thiserror::Error;

use crate::glob::glob_match;
use crate::model::{ArchitectureModel, ElementKind, ElementPath, Fragment, Stage};
use crate::property::{evaluate, PropertyExpr, PropertyResult};
use crate::refine::{
    apply_step, RefinementAction, RefinementStep, RefinementTrace, StepFailure, StepOrigin,
};

use std::collections::BTreeMap;

/// Rewrites every matched element into a replacement fragment. Fragment
/// element names are suffixed `_<matched>`; the port map sends each
/// port/role of the matched shape to a member of the replacement.
#[derive(Debug, Clone, PartialEq)]
pub struct RewriteRule {
    pub kind: ElementKind,
    pub pattern: String,
    pub replacement: Fragment,
    pub port_map: BTreeMap<String, ElementPath>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlatformModel {
    pub name: String,
    pub requires: Vec<PropertyExpr>,
    pub adapters: Vec<Fragment>,
    pub rewrites: Vec<RewriteRule>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlatformApplied {
    pub model: ArchitectureModel,
    pub trace: RefinementTrace,
    /// One satisfied result per `requires` property, in declaration order.
    pub conformance: Vec<PropertyResult>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlatformError {
    #[error("platform application requires a GEIM or intermediate model, got {found}")]
    WrongStage { found: Stage },
    #[error("{0}")]
    Step(#[from] StepFailure),
    #[error("platform conformance failed: {property} ({detail})")]
    Conformance {
        property: String,
        detail: String,
        trace: RefinementTrace,
    },
}

/// Applies the platform's rewrites and adapters as one atomic step with
/// the model's declared properties preserved throughout, then checks and
/// appends the platform's conformance properties. Matching runs against
/// the input model, so rewrites never cascade into each other's output.
pub fn apply_platform(
    arch: &ArchitectureModel,
    platform: &PlatformModel,
) -> Result<PlatformApplied, PlatformError> {
    if arch.stage == Stage::Gesm {
        return Err(PlatformError::WrongStage { found: arch.stage });
    }

    let mut actions: Vec<RefinementAction> = Vec::new();
    for rule in &platform.rewrites {
        let matched: Vec<String> = match rule.kind {
            ElementKind::Component => arch
                .components
                .iter()
                .filter(|c| glob_match(&rule.pattern, &c.name))
                .map(|c| c.name.clone())
                .collect(),
            ElementKind::Connector => arch
                .connectors
                .iter()
                .filter(|c| glob_match(&rule.pattern, &c.name))
                .map(|c| c.name.clone())
                .collect(),
        };
        for name in matched {
            actions.push(RefinementAction::Substitute {
                target: ElementPath::single(name),
                fragment: rule.replacement.clone(),
                port_map: rule.port_map.clone(),
            });
        }
    }
    for adapter in &platform.adapters {
        actions.push(RefinementAction::Include {
            fragment: adapter.clone(),
        });
    }

    let (mut model, trace) = if actions.is_empty() {
        (arch.clone(), Vec::new())
    } else {
        let step = RefinementStep {
            actions,
            origin: StepOrigin::Platform(platform.name.clone()),
        };
        let outcome = apply_step(arch, &step, &arch.properties)?;
        (outcome.model, outcome.trace)
    };
    model.stage = Stage::Gesm;
    model.properties.extend(platform.requires.iter().cloned());

    let mut conformance = Vec::new();
    for p in &platform.requires {
        match evaluate(&model, p) {
            Ok(r) if r.holds => conformance.push(r),
            Ok(r) => {
                let detail = if r.detail.is_empty() {
                    "does not hold".to_string()
                } else {
                    r.detail
                };
                return Err(PlatformError::Conformance {
                    property: p.to_string(),
                    detail,
                    trace,
                });
            }
            Err(e) => {
                return Err(PlatformError::Conformance {
                    property: p.to_string(),
                    detail: e.to_string(),
                    trace,
                })
            }
        }
    }
    Ok(PlatformApplied {
        model,
        trace,
        conformance,
    })
}
