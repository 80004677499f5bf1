//! Primitive refinement actions, step composition, and trace recording.
//!
//! Every action is a pure function from one architecture model to the
//! next, guarded by preconditions and followed by structural validation.
//! A step applies an ordered action list atomically: if any action fails
//! its pre, produces an invalid model, or breaks a preserved property,
//! the whole step is rejected and the caller keeps the untouched input.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::model::{
    resolve_path, validate_structure, ArchitectureModel, Attachment, Component, Connector,
    ElementPath, Fragment, ModelEntity, Port, PortDirection, ResolveError, Role, RoleDirection,
    Scalar, ValidationReport,
};
use crate::printer::model_fingerprint;
use crate::property::{evaluate, PropertyExpr};

/// A parameterized primitive transformation.
#[derive(Debug, Clone, PartialEq)]
pub enum RefinementAction {
    /// Add one component or connector verbatim; new message types are
    /// added to the type set.
    Include { fragment: Fragment },
    /// Remove a detached component or connector.
    Exclude { target: ElementPath },
    /// Remove a declared message type that no port or role uses.
    ExcludeType { type_name: String },
    /// Replace a component by `count` copies named `<name>_1..<name>_n`,
    /// fanning out every incident attachment once per replica.
    Replicate { target: ElementPath, count: i64 },
    /// Reroute every attachment on a port through a connector's roles.
    Unify {
        connection: ElementPath,
        connector: String,
    },
    /// Replace a component by a fragment (names prefixed `<parent>_`),
    /// rerouting external attachments per the port map.
    Decompose {
        target: ElementPath,
        fragment: Fragment,
        port_map: BTreeMap<String, ElementPath>,
    },
    /// Replace a matched element by a fragment (names suffixed
    /// `_<matched>`), rerouting attachments per the port map. Used by
    /// platform rewrite rules.
    Substitute {
        target: ElementPath,
        fragment: Fragment,
        port_map: BTreeMap<String, ElementPath>,
    },
}

impl RefinementAction {
    pub fn name(&self) -> &'static str {
        match self {
            RefinementAction::Include { .. } => "include",
            RefinementAction::Exclude { .. } => "exclude",
            RefinementAction::ExcludeType { .. } => "exclude_type",
            RefinementAction::Replicate { .. } => "replicate",
            RefinementAction::Unify { .. } => "unify",
            RefinementAction::Decompose { .. } => "decompose",
            RefinementAction::Substitute { .. } => "substitute",
        }
    }

    /// Argument summary for traces and reports.
    pub fn args(&self) -> Vec<(String, String)> {
        fn fragment_summary(f: &Fragment) -> String {
            f.element_names().collect::<Vec<_>>().join(", ")
        }
        fn portmap_summary(m: &BTreeMap<String, ElementPath>) -> String {
            m.iter()
                .map(|(k, v)| format!("{k} -> {v}"))
                .collect::<Vec<_>>()
                .join("; ")
        }
        match self {
            RefinementAction::Include { fragment } => {
                vec![("fragment".into(), fragment_summary(fragment))]
            }
            RefinementAction::Exclude { target } => vec![("target".into(), target.to_string())],
            RefinementAction::ExcludeType { type_name } => vec![("type".into(), type_name.clone())],
            RefinementAction::Replicate { target, count } => vec![
                ("target".into(), target.to_string()),
                ("count".into(), count.to_string()),
            ],
            RefinementAction::Unify {
                connection,
                connector,
            } => vec![
                ("connection".into(), connection.to_string()),
                ("connector".into(), connector.clone()),
            ],
            RefinementAction::Decompose {
                target,
                fragment,
                port_map,
            } => vec![
                ("target".into(), target.to_string()),
                ("fragment".into(), fragment_summary(fragment)),
                ("portmap".into(), portmap_summary(port_map)),
            ],
            RefinementAction::Substitute {
                target,
                fragment,
                port_map,
            } => vec![
                ("target".into(), target.to_string()),
                ("fragment".into(), fragment_summary(fragment)),
                ("portmap".into(), portmap_summary(port_map)),
            ],
        }
    }
}

/// Where a step came from: direct use, a QoS pattern, or a platform model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOrigin {
    User,
    QosPattern(String),
    Platform(String),
}

impl fmt::Display for StepOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepOrigin::User => f.write_str("user"),
            StepOrigin::QosPattern(n) => write!(f, "qos_pattern({n})"),
            StepOrigin::Platform(n) => write!(f, "platform({n})"),
        }
    }
}

/// Non-empty ordered composition of refinement actions.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementStep {
    pub actions: Vec<RefinementAction>,
    pub origin: StepOrigin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceCheck {
    Passed,
    Failed(String),
    Skipped,
}

impl TraceCheck {
    pub fn summary(&self) -> String {
        match self {
            TraceCheck::Passed => "ok".to_string(),
            TraceCheck::Failed(m) => format!("failed: {m}"),
            TraceCheck::Skipped => "skipped".to_string(),
        }
    }
}

/// Audit record for one attempted action within a step.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub index: usize,
    pub action: String,
    pub args: Vec<(String, String)>,
    pub pre: TraceCheck,
    pub post: TraceCheck,
    pub preserved: TraceCheck,
    /// Content hash of the canonical printed model after the action;
    /// absent when the action failed.
    pub fingerprint: Option<String>,
}

pub type RefinementTrace = Vec<TraceEntry>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RefineError {
    #[error("{0}")]
    Resolve(#[from] ResolveError),
    #[error("precondition failed for {action}: {condition}")]
    Precondition {
        action: &'static str,
        condition: String,
    },
    #[error("type {type_name} is still referenced by {}", used_by.join(", "))]
    DanglingType {
        type_name: String,
        used_by: Vec<String>,
    },
    #[error("duplicate name {name}")]
    DuplicateName { name: String },
    #[error("malformed fragment: {detail}")]
    MalformedFragment { detail: String },
    #[error("replica count must be >= 2, got {count}")]
    ReplicaCount { count: i64 },
    #[error("replica name {name} collides with an existing element")]
    ReplicaCollision { name: String },
    #[error("{path} does not name a component")]
    NotAComponent { path: String },
    #[error("empty attachment set at {path}")]
    EmptyAttachmentSet { path: String },
    #[error("no compatible role on connector {connector} for {endpoint}: {detail}")]
    NoCompatibleRole {
        connector: String,
        endpoint: String,
        detail: String,
    },
    #[error("port map does not cover: {}", missing.join(", "))]
    IncompletePortMap { missing: Vec<String> },
    #[error("port map entry {key} -> {mapped}: {detail}")]
    PortMapMismatch {
        key: String,
        mapped: String,
        detail: String,
    },
    #[error("port map names unknown port {key}")]
    UnknownPortMapKey { key: String },
    #[error("{target} still has attachments: {}", attachments.join(", "))]
    StillAttached {
        target: String,
        attachments: Vec<String>,
    },
}

/// Why a step was rejected.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("action failed: {0}")]
    Action(#[from] RefineError),
    #[error("action produced an invalid model: {report}")]
    StructuralViolation { report: ValidationReport },
    #[error("preserved property violated: {property} ({detail})")]
    PreservationViolated { property: String, detail: String },
}

/// A rejected step: the failing action index, its error, and the trace
/// up to and including the failed entry. The input model is untouched.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("step rejected at action {index}: {error}")]
pub struct StepFailure {
    pub index: usize,
    pub error: StepError,
    pub trace: RefinementTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub model: ArchitectureModel,
    pub trace: RefinementTrace,
}

// ---------------------------------------------------------------------------
// Primitive actions
// ---------------------------------------------------------------------------

/// Removes `t` from the declared types. Fails if `t` is not declared or
/// any port/role still uses it.
pub fn apply_exclude_type(
    arch: &ArchitectureModel,
    t: &str,
) -> Result<ArchitectureModel, RefineError> {
    if !arch.types.contains(t) {
        return Err(RefineError::Precondition {
            action: "exclude_type",
            condition: format!("types includes? {t}"),
        });
    }
    let mut used_by = Vec::new();
    for c in &arch.components {
        for p in &c.ports {
            if p.message_type == t {
                used_by.push(format!("{}::{}", c.name, p.name));
            }
        }
    }
    for c in &arch.connectors {
        for r in &c.roles {
            if r.message_type == t {
                used_by.push(format!("{}::{}", c.name, r.name));
            }
        }
    }
    if !used_by.is_empty() {
        return Err(RefineError::DanglingType {
            type_name: t.to_string(),
            used_by,
        });
    }
    let mut next = arch.clone();
    next.types.remove(t);
    Ok(next)
}

/// Adds a single-element fragment verbatim, declaring any new message types.
pub fn apply_include(
    arch: &ArchitectureModel,
    fragment: &Fragment,
) -> Result<ArchitectureModel, RefineError> {
    if fragment.element_count() != 1 || !fragment.attachments.is_empty() {
        return Err(RefineError::MalformedFragment {
            detail: "include takes exactly one component or connector declaration".to_string(),
        });
    }
    fragment
        .validate_isolated()
        .map_err(|detail| RefineError::MalformedFragment { detail })?;
    let name = fragment.element_names().next().unwrap().to_string();
    if arch.has_element(&name) {
        return Err(RefineError::DuplicateName { name });
    }
    let mut next = arch.clone();
    next.types.extend(fragment.message_types());
    next.components.extend(fragment.components.iter().cloned());
    next.connectors.extend(fragment.connectors.iter().cloned());
    Ok(next)
}

/// Removes a detached component or connector.
pub fn apply_exclude(
    arch: &ArchitectureModel,
    target: &ElementPath,
) -> Result<ArchitectureModel, RefineError> {
    let entity = resolve_path(arch, target)?;
    let name = match entity {
        ModelEntity::Component(c) => c.name.clone(),
        ModelEntity::Connector(c) => c.name.clone(),
        _ => {
            return Err(RefineError::NotAComponent {
                path: target.to_string(),
            })
        }
    };
    let incident: Vec<String> = arch
        .attachments
        .iter()
        .filter(|a| a.touches_element(&name))
        .map(|a| a.to_string())
        .collect();
    if !incident.is_empty() {
        return Err(RefineError::StillAttached {
            target: name,
            attachments: incident,
        });
    }
    let mut next = arch.clone();
    next.components.retain(|c| c.name != name);
    next.connectors.retain(|c| c.name != name);
    Ok(next)
}

/// Replaces a component by `count` copies, fanning out its attachments.
pub fn apply_replicate(
    arch: &ArchitectureModel,
    target: &ElementPath,
    count: i64,
) -> Result<ArchitectureModel, RefineError> {
    let entity = resolve_path(arch, target)?;
    let original = match entity {
        ModelEntity::Component(c) => c.clone(),
        _ => {
            return Err(RefineError::NotAComponent {
                path: target.to_string(),
            })
        }
    };
    if count < 2 {
        return Err(RefineError::ReplicaCount { count });
    }
    let replica_names: Vec<String> = (1..=count)
        .map(|i| format!("{}_{i}", original.name))
        .collect();
    for name in &replica_names {
        if arch.has_element(name) {
            return Err(RefineError::ReplicaCollision { name: name.clone() });
        }
    }
    let mut next = arch.clone();
    let idx = next
        .components
        .iter()
        .position(|c| c.name == original.name)
        .unwrap();
    let replicas = replica_names.iter().map(|name| Component {
        name: name.clone(),
        ..original.clone()
    });
    next.components.splice(idx..=idx, replicas);

    // Fan out: each attachment touching the original becomes one copy per
    // replica, with every endpoint on the original renamed uniformly.
    let mut attachments = Vec::with_capacity(next.attachments.len());
    for a in &arch.attachments {
        if a.touches_element(&original.name) {
            for name in &replica_names {
                let rename = |p: &ElementPath| {
                    let mut q = p.clone();
                    if q.head() == original.name {
                        q.segments[0] = name.clone();
                    }
                    q
                };
                attachments.push(Attachment::new(rename(&a.from), rename(&a.to)));
            }
        } else {
            attachments.push(a.clone());
        }
    }
    next.attachments = attachments;
    Ok(next)
}

/// Reroutes every attachment incident to the port named by
/// `connection` (= `element::port::connection`) through the first
/// direction- and type-compatible roles of `connector`.
pub fn apply_unify(
    arch: &ArchitectureModel,
    connection: &ElementPath,
    connector: &str,
) -> Result<ArchitectureModel, RefineError> {
    if !connection.is_connection() || connection.segments.len() != 3 {
        return Err(RefineError::Precondition {
            action: "unify",
            condition: format!("{connection} must have the form element::port::connection"),
        });
    }
    let set = match resolve_path(arch, connection)? {
        ModelEntity::Attachments(set) => set
            .iter()
            .map(|a| (*a).clone())
            .collect::<Vec<Attachment>>(),
        _ => unreachable!("connection paths resolve to attachment sets"),
    };
    let endpoint = ElementPath::pair(
        connection.segments[0].clone(),
        connection.segments[1].clone(),
    );
    let port = match resolve_path(arch, &endpoint)? {
        ModelEntity::Port { port, .. } => port.clone(),
        _ => {
            return Err(RefineError::Precondition {
                action: "unify",
                condition: format!("{endpoint} must be a component port"),
            })
        }
    };
    if set.is_empty() {
        return Err(RefineError::EmptyAttachmentSet {
            path: connection.to_string(),
        });
    }
    let conn = arch
        .connector(connector)
        .ok_or_else(|| ResolveError {
            segment: connector.to_string(),
            path: ElementPath::single(connector),
        })?
        .clone();

    // First declared role matching the needed direction and message type.
    let pick_role = |direction: RoleDirection, message_type: &str, for_endpoint: &ElementPath| {
        conn.roles
            .iter()
            .find(|r| r.direction == direction && r.message_type == message_type)
            .map(|r| r.name.clone())
            .ok_or_else(|| RefineError::NoCompatibleRole {
                connector: connector.to_string(),
                endpoint: for_endpoint.to_string(),
                detail: format!(
                    "needs a role with direction {direction} and messageType {message_type}"
                ),
            })
    };

    let far_type = |far: &ElementPath| -> Result<String, RefineError> {
        match resolve_path(arch, far)? {
            ModelEntity::Port { port, .. } => Ok(port.message_type.clone()),
            ModelEntity::Role { role, .. } => Ok(role.message_type.clone()),
            _ => Err(RefineError::Precondition {
                action: "unify",
                condition: format!("attachment endpoint {far} must be a port or role"),
            }),
        }
    };

    let mut next = arch.clone();
    let mut rerouted = Vec::with_capacity(next.attachments.len());
    let push_unique = |list: &mut Vec<Attachment>, a: Attachment| {
        if !list.contains(&a) {
            list.push(a);
        }
    };
    for a in &arch.attachments {
        if !a.touches(&endpoint) {
            push_unique(&mut rerouted, a.clone());
            continue;
        }
        if a.from == endpoint {
            // port is on the from side: port -> roleNear, roleFar -> far.
            let far = &a.to;
            let near = pick_role(RoleDirection::Accepts, &port.message_type, &endpoint)?;
            let far_role = pick_role(RoleDirection::Emits, &far_type(far)?, far)?;
            push_unique(
                &mut rerouted,
                Attachment::new(endpoint.clone(), ElementPath::pair(connector, near)),
            );
            push_unique(
                &mut rerouted,
                Attachment::new(ElementPath::pair(connector, far_role), far.clone()),
            );
        } else {
            // port is on the to side: roleNear -> port, far -> roleFar.
            let far = &a.from;
            let near = pick_role(RoleDirection::Emits, &port.message_type, &endpoint)?;
            let far_role = pick_role(RoleDirection::Accepts, &far_type(far)?, far)?;
            push_unique(
                &mut rerouted,
                Attachment::new(ElementPath::pair(connector, near), endpoint.clone()),
            );
            push_unique(
                &mut rerouted,
                Attachment::new(far.clone(), ElementPath::pair(connector, far_role)),
            );
        }
    }
    next.attachments = rerouted;
    Ok(next)
}

enum MemberShape {
    Port(PortDirection, String),
    Role(RoleDirection, String),
}

impl MemberShape {
    fn direction_text(&self) -> String {
        match self {
            MemberShape::Port(d, _) => d.to_string(),
            MemberShape::Role(d, _) => d.to_string(),
        }
    }

    fn message_type(&self) -> &str {
        match self {
            MemberShape::Port(_, t) | MemberShape::Role(_, t) => t,
        }
    }

    /// May this member sit on the `from` side of an attachment?
    fn can_send(&self) -> bool {
        matches!(self, MemberShape::Port(PortDirection::Requires, _))
            || matches!(self, MemberShape::Role(RoleDirection::Emits, _))
    }

    fn can_receive(&self) -> bool {
        matches!(self, MemberShape::Port(PortDirection::Provides, _))
            || matches!(self, MemberShape::Role(RoleDirection::Accepts, _))
    }
}

fn member_shape(fragment_model: &ArchitectureModel, path: &ElementPath) -> Option<MemberShape> {
    match resolve_path(fragment_model, path).ok()? {
        ModelEntity::Port { port, .. } => {
            Some(MemberShape::Port(port.direction, port.message_type.clone()))
        }
        ModelEntity::Role { role, .. } => {
            Some(MemberShape::Role(role.direction, role.message_type.clone()))
        }
        _ => None,
    }
}

/// Shared machinery of decompose and substitute: remove `target`, embed
/// the renamed fragment, reroute external attachments per `port_map`.
fn replace_element(
    arch: &ArchitectureModel,
    action: &'static str,
    target: &ElementPath,
    fragment: &Fragment,
    port_map: &BTreeMap<String, ElementPath>,
    rename: impl Fn(&str) -> String,
    components_only: bool,
) -> Result<ArchitectureModel, RefineError> {
    let entity = resolve_path(arch, target)?;
    let (target_name, members): (String, Vec<(String, bool)>) = match entity {
        ModelEntity::Component(c) => (
            c.name.clone(),
            c.ports
                .iter()
                .map(|p| {
                    let attached = !arch
                        .attachments_at(&ElementPath::pair(c.name.clone(), p.name.clone()))
                        .is_empty();
                    (p.name.clone(), attached)
                })
                .collect(),
        ),
        ModelEntity::Connector(c) if !components_only => (
            c.name.clone(),
            c.roles
                .iter()
                .map(|r| {
                    let attached = !arch
                        .attachments_at(&ElementPath::pair(c.name.clone(), r.name.clone()))
                        .is_empty();
                    (r.name.clone(), attached)
                })
                .collect(),
        ),
        _ => {
            return Err(RefineError::NotAComponent {
                path: target.to_string(),
            })
        }
    };

    fragment
        .validate_isolated()
        .map_err(|detail| RefineError::MalformedFragment { detail })?;

    // Coverage: decompose requires the map to cover every port exactly;
    // substitute requires covering every attached port/role.
    for key in port_map.keys() {
        if !members.iter().any(|(name, _)| name == key) {
            return Err(RefineError::UnknownPortMapKey { key: key.clone() });
        }
    }
    let missing: Vec<String> = members
        .iter()
        .filter(|(name, attached)| {
            let required = if action == "decompose" {
                true
            } else {
                *attached
            };
            required && !port_map.contains_key(name)
        })
        .map(|(name, _)| name.clone())
        .collect();
    if !missing.is_empty() {
        return Err(RefineError::IncompletePortMap { missing });
    }

    // Renamed fragment elements; check collisions against the model minus
    // the replaced element.
    let renamed_fragment = {
        let mut f = fragment.clone();
        for c in &mut f.components {
            c.name = rename(&c.name);
        }
        for c in &mut f.connectors {
            c.name = rename(&c.name);
        }
        for a in &mut f.attachments {
            a.from.segments[0] = rename(&a.from.segments[0]);
            a.to.segments[0] = rename(&a.to.segments[0]);
        }
        f
    };
    for name in renamed_fragment.element_names() {
        if name != target_name && arch.has_element(name) {
            return Err(RefineError::DuplicateName {
                name: name.to_string(),
            });
        }
    }

    // Fragment members are looked up in a scratch model so direction/type
    // checks can reuse path resolution.
    let mut scratch = ArchitectureModel::empty("fragment");
    scratch.components = renamed_fragment.components.clone();
    scratch.connectors = renamed_fragment.connectors.clone();

    let mapped_inner = |key: &str| -> Result<ElementPath, RefineError> {
        let raw = &port_map[key];
        if raw.segments.len() != 2 {
            return Err(RefineError::PortMapMismatch {
                key: key.to_string(),
                mapped: raw.to_string(),
                detail: "mapped path must be element::port".to_string(),
            });
        }
        let mut inner = raw.clone();
        inner.segments[0] = rename(&inner.segments[0]);
        Ok(inner)
    };

    // Decompose additionally requires direction and type equality between
    // each parent port and its mapped inner port.
    if action == "decompose" {
        let parent = arch.component(&target_name).unwrap();
        for port in &parent.ports {
            let inner = mapped_inner(&port.name)?;
            let shape =
                member_shape(&scratch, &inner).ok_or_else(|| RefineError::PortMapMismatch {
                    key: port.name.clone(),
                    mapped: inner.to_string(),
                    detail: "mapped path does not resolve inside the fragment".to_string(),
                })?;
            let dir_ok = matches!(&shape, MemberShape::Port(d, _) if *d == port.direction);
            if !dir_ok || shape.message_type() != port.message_type {
                return Err(RefineError::PortMapMismatch {
                    key: port.name.clone(),
                    mapped: inner.to_string(),
                    detail: format!(
                        "parent port is {} {} but mapped member is {} {}",
                        port.direction,
                        port.message_type,
                        shape.direction_text(),
                        shape.message_type()
                    ),
                });
            }
        }
    }

    // Reroute external attachments; check the mapped member can take the
    // same side of the attachment with the same message type.
    let mut next = arch.clone();
    let target_member_type = |member: &str| -> String {
        if let Some(c) = arch.component(&target_name) {
            if let Some(p) = c.port(member) {
                return p.message_type.clone();
            }
        }
        if let Some(c) = arch.connector(&target_name) {
            if let Some(r) = c.role(member) {
                return r.message_type.clone();
            }
        }
        String::new()
    };
    for a in &mut next.attachments {
        for (endpoint, sending) in [(&mut a.from, true), (&mut a.to, false)] {
            if endpoint.head() != target_name {
                continue;
            }
            let member = endpoint.segments[1].clone();
            let inner = mapped_inner(&member)?;
            let shape =
                member_shape(&scratch, &inner).ok_or_else(|| RefineError::PortMapMismatch {
                    key: member.clone(),
                    mapped: inner.to_string(),
                    detail: "mapped path does not resolve inside the fragment".to_string(),
                })?;
            let side_ok = if sending {
                shape.can_send()
            } else {
                shape.can_receive()
            };
            if !side_ok {
                return Err(RefineError::PortMapMismatch {
                    key: member.clone(),
                    mapped: inner.to_string(),
                    detail: format!(
                        "{} {} cannot take the {} side of an attachment",
                        shape.direction_text(),
                        inner,
                        if sending { "sending" } else { "receiving" }
                    ),
                });
            }
            let expected = target_member_type(&member);
            if shape.message_type() != expected {
                return Err(RefineError::PortMapMismatch {
                    key: member.clone(),
                    mapped: inner.to_string(),
                    detail: format!(
                        "messageType {} differs from {expected}",
                        shape.message_type()
                    ),
                });
            }
            *endpoint = inner;
        }
    }

    // Swap the element for the fragment: components splice in place,
    // connectors append in declaration order.
    next.types.extend(renamed_fragment.message_types());
    if let Some(idx) = next.components.iter().position(|c| c.name == target_name) {
        next.components
            .splice(idx..=idx, renamed_fragment.components.iter().cloned());
        next.connectors
            .extend(renamed_fragment.connectors.iter().cloned());
    } else {
        let idx = next
            .connectors
            .iter()
            .position(|c| c.name == target_name)
            .unwrap();
        next.connectors
            .splice(idx..=idx, renamed_fragment.connectors.iter().cloned());
        next.components
            .extend(renamed_fragment.components.iter().cloned());
    }
    next.attachments
        .extend(renamed_fragment.attachments.iter().cloned());
    Ok(next)
}

/// Splits a component into a fragment at the same abstraction level.
pub fn apply_decompose(
    arch: &ArchitectureModel,
    target: &ElementPath,
    fragment: &Fragment,
    port_map: &BTreeMap<String, ElementPath>,
) -> Result<ArchitectureModel, RefineError> {
    let parent = target.head().to_string();
    replace_element(
        arch,
        "decompose",
        target,
        fragment,
        port_map,
        |name| format!("{parent}_{name}"),
        true,
    )
}

/// Substitutes a matched element by a platform fragment.
pub fn apply_substitute(
    arch: &ArchitectureModel,
    target: &ElementPath,
    fragment: &Fragment,
    port_map: &BTreeMap<String, ElementPath>,
) -> Result<ArchitectureModel, RefineError> {
    let matched = target.head().to_string();
    replace_element(
        arch,
        "substitute",
        target,
        fragment,
        port_map,
        |name| format!("{name}_{matched}"),
        false,
    )
}

/// Dispatches one action.
pub fn apply_action(
    arch: &ArchitectureModel,
    action: &RefinementAction,
) -> Result<ArchitectureModel, RefineError> {
    match action {
        RefinementAction::Include { fragment } => apply_include(arch, fragment),
        RefinementAction::Exclude { target } => apply_exclude(arch, target),
        RefinementAction::ExcludeType { type_name } => apply_exclude_type(arch, type_name),
        RefinementAction::Replicate { target, count } => apply_replicate(arch, target, *count),
        RefinementAction::Unify {
            connection,
            connector,
        } => apply_unify(arch, connection, connector),
        RefinementAction::Decompose {
            target,
            fragment,
            port_map,
        } => apply_decompose(arch, target, fragment, port_map),
        RefinementAction::Substitute {
            target,
            fragment,
            port_map,
        } => apply_substitute(arch, target, fragment, port_map),
    }
}

/// Applies a step atomically.
///
/// After each action the intermediate model must pass structural
/// validation and keep every property in `preserved`. On failure the
/// error carries the failing index and the trace so far; the input model
/// is never mutated.
pub fn apply_step(
    arch: &ArchitectureModel,
    step: &RefinementStep,
    preserved: &[PropertyExpr],
) -> Result<StepOutcome, StepFailure> {
    let mut current = arch.clone();
    let mut trace: RefinementTrace = Vec::with_capacity(step.actions.len());
    for (index, action) in step.actions.iter().enumerate() {
        let mut entry = TraceEntry {
            index,
            action: action.name().to_string(),
            args: action.args(),
            pre: TraceCheck::Passed,
            post: TraceCheck::Skipped,
            preserved: TraceCheck::Skipped,
            fingerprint: None,
        };
        let next = match apply_action(&current, action) {
            Ok(next) => next,
            Err(e) => {
                entry.pre = TraceCheck::Failed(e.to_string());
                trace.push(entry);
                return Err(StepFailure {
                    index,
                    error: StepError::Action(e),
                    trace,
                });
            }
        };
        let report = validate_structure(&next);
        if !report.is_clean() {
            entry.post = TraceCheck::Failed(report.to_string());
            trace.push(entry);
            return Err(StepFailure {
                index,
                error: StepError::StructuralViolation { report },
                trace,
            });
        }
        entry.post = TraceCheck::Passed;
        for p in preserved {
            let violation = match evaluate(&next, p) {
                Ok(r) if r.holds => None,
                Ok(r) => Some(if r.detail.is_empty() {
                    "does not hold".to_string()
                } else {
                    r.detail
                }),
                Err(e) => Some(e.to_string()),
            };
            if let Some(detail) = violation {
                entry.preserved = TraceCheck::Failed(format!("{p}: {detail}"));
                trace.push(entry);
                return Err(StepFailure {
                    index,
                    error: StepError::PreservationViolated {
                        property: p.to_string(),
                        detail,
                    },
                    trace,
                });
            }
        }
        entry.preserved = TraceCheck::Passed;
        entry.fingerprint = Some(model_fingerprint(&next));
        trace.push(entry);
        current = next;
    }
    Ok(StepOutcome {
        model: current,
        trace,
    })
}

/// Convenience constructor used by tests and pattern compilation.
pub fn component_fragment(
    name: &str,
    ports: Vec<Port>,
    attributes: BTreeMap<String, Scalar>,
) -> Fragment {
    Fragment {
        components: vec![Component {
            name: name.to_string(),
            ports,
            attributes,
        }],
        connectors: Vec::new(),
        attachments: Vec::new(),
    }
}

/// Connector fragment with one accepts/emits role pair per message type.
pub fn connector_fragment(name: &str, message_types: &[String]) -> Fragment {
    let mut roles = Vec::new();
    for t in message_types {
        roles.push(Role {
            name: format!("in_{t}"),
            direction: RoleDirection::Accepts,
            message_type: t.clone(),
        });
        roles.push(Role {
            name: format!("out_{t}"),
            direction: RoleDirection::Emits,
            message_type: t.clone(),
        });
    }
    Fragment {
        components: Vec::new(),
        connectors: vec![Connector {
            name: name.to_string(),
            roles,
            attributes: BTreeMap::new(),
        }],
        attachments: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_model;
    use std::collections::BTreeSet;

    fn arch(src: &str) -> ArchitectureModel {
        match parse_model(src).unwrap() {
            crate::model::ModelDocument::Architecture(m) => m,
            other => panic!("expected architecture, got {}", other.kind()),
        }
    }

    fn fixture() -> ArchitectureModel {
        arch(
            "architecture fix {\n\
               types { Job; Result }\n\
               component src { port out: requires Job }\n\
               component b { port in: provides Job }\n\
               connector chan { role in: accepts Job  role out: emits Job }\n\
               attach src::out to chan::in\n\
               attach chan::out to b::in\n\
             }",
        )
    }

    #[test]
    fn exclude_type_removes_unused_type() {
        let m = fixture();
        let next = apply_exclude_type(&m, "Result").unwrap();
        assert_eq!(next.types, BTreeSet::from(["Job".to_string()]));
        assert_eq!(next.components, m.components);
        assert_eq!(next.attachments, m.attachments);
    }

    #[test]
    fn exclude_type_requires_membership() {
        let m = fixture();
        let err = apply_exclude_type(&m, "Ghost").unwrap_err();
        assert!(matches!(err, RefineError::Precondition { .. }), "{err}");
        assert!(err.to_string().contains("includes? Ghost"));
    }

    #[test]
    fn exclude_type_rejects_dangling_references() {
        let m = fixture();
        let err = apply_exclude_type(&m, "Job").unwrap_err();
        match err {
            RefineError::DanglingType { used_by, .. } => {
                assert!(used_by.contains(&"src::out".to_string()));
                assert!(used_by.contains(&"b::in".to_string()));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn include_adds_one_element_and_new_types() {
        let m = fixture();
        let frag = connector_fragment("FTConnector", &["Job".to_string(), "Ack".to_string()]);
        let next = apply_include(&m, &frag).unwrap();
        assert_eq!(next.connectors.len(), m.connectors.len() + 1);
        assert!(next.types.contains("Ack"));
        assert!(validate_structure(&next).is_clean());
    }

    #[test]
    fn include_rejects_duplicate_names() {
        let m = fixture();
        let frag = component_fragment("src", vec![], BTreeMap::new());
        assert!(matches!(
            apply_include(&m, &frag),
            Err(RefineError::DuplicateName { .. })
        ));
    }

    #[test]
    fn include_into_empty_architecture() {
        let empty = ArchitectureModel::empty("void");
        let frag = component_fragment("only", vec![], BTreeMap::new());
        let next = apply_include(&empty, &frag).unwrap();
        assert_eq!(next.components.len(), 1);
        assert_eq!(next.connectors.len(), 0);
    }

    #[test]
    fn exclude_removes_isolated_element_and_rejects_attached() {
        let m = fixture();
        let m2 = apply_include(&m, &component_fragment("spare", vec![], BTreeMap::new())).unwrap();
        let back = apply_exclude(&m2, &ElementPath::single("spare")).unwrap();
        assert_eq!(back, m, "include then exclude is the identity");

        let err = apply_exclude(&m, &ElementPath::single("b")).unwrap_err();
        match err {
            RefineError::StillAttached { attachments, .. } => assert_eq!(attachments.len(), 1),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn replicate_fans_out_attachments() {
        let m = fixture();
        let next = apply_replicate(&m, &ElementPath::single("b"), 2).unwrap();
        assert!(next.component("b").is_none());
        assert!(next.component("b_1").is_some());
        assert!(next.component("b_2").is_some());
        let on_port = |model: &ArchitectureModel, name: &str| {
            model.attachments_at(&ElementPath::pair(name, "in")).len()
        };
        assert_eq!(on_port(&next, "b_1"), 1);
        assert_eq!(on_port(&next, "b_2"), 1);
        assert!(validate_structure(&next).is_clean());
    }

    #[test]
    fn replicate_count_law() {
        // 2 incident attachments, 3 replicas -> 6 incident attachments.
        let m = arch(
            "architecture two {\n\
               types { Job }\n\
               component a { port out: requires Job }\n\
               component c { port out: requires Job }\n\
               component b { port in: provides Job  port in2: provides Job }\n\
               attach a::out to b::in\n\
               attach c::out to b::in2\n\
             }",
        );
        let next = apply_replicate(&m, &ElementPath::single("b"), 3).unwrap();
        let replica_count = next
            .components
            .iter()
            .filter(|c| c.name.starts_with("b_"))
            .count();
        assert_eq!(replica_count, 3);
        let incident = next
            .attachments
            .iter()
            .filter(|a| a.from.head().starts_with("b_") || a.to.head().starts_with("b_"))
            .count();
        assert_eq!(incident, 6);
    }

    #[test]
    fn replicate_without_attachments_keeps_attachment_count() {
        let m = arch("architecture one { types { Job } component b { } }");
        let next = apply_replicate(&m, &ElementPath::single("b"), 2).unwrap();
        assert_eq!(next.attachments.len(), 0);
        assert_eq!(next.components.len(), 2);
    }

    #[test]
    fn replicate_rejects_small_counts_and_collisions() {
        let m = fixture();
        assert!(matches!(
            apply_replicate(&m, &ElementPath::single("b"), 1),
            Err(RefineError::ReplicaCount { count: 1 })
        ));
        let with_clash =
            apply_include(&m, &component_fragment("b_1", vec![], BTreeMap::new())).unwrap();
        assert!(matches!(
            apply_replicate(&with_clash, &ElementPath::single("b"), 2),
            Err(RefineError::ReplicaCollision { .. })
        ));
    }

    fn connection(path: &str) -> ElementPath {
        ElementPath::new(path.split("::").map(String::from).collect())
    }

    #[test]
    fn unify_routes_through_connector() {
        let m = arch(
            "architecture u {\n\
               types { Job }\n\
               component b { port p: requires Job }\n\
               component s { port q: provides Job }\n\
               connector FTConnector { role in: accepts Job  role out: emits Job }\n\
               attach b::p to s::q\n\
             }",
        );
        let next = apply_unify(&m, &connection("b::p::connection"), "FTConnector").unwrap();
        let expect = vec![
            Attachment::new(connection("b::p"), connection("FTConnector::in")),
            Attachment::new(connection("FTConnector::out"), connection("s::q")),
        ];
        assert_eq!(next.attachments, expect);
        assert!(validate_structure(&next).is_clean());
    }

    #[test]
    fn unify_rejects_empty_attachment_set() {
        let m = arch(
            "architecture u {\n\
               types { Job }\n\
               component b { port p: requires Job }\n\
               connector C { role in: accepts Job }\n\
             }",
        );
        assert!(matches!(
            apply_unify(&m, &connection("b::p::connection"), "C"),
            Err(RefineError::EmptyAttachmentSet { .. })
        ));
    }

    #[test]
    fn unify_demands_type_compatible_roles() {
        let m = arch(
            "architecture u {\n\
               types { Job; Result }\n\
               component b { port p: requires Job }\n\
               component s { port q: provides Job }\n\
               connector C { role in: accepts Result  role out: emits Result }\n\
               attach b::p to s::q\n\
             }",
        );
        let err = apply_unify(&m, &connection("b::p::connection"), "C").unwrap_err();
        match &err {
            RefineError::NoCompatibleRole { detail, .. } => {
                assert!(detail.contains("messageType Job"), "{detail}")
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn unify_deduplicates_shared_far_endpoints() {
        // Two ports of distinct replicas attach to the same provider; both
        // unify through the same connector without duplicating the far leg.
        let m = arch(
            "architecture u {\n\
               types { Job }\n\
               component b_1 { port p: requires Job }\n\
               component b_2 { port p: requires Job }\n\
               component s { port q: provides Job }\n\
               connector C { role in: accepts Job  role out: emits Job }\n\
               attach b_1::p to s::q\n\
               attach b_2::p to s::q\n\
             }",
        );
        let step1 = apply_unify(&m, &connection("b_1::p::connection"), "C").unwrap();
        let step2 = apply_unify(&step1, &connection("b_2::p::connection"), "C").unwrap();
        assert!(validate_structure(&step2).is_clean());
        let far = step2
            .attachments
            .iter()
            .filter(|a| a.to == connection("s::q"))
            .count();
        assert_eq!(far, 1, "far leg must not be duplicated");
        assert!(step2
            .attachments
            .iter()
            .any(|a| a.from == connection("b_2::p") && a.to == connection("C::in")));
    }

    #[test]
    fn decompose_reroutes_external_attachments() {
        let m = arch(
            "architecture d {\n\
               types { Job }\n\
               component src { port out: requires Job }\n\
               component P { port p: provides Job }\n\
               attach src::out to P::p\n\
             }",
        );
        let fragment = arch(
            "architecture frag {\n\
               types { Job }\n\
               component front { port p: provides Job  port fwd: requires Job }\n\
               component back { port p: provides Job }\n\
               attach front::fwd to back::p\n\
             }",
        );
        let frag = Fragment {
            components: fragment.components.clone(),
            connectors: vec![],
            attachments: fragment.attachments.clone(),
        };
        let port_map = BTreeMap::from([("p".to_string(), connection("front::p"))]);
        let next = apply_decompose(&m, &ElementPath::single("P"), &frag, &port_map).unwrap();
        assert!(next.component("P").is_none());
        assert!(next.component("P_front").is_some());
        assert!(next.component("P_back").is_some());
        assert!(next.attachments.contains(&Attachment::new(
            connection("src::out"),
            connection("P_front::p")
        )));
        assert!(next.attachments.contains(&Attachment::new(
            connection("P_front::fwd"),
            connection("P_back::p")
        )));
        assert!(validate_structure(&next).is_clean());
    }

    #[test]
    fn decompose_requires_complete_port_map() {
        let m = arch(
            "architecture d {\n\
               types { Job }\n\
               component P { port p: provides Job }\n\
             }",
        );
        let frag = component_fragment("inner", vec![], BTreeMap::new());
        let err =
            apply_decompose(&m, &ElementPath::single("P"), &frag, &BTreeMap::new()).unwrap_err();
        match err {
            RefineError::IncompletePortMap { missing } => {
                assert_eq!(missing, vec!["p".to_string()])
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn decompose_portless_component_grows_element_count() {
        let m = arch("architecture d { types { } component P { } component Q { } }");
        let frag = Fragment {
            components: vec![
                Component {
                    name: "x".into(),
                    ..Default::default()
                },
                Component {
                    name: "y".into(),
                    ..Default::default()
                },
            ],
            connectors: vec![],
            attachments: vec![],
        };
        let next = apply_decompose(&m, &ElementPath::single("P"), &frag, &BTreeMap::new()).unwrap();
        assert_eq!(next.components.len(), 3);
        assert_eq!(next.attachments.len(), 0);
    }

    #[test]
    fn substitute_rewrites_connector_to_component() {
        let m = arch(
            "architecture s {\n\
               types { Job }\n\
               component a { port out: requires Job }\n\
               component c { port in: provides Job }\n\
               connector Queue { role in: accepts Job  role out: emits Job }\n\
               attach a::out to Queue::in\n\
               attach Queue::out to c::in\n\
             }",
        );
        let frag = component_fragment(
            "WorkloadBroker",
            vec![
                Port {
                    name: "recv".into(),
                    direction: PortDirection::Provides,
                    message_type: "Job".into(),
                },
                Port {
                    name: "send".into(),
                    direction: PortDirection::Requires,
                    message_type: "Job".into(),
                },
            ],
            BTreeMap::new(),
        );
        let port_map = BTreeMap::from([
            ("in".to_string(), connection("WorkloadBroker::recv")),
            ("out".to_string(), connection("WorkloadBroker::send")),
        ]);
        let next = apply_substitute(&m, &ElementPath::single("Queue"), &frag, &port_map).unwrap();
        assert!(next.connector("Queue").is_none());
        assert!(next.component("WorkloadBroker_Queue").is_some());
        assert!(next.attachments.contains(&Attachment::new(
            connection("a::out"),
            connection("WorkloadBroker_Queue::recv")
        )));
        assert!(next.attachments.contains(&Attachment::new(
            connection("WorkloadBroker_Queue::send"),
            connection("c::in")
        )));
        assert!(validate_structure(&next).is_clean());
    }

    #[test]
    fn step_application_is_atomic_and_traced() {
        let m = fixture();
        let good = RefinementStep {
            actions: vec![RefinementAction::Include {
                fragment: component_fragment("extra", vec![], BTreeMap::new()),
            }],
            origin: StepOrigin::User,
        };
        let outcome = apply_step(&m, &good, &[]).unwrap();
        assert_eq!(outcome.trace.len(), 1);
        assert!(outcome.trace[0].fingerprint.is_some());
        assert_eq!(
            outcome.trace[0].fingerprint.as_deref(),
            Some(model_fingerprint(&outcome.model).as_str())
        );

        let failing = RefinementStep {
            actions: vec![
                RefinementAction::Include {
                    fragment: component_fragment("extra", vec![], BTreeMap::new()),
                },
                RefinementAction::ExcludeType {
                    type_name: "Ghost".into(),
                },
            ],
            origin: StepOrigin::User,
        };
        let before = model_fingerprint(&m);
        let failure = apply_step(&m, &failing, &[]).unwrap_err();
        assert_eq!(failure.index, 1);
        assert_eq!(failure.trace.len(), 2);
        assert!(matches!(failure.trace[1].pre, TraceCheck::Failed(_)));
        assert_eq!(model_fingerprint(&m), before, "input untouched on failure");
    }

    #[test]
    fn step_rejects_preservation_violations() {
        let mut m = fixture();
        m.properties.push(PropertyExpr::AllPortsConnected);
        let preserved = m.properties.clone();
        // Including a component with a port leaves that port unattached.
        let step = RefinementStep {
            actions: vec![RefinementAction::Include {
                fragment: component_fragment(
                    "loner",
                    vec![Port {
                        name: "p".into(),
                        direction: PortDirection::Provides,
                        message_type: "Job".into(),
                    }],
                    BTreeMap::new(),
                ),
            }],
            origin: StepOrigin::User,
        };
        let failure = apply_step(&m, &step, &preserved).unwrap_err();
        assert!(matches!(
            failure.error,
            StepError::PreservationViolated { .. }
        ));
        assert!(
            matches!(&failure.trace[0].preserved, TraceCheck::Failed(msg) if msg.contains("allPortsConnected"))
        );
    }
}
