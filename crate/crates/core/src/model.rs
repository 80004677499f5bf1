//! Architecture model data structures shared by every pipeline stage.
//!
//! An [`ArchitectureModel`] is a component/connector graph with declared
//! message types, directed attachments, structural properties, and flat
//! scalar attributes. The same type serves the abstract input architecture
//! (GEIM stage), every intermediate refinement result, and the concrete
//! platform-specific output (GESM stage); a [`Stage`] tag tells them apart.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::codegen::MappingModel;
use crate::deploy::ResourceModel;
use crate::pattern::QoSPattern;
use crate::platform::PlatformModel;
use crate::property::PropertyExpr;

/// Pipeline stage of an architecture model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Abstract, environment-independent input model.
    Geim,
    /// Produced by QoS pattern application; not yet platform-specific.
    Intermediate,
    /// Concrete, platform-specific model ready for translation.
    Gesm,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Geim => "GEIM",
            Stage::Intermediate => "intermediate",
            Stage::Gesm => "GESM",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Flat scalar attribute value.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Number(f64),
    Text(String),
}

impl Scalar {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Scalar::Number(v) => Some(*v),
            Scalar::Text(_) => None,
        }
    }
}

/// Canonical rendering for numbers: integral values print without a
/// fractional part so that `parse . print` is stable.
pub fn fmt_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Dotted element path, written `a::b::c` in the DSL.
///
/// The first segment names a component or connector; the second, if
/// present, a port or role of it. The reserved final segment `connection`
/// denotes the set of attachments incident to the named port.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ElementPath {
    pub segments: Vec<String>,
}

impl ElementPath {
    pub fn new(segments: Vec<String>) -> Self {
        assert!(!segments.is_empty(), "element path must be non-empty");
        ElementPath { segments }
    }

    pub fn single(name: impl Into<String>) -> Self {
        ElementPath {
            segments: vec![name.into()],
        }
    }

    pub fn pair(element: impl Into<String>, member: impl Into<String>) -> Self {
        ElementPath {
            segments: vec![element.into(), member.into()],
        }
    }

    /// Name of the component or connector this path starts at.
    pub fn head(&self) -> &str {
        &self.segments[0]
    }

    pub fn is_connection(&self) -> bool {
        self.segments.last().map(String::as_str) == Some("connection")
    }
}

impl fmt::Display for ElementPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.segments.join("::"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortDirection {
    Provides,
    Requires,
}

impl fmt::Display for PortDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PortDirection::Provides => "provides",
            PortDirection::Requires => "requires",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoleDirection {
    Accepts,
    Emits,
}

impl fmt::Display for RoleDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RoleDirection::Accepts => "accepts",
            RoleDirection::Emits => "emits",
        })
    }
}

/// Typed interaction point of a component.
#[derive(Debug, Clone, PartialEq)]
pub struct Port {
    pub name: String,
    pub direction: PortDirection,
    pub message_type: String,
}

/// Typed interaction point of a connector.
#[derive(Debug, Clone, PartialEq)]
pub struct Role {
    pub name: String,
    pub direction: RoleDirection,
    pub message_type: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Component {
    pub name: String,
    pub ports: Vec<Port>,
    pub attributes: BTreeMap<String, Scalar>,
}

impl Component {
    pub fn port(&self, name: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Connector {
    pub name: String,
    pub roles: Vec<Role>,
    pub attributes: BTreeMap<String, Scalar>,
}

impl Connector {
    pub fn role(&self, name: &str) -> Option<&Role> {
        self.roles.iter().find(|r| r.name == name)
    }
}

/// Directed attachment: `from` must be a requires port or emits role,
/// `to` a provides port or accepts role, with equal message types.
#[derive(Debug, Clone, PartialEq)]
pub struct Attachment {
    pub from: ElementPath,
    pub to: ElementPath,
}

impl Attachment {
    pub fn new(from: ElementPath, to: ElementPath) -> Self {
        Attachment { from, to }
    }

    pub fn touches(&self, endpoint: &ElementPath) -> bool {
        &self.from == endpoint || &self.to == endpoint
    }

    /// True if either endpoint starts at the named element.
    pub fn touches_element(&self, name: &str) -> bool {
        self.from.head() == name || self.to.head() == name
    }
}

impl fmt::Display for Attachment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.from, self.to)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Component,
    Connector,
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElementKind::Component => "component",
            ElementKind::Connector => "connector",
        })
    }
}

/// Component/connector graph with declared types, attachments, properties
/// and attributes. The central value of the whole pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureModel {
    pub name: String,
    pub stage: Stage,
    pub types: BTreeSet<String>,
    pub components: Vec<Component>,
    pub connectors: Vec<Connector>,
    pub attachments: Vec<Attachment>,
    pub properties: Vec<PropertyExpr>,
    pub attributes: BTreeMap<String, Scalar>,
}

impl ArchitectureModel {
    pub fn empty(name: impl Into<String>) -> Self {
        ArchitectureModel {
            name: name.into(),
            stage: Stage::Geim,
            types: BTreeSet::new(),
            components: Vec::new(),
            connectors: Vec::new(),
            attachments: Vec::new(),
            properties: Vec::new(),
            attributes: BTreeMap::new(),
        }
    }

    pub fn component(&self, name: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn connector(&self, name: &str) -> Option<&Connector> {
        self.connectors.iter().find(|c| c.name == name)
    }

    /// True if any component or connector carries this name.
    pub fn has_element(&self, name: &str) -> bool {
        self.component(name).is_some() || self.connector(name).is_some()
    }

    /// All element names in declaration order, components first.
    pub fn element_names(&self) -> impl Iterator<Item = &str> {
        self.components
            .iter()
            .map(|c| c.name.as_str())
            .chain(self.connectors.iter().map(|c| c.name.as_str()))
    }

    /// Attachments incident to the given 2-segment endpoint path.
    pub fn attachments_at<'a>(&'a self, endpoint: &ElementPath) -> Vec<&'a Attachment> {
        self.attachments
            .iter()
            .filter(|a| a.touches(endpoint))
            .collect()
    }
}

/// Result of resolving an [`ElementPath`] against a model.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelEntity<'a> {
    Component(&'a Component),
    Connector(&'a Connector),
    Port {
        owner: &'a Component,
        port: &'a Port,
    },
    Role {
        owner: &'a Connector,
        role: &'a Role,
    },
    /// A `...::connection` path: the attachments incident to the port/role.
    Attachments(Vec<&'a Attachment>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unresolved segment '{segment}' in {path}")]
pub struct ResolveError {
    pub segment: String,
    pub path: ElementPath,
}

/// Resolves a path to the unique entity it names, or to the incident
/// attachment set for a `...::connection` suffix.
pub fn resolve_path<'a>(
    arch: &'a ArchitectureModel,
    path: &ElementPath,
) -> Result<ModelEntity<'a>, ResolveError> {
    let unresolved = |segment: &str| ResolveError {
        segment: segment.to_string(),
        path: path.clone(),
    };
    let segs = &path.segments;
    let head = &segs[0];
    let comp = arch.component(head);
    let conn = arch.connector(head);
    if comp.is_none() && conn.is_none() {
        return Err(unresolved(head));
    }
    match segs.len() {
        1 => Ok(match (comp, conn) {
            (Some(c), _) => ModelEntity::Component(c),
            (_, Some(c)) => ModelEntity::Connector(c),
            _ => unreachable!(),
        }),
        2 | 3 => {
            let member = &segs[1];
            if segs.len() == 3 && segs[2] != "connection" {
                return Err(unresolved(&segs[2]));
            }
            let member_entity = if let Some(c) = comp {
                c.port(member)
                    .map(|port| ModelEntity::Port { owner: c, port })
            } else {
                None
            }
            .or_else(|| {
                conn.and_then(|c| {
                    c.role(member)
                        .map(|role| ModelEntity::Role { owner: c, role })
                })
            });
            let entity = member_entity.ok_or_else(|| unresolved(member))?;
            if segs.len() == 2 {
                Ok(entity)
            } else {
                let endpoint = ElementPath::pair(head.clone(), member.clone());
                Ok(ModelEntity::Attachments(arch.attachments_at(&endpoint)))
            }
        }
        _ => Err(unresolved(&segs[3])),
    }
}

/// One invariant violation found by [`validate_structure`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Path of the offending entity, e.g. `b::p` or `X`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("no violations");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every structural invariant and reports all violations.
/// Violations are data, not errors: the report is empty iff the model is
/// structurally sound.
pub fn validate_structure(arch: &ArchitectureModel) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |path: String, message: String| violations.push(Violation { path, message });

    // Element names unique across components and connectors.
    let mut seen = BTreeSet::new();
    for name in arch.element_names() {
        if !seen.insert(name.to_string()) {
            push(name.to_string(), format!("duplicate name {name}"));
        }
    }

    // Port/role names unique within their element; message types declared.
    for c in &arch.components {
        let mut ports = BTreeSet::new();
        for p in &c.ports {
            let path = format!("{}::{}", c.name, p.name);
            if !ports.insert(p.name.clone()) {
                push(path.clone(), format!("duplicate port name {}", p.name));
            }
            if !arch.types.contains(&p.message_type) {
                push(path, format!("undeclared message type {}", p.message_type));
            }
        }
    }
    for c in &arch.connectors {
        let mut roles = BTreeSet::new();
        for r in &c.roles {
            let path = format!("{}::{}", c.name, r.name);
            if !roles.insert(r.name.clone()) {
                push(path.clone(), format!("duplicate role name {}", r.name));
            }
            if !arch.types.contains(&r.message_type) {
                push(path, format!("undeclared message type {}", r.message_type));
            }
        }
    }

    // Attachment endpoints resolve, respect directions, and agree on type.
    enum End<'a> {
        Port(&'a Port),
        Role(&'a Role),
    }
    let resolve_end = |p: &ElementPath| -> Option<End<'_>> {
        if p.segments.len() != 2 {
            return None;
        }
        if let Some(c) = arch.component(p.head()) {
            return c.port(&p.segments[1]).map(End::Port);
        }
        arch.connector(p.head())
            .and_then(|c| c.role(&p.segments[1]).map(End::Role))
    };
    for a in &arch.attachments {
        let from = resolve_end(&a.from);
        let to = resolve_end(&a.to);
        if from.is_none() {
            push(
                a.from.to_string(),
                format!(
                    "attachment endpoint {} does not resolve to a port or role",
                    a.from
                ),
            );
        }
        if to.is_none() {
            push(
                a.to.to_string(),
                format!(
                    "attachment endpoint {} does not resolve to a port or role",
                    a.to
                ),
            );
        }
        let (from, to) = match (from, to) {
            (Some(f), Some(t)) => (f, t),
            _ => continue,
        };
        let from_ok = matches!(&from, End::Port(p) if p.direction == PortDirection::Requires)
            || matches!(&from, End::Role(r) if r.direction == RoleDirection::Emits);
        if !from_ok {
            push(
                a.from.to_string(),
                format!(
                    "attachment must start at a requires port or emits role, but {} is not one",
                    a.from
                ),
            );
        }
        let to_ok = matches!(&to, End::Port(p) if p.direction == PortDirection::Provides)
            || matches!(&to, End::Role(r) if r.direction == RoleDirection::Accepts);
        if !to_ok {
            push(
                a.to.to_string(),
                format!(
                    "attachment must end at a provides port or accepts role, but {} is not one",
                    a.to
                ),
            );
        }
        let ty = |e: &End<'_>| match e {
            End::Port(p) => p.message_type.clone(),
            End::Role(r) => r.message_type.clone(),
        };
        let (tf, tt) = (ty(&from), ty(&to));
        if tf != tt {
            push(
                format!("{} -> {}", a.from, a.to),
                format!("attachment message types differ: {tf} vs {tt}"),
            );
        }
    }

    // No two attachments over the same ordered endpoint pair.
    let mut pairs = BTreeSet::new();
    for a in &arch.attachments {
        let key = (a.from.clone(), a.to.clone());
        if !pairs.insert(key) {
            push(
                format!("{} -> {}", a.from, a.to),
                format!("duplicate attachment {} -> {}", a.from, a.to),
            );
        }
    }

    ValidationReport { violations }
}

/// Embedded model fragment: elements plus internal attachments, used by
/// include/decompose actions, QoS pattern bodies, platform adapters and
/// rewrite replacements.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Fragment {
    pub components: Vec<Component>,
    pub connectors: Vec<Connector>,
    pub attachments: Vec<Attachment>,
}

impl Fragment {
    pub fn element_names(&self) -> impl Iterator<Item = &str> {
        self.components
            .iter()
            .map(|c| c.name.as_str())
            .chain(self.connectors.iter().map(|c| c.name.as_str()))
    }

    pub fn element_count(&self) -> usize {
        self.components.len() + self.connectors.len()
    }

    /// Message types referenced anywhere in the fragment.
    pub fn message_types(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for c in &self.components {
            out.extend(c.ports.iter().map(|p| p.message_type.clone()));
        }
        for c in &self.connectors {
            out.extend(c.roles.iter().map(|r| r.message_type.clone()));
        }
        out
    }

    /// Checks the fragment's internal invariants (unique names, unique
    /// ports/roles). Attachment endpoints are checked once embedded.
    pub fn validate_isolated(&self) -> Result<(), String> {
        let mut names = BTreeSet::new();
        for n in self.element_names() {
            if !names.insert(n.to_string()) {
                return Err(format!("duplicate name {n} in fragment"));
            }
        }
        for c in &self.components {
            let mut ports = BTreeSet::new();
            for p in &c.ports {
                if !ports.insert(p.name.clone()) {
                    return Err(format!(
                        "duplicate port name {} in fragment element {}",
                        p.name, c.name
                    ));
                }
            }
        }
        for c in &self.connectors {
            let mut roles = BTreeSet::new();
            for r in &c.roles {
                if !roles.insert(r.name.clone()) {
                    return Err(format!(
                        "duplicate role name {} in fragment element {}",
                        r.name, c.name
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Top-level document: one of the five model kinds of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelDocument {
    Architecture(ArchitectureModel),
    QoSPattern(QoSPattern),
    Platform(PlatformModel),
    Mapping(MappingModel),
    Resources(ResourceModel),
}

impl ModelDocument {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelDocument::Architecture(_) => "architecture",
            ModelDocument::QoSPattern(_) => "qos_pattern",
            ModelDocument::Platform(_) => "platform",
            ModelDocument::Mapping(_) => "mapping",
            ModelDocument::Resources(_) => "resources",
        }
    }

    pub fn name(&self) -> &str {
        match self {
            ModelDocument::Architecture(m) => &m.name,
            ModelDocument::QoSPattern(p) => &p.name,
            ModelDocument::Platform(p) => &p.name,
            ModelDocument::Mapping(m) => &m.name,
            ModelDocument::Resources(r) => &r.name,
        }
    }

    pub fn as_architecture(&self) -> Option<&ArchitectureModel> {
        match self {
            ModelDocument::Architecture(m) => Some(m),
            _ => None,
        }
    }
}
