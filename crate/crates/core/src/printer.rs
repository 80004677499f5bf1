//! Canonical text rendering for every document kind.
//!
//! The printer is the inverse of the parser: `parse(print(d))` is
//! structurally equal to `d` for every valid document. Canonical form uses
//! 2-space indentation, one statement per line, a fixed section order
//! (stage, types, components, connectors, attachments, properties,
//! attributes), and empty blocks inlined as `{ }`. Model fingerprints are
//! SHA-256 hashes of this canonical text.

use sha2::{Digest, Sha256};

use crate::codegen::MappingModel;
use crate::deploy::ResourceModel;
use crate::lexer::escape_string;
use crate::model::{
    fmt_number, ArchitectureModel, Attachment, Component, Connector, Fragment, ModelDocument,
    Scalar, Stage,
};
use crate::pattern::{
    ActionTpl, AttachmentTpl, ComponentTpl, ConnectorTpl, FragmentTpl, IntTpl, NumTpl, PortSelTpl,
    PropertyTpl, QoSPattern, ScalarTpl,
};
use crate::platform::PlatformModel;

/// Hex SHA-256 digest of arbitrary bytes.
pub fn fingerprint_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Content hash of a model's canonical text.
pub fn model_fingerprint(arch: &ArchitectureModel) -> String {
    fingerprint_bytes(print_model(&ModelDocument::Architecture(arch.clone())).as_bytes())
}

/// Renders a document in canonical form.
pub fn print_model(doc: &ModelDocument) -> String {
    let mut p = Printer::new();
    match doc {
        ModelDocument::Architecture(m) => p.architecture(m),
        ModelDocument::QoSPattern(q) => p.qos_pattern(q),
        ModelDocument::Platform(m) => p.platform(m),
        ModelDocument::Mapping(m) => p.mapping(m),
        ModelDocument::Resources(r) => p.resources(r),
    }
    p.out
}

struct Printer {
    out: String,
    indent: usize,
}

impl Printer {
    fn new() -> Self {
        Printer {
            out: String::new(),
            indent: 0,
        }
    }

    fn line(&mut self, text: &str) {
        for _ in 0..self.indent {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn block<F: FnOnce(&mut Self)>(&mut self, header: &str, body: F) {
        self.line(&format!("{header} {{"));
        self.indent += 1;
        body(self);
        self.indent -= 1;
        self.line("}");
    }

    /// `header { }` when empty, a real block otherwise.
    fn block_or_inline<F: FnOnce(&mut Self)>(&mut self, header: &str, empty: bool, body: F) {
        if empty {
            self.line(&format!("{header} {{ }}"));
        } else {
            self.block(header, body);
        }
    }

    fn scalar(v: &Scalar) -> String {
        match v {
            Scalar::Number(n) => fmt_number(*n),
            Scalar::Text(s) => escape_string(s),
        }
    }

    fn attrs(&mut self, attrs: &std::collections::BTreeMap<String, Scalar>) {
        for (k, v) in attrs {
            self.line(&format!("attr {k} = {}", Self::scalar(v)));
        }
    }

    fn component(&mut self, c: &Component) {
        let empty = c.ports.is_empty() && c.attributes.is_empty();
        self.block_or_inline(&format!("component {}", c.name), empty, |p| {
            for port in &c.ports {
                p.line(&format!(
                    "port {}: {} {}",
                    port.name, port.direction, port.message_type
                ));
            }
            p.attrs(&c.attributes);
        });
    }

    fn connector(&mut self, c: &Connector) {
        let empty = c.roles.is_empty() && c.attributes.is_empty();
        self.block_or_inline(&format!("connector {}", c.name), empty, |p| {
            for role in &c.roles {
                p.line(&format!(
                    "role {}: {} {}",
                    role.name, role.direction, role.message_type
                ));
            }
            p.attrs(&c.attributes);
        });
    }

    fn attachment(&mut self, a: &Attachment) {
        self.line(&format!("attach {} to {}", a.from, a.to));
    }

    fn architecture(&mut self, m: &ArchitectureModel) {
        self.block(&format!("architecture {}", m.name), |p| {
            if m.stage != Stage::Geim {
                p.line(&format!("stage {}", m.stage));
            }
            let types: Vec<&str> = m.types.iter().map(String::as_str).collect();
            if types.is_empty() {
                p.line("types { }");
            } else {
                p.line(&format!("types {{ {} }}", types.join("; ")));
            }
            for c in &m.components {
                p.component(c);
            }
            for c in &m.connectors {
                p.connector(c);
            }
            for a in &m.attachments {
                p.attachment(a);
            }
            for prop in &m.properties {
                p.line(&format!("property {prop}"));
            }
            p.attrs(&m.attributes);
        });
    }

    fn fragment_body(&mut self, f: &Fragment) {
        for c in &f.components {
            self.component(c);
        }
        for c in &f.connectors {
            self.connector(c);
        }
        for a in &f.attachments {
            self.attachment(a);
        }
    }

    // --- template rendering (.qos) ----------------------------------------

    fn scalar_tpl(v: &ScalarTpl) -> String {
        match v {
            ScalarTpl::Number(n) => fmt_number(*n),
            ScalarTpl::Text(s) => escape_string(s),
            ScalarTpl::Param(p) => format!("${p}"),
        }
    }

    fn component_tpl(&mut self, c: &ComponentTpl) {
        let empty = c.ports.is_empty() && c.attributes.is_empty();
        self.block_or_inline(&format!("component {}", c.name), empty, |p| {
            for port in &c.ports {
                p.line(&format!(
                    "port {}: {} {}",
                    port.name, port.direction, port.message_type
                ));
            }
            for (k, v) in &c.attributes {
                p.line(&format!("attr {k} = {}", Self::scalar_tpl(v)));
            }
        });
    }

    fn connector_tpl(&mut self, c: &ConnectorTpl) {
        let empty = c.roles.is_empty() && c.attributes.is_empty();
        self.block_or_inline(&format!("connector {}", c.name), empty, |p| {
            for role in &c.roles {
                p.line(&format!(
                    "role {}: {} {}",
                    role.name, role.direction, role.message_type
                ));
            }
            for (k, v) in &c.attributes {
                p.line(&format!("attr {k} = {}", Self::scalar_tpl(v)));
            }
        });
    }

    fn fragment_tpl_body(&mut self, f: &FragmentTpl) {
        for c in &f.components {
            self.component_tpl(c);
        }
        for c in &f.connectors {
            self.connector_tpl(c);
        }
        for AttachmentTpl { from, to } in &f.attachments {
            self.line(&format!("attach {from} to {to}"));
        }
    }

    fn int_tpl(v: &IntTpl) -> String {
        v.to_string()
    }

    fn property_tpl(p: &PropertyTpl) -> String {
        match p {
            PropertyTpl::AllPortsConnected => "allPortsConnected".to_string(),
            PropertyTpl::TypeClosed => "typeClosed".to_string(),
            PropertyTpl::Exists { kind, pattern } => format!("exists {kind} {pattern}"),
            PropertyTpl::Replication { base, min } => {
                format!("replication({base}) >= {}", Self::int_tpl(min))
            }
            PropertyTpl::Connected { a, b } => format!("connected({a}, {b})"),
            PropertyTpl::AttrSum { attribute, bound } => {
                let bound = match bound {
                    NumTpl::Lit(v) => fmt_number(*v),
                    NumTpl::Param(p) => format!("${p}"),
                };
                format!("attrSum({attribute}) <= {bound}")
            }
        }
    }

    fn qos_pattern(&mut self, q: &QoSPattern) {
        self.block(&format!("qos_pattern {}", q.name), |p| {
            for param in &q.params {
                p.line(&format!("param {}: {}", param.name, param.kind));
            }
            for f in &q.fragments {
                let empty =
                    f.components.is_empty() && f.connectors.is_empty() && f.attachments.is_empty();
                p.block_or_inline("fragment", empty, |p| p.fragment_tpl_body(f));
            }
            for action in &q.actions {
                match action {
                    ActionTpl::Include { fragment } => {
                        p.line(&format!("action include {fragment}"))
                    }
                    ActionTpl::Exclude { target } => p.line(&format!("action exclude {target}")),
                    ActionTpl::ExcludeType { type_name } => {
                        p.line(&format!("action exclude_type {type_name}"))
                    }
                    ActionTpl::Replicate { target, count } => p.line(&format!(
                        "action replicate {target} {}",
                        Self::int_tpl(count)
                    )),
                    ActionTpl::Unify {
                        element,
                        port,
                        connector,
                    } => {
                        let port = match port {
                            PortSelTpl::Named(n) => n.to_string(),
                            PortSelTpl::EachAttached => "port".to_string(),
                        };
                        p.line(&format!(
                            "action unify {element}::{port}::connection with {connector}"
                        ))
                    }
                    ActionTpl::Decompose {
                        target,
                        fragment,
                        port_map,
                    } => {
                        let empty = fragment.components.is_empty()
                            && fragment.connectors.is_empty()
                            && fragment.attachments.is_empty();
                        if empty {
                            p.line(&format!(
                                "action decompose {target} into fragment {{ }} {}",
                                portmap_tpl(port_map)
                            ));
                        } else {
                            p.line(&format!("action decompose {target} into fragment {{"));
                            p.indent += 1;
                            p.fragment_tpl_body(fragment);
                            p.indent -= 1;
                            p.line(&format!("}} {}", portmap_tpl(port_map)));
                        }
                    }
                }
            }
            for ensure in &q.ensures {
                p.line(&format!("ensures {}", Self::property_tpl(ensure)));
            }
        });
    }

    fn platform(&mut self, m: &PlatformModel) {
        let empty = m.requires.is_empty() && m.adapters.is_empty() && m.rewrites.is_empty();
        self.block_or_inline(&format!("platform {}", m.name), empty, |p| {
            for prop in &m.requires {
                p.line(&format!("requires {prop}"));
            }
            for adapter in &m.adapters {
                p.block("adapter", |p| p.fragment_body(adapter));
            }
            for rule in &m.rewrites {
                let portmap = {
                    let entries: Vec<String> = rule
                        .port_map
                        .iter()
                        .map(|(k, v)| format!("{k} -> {v}"))
                        .collect();
                    if entries.is_empty() {
                        "portmap { }".to_string()
                    } else {
                        format!("portmap {{ {} }}", entries.join("; "))
                    }
                };
                p.line(&format!(
                    "rewrite {} {} -> fragment {{",
                    rule.kind, rule.pattern
                ));
                p.indent += 1;
                p.fragment_body(&rule.replacement);
                p.indent -= 1;
                p.line(&format!("}} {portmap}"));
            }
        });
    }

    fn mapping(&mut self, m: &MappingModel) {
        self.block(&format!("mapping {}", m.name), |p| {
            p.line(&format!("manifest {}", escape_string(&m.manifest_name)));
            if m.strict {
                p.line("strict");
            }
            for rule in &m.rules {
                p.line(&format!(
                    "rule {} {} -> {} template {}",
                    rule.kind,
                    rule.pattern,
                    escape_string(&rule.output_path),
                    escape_string(&rule.template)
                ));
            }
        });
    }

    fn resources(&mut self, r: &ResourceModel) {
        let empty = r.nodes.is_empty();
        self.block_or_inline(&format!("resources {}", r.name), empty, |p| {
            for node in &r.nodes {
                p.block(&format!("node {}", node.name), |p| {
                    p.line(&format!("capacity {}", fmt_number(node.capacity)));
                    p.attrs(&node.attributes);
                });
            }
        });
    }
}

fn portmap_tpl(map: &[(crate::pattern::TplStr, crate::pattern::PathTpl)]) -> String {
    if map.is_empty() {
        return "portmap { }".to_string();
    }
    let entries: Vec<String> = map.iter().map(|(k, v)| format!("{k} -> {v}")).collect();
    format!("portmap {{ {} }}", entries.join("; "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_architecture_prints_exactly() {
        let doc = ModelDocument::Architecture(ArchitectureModel::empty("A"));
        assert_eq!(print_model(&doc), "architecture A {\n  types { }\n}\n");
    }

    #[test]
    fn stage_line_appears_only_off_geim() {
        let mut m = ArchitectureModel::empty("A");
        m.stage = Stage::Gesm;
        let text = print_model(&ModelDocument::Architecture(m));
        assert!(text.contains("\n  stage GESM\n"));
        let m2 = ArchitectureModel::empty("A");
        assert!(!print_model(&ModelDocument::Architecture(m2)).contains("stage"));
    }

    #[test]
    fn fingerprints_are_stable_and_content_sensitive() {
        let a = ArchitectureModel::empty("A");
        let f1 = model_fingerprint(&a);
        let f2 = model_fingerprint(&a);
        assert_eq!(f1, f2);
        assert_eq!(f1.len(), 64);
        let mut b = a.clone();
        b.types.insert("Job".into());
        assert_ne!(f1, model_fingerprint(&b));
    }
}
