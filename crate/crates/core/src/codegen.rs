//! Translation of a concrete GESM into service skeleton files.
//!
//! A mapping model carries ordered rules `(kind, glob) -> (path, template)`.
//! For each element the first matching rule instantiates its template;
//! `{name}`, `{ports}` and `{attrs}` are substituted, any other declared
//! placeholder passes through literally. Output is deterministic byte for
//! byte, including the tab-separated manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::glob::glob_match;
use crate::model::{fmt_number, ArchitectureModel, ElementKind, Scalar, Stage};

/// Placeholders a mapping template may declare.
pub const TEMPLATE_PLACEHOLDERS: &[&str] = &["name", "kind", "ports", "attrs", "stage", "platform"];

#[derive(Debug, Clone, PartialEq)]
pub struct MappingRule {
    pub kind: ElementKind,
    pub pattern: String,
    pub output_path: String,
    pub template: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingModel {
    pub name: String,
    pub manifest_name: String,
    pub strict: bool,
    pub rules: Vec<MappingRule>,
}

/// Generated skeletons plus the element-to-path manifest.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GeneratedBundle {
    /// `(relative path, contents)` in generation order.
    pub files: Vec<(String, String)>,
    /// `(element name, relative path)` sorted by element name.
    pub manifest: Vec<(String, String)>,
}

impl GeneratedBundle {
    /// Tab-separated manifest, one mapping per line, trailing newline.
    pub fn manifest_text(&self) -> String {
        let mut out = String::new();
        for (element, path) in &self.manifest {
            let _ = writeln!(out, "{element}\t{path}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("translation requires GESM, got {found}")]
    WrongStage { found: Stage },
    #[error("strict mapping: no rule matches component {name}")]
    UnmatchedComponent { name: String },
    #[error("duplicate output path {path} (from {first} and {second})")]
    DuplicatePath {
        path: String,
        first: String,
        second: String,
    },
}

/// Scans `{...}` placeholders in template text; returns their names or a
/// description of the first malformed brace.
pub fn template_placeholders(text: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let start = i + 1;
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                end += 1;
            }
            if end == start || end >= bytes.len() || bytes[end] != b'}' {
                return Err(format!("malformed placeholder near byte {i}"));
            }
            out.push(text[start..end].to_string());
            i = end + 1;
        } else if bytes[i] == b'}' {
            return Err(format!("unmatched '}}' at byte {i}"));
        } else {
            i += 1;
        }
    }
    Ok(out)
}

fn substitute(template: &str, values: &BTreeMap<&str, String>) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open + 1..];
        let name_len = tail
            .bytes()
            .take_while(|b| b.is_ascii_alphanumeric() || *b == b'_')
            .count();
        if name_len > 0 && tail.as_bytes().get(name_len) == Some(&b'}') {
            let name = &tail[..name_len];
            match values.get(name) {
                Some(v) => out.push_str(v),
                // Declared-but-unexpanded placeholders pass through.
                None => {
                    out.push('{');
                    out.push_str(name);
                    out.push('}');
                }
            }
            rest = &tail[name_len + 1..];
        } else {
            // Malformed braces are parse errors; emit literally if a
            // hand-built mapping carries one anyway.
            out.push('{');
            rest = tail;
        }
    }
    out.push_str(rest);
    out
}

fn attrs_text(attributes: &BTreeMap<String, Scalar>) -> String {
    let mut lines = Vec::new();
    for (k, v) in attributes {
        let value = match v {
            Scalar::Number(n) => fmt_number(*n),
            Scalar::Text(s) => s.clone(),
        };
        lines.push(format!("{k}={value}"));
    }
    lines.join("\n")
}

/// Instantiates templates for every matched element of the GESM.
pub fn generate(
    gesm: &ArchitectureModel,
    gemm: &MappingModel,
) -> Result<GeneratedBundle, GenerateError> {
    if gesm.stage != Stage::Gesm {
        return Err(GenerateError::WrongStage { found: gesm.stage });
    }

    struct Element<'a> {
        kind: ElementKind,
        name: &'a str,
        ports: String,
        attrs: String,
    }
    let mut elements: Vec<Element<'_>> = Vec::new();
    for c in &gesm.components {
        let ports = c
            .ports
            .iter()
            .map(|p| format!("{} {} {}", p.name, p.direction, p.message_type))
            .collect::<Vec<_>>()
            .join("\n");
        elements.push(Element {
            kind: ElementKind::Component,
            name: &c.name,
            ports,
            attrs: attrs_text(&c.attributes),
        });
    }
    for c in &gesm.connectors {
        let ports = c
            .roles
            .iter()
            .map(|r| format!("{} {} {}", r.name, r.direction, r.message_type))
            .collect::<Vec<_>>()
            .join("\n");
        elements.push(Element {
            kind: ElementKind::Connector,
            name: &c.name,
            ports,
            attrs: attrs_text(&c.attributes),
        });
    }

    let mut bundle = GeneratedBundle::default();
    let mut path_owner: BTreeMap<String, String> = BTreeMap::new();
    let mut manifest: Vec<(String, String)> = Vec::new();
    for element in &elements {
        let rule = gemm
            .rules
            .iter()
            .find(|r| r.kind == element.kind && glob_match(&r.pattern, element.name));
        let rule = match rule {
            Some(r) => r,
            None => {
                if gemm.strict && element.kind == ElementKind::Component {
                    return Err(GenerateError::UnmatchedComponent {
                        name: element.name.to_string(),
                    });
                }
                continue;
            }
        };
        let path = rule.output_path.replace("{name}", element.name);
        if let Some(first) = path_owner.insert(path.clone(), element.name.to_string()) {
            return Err(GenerateError::DuplicatePath {
                path,
                first,
                second: element.name.to_string(),
            });
        }
        let values = BTreeMap::from([
            ("name", element.name.to_string()),
            ("ports", element.ports.clone()),
            ("attrs", element.attrs.clone()),
        ]);
        bundle
            .files
            .push((path.clone(), substitute(&rule.template, &values)));
        manifest.push((element.name.to_string(), path));
    }
    manifest.sort();
    bundle.manifest = manifest;
    Ok(bundle)
}
