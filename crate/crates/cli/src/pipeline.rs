//! Pipeline orchestration for the check, build, and matrix commands.
//!
//! Stage sequence for a build: parse the abstract architecture, check its
//! declared properties, apply each QoS pattern in command-line order,
//! apply the platform (yielding the GESM), write the canonical GESM,
//! re-check the now-extended property set, generate skeletons through the
//! mapping model, and plan deployment when a resource model is given.
//! Every stage appends to one report; the first failure stops the run and
//! sets the exit code.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Component as PathComponent, Path, PathBuf};

use weave_core::codegen::generate;
use weave_core::deploy::{plan_deployment, DeploymentPlan};
use weave_core::model::{validate_structure, ArchitectureModel, ModelDocument};
use weave_core::pattern::{apply_pattern, Binding, PatternError, QoSPattern};
use weave_core::platform::{apply_platform, PlatformError, PlatformModel};
use weave_core::property::evaluate_all;
use weave_core::{fingerprint_bytes, parse_model, print_model};

use crate::report::{
    AssignmentRecord, InputRecord, MatrixReport, MatrixRow, Outcome, PropertyRecord, Report,
    StageRecord,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 1;
pub const EXIT_PROPERTY: i32 = 2;
pub const EXIT_REFINEMENT: i32 = 3;
pub const EXIT_CONFORMANCE: i32 = 4;
pub const EXIT_USAGE: i32 = 64;

/// One `--gecm` argument: a pattern file plus its bindings.
#[derive(Debug, Clone)]
pub struct PatternSpec {
    pub path: PathBuf,
    pub bindings: BTreeMap<String, Binding>,
    /// The argument as typed, for reports.
    pub raw: String,
}

/// Parses `path[:k=v,...]`. Values parse as integer, then number, then
/// element identifier.
pub fn parse_pattern_spec(raw: &str) -> Result<PatternSpec, String> {
    let (path, bindings_text) = match raw.split_once(':') {
        Some((p, b)) => (p, Some(b)),
        None => (raw, None),
    };
    if path.is_empty() {
        return Err(format!("empty pattern path in '{raw}'"));
    }
    let mut bindings = BTreeMap::new();
    if let Some(text) = bindings_text {
        for pair in text.split(',').filter(|s| !s.is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| format!("binding '{pair}' must have the form name=value"))?;
            let binding = if let Ok(i) = value.parse::<i64>() {
                Binding::Integer(i)
            } else if let Ok(f) = value.parse::<f64>() {
                Binding::Number(f)
            } else {
                Binding::Element(value.to_string())
            };
            if bindings.insert(key.to_string(), binding).is_some() {
                return Err(format!("duplicate binding '{key}'"));
            }
        }
    }
    Ok(PatternSpec {
        path: PathBuf::from(path),
        bindings,
        raw: raw.to_string(),
    })
}

#[derive(Debug, Clone)]
pub struct BuildInputs {
    pub geim: PathBuf,
    pub gecm: Vec<PatternSpec>,
    pub getm: PathBuf,
    pub gemm: PathBuf,
    pub germ: Option<PathBuf>,
    pub out: PathBuf,
    pub strict: bool,
}

fn styled(ok: bool) -> String {
    let plain = if ok { "ok" } else { "FAILED" };
    if std::env::var_os("WEAVE_NO_COLOR").is_some() {
        plain.to_string()
    } else if ok {
        format!("\x1b[32m{plain}\x1b[0m")
    } else {
        format!("\x1b[31m{plain}\x1b[0m")
    }
}

fn announce(stage: &str, ok: bool) {
    println!("[{}] {stage}", styled(ok));
}

struct Run {
    report: Report,
    exit: i32,
}

impl Run {
    fn new(command: &str) -> Self {
        Run {
            report: Report::new(command),
            exit: EXIT_OK,
        }
    }

    fn input(&mut self, role: &str, path: &Path) -> Result<String, ()> {
        match fs::read(path) {
            Ok(bytes) => {
                self.report.inputs.push(InputRecord {
                    role: role.to_string(),
                    path: path.display().to_string(),
                    fingerprint: fingerprint_bytes(&bytes),
                });
                Ok(String::from_utf8_lossy(&bytes).into_owned())
            }
            Err(e) => {
                self.fail(
                    StageRecord::new(format!("read:{role}"), false).with_detail(e.to_string()),
                    EXIT_PARSE,
                    format!("cannot read {}: {e}", path.display()),
                );
                Err(())
            }
        }
    }

    fn pass(&mut self, record: StageRecord) {
        announce(&record.stage, true);
        self.report.stages.push(record);
    }

    fn fail(&mut self, record: StageRecord, exit: i32, error: String) {
        announce(&record.stage, false);
        let stage = record.stage.clone();
        self.report.stages.push(record);
        self.report.outcome = Outcome::Failed {
            stage,
            error,
            exit_code: exit,
        };
        self.exit = exit;
    }
}

fn parse_document(run: &mut Run, role: &str, path: &Path) -> Result<ModelDocument, ()> {
    let source = run.input(role, path)?;
    match parse_model(&source) {
        Ok(doc) => Ok(doc),
        Err(e) => {
            run.fail(
                StageRecord::new(format!("parse:{role}"), false).with_detail(e.to_string()),
                EXIT_PARSE,
                format!("{}: {e}", path.display()),
            );
            Err(())
        }
    }
}

fn expect_architecture(
    run: &mut Run,
    role: &str,
    path: &Path,
    doc: ModelDocument,
) -> Result<ArchitectureModel, ()> {
    match doc {
        ModelDocument::Architecture(m) => Ok(m),
        other => {
            run.fail(
                StageRecord::new(format!("parse:{role}"), false).with_detail(format!(
                    "expected an architecture document, found {}",
                    other.kind()
                )),
                EXIT_PARSE,
                format!(
                    "{}: expected an architecture document, found {}",
                    path.display(),
                    other.kind()
                ),
            );
            Err(())
        }
    }
}

fn expect_pattern(
    run: &mut Run,
    role: &str,
    path: &Path,
    doc: ModelDocument,
) -> Result<QoSPattern, ()> {
    match doc {
        ModelDocument::QoSPattern(p) => Ok(p),
        other => {
            run.fail(
                StageRecord::new(format!("parse:{role}"), false).with_detail(format!(
                    "expected a qos_pattern document, found {}",
                    other.kind()
                )),
                EXIT_PARSE,
                format!(
                    "{}: expected a qos_pattern document, found {}",
                    path.display(),
                    other.kind()
                ),
            );
            Err(())
        }
    }
}

fn expect_platform(
    run: &mut Run,
    role: &str,
    path: &Path,
    doc: ModelDocument,
) -> Result<PlatformModel, ()> {
    match doc {
        ModelDocument::Platform(p) => Ok(p),
        other => {
            run.fail(
                StageRecord::new(format!("parse:{role}"), false).with_detail(format!(
                    "expected a platform document, found {}",
                    other.kind()
                )),
                EXIT_PARSE,
                format!(
                    "{}: expected a platform document, found {}",
                    path.display(),
                    other.kind()
                ),
            );
            Err(())
        }
    }
}

/// Evaluates the model's declared properties as one report stage.
/// Returns false (and marks the run failed) on any violation or error.
fn property_stage(run: &mut Run, stage_name: &str, model: &ArchitectureModel) -> bool {
    let results = evaluate_all(model, &model.properties);
    let records: Vec<PropertyRecord> = model
        .properties
        .iter()
        .zip(results.iter())
        .map(|(p, r)| PropertyRecord::from_result(p, r))
        .collect();
    let failing: Vec<String> = records
        .iter()
        .filter(|r| !r.holds)
        .map(|r| {
            if r.detail.is_empty() {
                r.property.clone()
            } else {
                format!("{} ({})", r.property, r.detail)
            }
        })
        .collect();
    let mut record = StageRecord::new(stage_name, failing.is_empty());
    record.properties = Some(records);
    if failing.is_empty() {
        run.pass(record);
        true
    } else {
        let error = format!("property violation: {}", failing.join("; "));
        run.fail(record, EXIT_PROPERTY, error);
        false
    }
}

/// `weave check`: parse, validate, evaluate declared properties.
pub fn run_check(model_path: &Path) -> (i32, Report) {
    let mut run = Run::new("check");
    let doc = match parse_document(&mut run, "model", model_path) {
        Ok(doc) => doc,
        Err(()) => return (run.exit, run.report),
    };
    run.pass(StageRecord::new("parse:model", true).with_detail(format!(
        "{} {}",
        doc.kind(),
        doc.name()
    )));

    if let ModelDocument::Architecture(model) = &doc {
        let report = validate_structure(model);
        if report.is_clean() {
            run.pass(StageRecord::new("validate", true));
        } else {
            let error = report.to_string();
            run.fail(
                StageRecord::new("validate", false).with_detail(error.clone()),
                EXIT_PARSE,
                error,
            );
            return (run.exit, run.report);
        }
        if !property_stage(&mut run, "properties", model) {
            return (run.exit, run.report);
        }
    } else {
        run.pass(
            StageRecord::new("validate", true)
                .with_detail("non-architecture documents are validated by the parser"),
        );
    }
    (run.exit, run.report)
}

/// Relative paths only, no `..` or drive/root components.
fn safe_rel_path(path: &str) -> bool {
    let p = Path::new(path);
    !path.is_empty()
        && !p.is_absolute()
        && p.components()
            .all(|c| matches!(c, PathComponent::Normal(_)))
}

fn write_artifact(run: &mut Run, out_dir: &Path, rel: &str, contents: &str) -> Result<(), ()> {
    if !safe_rel_path(rel) {
        run.fail(
            StageRecord::new("write", false).with_detail(format!("unsafe output path {rel}")),
            EXIT_PARSE,
            format!("unsafe output path {rel}"),
        );
        return Err(());
    }
    let target = out_dir.join(rel);
    if let Some(parent) = target.parent() {
        if let Err(e) = fs::create_dir_all(parent) {
            run.fail(
                StageRecord::new("write", false).with_detail(e.to_string()),
                EXIT_PARSE,
                format!("cannot create {}: {e}", parent.display()),
            );
            return Err(());
        }
    }
    if let Err(e) = fs::write(&target, contents) {
        run.fail(
            StageRecord::new("write", false).with_detail(e.to_string()),
            EXIT_PARSE,
            format!("cannot write {}: {e}", target.display()),
        );
        return Err(());
    }
    Ok(())
}

/// `weave build`: the full pipeline into one output directory.
pub fn run_build(inputs: &BuildInputs, command: &str) -> (i32, Report) {
    let mut run = Run::new(command);
    match build_inner(&mut run, inputs) {
        Ok(()) | Err(()) => (run.exit, run.report),
    }
}

fn build_inner(run: &mut Run, inputs: &BuildInputs) -> Result<(), ()> {
    // Parse every input up front so the report carries all fingerprints.
    let geim_doc = parse_document(run, "geim", &inputs.geim)?;
    let model = expect_architecture(run, "geim", &inputs.geim, geim_doc)?;
    run.pass(
        StageRecord::new("parse:geim", true)
            .with_detail(format!("architecture {} ({})", model.name, model.stage)),
    );

    let mut patterns: Vec<(QoSPattern, &PatternSpec)> = Vec::new();
    for (i, spec) in inputs.gecm.iter().enumerate() {
        let role = format!("gecm{}", i + 1);
        let doc = parse_document(run, &role, &spec.path)?;
        let pattern = expect_pattern(run, &role, &spec.path, doc)?;
        run.pass(
            StageRecord::new(format!("parse:{role}"), true)
                .with_detail(format!("qos_pattern {}", pattern.name)),
        );
        patterns.push((pattern, spec));
    }

    let getm_doc = parse_document(run, "getm", &inputs.getm)?;
    let platform = expect_platform(run, "getm", &inputs.getm, getm_doc)?;
    run.pass(
        StageRecord::new("parse:getm", true).with_detail(format!("platform {}", platform.name)),
    );

    let gemm_doc = parse_document(run, "gemm", &inputs.gemm)?;
    let mut mapping = match gemm_doc {
        ModelDocument::Mapping(m) => m,
        other => {
            run.fail(
                StageRecord::new("parse:gemm", false).with_detail(format!(
                    "expected a mapping document, found {}",
                    other.kind()
                )),
                EXIT_PARSE,
                format!(
                    "{}: expected a mapping document, found {}",
                    inputs.gemm.display(),
                    other.kind()
                ),
            );
            return Err(());
        }
    };
    mapping.strict |= inputs.strict;
    run.pass(StageRecord::new("parse:gemm", true).with_detail(format!("mapping {}", mapping.name)));

    let resources = match &inputs.germ {
        Some(path) => {
            let doc = parse_document(run, "germ", path)?;
            match doc {
                ModelDocument::Resources(r) => {
                    run.pass(
                        StageRecord::new("parse:germ", true)
                            .with_detail(format!("resources {}", r.name)),
                    );
                    Some(r)
                }
                other => {
                    run.fail(
                        StageRecord::new("parse:germ", false).with_detail(format!(
                            "expected a resources document, found {}",
                            other.kind()
                        )),
                        EXIT_PARSE,
                        format!(
                            "{}: expected a resources document, found {}",
                            path.display(),
                            other.kind()
                        ),
                    );
                    return Err(());
                }
            }
        }
        None => None,
    };

    // Abstract model must satisfy its own declared properties before any
    // transformation runs.
    if !property_stage(run, "properties:geim", &model) {
        return Err(());
    }

    // QoS patterns in command-line order.
    let mut current = model;
    for (pattern, spec) in &patterns {
        let stage_name = format!("qos_pattern:{}", pattern.name);
        match apply_pattern(&current, pattern, &spec.bindings) {
            Ok(applied) => {
                let mut record = StageRecord::new(&stage_name, true).with_trace(&applied.trace);
                record.detail = Some(format!(
                    "ensures: {}",
                    applied
                        .ensures
                        .iter()
                        .map(|p| p.to_string())
                        .collect::<Vec<_>>()
                        .join("; ")
                ));
                run.pass(record);
                current = applied.model;
            }
            Err(PatternError::Step(failure)) => {
                let record = StageRecord::new(&stage_name, false)
                    .with_detail(failure.to_string())
                    .with_trace(&failure.trace);
                run.fail(record, EXIT_REFINEMENT, failure.to_string());
                return Err(());
            }
            Err(other) => {
                run.fail(
                    StageRecord::new(&stage_name, false).with_detail(other.to_string()),
                    EXIT_REFINEMENT,
                    other.to_string(),
                );
                return Err(());
            }
        }
    }

    // Platform application yields the GESM.
    let stage_name = format!("platform:{}", platform.name);
    let gesm = match apply_platform(&current, &platform) {
        Ok(applied) => {
            let mut record = StageRecord::new(&stage_name, true).with_trace(&applied.trace);
            record.properties = Some(
                platform
                    .requires
                    .iter()
                    .zip(applied.conformance.iter())
                    .map(|(p, r)| PropertyRecord {
                        property: p.to_string(),
                        holds: r.holds,
                        detail: r.detail.clone(),
                        witnesses: r.witnesses.iter().map(|w| w.to_string()).collect(),
                    })
                    .collect(),
            );
            run.pass(record);
            applied.model
        }
        Err(PlatformError::Conformance {
            property,
            detail,
            trace,
        }) => {
            let error = format!("platform conformance failed: {property} ({detail})");
            let record = StageRecord::new(&stage_name, false)
                .with_detail(error.clone())
                .with_trace(&trace);
            run.fail(record, EXIT_CONFORMANCE, error);
            return Err(());
        }
        Err(PlatformError::Step(failure)) => {
            let record = StageRecord::new(&stage_name, false)
                .with_detail(failure.to_string())
                .with_trace(&failure.trace);
            run.fail(record, EXIT_REFINEMENT, failure.to_string());
            return Err(());
        }
        Err(other) => {
            run.fail(
                StageRecord::new(&stage_name, false).with_detail(other.to_string()),
                EXIT_REFINEMENT,
                other.to_string(),
            );
            return Err(());
        }
    };

    // Canonical GESM artifact.
    let gesm_text = print_model(&ModelDocument::Architecture(gesm.clone()));
    write_artifact(run, &inputs.out, "gesm.adl", &gesm_text)?;
    let mut record = StageRecord::new("write:gesm", true);
    record.artifacts = Some(vec!["gesm.adl".to_string()]);
    run.pass(record);

    // The concrete model must satisfy everything declared by now: the
    // abstract properties, every pattern's ensures, and the platform's
    // conformance list.
    if !property_stage(run, "properties:gesm", &gesm) {
        return Err(());
    }

    // Skeleton generation.
    let bundle = match generate(&gesm, &mapping) {
        Ok(b) => b,
        Err(e) => {
            run.fail(
                StageRecord::new("generate", false).with_detail(e.to_string()),
                EXIT_PARSE,
                e.to_string(),
            );
            return Err(());
        }
    };
    // Pipeline artifacts must not be clobbered by generated files.
    let reserved = ["gesm.adl", "gedm.json", "report.json"];
    let mut artifacts = Vec::new();
    for (rel, contents) in &bundle.files {
        if reserved.contains(&rel.as_str()) || *rel == mapping.manifest_name {
            let error = format!("generated path {rel} collides with a pipeline artifact");
            run.fail(
                StageRecord::new("generate", false).with_detail(error.clone()),
                EXIT_PARSE,
                error,
            );
            return Err(());
        }
        write_artifact(run, &inputs.out, rel, contents)?;
        artifacts.push(rel.clone());
    }
    if reserved.contains(&mapping.manifest_name.as_str()) {
        let error = format!(
            "manifest name {} collides with a pipeline artifact",
            mapping.manifest_name
        );
        run.fail(
            StageRecord::new("generate", false).with_detail(error.clone()),
            EXIT_PARSE,
            error,
        );
        return Err(());
    }
    write_artifact(
        run,
        &inputs.out,
        &mapping.manifest_name,
        &bundle.manifest_text(),
    )?;
    artifacts.push(mapping.manifest_name.clone());
    let mut record = StageRecord::new("generate", true);
    record.detail = Some(format!("{} skeleton file(s)", bundle.files.len()));
    record.artifacts = Some(artifacts);
    run.pass(record);

    // Deployment plan, when a resource model was given.
    if let Some(germ) = resources {
        let plan = plan_deployment(&gesm, &germ);
        write_artifact(run, &inputs.out, "gedm.json", &deployment_json(&plan))?;
        let mut record = StageRecord::new("deploy", true);
        record.artifacts = Some(vec!["gedm.json".to_string()]);
        record.assignments = Some(
            plan.assignments
                .iter()
                .map(|(component, node)| AssignmentRecord {
                    component: component.clone(),
                    node: node.clone(),
                })
                .collect(),
        );
        record.unplaced = Some(plan.unplaced.clone());
        record.detail = Some(format!(
            "{} assigned, {} unplaced",
            plan.assignments.len(),
            plan.unplaced.len()
        ));
        run.pass(record);
    }

    Ok(())
}

/// GEDM artifact: the plan as stable JSON.
pub fn deployment_json(plan: &DeploymentPlan) -> String {
    #[derive(serde::Serialize)]
    struct Gedm<'a> {
        assignments: Vec<AssignmentRecord>,
        unplaced: &'a [String],
    }
    let doc = Gedm {
        assignments: plan
            .assignments
            .iter()
            .map(|(component, node)| AssignmentRecord {
                component: component.clone(),
                node: node.clone(),
            })
            .collect(),
        unplaced: &plan.unplaced,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("plan serialization");
    text.push('\n');
    text
}

/// One matrix combination: a named gecm set crossed with one platform.
#[derive(Debug, Clone)]
pub struct MatrixInputs {
    pub geim: PathBuf,
    pub gecm_sets: Vec<Vec<PatternSpec>>,
    pub getms: Vec<PathBuf>,
    pub gemm: PathBuf,
    pub germ: Option<PathBuf>,
    pub out: PathBuf,
    pub strict: bool,
}

/// Runs every (gecm set x platform) combination into its own subdirectory
/// and writes a summary report. Exit 0 only if all combinations succeed.
pub fn run_matrix(inputs: &MatrixInputs) -> (i32, MatrixReport) {
    let mut summary = MatrixReport {
        tool: "weave",
        command: "matrix",
        inputs: Vec::new(),
        combinations: Vec::new(),
        outcome: Outcome::Ok,
    };
    let mut record_input = |role: String, path: &Path| {
        if let Ok(bytes) = fs::read(path) {
            summary.inputs.push(InputRecord {
                role,
                path: path.display().to_string(),
                fingerprint: fingerprint_bytes(&bytes),
            });
        }
    };
    record_input("geim".into(), &inputs.geim);
    record_input("gemm".into(), &inputs.gemm);
    for (i, getm) in inputs.getms.iter().enumerate() {
        record_input(format!("getm{}", i + 1), getm);
    }
    if let Some(germ) = &inputs.germ {
        record_input("germ".into(), germ);
    }

    let mut exit = EXIT_OK;
    let mut failed_combos = Vec::new();
    for (si, set) in inputs.gecm_sets.iter().enumerate() {
        for (pi, getm) in inputs.getms.iter().enumerate() {
            let combination = format!("combo_{}_{}", si + 1, pi + 1);
            let dir = inputs.out.join(&combination);
            let build = BuildInputs {
                geim: inputs.geim.clone(),
                gecm: set.clone(),
                getm: getm.clone(),
                gemm: inputs.gemm.clone(),
                germ: inputs.germ.clone(),
                out: dir.clone(),
                strict: inputs.strict,
            };
            let (code, report) = run_build(&build, "build");
            let report_text = report.to_json();
            let _ = fs::create_dir_all(&dir);
            let _ = fs::write(dir.join("report.json"), report_text);
            let error = match &report.outcome {
                Outcome::Ok => None,
                Outcome::Failed { error, .. } => Some(error.clone()),
            };
            if code != EXIT_OK {
                exit = code.max(1);
                failed_combos.push(combination.clone());
            }
            summary.combinations.push(MatrixRow {
                combination,
                gecm_set: set
                    .iter()
                    .map(|s| s.raw.clone())
                    .collect::<Vec<_>>()
                    .join("; "),
                getm: getm.display().to_string(),
                dir: dir.display().to_string(),
                ok: code == EXIT_OK,
                error,
            });
        }
    }
    if exit != EXIT_OK {
        summary.outcome = Outcome::Failed {
            stage: "matrix".to_string(),
            error: format!("failed combinations: {}", failed_combos.join(", ")),
            exit_code: exit,
        };
    }
    (exit, summary)
}
