//! Core library of the `weave` architecture toolchain.
//!
//! The toolchain treats a service-oriented architecture as a typed
//! component/connector graph and drives it through a staged pipeline:
//!
//! 1. an abstract architecture (GEIM stage) is parsed from the ADL,
//! 2. QoS patterns (`.qos`) compile into refinement steps and are applied
//!    under pre/post checking with property preservation,
//! 3. a platform model (`.plat`) rewrites abstract elements into
//!    platform-specific ones, yielding the concrete GESM stage,
//! 4. a mapping model (`.map`) translates the GESM into service skeleton
//!    files, and a resource model (`.res`) is used to plan deployment.
//!
//! Every model value is immutable after construction; all transformations
//! return fresh models. File IO lives in the `weave` CLI crate, not here.

pub mod codegen;
pub mod deploy;
mod glob;
pub mod lexer;
pub mod model;
pub mod parser;
pub mod pattern;
pub mod platform;
pub mod printer;
pub mod property;
pub mod refine;

#[cfg(feature = "testgen")]
pub mod testgen;

pub use glob::glob_match;
pub use model::{
    ArchitectureModel, Attachment, Component, Connector, ElementKind, ElementPath, Fragment,
    ModelDocument, ModelEntity, Port, PortDirection, ResolveError, Role, RoleDirection, Scalar,
    Stage, ValidationReport, Violation,
};
pub use parser::{parse_model, ParseError};
pub use printer::{fingerprint_bytes, model_fingerprint, print_model};
pub use property::{
    check_preservation, evaluate, evaluate_all, PreservationReport, PropertyError, PropertyExpr,
    PropertyResult,
};
pub use refine::{
    apply_step, RefineError, RefinementAction, RefinementStep, RefinementTrace, StepError,
    StepFailure, StepOrigin, StepOutcome, TraceCheck, TraceEntry,
};
