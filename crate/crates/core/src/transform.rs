//! Extreme transformations: triviality filtering, stub enumeration per
//! return category, body replacement by source splicing, and detection
//! against the covering tests.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use stubscope_lang::ast::{AssignTarget, Expr, ExprKind, Stmt};
use stubscope_lang::Project;

use crate::adapter::{
    MethodDescriptor, MethodId, ProjectAdapter, ReturnCategory, RunOptions, TestId, TestResult,
};
use crate::error::{Error, Result};
use crate::persist::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Detection {
    Detected,
    Undetected,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeTransformation {
    /// `<method id>#<variant index>`.
    #[serde(rename = "transformation_id")]
    pub id: String,
    #[serde(rename = "method_id")]
    pub method: MethodId,
    /// Rendered stub literal for value-returning methods, or `void-empty`.
    pub stub_value: String,
    pub variant_index: usize,
    pub detection: Detection,
    /// Covering tests that detected this transformation through an error
    /// or a timeout rather than an assertion failure; surfaced because an
    /// error-based detection deserves a second look.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub error_detections: Vec<TestId>,
}

pub const VOID_STUB: &str = "void-empty";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkipReason {
    SimpleGetter,
    SimpleSetter,
    Delegation,
    EmptyBody,
    Constructor,
    UnsupportedReturnType,
    PolymorphicReturn,
    NotCovered,
}

impl SkipReason {
    pub fn describe(self) -> &'static str {
        match self {
            SkipReason::SimpleGetter => "simple getter",
            SkipReason::SimpleSetter => "simple setter",
            SkipReason::Delegation => "delegation",
            SkipReason::EmptyBody => "empty body",
            SkipReason::Constructor => "constructor",
            SkipReason::UnsupportedReturnType => "unsupported return type",
            SkipReason::PolymorphicReturn => "polymorphic return",
            SkipReason::NotCovered => "not covered by any test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedMethod {
    pub method: MethodId,
    pub reason: SkipReason,
}

/// The predefined stub values per return category.
pub fn stub_values(category: ReturnCategory) -> &'static [&'static str] {
    match category {
        ReturnCategory::Void => &[VOID_STUB],
        ReturnCategory::Reference => &["null"],
        ReturnCategory::Boolean => &["true", "false"],
        ReturnCategory::IntegerLike => &["0", "1"],
        ReturnCategory::FloatLike => &["0.0", "0.1"],
        ReturnCategory::Character => &["' '", "'A'"],
        ReturnCategory::StringLike => &["\"\"", "\"A\""],
        ReturnCategory::ArrayLike => &["[]"],
        ReturnCategory::Unknown => &[],
    }
}

/// Classify methods that are not worth transforming: simple getters and
/// setters, single-call delegations to a same-named method of a field,
/// empty bodies, and constructors. Everything else is kept.
pub fn filter_trivial_methods(
    project: &Project,
    methods: &[MethodDescriptor],
) -> (Vec<MethodDescriptor>, Vec<SkippedMethod>) {
    let mut kept = Vec::new();
    let mut skipped = Vec::new();
    for descriptor in methods {
        match triviality(project, descriptor) {
            Some(reason) => skipped.push(SkippedMethod {
                method: descriptor.id.clone(),
                reason,
            }),
            None => kept.push(descriptor.clone()),
        }
    }
    (kept, skipped)
}

fn triviality(project: &Project, descriptor: &MethodDescriptor) -> Option<SkipReason> {
    if descriptor.is_constructor {
        return Some(SkipReason::Constructor);
    }
    let body = method_body(project, descriptor)?;
    if body.is_empty() {
        return Some(SkipReason::EmptyBody);
    }
    if body.len() != 1 {
        return None;
    }
    match &body[0] {
        // return this.f;
        Stmt::Return {
            value:
                Some(Expr {
                    kind: ExprKind::Field { object, .. },
                    ..
                }),
            ..
        } if matches!(object.kind, ExprKind::This) => Some(SkipReason::SimpleGetter),
        // this.f = <param>; (a computed right-hand side is real logic)
        Stmt::Assign {
            target: AssignTarget::Field { object, .. },
            value,
            ..
        } if matches!(object.kind, ExprKind::This)
            && matches!(&value.kind, ExprKind::Var(name)
                    if declared_params(project, descriptor).contains(name)) =>
        {
            Some(SkipReason::SimpleSetter)
        }
        // return this.f.m(args); / this.f.m(args); with the same name and
        // the parameters passed through verbatim.
        Stmt::Return {
            value: Some(expr), ..
        } if is_delegation(expr, descriptor, &declared_params(project, descriptor)) => {
            Some(SkipReason::Delegation)
        }
        Stmt::Expr { expr, .. }
            if is_delegation(expr, descriptor, &declared_params(project, descriptor)) =>
        {
            Some(SkipReason::Delegation)
        }
        _ => None,
    }
}

fn is_delegation(expr: &Expr, descriptor: &MethodDescriptor, params: &[String]) -> bool {
    let ExprKind::MethodCall {
        object,
        method,
        args,
    } = &expr.kind
    else {
        return false;
    };
    if *method != descriptor.name {
        return false;
    }
    let ExprKind::Field {
        object: field_owner,
        ..
    } = &object.kind
    else {
        return false;
    };
    if !matches!(field_owner.kind, ExprKind::This) {
        return false;
    }
    // Arguments must be exactly the declared parameters, in order.
    args.len() == params.len()
        && args
            .iter()
            .zip(params.iter())
            .all(|(a, p)| matches!(&a.kind, ExprKind::Var(name) if name == p))
}

fn method_body<'p>(project: &'p Project, descriptor: &MethodDescriptor) -> Option<&'p [Stmt]> {
    if descriptor.is_constructor {
        let class = project.classes.get(&descriptor.declaring_scope)?;
        return class.decl.ctor.as_ref().map(|c| c.body.stmts.as_slice());
    }
    if let Some(class) = project.classes.get(&descriptor.declaring_scope) {
        if let Some(m) = class.methods.get(&descriptor.name) {
            if m.id == descriptor.id {
                return Some(m.decl.body.stmts.as_slice());
            }
        }
    }
    project
        .functions
        .get(&descriptor.name)
        .filter(|f| f.id == descriptor.id)
        .map(|f| f.decl.body.stmts.as_slice())
}

/// Declared parameter names for a descriptor, from the AST.
pub fn declared_params(project: &Project, descriptor: &MethodDescriptor) -> Vec<String> {
    if let Some(class) = project.classes.get(&descriptor.declaring_scope) {
        if descriptor.is_constructor {
            if let Some(ctor) = &class.decl.ctor {
                return ctor.params.clone();
            }
        }
        if let Some(m) = class.methods.get(&descriptor.name) {
            if m.id == descriptor.id {
                return m.decl.params.clone();
            }
        }
    }
    if let Some(f) = project.functions.get(&descriptor.name) {
        if f.id == descriptor.id {
            return f.decl.params.clone();
        }
    }
    Vec::new()
}

/// Enumerate the stub variants for already-filtered, covered methods.
pub fn enumerate_transformations(
    methods: &[MethodDescriptor],
) -> (Vec<ExtremeTransformation>, Vec<SkippedMethod>) {
    let mut transformations = Vec::new();
    let mut skipped = Vec::new();
    for m in methods {
        let stubs = stub_values(m.return_category);
        if stubs.is_empty() {
            skipped.push(SkippedMethod {
                method: m.id.clone(),
                reason: SkipReason::UnsupportedReturnType,
            });
            continue;
        }
        for (variant_index, stub) in stubs.iter().enumerate() {
            transformations.push(ExtremeTransformation {
                id: format!("{}#{variant_index}", m.id),
                method: m.id.clone(),
                stub_value: stub.to_string(),
                variant_index,
                detection: Detection::Unknown,
                error_detections: Vec::new(),
            });
        }
    }
    (transformations, skipped)
}

/// A private project copy with one method body replaced by its stub.
#[derive(Debug)]
pub struct TransformedWorkspace {
    pub dir: PathBuf,
    pub transformation_id: String,
    file_abs: PathBuf,
    original_bytes: Vec<u8>,
}

impl TransformedWorkspace {
    /// Restore the transformed file byte-for-byte.
    pub fn revert(&self) -> Result<()> {
        std::fs::write(&self.file_abs, &self.original_bytes)
            .map_err(|e| Error::io(self.file_abs.display().to_string(), e))
    }
}

/// Render the replacement body for a stub.
pub fn stub_body_text(stub_value: &str) -> String {
    if stub_value == VOID_STUB {
        "{ }".to_string()
    } else {
        format!("{{ return {stub_value}; }}")
    }
}

/// Replace the method body inside `workspace_dir` (a pristine project copy)
/// with the stub. Every byte outside the body span is left untouched.
pub fn apply_transformation(
    workspace_dir: &Path,
    transformation: &ExtremeTransformation,
    descriptor: &MethodDescriptor,
) -> Result<TransformedWorkspace> {
    let file_abs = workspace_dir.join(&descriptor.file);
    let original_bytes =
        std::fs::read(&file_abs).map_err(|e| Error::io(file_abs.display().to_string(), e))?;
    if !descriptor.file_digest.is_empty() && sha256_hex(&original_bytes) != descriptor.file_digest {
        return Err(Error::SourceDrift {
            file: descriptor.file.clone(),
            message: "file content changed since discovery".into(),
        });
    }
    let (lo, hi) = (descriptor.body_span.lo, descriptor.body_span.hi);
    if hi > original_bytes.len() || lo >= hi {
        return Err(Error::SourceDrift {
            file: descriptor.file.clone(),
            message: format!("body span {lo}..{hi} out of bounds"),
        });
    }
    let mut patched = Vec::with_capacity(original_bytes.len());
    patched.extend_from_slice(&original_bytes[..lo]);
    patched.extend_from_slice(stub_body_text(&transformation.stub_value).as_bytes());
    patched.extend_from_slice(&original_bytes[hi..]);
    std::fs::write(&file_abs, &patched)
        .map_err(|e| Error::io(file_abs.display().to_string(), e))?;
    Ok(TransformedWorkspace {
        dir: workspace_dir.to_path_buf(),
        transformation_id: transformation.id.clone(),
        file_abs,
        original_bytes,
    })
}

#[derive(Debug)]
pub struct DetectionVerdict {
    pub detection: Detection,
    pub results: Vec<TestResult>,
    pub diagnostic: Option<String>,
}

/// Run exactly the covering tests against the transformed workspace. Any
/// failure, error or timeout counts as detection.
pub fn detect(
    adapter: &ProjectAdapter,
    workspace_dir: &Path,
    covering: &BTreeSet<TestId>,
) -> Result<DetectionVerdict> {
    let artifacts = adapter.run_tests(workspace_dir, Some(covering), &RunOptions::default())?;
    let report = artifacts.report;
    if let Some(reason) = report.incomplete {
        return Ok(DetectionVerdict {
            detection: Detection::Unknown,
            results: report.results,
            diagnostic: Some(reason),
        });
    }
    let detected = report.results.iter().any(|r| !r.outcome.is_pass());
    Ok(DetectionVerdict {
        detection: if detected {
            Detection::Detected
        } else {
            Detection::Undetected
        },
        results: report.results,
        diagnostic: None,
    })
}
