//! Source-to-source instrumentation. Stage 1 wraps every exit path of one
//! method so the runtime records the receiver, argument and result states
//! after the body ran. Stage 2 routes every non-constant (sub)expression of
//! selected test bodies through an observation wrapper keyed by a stable
//! site id, and guards each test body to observe escaping exceptions.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use stubscope_lang::ast::*;
use stubscope_lang::parser::parse_file;
use stubscope_lang::printer::print_file;
use stubscope_lang::project::test_id;

// The state-extraction primitives live next to the runtime values; they are
// re-exported here because instrumentation is their consumer-facing home.
pub use stubscope_lang::state::{basic_state, render_scalar, value_state, StateProp};

use crate::adapter::{MethodDescriptor, ReturnCategory, TestCase};
use crate::error::{Error, Result};

pub fn method_point_id(method_id: &str) -> String {
    format!("m:{method_id}")
}

pub fn site_point_id(file: &str, lo: usize, hi: usize) -> String {
    format!("s:{file}@{lo}-{hi}")
}

pub fn guard_point_id(test: &str) -> String {
    format!("g:{test}")
}

/// Roots observed at a method boundary, in recorded order.
pub fn method_roots(descriptor: &MethodDescriptor, params: &[String]) -> Vec<(String, Expr)> {
    let mut roots = Vec::new();
    if !descriptor.is_static {
        roots.push(("this".to_string(), expr(ExprKind::This)));
    }
    for (i, param) in params.iter().enumerate() {
        roots.push((format!("arg{i}"), expr(ExprKind::Var(param.clone()))));
    }
    roots
}

fn expr(kind: ExprKind) -> Expr {
    Expr {
        kind,
        span: Span::dummy(),
    }
}

fn str_expr(text: &str) -> Expr {
    expr(ExprKind::Str(text.to_string()))
}

fn obs_method_stmt(point: &str, roots: &[(String, Expr)]) -> Stmt {
    let spec: Vec<&str> = roots.iter().map(|(name, _)| name.as_str()).collect();
    let mut args = vec![str_expr(point), str_expr(&spec.join(","))];
    args.extend(roots.iter().map(|(_, e)| e.clone()));
    Stmt::Expr {
        expr: expr(ExprKind::Call {
            callee: "__obs_method".into(),
            args,
        }),
        span: Span::dummy(),
    }
}

/// Rewrite one method of one file in `workspace` so every exit path records
/// the immediate program state. The method body's semantics are unchanged.
pub fn instrument_method(workspace: &Path, descriptor: &MethodDescriptor) -> Result<()> {
    let path = workspace.join(&descriptor.file);
    let text =
        std::fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut file = parse_file(&descriptor.file, &text)
        .map_err(|e| Error::Subject(format!("cannot instrument: {e}")))?;

    let point = method_point_id(&descriptor.id);
    let mut found = false;
    for item in &mut file.items {
        match item {
            Item::Class(class) if class.name == descriptor.declaring_scope => {
                for m in &mut class.methods {
                    if m.name == descriptor.name && m.params.len() == descriptor.arity {
                        instrument_fn_body(m, descriptor, &point);
                        found = true;
                    }
                }
            }
            Item::Fn(f) if f.name == descriptor.name && f.params.len() == descriptor.arity => {
                let id =
                    stubscope_lang::project::function_id(&descriptor.file, &f.name, f.params.len());
                if descriptor.id == id {
                    instrument_fn_body(f, descriptor, &point);
                    found = true;
                }
            }
            _ => {}
        }
    }
    if !found {
        return Err(Error::Subject(format!(
            "method `{}` not found in {} for instrumentation",
            descriptor.id, descriptor.file
        )));
    }
    crate::persist::atomic_write(&path, print_file(&file).as_bytes())
}

fn instrument_fn_body(decl: &mut FnDecl, descriptor: &MethodDescriptor, point: &str) {
    let roots = method_roots(descriptor, &decl.params);
    let observes_result = descriptor.return_category != ReturnCategory::Void;
    let mut counter = 0usize;
    let stmts = std::mem::take(&mut decl.body.stmts);
    decl.body.stmts = rewrite_exits(stmts, point, &roots, observes_result, &mut counter);
    if !observes_result {
        // The fall-through exit of a void body.
        decl.body.stmts.push(obs_method_stmt(point, &roots));
    }
}

fn rewrite_exits(
    stmts: Vec<Stmt>,
    point: &str,
    roots: &[(String, Expr)],
    observes_result: bool,
    counter: &mut usize,
) -> Vec<Stmt> {
    stmts
        .into_iter()
        .map(|stmt| rewrite_exit_stmt(stmt, point, roots, observes_result, counter))
        .collect()
}

fn rewrite_exit_stmt(
    stmt: Stmt,
    point: &str,
    roots: &[(String, Expr)],
    observes_result: bool,
    counter: &mut usize,
) -> Stmt {
    let recurse = |block: Block, counter: &mut usize| Block {
        stmts: rewrite_exits(block.stmts, point, roots, observes_result, counter),
        span: block.span,
    };
    match stmt {
        Stmt::Return {
            value: Some(value),
            span,
        } if observes_result => {
            let name = format!("__sv{counter}");
            *counter += 1;
            let mut observed = roots.to_vec();
            observed.push(("result".to_string(), expr(ExprKind::Var(name.clone()))));
            Stmt::Block(Block {
                stmts: vec![
                    Stmt::Var {
                        name: name.clone(),
                        init: value,
                        span,
                    },
                    obs_method_stmt(point, &observed),
                    Stmt::Return {
                        value: Some(expr(ExprKind::Var(name))),
                        span,
                    },
                ],
                span,
            })
        }
        Stmt::Return { value: None, span } => Stmt::Block(Block {
            stmts: vec![
                obs_method_stmt(point, roots),
                Stmt::Return { value: None, span },
            ],
            span,
        }),
        ret @ Stmt::Return { .. } => ret,
        Stmt::If {
            cond,
            then_block,
            else_block,
            span,
        } => Stmt::If {
            cond,
            then_block: recurse(then_block, counter),
            else_block: else_block.map(|b| recurse(b, counter)),
            span,
        },
        Stmt::While { cond, body, span } => Stmt::While {
            cond,
            body: recurse(body, counter),
            span,
        },
        Stmt::For {
            var,
            iter,
            body,
            span,
        } => Stmt::For {
            var,
            iter,
            body: recurse(body, counter),
            span,
        },
        Stmt::Try {
            body,
            catch_var,
            handler,
            span,
        } => Stmt::Try {
            body: recurse(body, counter),
            catch_var,
            handler: recurse(handler, counter),
            span,
        },
        Stmt::Block(block) => Stmt::Block(recurse(block, counter)),
        other => other,
    }
}

/// One observable expression site in an instrumented test body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteInfo {
    pub site_id: String,
    pub test_id: String,
    pub file: String,
    pub line: u32,
    pub col: u32,
    pub lo: usize,
    pub hi: usize,
    /// Sub-expression nesting depth within its statement; 0 is outermost.
    pub depth: u32,
    pub snippet: String,
}

/// Rewrite the bodies of the selected tests so every non-constant
/// (sub)expression value flows through `__obs_site`, and wrap each body in
/// an exception guard. Returns the site table, sorted by position.
pub fn instrument_tests(workspace: &Path, tests: &[TestCase]) -> Result<Vec<SiteInfo>> {
    let mut by_file: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for t in tests {
        by_file
            .entry(t.file.clone())
            .or_default()
            .insert(t.id.clone());
    }
    let mut sites = Vec::new();
    for (file_rel, selected) in by_file {
        let path = workspace.join(&file_rel);
        let text =
            std::fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut file = parse_file(&file_rel, &text)
            .map_err(|e| Error::Subject(format!("cannot instrument tests: {e}")))?;
        for item in &mut file.items {
            let Item::Test(test) = item else { continue };
            let id = test_id(&file_rel, &test.name);
            if !selected.contains(&id) {
                continue;
            }
            let mut ctx = SiteCollector {
                file: &file_rel,
                source: &text,
                test_id: &id,
                sites: &mut sites,
            };
            let body = std::mem::replace(
                &mut test.body,
                Block {
                    stmts: Vec::new(),
                    span: Span::dummy(),
                },
            );
            let span = body.span;
            let instrumented = ctx.rewrite_block(body);
            let guard_id = guard_point_id(&id);
            ctx.sites.push(SiteInfo {
                site_id: guard_id.clone(),
                test_id: id.clone(),
                file: file_rel.clone(),
                line: span.line,
                col: span.col,
                lo: span.lo,
                hi: span.hi,
                depth: 0,
                snippet: "<uncaught exception>".to_string(),
            });
            test.body = Block {
                stmts: vec![Stmt::Try {
                    body: instrumented,
                    catch_var: "__ss_exc".to_string(),
                    handler: Block {
                        stmts: vec![
                            Stmt::Expr {
                                expr: expr(ExprKind::Call {
                                    callee: "__obs_exc".into(),
                                    args: vec![
                                        str_expr(&guard_id),
                                        expr(ExprKind::Var("__ss_exc".into())),
                                    ],
                                }),
                                span: Span::dummy(),
                            },
                            Stmt::Throw {
                                value: expr(ExprKind::Var("__ss_exc".into())),
                                span: Span::dummy(),
                            },
                        ],
                        span: Span::dummy(),
                    },
                    span: Span::dummy(),
                }],
                span,
            };
        }
        crate::persist::atomic_write(&path, print_file(&file).as_bytes())?;
    }
    sites.sort_by(|a, b| (&a.file, a.lo, a.hi).cmp(&(&b.file, b.lo, b.hi)));
    Ok(sites)
}

/// Builtins that are statically known to produce no value; wrapping their
/// call expression would never record anything.
const VOID_BUILTINS: &[&str] = &[
    "assert",
    "assertTrue",
    "assertFalse",
    "assertEquals",
    "assertNull",
    "assertNotNull",
    "fail",
    "print",
];

struct SiteCollector<'a> {
    file: &'a str,
    source: &'a str,
    test_id: &'a str,
    sites: &'a mut Vec<SiteInfo>,
}

impl SiteCollector<'_> {
    fn rewrite_block(&mut self, block: Block) -> Block {
        Block {
            stmts: block
                .stmts
                .into_iter()
                .map(|s| self.rewrite_stmt(s))
                .collect(),
            span: block.span,
        }
    }

    fn rewrite_stmt(&mut self, stmt: Stmt) -> Stmt {
        match stmt {
            Stmt::Var { name, init, span } => Stmt::Var {
                name,
                init: self.wrap(init, 0),
                span,
            },
            // The left side of an assignment is excluded from observation.
            Stmt::Assign {
                target,
                value,
                span,
            } => Stmt::Assign {
                target,
                value: self.wrap(value, 0),
                span,
            },
            Stmt::If {
                cond,
                then_block,
                else_block,
                span,
            } => Stmt::If {
                cond: self.wrap(cond, 0),
                then_block: self.rewrite_block(then_block),
                else_block: else_block.map(|b| self.rewrite_block(b)),
                span,
            },
            Stmt::While { cond, body, span } => Stmt::While {
                cond: self.wrap(cond, 0),
                body: self.rewrite_block(body),
                span,
            },
            Stmt::For {
                var,
                iter,
                body,
                span,
            } => Stmt::For {
                var,
                iter: self.wrap(iter, 0),
                body: self.rewrite_block(body),
                span,
            },
            Stmt::Return { value, span } => Stmt::Return {
                value: value.map(|v| self.wrap(v, 0)),
                span,
            },
            Stmt::Throw { value, span } => Stmt::Throw {
                value: self.wrap(value, 0),
                span,
            },
            Stmt::Try {
                body,
                catch_var,
                handler,
                span,
            } => Stmt::Try {
                body: self.rewrite_block(body),
                catch_var,
                handler: self.rewrite_block(handler),
                span,
            },
            Stmt::Expr { expr: e, span } => Stmt::Expr {
                expr: self.wrap(e, 0),
                span,
            },
            Stmt::Block(block) => Stmt::Block(self.rewrite_block(block)),
        }
    }

    /// Wrap a non-constant expression (children first) in `__obs_site`.
    fn wrap(&mut self, e: Expr, depth: u32) -> Expr {
        if e.is_constant() {
            return e;
        }
        let span = e.span;
        // Calls of void builtins produce no observable value; rewrite their
        // arguments but leave the call unwrapped.
        if let ExprKind::Call { callee, args } = &e.kind {
            if VOID_BUILTINS.contains(&callee.as_str()) {
                let callee = callee.clone();
                let args = args
                    .clone()
                    .into_iter()
                    .map(|x| self.wrap(x, depth + 1))
                    .collect();
                return Expr {
                    kind: ExprKind::Call { callee, args },
                    span,
                };
            }
        }
        let kind = match e.kind {
            ExprKind::ListLit(elems) => {
                ExprKind::ListLit(elems.into_iter().map(|x| self.wrap(x, depth + 1)).collect())
            }
            ExprKind::Field { object, field } => ExprKind::Field {
                object: Box::new(self.wrap(*object, depth + 1)),
                field,
            },
            ExprKind::Call { callee, args } => ExprKind::Call {
                callee,
                args: args.into_iter().map(|x| self.wrap(x, depth + 1)).collect(),
            },
            ExprKind::MethodCall {
                object,
                method,
                args,
            } => ExprKind::MethodCall {
                object: Box::new(self.wrap(*object, depth + 1)),
                method,
                args: args.into_iter().map(|x| self.wrap(x, depth + 1)).collect(),
            },
            ExprKind::New { class, args } => ExprKind::New {
                class,
                args: args.into_iter().map(|x| self.wrap(x, depth + 1)).collect(),
            },
            ExprKind::Unary { op, operand } => ExprKind::Unary {
                op,
                operand: Box::new(self.wrap(*operand, depth + 1)),
            },
            ExprKind::Binary { op, lhs, rhs } => ExprKind::Binary {
                op,
                lhs: Box::new(self.wrap(*lhs, depth + 1)),
                rhs: Box::new(self.wrap(*rhs, depth + 1)),
            },
            ExprKind::IsType { object, class } => ExprKind::IsType {
                object: Box::new(self.wrap(*object, depth + 1)),
                class,
            },
            leaf => leaf,
        };
        let rebuilt = Expr { kind, span };
        let id = site_point_id(self.file, span.lo, span.hi);
        self.sites.push(SiteInfo {
            site_id: id.clone(),
            test_id: self.test_id.to_string(),
            file: self.file.to_string(),
            line: span.line,
            col: span.col,
            lo: span.lo,
            hi: span.hi,
            depth,
            snippet: self.source.get(span.lo..span.hi).unwrap_or("").to_string(),
        });
        Expr {
            kind: ExprKind::Call {
                callee: "__obs_site".into(),
                args: vec![str_expr(&id), rebuilt],
            },
            span,
        }
    }
}
