//! Tree-walking interpreter with two optional hooks used by the analysis
//! pipeline: a method-entry tracer (coverage, call depth, call chains) and a
//! state observer driven by the `__obs_*` builtins that instrumented sources
//! call.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use crate::ast::*;
use crate::project::{MethodDef, Project, TestDef, TopFnDef};
use crate::state::value_state;
use crate::value::{display_value, values_equal, ObjectData, Value};

const MAX_FRAMES: usize = 200;

/// A raised value travelling up the stack. Assertion failures carry a
/// `Value::Failure`; everything else (user throws, runtime faults) is
/// ordinary data.
#[derive(Debug, Clone)]
pub struct Thrown {
    pub value: Value,
}

impl Thrown {
    fn fault(message: impl Into<String>) -> Thrown {
        Thrown {
            value: Value::str(message.into()),
        }
    }

    pub fn is_assertion_failure(&self) -> bool {
        matches!(self.value, Value::Failure(_))
    }

    pub fn message(&self) -> String {
        display_value(&self.value)
    }
}

type XResult<T> = Result<T, Thrown>;

enum Flow {
    Normal,
    Return(Value),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TestOutcome {
    Pass,
    Fail(String),
    Error(String),
}

/// Per-method dynamic facts gathered while tests run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodTrace {
    pub hits: u64,
    /// Frame count from the test frame; a method called directly by the
    /// test body is at depth 1.
    pub min_depth: u32,
    /// Method-id chain from the test to the method at the shallowest
    /// observed invocation.
    pub chain: Vec<String>,
    /// Kinds of values the method returned, for dynamic return-category
    /// inference ("void" when it completed without a value).
    pub returned_kinds: Vec<String>,
}

#[derive(Debug, Default)]
pub struct Tracer {
    pub methods: BTreeMap<String, MethodTrace>,
}

impl Tracer {
    fn enter(&mut self, id: &str, stack: &[String]) {
        let depth = stack.len() as u32;
        let entry = self
            .methods
            .entry(id.to_string())
            .or_insert_with(|| MethodTrace {
                hits: 0,
                min_depth: u32::MAX,
                chain: Vec::new(),
                returned_kinds: Vec::new(),
            });
        entry.hits += 1;
        if depth < entry.min_depth {
            entry.min_depth = depth;
            entry.chain = stack.to_vec();
        }
    }

    fn record_return(&mut self, id: &str, kind: &str) {
        if let Some(entry) = self.methods.get_mut(id) {
            let kind = kind.to_string();
            if !entry.returned_kinds.contains(&kind) {
                entry.returned_kinds.push(kind);
            }
        }
    }
}

/// One observed property at one observation point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObsRecord {
    pub point: String,
    pub invocation: u64,
    pub path: String,
    pub value: String,
    pub kind: String,
}

pub struct Observer {
    sink: Box<dyn FnMut(&ObsRecord)>,
    counters: HashMap<String, u64>,
}

impl Observer {
    pub fn new(sink: Box<dyn FnMut(&ObsRecord)>) -> Observer {
        Observer {
            sink,
            counters: HashMap::new(),
        }
    }

    /// Collect records into a vector, for in-process consumers.
    pub fn collecting(out: Rc<RefCell<Vec<ObsRecord>>>) -> Observer {
        Observer::new(Box::new(move |r| out.borrow_mut().push(r.clone())))
    }

    fn next_invocation(&mut self, point: &str) -> u64 {
        let counter = self.counters.entry(point.to_string()).or_insert(0);
        let current = *counter;
        *counter += 1;
        current
    }

    /// Record the state of a method-boundary group (receiver, arguments,
    /// result) under a single invocation index.
    fn observe_group(&mut self, point: &str, parts: &[(&str, &Value)]) {
        let invocation = self.next_invocation(point);
        for (root, value) in parts {
            for prop in value_state(value) {
                (self.sink)(&ObsRecord {
                    point: point.to_string(),
                    invocation,
                    path: format!("{root}.{}", prop.path),
                    value: prop.value,
                    kind: prop.kind,
                });
            }
        }
    }

    /// Record the state of one test-expression site evaluation. Void values
    /// produce no record and do not consume an invocation index.
    fn observe_site(&mut self, site: &str, value: &Value) {
        if value.is_unit() {
            return;
        }
        let invocation = self.next_invocation(site);
        for prop in value_state(value) {
            (self.sink)(&ObsRecord {
                point: site.to_string(),
                invocation,
                path: prop.path,
                value: prop.value,
                kind: prop.kind,
            });
        }
    }
}

#[derive(Default)]
pub struct Session {
    pub tracer: Option<Tracer>,
    pub observer: Option<Observer>,
    stack: Vec<String>,
}

#[derive(Clone)]
enum FrameKind {
    Test,
    Function { in_test_file: bool },
    Method { class: Rc<crate::value::ClassInfo> },
}

struct Frame {
    kind: FrameKind,
    this: Option<Value>,
    scopes: Vec<HashMap<String, Value>>,
}

impl Frame {
    fn new(kind: FrameKind, this: Option<Value>) -> Frame {
        Frame {
            kind,
            this,
            scopes: vec![HashMap::new()],
        }
    }

    fn class_name(&self) -> Option<&str> {
        match &self.kind {
            FrameKind::Method { class } => Some(&class.name),
            _ => None,
        }
    }

    fn is_app_code(&self) -> bool {
        match &self.kind {
            FrameKind::Test => false,
            FrameKind::Function { in_test_file } => !in_test_file,
            FrameKind::Method { .. } => true,
        }
    }

    fn lookup(&self, name: &str) -> Option<&Value> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn assign(&mut self, name: &str, value: Value) -> bool {
        for scope in self.scopes.iter_mut().rev() {
            if let Some(slot) = scope.get_mut(name) {
                *slot = value;
                return true;
            }
        }
        false
    }

    fn declare(&mut self, name: &str, value: Value) -> XResult<()> {
        let scope = self.scopes.last_mut().expect("frame has a scope");
        if scope.contains_key(name) {
            return Err(Thrown::fault(format!(
                "variable `{name}` already declared in this scope"
            )));
        }
        scope.insert(name.to_string(), value);
        Ok(())
    }
}

pub struct Engine<'p> {
    project: &'p Project,
    pub session: Session,
}

impl<'p> Engine<'p> {
    pub fn new(project: &'p Project) -> Engine<'p> {
        Engine {
            project,
            session: Session::default(),
        }
    }

    pub fn with_session(project: &'p Project, session: Session) -> Engine<'p> {
        Engine { project, session }
    }

    /// Execute one test case and classify its outcome: assertion failures
    /// fail, any other uncaught value errors, completion passes.
    pub fn run_test(&mut self, test: &TestDef) -> TestOutcome {
        let mut frame = Frame::new(FrameKind::Test, None);
        match self.exec_block(&mut frame, &test.decl.body) {
            Ok(_) => TestOutcome::Pass,
            Err(thrown) if thrown.is_assertion_failure() => TestOutcome::Fail(thrown.message()),
            Err(thrown) => TestOutcome::Error(thrown.message()),
        }
    }

    /// Evaluate an expression in a fresh test-like frame. Tooling helper.
    pub fn eval_expr_str(&mut self, src: &str) -> Result<Value, String> {
        let expr = crate::parser::parse_expr(src).map_err(|e| e.to_string())?;
        let mut frame = Frame::new(FrameKind::Test, None);
        self.eval_expr(&mut frame, &expr).map_err(|t| t.message())
    }

    // Statements

    fn exec_block(&mut self, frame: &mut Frame, block: &Block) -> XResult<Flow> {
        frame.scopes.push(HashMap::new());
        let result = self.exec_stmts(frame, &block.stmts);
        frame.scopes.pop();
        result
    }

    fn exec_stmts(&mut self, frame: &mut Frame, stmts: &[Stmt]) -> XResult<Flow> {
        for stmt in stmts {
            if let Flow::Return(v) = self.exec_stmt(frame, stmt)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Normal)
    }

    fn exec_stmt(&mut self, frame: &mut Frame, stmt: &Stmt) -> XResult<Flow> {
        match stmt {
            Stmt::Var { name, init, .. } => {
                let value = self.eval_expr(frame, init)?;
                frame.declare(name, value)?;
                Ok(Flow::Normal)
            }
            Stmt::Assign { target, value, .. } => {
                let value = self.eval_expr(frame, value)?;
                match target {
                    AssignTarget::Var { name, .. } => {
                        if !frame.assign(name, value) {
                            return Err(Thrown::fault(format!("unknown variable `{name}`")));
                        }
                    }
                    AssignTarget::Field { object, field, .. } => {
                        let object = self.eval_expr(frame, object)?;
                        self.store_field(frame, &object, field, value)?;
                    }
                }
                Ok(Flow::Normal)
            }
            Stmt::If {
                cond,
                then_block,
                else_block,
                ..
            } => {
                if self.eval_bool(frame, cond)? {
                    self.exec_block(frame, then_block)
                } else if let Some(else_block) = else_block {
                    self.exec_block(frame, else_block)
                } else {
                    Ok(Flow::Normal)
                }
            }
            Stmt::While { cond, body, .. } => {
                while self.eval_bool(frame, cond)? {
                    if let Flow::Return(v) = self.exec_block(frame, body)? {
                        return Ok(Flow::Return(v));
                    }
                }
                Ok(Flow::Normal)
            }
            Stmt::For {
                var, iter, body, ..
            } => {
                let iter = self.eval_expr(frame, iter)?;
                let Value::List(items) = iter else {
                    return Err(Thrown::fault("for loop expects a list"));
                };
                let snapshot: Vec<Value> = items.borrow().clone();
                for item in snapshot {
                    frame.scopes.push(HashMap::new());
                    frame.declare(var, item)?;
                    let flow = self.exec_stmts(frame, &body.stmts);
                    frame.scopes.pop();
                    if let Flow::Return(v) = flow? {
                        return Ok(Flow::Return(v));
                    }
                }
                Ok(Flow::Normal)
            }
            Stmt::Return { value, .. } => {
                let value = match value {
                    Some(v) => self.eval_expr(frame, v)?,
                    None => Value::Unit,
                };
                Ok(Flow::Return(value))
            }
            Stmt::Throw { value, .. } => {
                let value = self.eval_expr(frame, value)?;
                Err(Thrown { value })
            }
            Stmt::Try {
                body,
                catch_var,
                handler,
                ..
            } => match self.exec_block(frame, body) {
                Ok(flow) => Ok(flow),
                Err(thrown) => {
                    frame.scopes.push(HashMap::new());
                    frame.declare(catch_var, thrown.value)?;
                    let flow = self.exec_stmts(frame, &handler.stmts);
                    frame.scopes.pop();
                    flow
                }
            },
            Stmt::Expr { expr, .. } => {
                self.eval_expr(frame, expr)?;
                Ok(Flow::Normal)
            }
            Stmt::Block(block) => self.exec_block(frame, block),
        }
    }

    // Expressions

    fn eval_bool(&mut self, frame: &mut Frame, expr: &Expr) -> XResult<bool> {
        match self.eval_expr(frame, expr)? {
            Value::Bool(b) => Ok(b),
            other => Err(Thrown::fault(format!(
                "condition must be a bool, got {}",
                other.kind_name()
            ))),
        }
    }

    fn eval_expr(&mut self, frame: &mut Frame, expr: &Expr) -> XResult<Value> {
        match &expr.kind {
            ExprKind::Int(v) => Ok(Value::Int(*v)),
            ExprKind::Float(v) => Ok(Value::Float(*v)),
            ExprKind::Str(s) => Ok(Value::str(s.clone())),
            ExprKind::Char(c) => Ok(Value::Char(*c)),
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Null => Ok(Value::Null),
            ExprKind::This => frame
                .this
                .clone()
                .ok_or_else(|| Thrown::fault("`this` is only available inside methods")),
            ExprKind::Var(name) => frame
                .lookup(name)
                .cloned()
                .ok_or_else(|| Thrown::fault(format!("unknown variable `{name}`"))),
            ExprKind::ListLit(elems) => {
                let mut items = Vec::with_capacity(elems.len());
                for e in elems {
                    items.push(self.eval_expr(frame, e)?);
                }
                Ok(Value::list(items))
            }
            ExprKind::Field { object, field } => {
                let object = self.eval_expr(frame, object)?;
                self.load_field(frame, &object, field)
            }
            ExprKind::Call { callee, args } => {
                let args = self.eval_args(frame, args)?;
                self.call_named(frame, callee, args)
            }
            ExprKind::MethodCall {
                object,
                method,
                args,
            } => {
                let object = self.eval_expr(frame, object)?;
                let args = self.eval_args(frame, args)?;
                self.call_method(frame, object, method, args)
            }
            ExprKind::New { class, args } => {
                let args = self.eval_args(frame, args)?;
                self.construct(class, args)
            }
            ExprKind::Unary { op, operand } => {
                let operand = self.eval_expr(frame, operand)?;
                match (op, operand) {
                    (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                    (UnOp::Neg, Value::Int(v)) => v
                        .checked_neg()
                        .map(Value::Int)
                        .ok_or_else(|| Thrown::fault("integer overflow")),
                    (UnOp::Neg, Value::Float(v)) => Ok(Value::Float(-v)),
                    (op, v) => Err(Thrown::fault(format!(
                        "cannot apply `{}` to {}",
                        if matches!(op, UnOp::Not) { "!" } else { "-" },
                        v.kind_name()
                    ))),
                }
            }
            ExprKind::Binary {
                op: BinOp::And,
                lhs,
                rhs,
            } => {
                if self.eval_bool(frame, lhs)? {
                    Ok(Value::Bool(self.eval_bool(frame, rhs)?))
                } else {
                    Ok(Value::Bool(false))
                }
            }
            ExprKind::Binary {
                op: BinOp::Or,
                lhs,
                rhs,
            } => {
                if self.eval_bool(frame, lhs)? {
                    Ok(Value::Bool(true))
                } else {
                    Ok(Value::Bool(self.eval_bool(frame, rhs)?))
                }
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let lhs = self.eval_expr(frame, lhs)?;
                let rhs = self.eval_expr(frame, rhs)?;
                binary_op(*op, lhs, rhs)
            }
            ExprKind::IsType { object, class } => {
                let object = self.eval_expr(frame, object)?;
                Ok(Value::Bool(match object {
                    Value::Object(obj) => obj.class.name == *class,
                    _ => false,
                }))
            }
        }
    }

    fn eval_args(&mut self, frame: &mut Frame, args: &[Expr]) -> XResult<Vec<Value>> {
        let mut out = Vec::with_capacity(args.len());
        for a in args {
            out.push(self.eval_expr(frame, a)?);
        }
        Ok(out)
    }

    // Fields: storage-slot access, legal only inside methods of the same
    // class. Top-level and test code never touches fields directly.

    fn field_slot(
        &self,
        frame: &Frame,
        object: &Value,
        field: &str,
    ) -> XResult<(Rc<ObjectData>, usize)> {
        let Value::Object(obj) = object else {
            return Err(Thrown::fault(format!(
                "cannot access field `{field}` on {}",
                object.kind_name()
            )));
        };
        if frame.class_name() != Some(obj.class.name.as_str()) {
            return Err(Thrown::fault(format!(
                "field `{}.{field}` is not accessible here",
                obj.class.name
            )));
        }
        let idx = obj
            .class
            .fields
            .iter()
            .position(|f| f == field)
            .ok_or_else(|| {
                Thrown::fault(format!("class `{}` has no field `{field}`", obj.class.name))
            })?;
        Ok((obj.clone(), idx))
    }

    fn load_field(&self, frame: &Frame, object: &Value, field: &str) -> XResult<Value> {
        let (obj, idx) = self.field_slot(frame, object, field)?;
        let value = obj.fields.borrow()[idx].clone();
        Ok(value)
    }

    fn store_field(&self, frame: &Frame, object: &Value, field: &str, value: Value) -> XResult<()> {
        let (obj, idx) = self.field_slot(frame, object, field)?;
        obj.fields.borrow_mut()[idx] = value;
        Ok(())
    }

    // Calls

    fn enter(&mut self, id: &str) -> XResult<()> {
        if self.session.stack.len() >= MAX_FRAMES {
            return Err(Thrown::fault("call depth limit exceeded"));
        }
        self.session.stack.push(id.to_string());
        if let Some(tracer) = &mut self.session.tracer {
            tracer.enter(id, &self.session.stack);
        }
        Ok(())
    }

    fn leave(&mut self, id: &str, result: &XResult<Value>) {
        if let (Some(tracer), Ok(value)) = (&mut self.session.tracer, result) {
            tracer.record_return(id, value.kind_name());
        }
        self.session.stack.pop();
    }

    fn construct(&mut self, class_name: &str, args: Vec<Value>) -> XResult<Value> {
        let class = self
            .project
            .classes
            .get(class_name)
            .ok_or_else(|| Thrown::fault(format!("unknown class `{class_name}`")))?
            .clone();
        let object = Value::Object(Rc::new(ObjectData {
            class: class.info.clone(),
            fields: RefCell::new(vec![Value::Null; class.info.fields.len()]),
        }));
        match (&class.decl.ctor, args.is_empty()) {
            (None, true) => Ok(object),
            (None, false) => Err(Thrown::fault(format!(
                "class `{class_name}` has no constructor taking arguments"
            ))),
            (Some(ctor), _) => {
                if ctor.params.len() != args.len() {
                    return Err(Thrown::fault(format!(
                        "constructor of `{class_name}` expects {} argument(s), got {}",
                        ctor.params.len(),
                        args.len()
                    )));
                }
                let id = class.ctor_id.clone().expect("ctor id exists");
                self.enter(&id)?;
                let mut frame = Frame::new(
                    FrameKind::Method {
                        class: class.info.clone(),
                    },
                    Some(object.clone()),
                );
                for (param, arg) in ctor.params.iter().zip(args) {
                    frame.declare(param, arg)?;
                }
                let result = self
                    .exec_block(&mut frame, &ctor.body)
                    .map(|_| object.clone());
                self.leave(&id, &result);
                result?;
                Ok(object)
            }
        }
    }

    fn call_method(
        &mut self,
        frame: &Frame,
        object: Value,
        method: &str,
        args: Vec<Value>,
    ) -> XResult<Value> {
        match &object {
            Value::Object(obj) => {
                let class = self
                    .project
                    .classes
                    .get(&obj.class.name)
                    .ok_or_else(|| Thrown::fault(format!("unknown class `{}`", obj.class.name)))?
                    .clone();
                let def = class.methods.get(method).cloned().ok_or_else(|| {
                    Thrown::fault(format!(
                        "class `{}` has no method `{method}`",
                        obj.class.name
                    ))
                })?;
                if def.decl.private && frame.class_name() != Some(def.class.as_str()) {
                    return Err(Thrown::fault(format!(
                        "method `{}.{method}` is private",
                        def.class
                    )));
                }
                self.invoke_method(&def, class.info.clone(), object.clone(), args)
            }
            Value::List(items) => list_method(items, method, args),
            Value::Null => Err(Thrown::fault(format!("method `{method}` called on null"))),
            other => Err(Thrown::fault(format!(
                "{} values have no method `{method}`",
                other.kind_name()
            ))),
        }
    }

    fn invoke_method(
        &mut self,
        def: &MethodDef,
        class: Rc<crate::value::ClassInfo>,
        this: Value,
        args: Vec<Value>,
    ) -> XResult<Value> {
        if def.decl.params.len() != args.len() {
            return Err(Thrown::fault(format!(
                "method `{}` expects {} argument(s), got {}",
                def.decl.name,
                def.decl.params.len(),
                args.len()
            )));
        }
        self.enter(&def.id)?;
        let mut frame = Frame::new(FrameKind::Method { class }, Some(this));
        let result = (|| {
            for (param, arg) in def.decl.params.iter().zip(args) {
                frame.declare(param, arg)?;
            }
            match self.exec_block(&mut frame, &def.decl.body)? {
                Flow::Return(v) => Ok(v),
                Flow::Normal => Ok(Value::Unit),
            }
        })();
        self.leave(&def.id, &result);
        result
    }

    fn call_named(&mut self, frame: &Frame, name: &str, args: Vec<Value>) -> XResult<Value> {
        if let Some(def) = self.project.functions.get(name).cloned() {
            return self.call_function(frame, &def, args);
        }
        self.call_builtin(name, args)
    }

    fn call_function(&mut self, frame: &Frame, def: &TopFnDef, args: Vec<Value>) -> XResult<Value> {
        if def.decl.private && !frame.is_app_code() {
            return Err(Thrown::fault(format!(
                "function `{}` is private",
                def.decl.name
            )));
        }
        if def.decl.params.len() != args.len() {
            return Err(Thrown::fault(format!(
                "function `{}` expects {} argument(s), got {}",
                def.decl.name,
                def.decl.params.len(),
                args.len()
            )));
        }
        self.enter(&def.id)?;
        let mut inner = Frame::new(
            FrameKind::Function {
                in_test_file: def.in_test_file,
            },
            None,
        );
        let result = (|| {
            for (param, arg) in def.decl.params.iter().zip(args) {
                inner.declare(param, arg)?;
            }
            match self.exec_block(&mut inner, &def.decl.body)? {
                Flow::Return(v) => Ok(v),
                Flow::Normal => Ok(Value::Unit),
            }
        })();
        self.leave(&def.id, &result);
        result
    }

    fn call_builtin(&mut self, name: &str, mut args: Vec<Value>) -> XResult<Value> {
        let arity = |n: usize| -> XResult<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Thrown::fault(format!(
                    "builtin `{name}` expects {n} argument(s)"
                )))
            }
        };
        match name {
            "assert" | "assertTrue" => {
                arity(1)?;
                match &args[0] {
                    Value::Bool(true) => Ok(Value::Unit),
                    Value::Bool(false) => Err(assertion_failure("expected true but was false")),
                    other => Err(Thrown::fault(format!(
                        "{name} expects a bool, got {}",
                        other.kind_name()
                    ))),
                }
            }
            "assertFalse" => {
                arity(1)?;
                match &args[0] {
                    Value::Bool(false) => Ok(Value::Unit),
                    Value::Bool(true) => Err(assertion_failure("expected false but was true")),
                    other => Err(Thrown::fault(format!(
                        "assertFalse expects a bool, got {}",
                        other.kind_name()
                    ))),
                }
            }
            "assertEquals" => {
                arity(2)?;
                if values_equal(&args[0], &args[1]) {
                    Ok(Value::Unit)
                } else {
                    Err(assertion_failure(&format!(
                        "expected {} but was {}",
                        display_value(&args[0]),
                        display_value(&args[1])
                    )))
                }
            }
            "assertNotNull" => {
                arity(1)?;
                if matches!(args[0], Value::Null) {
                    Err(assertion_failure("expected a value but was null"))
                } else {
                    Ok(Value::Unit)
                }
            }
            "assertNull" => {
                arity(1)?;
                if matches!(args[0], Value::Null) {
                    Ok(Value::Unit)
                } else {
                    Err(assertion_failure(&format!(
                        "expected null but was {}",
                        display_value(&args[0])
                    )))
                }
            }
            "fail" => {
                arity(1)?;
                Err(assertion_failure(&display_value(&args[0])))
            }
            "print" => {
                arity(1)?;
                println!("{}", display_value(&args[0]));
                Ok(Value::Unit)
            }
            "str" => {
                arity(1)?;
                Ok(Value::str(display_value(&args[0])))
            }
            "len" => {
                arity(1)?;
                match &args[0] {
                    Value::Str(s) => Ok(Value::Int(s.chars().count() as i64)),
                    Value::List(items) => Ok(Value::Int(items.borrow().len() as i64)),
                    other => Err(Thrown::fault(format!(
                        "len expects str or list, got {}",
                        other.kind_name()
                    ))),
                }
            }
            "charAt" => {
                arity(2)?;
                match (&args[0], &args[1]) {
                    (Value::Str(s), Value::Int(i)) => match s.chars().nth(*i as usize) {
                        Some(c) if *i >= 0 => Ok(Value::Char(c)),
                        _ => Err(Thrown::fault(format!("charAt index {i} out of bounds"))),
                    },
                    _ => Err(Thrown::fault("charAt expects a string and an int")),
                }
            }
            "currentTimeMillis" => {
                arity(0)?;
                let ms = std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_millis() as i64)
                    .unwrap_or(0);
                Ok(Value::Int(ms))
            }
            "nanoTime" => {
                arity(0)?;
                let ns = std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_nanos() as i64)
                    .unwrap_or(0);
                Ok(Value::Int(ns))
            }
            "__obs_method" => {
                if args.len() < 2 {
                    return Err(Thrown::fault(
                        "__obs_method expects a point and a root spec",
                    ));
                }
                let point = expect_str(&args[0], "__obs_method point")?;
                let roots = expect_str(&args[1], "__obs_method roots")?;
                let values = &args[2..];
                let root_names: Vec<&str> = roots.split(',').filter(|s| !s.is_empty()).collect();
                if root_names.len() != values.len() {
                    return Err(Thrown::fault("__obs_method root/value arity mismatch"));
                }
                if let Some(observer) = &mut self.session.observer {
                    let parts: Vec<(&str, &Value)> =
                        root_names.iter().copied().zip(values.iter()).collect();
                    observer.observe_group(&point, &parts);
                }
                Ok(Value::Unit)
            }
            "__obs_site" => {
                arity(2)?;
                let site = expect_str(&args[0], "__obs_site id")?;
                let value = args.pop().expect("checked arity");
                if let Some(observer) = &mut self.session.observer {
                    observer.observe_site(&site, &value);
                }
                Ok(value)
            }
            "__obs_exc" => {
                arity(2)?;
                let site = expect_str(&args[0], "__obs_exc id")?;
                if let Some(observer) = &mut self.session.observer {
                    observer.observe_site(&site, &args[1]);
                }
                Ok(Value::Unit)
            }
            _ => Err(Thrown::fault(format!("unknown function `{name}`"))),
        }
    }
}

fn assertion_failure(message: &str) -> Thrown {
    Thrown {
        value: Value::Failure(Rc::from(message.to_string().into_boxed_str())),
    }
}

fn expect_str(v: &Value, what: &str) -> XResult<String> {
    match v {
        Value::Str(s) => Ok(s.to_string()),
        _ => Err(Thrown::fault(format!("{what} must be a string"))),
    }
}

fn list_method(
    items: &Rc<RefCell<Vec<Value>>>,
    method: &str,
    mut args: Vec<Value>,
) -> XResult<Value> {
    let arity = |n: usize, args: &[Value]| -> XResult<()> {
        if args.len() == n {
            Ok(())
        } else {
            Err(Thrown::fault(format!(
                "list.{method} expects {n} argument(s)"
            )))
        }
    };
    match method {
        "add" => {
            arity(1, &args)?;
            items.borrow_mut().push(args.pop().expect("checked"));
            Ok(Value::Unit)
        }
        "size" => {
            arity(0, &args)?;
            Ok(Value::Int(items.borrow().len() as i64))
        }
        "isEmpty" => {
            arity(0, &args)?;
            Ok(Value::Bool(items.borrow().is_empty()))
        }
        "contains" => {
            arity(1, &args)?;
            Ok(Value::Bool(
                items.borrow().iter().any(|v| values_equal(v, &args[0])),
            ))
        }
        "indexOf" => {
            arity(1, &args)?;
            let idx = items
                .borrow()
                .iter()
                .position(|v| values_equal(v, &args[0]));
            Ok(Value::Int(idx.map(|i| i as i64).unwrap_or(-1)))
        }
        "get" => {
            arity(1, &args)?;
            let idx = expect_index(&args[0], items.borrow().len())?;
            Ok(items.borrow()[idx].clone())
        }
        "set" => {
            arity(2, &args)?;
            let idx = expect_index(&args[0], items.borrow().len())?;
            let value = args.pop().expect("checked");
            items.borrow_mut()[idx] = value;
            Ok(Value::Unit)
        }
        "removeAt" => {
            arity(1, &args)?;
            let idx = expect_index(&args[0], items.borrow().len())?;
            Ok(items.borrow_mut().remove(idx))
        }
        "clear" => {
            arity(0, &args)?;
            items.borrow_mut().clear();
            Ok(Value::Unit)
        }
        _ => Err(Thrown::fault(format!("lists have no method `{method}`"))),
    }
}

fn expect_index(v: &Value, len: usize) -> XResult<usize> {
    match v {
        Value::Int(i) if *i >= 0 && (*i as usize) < len => Ok(*i as usize),
        Value::Int(i) => Err(Thrown::fault(format!(
            "index {i} out of bounds (size {len})"
        ))),
        other => Err(Thrown::fault(format!(
            "index must be an int, got {}",
            other.kind_name()
        ))),
    }
}

fn binary_op(op: BinOp, lhs: Value, rhs: Value) -> XResult<Value> {
    use Value::*;
    match op {
        BinOp::Eq => return Ok(Bool(values_equal(&lhs, &rhs))),
        BinOp::NotEq => return Ok(Bool(!values_equal(&lhs, &rhs))),
        _ => {}
    }
    if op == BinOp::Add {
        if let Str(l) = &lhs {
            return Ok(Value::str(format!("{l}{}", display_value(&rhs))));
        }
        if let Str(r) = &rhs {
            return Ok(Value::str(format!("{}{r}", display_value(&lhs))));
        }
    }
    match (op, &lhs, &rhs) {
        (BinOp::Add, Int(a), Int(b)) => a
            .checked_add(*b)
            .map(Int)
            .ok_or_else(|| Thrown::fault("integer overflow")),
        (BinOp::Sub, Int(a), Int(b)) => a
            .checked_sub(*b)
            .map(Int)
            .ok_or_else(|| Thrown::fault("integer overflow")),
        (BinOp::Mul, Int(a), Int(b)) => a
            .checked_mul(*b)
            .map(Int)
            .ok_or_else(|| Thrown::fault("integer overflow")),
        (BinOp::Div, Int(a), Int(b)) => a
            .checked_div(*b)
            .map(Int)
            .ok_or_else(|| Thrown::fault("division by zero")),
        (BinOp::Rem, Int(a), Int(b)) => a
            .checked_rem(*b)
            .map(Int)
            .ok_or_else(|| Thrown::fault("division by zero")),
        (BinOp::Lt, Int(a), Int(b)) => Ok(Bool(a < b)),
        (BinOp::LtEq, Int(a), Int(b)) => Ok(Bool(a <= b)),
        (BinOp::Gt, Int(a), Int(b)) => Ok(Bool(a > b)),
        (BinOp::GtEq, Int(a), Int(b)) => Ok(Bool(a >= b)),
        (BinOp::Lt, Char(a), Char(b)) => Ok(Bool(a < b)),
        (BinOp::LtEq, Char(a), Char(b)) => Ok(Bool(a <= b)),
        (BinOp::Gt, Char(a), Char(b)) => Ok(Bool(a > b)),
        (BinOp::GtEq, Char(a), Char(b)) => Ok(Bool(a >= b)),
        (BinOp::Lt, Str(a), Str(b)) => Ok(Bool(a < b)),
        (BinOp::LtEq, Str(a), Str(b)) => Ok(Bool(a <= b)),
        (BinOp::Gt, Str(a), Str(b)) => Ok(Bool(a > b)),
        (BinOp::GtEq, Str(a), Str(b)) => Ok(Bool(a >= b)),
        _ => {
            // Mixed int/float arithmetic promotes to float.
            let (a, b) = match (&lhs, &rhs) {
                (Int(a), Float(b)) => (*a as f64, *b),
                (Float(a), Int(b)) => (*a, *b as f64),
                (Float(a), Float(b)) => (*a, *b),
                _ => {
                    return Err(Thrown::fault(format!(
                        "cannot apply `{}` to {} and {}",
                        op.symbol(),
                        lhs.kind_name(),
                        rhs.kind_name()
                    )))
                }
            };
            Ok(match op {
                BinOp::Add => Float(a + b),
                BinOp::Sub => Float(a - b),
                BinOp::Mul => Float(a * b),
                BinOp::Div => Float(a / b),
                BinOp::Rem => Float(a % b),
                BinOp::Lt => Bool(a < b),
                BinOp::LtEq => Bool(a <= b),
                BinOp::Gt => Bool(a > b),
                BinOp::GtEq => Bool(a >= b),
                BinOp::Eq | BinOp::NotEq | BinOp::And | BinOp::Or => unreachable!(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::project::Project;

    fn project(src: &str, test_src: &str) -> Project {
        Project::from_sources(vec![
            ("src/app.mini".into(), src.into()),
            ("tests/app_test.mini".into(), test_src.into()),
        ])
    }

    fn run(src: &str, test_src: &str, test_name: &str) -> TestOutcome {
        let p = project(src, test_src);
        assert!(p.errors.is_empty(), "load errors: {:?}", p.errors);
        let test = p
            .tests
            .get(&format!("tests/app_test.mini::{test_name}"))
            .expect("test exists");
        Engine::new(&p).run_test(test)
    }

    const SET_SRC: &str = r#"
        class VersionedSet {
            var version;
            var elements;
            constructor() {
                this.version = 0;
                this.elements = [];
            }
            fn add(item): void {
                if (this.elements.contains(item)) { return; }
                this.elements.add(item);
                this.incrementVersion();
            }
            private fn incrementVersion(): void { this.version = this.version + 1; }
            fn getVersion(): int { return this.version; }
            fn size(): int { return this.elements.size(); }
            fn isEmpty(): bool { return this.size() == 0; }
            fn contains(item): bool { return this.elements.contains(item); }
        }
    "#;

    #[test]
    fn passing_test_reports_pass() {
        let outcome = run(
            SET_SRC,
            r#"test t() {
                var s = new VersionedSet();
                s.add(1);
                s.add(1);
                assertEquals(1, s.size());
                assertEquals(1, s.getVersion());
                assertFalse(s.isEmpty());
            }"#,
            "t",
        );
        assert_eq!(outcome, TestOutcome::Pass);
    }

    #[test]
    fn assertion_failure_reports_fail() {
        let outcome = run(SET_SRC, "test t() { assertEquals(1, 2); }", "t");
        assert_eq!(outcome, TestOutcome::Fail("expected 1 but was 2".into()));
    }

    #[test]
    fn uncaught_throw_reports_error() {
        let outcome = run(SET_SRC, r#"test t() { throw "boom"; }"#, "t");
        assert_eq!(outcome, TestOutcome::Error("boom".into()));
    }

    #[test]
    fn method_call_on_null_is_an_error() {
        let outcome = run(SET_SRC, "test t() { var x = null; x.size(); }", "t");
        assert!(matches!(outcome, TestOutcome::Error(msg) if msg.contains("null")));
    }

    #[test]
    fn private_members_are_sealed_from_tests() {
        let outcome = run(
            SET_SRC,
            "test t() { var s = new VersionedSet(); s.incrementVersion(); }",
            "t",
        );
        assert!(matches!(outcome, TestOutcome::Error(msg) if msg.contains("private")));
    }

    #[test]
    fn fields_are_not_accessible_from_tests() {
        let p = project(SET_SRC, "test t() { assertTrue(true); }");
        let mut engine = Engine::new(&p);
        let err = engine
            .eval_expr_str("new VersionedSet().version")
            .unwrap_err();
        assert!(err.contains("not accessible"), "got {err}");
    }

    #[test]
    fn catch_and_rethrow_preserves_assertion_failures() {
        let outcome = run(
            SET_SRC,
            r#"test t() {
                try { assertEquals(1, 2); } catch (e) { throw e; }
            }"#,
            "t",
        );
        assert!(matches!(outcome, TestOutcome::Fail(_)), "got {outcome:?}");
    }

    #[test]
    fn try_catch_handles_user_exceptions() {
        let outcome = run(
            SET_SRC,
            r#"test t() {
                var seen = "";
                try { throw "expected"; } catch (e) { seen = e; }
                assertEquals("expected", seen);
            }"#,
            "t",
        );
        assert_eq!(outcome, TestOutcome::Pass);
    }

    #[test]
    fn short_circuit_skips_rhs() {
        let outcome = run(
            "fn boom(): bool { throw \"reached\"; }",
            r#"test t() { assertTrue(true || boom()); assertFalse(false && boom()); }"#,
            "t",
        );
        assert_eq!(outcome, TestOutcome::Pass);
    }

    #[test]
    fn tracer_records_depth_and_chain() {
        let p = project(
            r#"
            fn outer(): int { return inner() + 1; }
            fn inner(): int { return 41; }
            "#,
            "test t() { assertEquals(42, outer()); }",
        );
        let test = p.tests.values().next().unwrap().clone();
        let mut engine = Engine::new(&p);
        engine.session.tracer = Some(Tracer::default());
        assert_eq!(engine.run_test(&test), TestOutcome::Pass);
        let tracer = engine.session.tracer.take().unwrap();
        let outer = &tracer.methods["src/app.mini::outer/0"];
        assert_eq!((outer.hits, outer.min_depth), (1, 1));
        let inner = &tracer.methods["src/app.mini::inner/0"];
        assert_eq!(inner.min_depth, 2);
        assert_eq!(
            inner.chain,
            vec!["src/app.mini::outer/0", "src/app.mini::inner/0"]
        );
        assert_eq!(inner.returned_kinds, vec!["int"]);
    }

    #[test]
    fn observer_groups_share_invocation_index() {
        let p = project(
            r#"
            class Box {
                var v;
                constructor() { this.v = 9; }
                fn touch(x): void { __obs_method("m:p", "this,arg0", this, x); }
            }
            "#,
            r#"test t() { var b = new Box(); b.touch(5); b.touch(6); }"#,
        );
        let test = p.tests.values().next().unwrap().clone();
        let records = Rc::new(RefCell::new(Vec::new()));
        let mut engine = Engine::new(&p);
        engine.session.observer = Some(Observer::collecting(records.clone()));
        assert_eq!(engine.run_test(&test), TestOutcome::Pass);
        let records = records.borrow();
        let first: Vec<_> = records.iter().filter(|r| r.invocation == 0).collect();
        let second: Vec<_> = records.iter().filter(|r| r.invocation == 1).collect();
        // this.null, this.v, arg0.value per invocation
        assert_eq!(first.len(), 3);
        assert_eq!(second.len(), 3);
        assert!(first.iter().any(|r| r.path == "this.v" && r.value == "9"));
        assert!(first
            .iter()
            .any(|r| r.path == "arg0.value" && r.value == "5"));
        assert!(second
            .iter()
            .any(|r| r.path == "arg0.value" && r.value == "6"));
    }

    #[test]
    fn obs_site_passes_value_through_and_skips_void() {
        let p = project(
            SET_SRC,
            r#"test t() {
                var s = new VersionedSet();
                __obs_site("s:x", s).add(1);
                assertEquals(1, __obs_site("s:y", s.size()));
            }"#,
        );
        let test = p.tests.values().next().unwrap().clone();
        let records = Rc::new(RefCell::new(Vec::new()));
        let mut engine = Engine::new(&p);
        engine.session.observer = Some(Observer::collecting(records.clone()));
        assert_eq!(engine.run_test(&test), TestOutcome::Pass);
        let records = records.borrow();
        assert!(records
            .iter()
            .any(|r| r.point == "s:x" && r.path == "version" && r.value == "0"));
        assert!(records
            .iter()
            .any(|r| r.point == "s:y" && r.path == "value" && r.value == "1"));
    }

    #[test]
    fn deep_recursion_faults_instead_of_overflowing() {
        let outcome = run(
            "fn spin(n): int { return spin(n + 1); }",
            "test t() { spin(0); }",
            "t",
        );
        assert!(matches!(outcome, TestOutcome::Error(msg) if msg.contains("depth")));
    }

    #[test]
    fn arithmetic_faults_are_catchable() {
        let outcome = run(
            "",
            r#"test t() {
                var caught = false;
                try { var x = 1 / 0; } catch (e) { caught = true; }
                assertTrue(caught);
            }"#,
            "t",
        );
        assert_eq!(outcome, TestOutcome::Pass);
    }

    #[test]
    fn string_concat_and_comparisons() {
        let outcome = run(
            "",
            r#"test t() {
                assertEquals("a1", "a" + 1);
                assertTrue("abc" < "abd");
                assertTrue('a' < 'b');
                assertEquals(3.5, 3 + 0.5);
            }"#,
            "t",
        );
        assert_eq!(outcome, TestOutcome::Pass);
    }
}
