//! Source-level static analyses behind the suggestions: a name-resolved
//! call graph (dynamic dispatch over-approximated by declared-name
//! matching), accessible entry points for internal methods, field-observer
//! discovery, and the dynamic stack-distance measurement.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use stubscope_lang::ast::{AssignTarget, Block, Expr, ExprKind, Stmt};
use stubscope_lang::project::{function_id, method_id};
use stubscope_lang::Project;

use crate::adapter::{CoverageData, MethodDescriptor, MethodId, TestId, Visibility};
use crate::error::{Error, Result};

/// Path-length cap for entry-point and observer searches.
pub const SEARCH_DEPTH_CAP: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallEdge {
    pub caller: MethodId,
    pub callee: MethodId,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DanglingCall {
    pub caller: MethodId,
    pub name: String,
    pub line: u32,
}

#[derive(Debug, Default)]
pub struct CallGraph {
    pub nodes: BTreeSet<MethodId>,
    pub edges: Vec<CallEdge>,
    /// Calls whose target is not an application method (builtins aside).
    pub dangling: Vec<DanglingCall>,
    forward: BTreeMap<MethodId, BTreeSet<MethodId>>,
    reverse: BTreeMap<MethodId, BTreeSet<MethodId>>,
}

impl CallGraph {
    pub fn callees(&self, id: &str) -> impl Iterator<Item = &MethodId> {
        self.forward.get(id).into_iter().flatten()
    }

    pub fn callers(&self, id: &str) -> impl Iterator<Item = &MethodId> {
        self.reverse.get(id).into_iter().flatten()
    }

    pub fn has_edge(&self, caller: &str, callee: &str) -> bool {
        self.forward
            .get(caller)
            .is_some_and(|set| set.contains(callee))
    }

    /// Text edge list for debugging.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            out.push_str(&format!(
                "{} -> {} @{}:{}\n",
                e.caller, e.callee, e.line, e.col
            ));
        }
        out
    }

    /// Shortest path lengths from `start` following edges in the given
    /// direction, capped. Distance 0 is `start` itself.
    fn bfs(&self, start: &str, reverse: bool, cap: usize) -> (BTreeMap<MethodId, usize>, bool) {
        let adjacency = if reverse {
            &self.reverse
        } else {
            &self.forward
        };
        let mut dist: BTreeMap<MethodId, usize> = BTreeMap::new();
        let mut queue = VecDeque::new();
        dist.insert(start.to_string(), 0);
        queue.push_back(start.to_string());
        let mut capped = false;
        while let Some(current) = queue.pop_front() {
            let d = dist[&current];
            if d >= cap {
                capped = true;
                continue;
            }
            for next in adjacency.get(&current).into_iter().flatten() {
                if !dist.contains_key(next) {
                    dist.insert(next.clone(), d + 1);
                    queue.push_back(next.clone());
                }
            }
        }
        (dist, capped)
    }
}

/// Method names callable on list values; calls to these through an unknown
/// receiver are not dangling.
const LIST_BUILTIN_METHODS: &[&str] = &[
    "add", "size", "isEmpty", "contains", "indexOf", "get", "set", "removeAt", "clear",
];

/// Build the static call graph over application code (test files excluded).
pub fn build_call_graph(project: &Project) -> CallGraph {
    let mut graph = CallGraph::default();

    // Nodes: all application methods, functions and constructors.
    let mut methods_by_name: BTreeMap<&str, Vec<MethodId>> = BTreeMap::new();
    for class in project.classes.values().filter(|c| !c.in_test_file) {
        if let Some(ctor_id) = &class.ctor_id {
            graph.nodes.insert(ctor_id.clone());
        }
        for m in class.methods.values() {
            graph.nodes.insert(m.id.clone());
            methods_by_name
                .entry(m.decl.name.as_str())
                .or_default()
                .push(m.id.clone());
        }
    }
    for f in project.functions.values().filter(|f| !f.in_test_file) {
        graph.nodes.insert(f.id.clone());
    }

    let mut raw_edges: BTreeSet<(MethodId, MethodId, u32, u32)> = BTreeSet::new();
    let mut walker = GraphWalker {
        project,
        methods_by_name: &methods_by_name,
        edges: &mut raw_edges,
        dangling: &mut graph.dangling,
    };

    for class in project.classes.values().filter(|c| !c.in_test_file) {
        if let (Some(ctor), Some(ctor_id)) = (&class.decl.ctor, &class.ctor_id) {
            walker.walk_block(ctor_id, Some(&class.decl.name), &ctor.body);
        }
        for m in class.methods.values() {
            walker.walk_block(&m.id, Some(&class.decl.name), &m.decl.body);
        }
    }
    for f in project.functions.values().filter(|f| !f.in_test_file) {
        walker.walk_block(&f.id, None, &f.decl.body);
    }

    graph.edges = raw_edges
        .into_iter()
        .map(|(caller, callee, line, col)| CallEdge {
            caller,
            callee,
            line,
            col,
        })
        .collect();
    for e in &graph.edges {
        graph
            .forward
            .entry(e.caller.clone())
            .or_default()
            .insert(e.callee.clone());
        graph
            .reverse
            .entry(e.callee.clone())
            .or_default()
            .insert(e.caller.clone());
    }
    graph
        .dangling
        .sort_by(|a, b| (&a.caller, &a.name, a.line).cmp(&(&b.caller, &b.name, b.line)));
    graph.dangling.dedup();
    graph
}

struct GraphWalker<'a> {
    project: &'a Project,
    methods_by_name: &'a BTreeMap<&'a str, Vec<MethodId>>,
    edges: &'a mut BTreeSet<(MethodId, MethodId, u32, u32)>,
    dangling: &'a mut Vec<DanglingCall>,
}

impl GraphWalker<'_> {
    fn walk_block(&mut self, caller: &str, own_class: Option<&str>, block: &Block) {
        for stmt in &block.stmts {
            self.walk_stmt(caller, own_class, stmt);
        }
    }

    fn walk_stmt(&mut self, caller: &str, own_class: Option<&str>, stmt: &Stmt) {
        match stmt {
            Stmt::Var { init, .. } => self.walk_expr(caller, own_class, init),
            Stmt::Assign { target, value, .. } => {
                if let AssignTarget::Field { object, .. } = target {
                    self.walk_expr(caller, own_class, object);
                }
                self.walk_expr(caller, own_class, value);
            }
            Stmt::If {
                cond,
                then_block,
                else_block,
                ..
            } => {
                self.walk_expr(caller, own_class, cond);
                self.walk_block(caller, own_class, then_block);
                if let Some(b) = else_block {
                    self.walk_block(caller, own_class, b);
                }
            }
            Stmt::While { cond, body, .. } => {
                self.walk_expr(caller, own_class, cond);
                self.walk_block(caller, own_class, body);
            }
            Stmt::For { iter, body, .. } => {
                self.walk_expr(caller, own_class, iter);
                self.walk_block(caller, own_class, body);
            }
            Stmt::Return { value, .. } => {
                if let Some(v) = value {
                    self.walk_expr(caller, own_class, v);
                }
            }
            Stmt::Throw { value, .. } => self.walk_expr(caller, own_class, value),
            Stmt::Try { body, handler, .. } => {
                self.walk_block(caller, own_class, body);
                self.walk_block(caller, own_class, handler);
            }
            Stmt::Expr { expr, .. } => self.walk_expr(caller, own_class, expr),
            Stmt::Block(b) => self.walk_block(caller, own_class, b),
        }
    }

    fn add_edge(&mut self, caller: &str, callee: MethodId, expr: &Expr) {
        self.edges
            .insert((caller.to_string(), callee, expr.span.line, expr.span.col));
    }

    fn walk_expr(&mut self, caller: &str, own_class: Option<&str>, expr: &Expr) {
        match &expr.kind {
            ExprKind::Call { callee, args } => {
                if let Some(f) = self
                    .project
                    .functions
                    .get(callee)
                    .filter(|f| !f.in_test_file)
                {
                    let id = function_id(&f.file, &f.decl.name, f.decl.params.len());
                    self.add_edge(caller, id, expr);
                } else if !is_builtin_function(callee) {
                    self.dangling.push(DanglingCall {
                        caller: caller.to_string(),
                        name: callee.clone(),
                        line: expr.span.line,
                    });
                }
                for a in args {
                    self.walk_expr(caller, own_class, a);
                }
            }
            ExprKind::MethodCall {
                object,
                method,
                args,
            } => {
                let this_receiver = matches!(object.kind, ExprKind::This);
                let own = own_class.and_then(|c| self.project.classes.get(c));
                let resolved_on_this =
                    this_receiver && own.is_some_and(|class| class.methods.contains_key(method));
                if resolved_on_this {
                    let class = own.expect("checked");
                    let id = method_id(
                        &class.file,
                        &class.decl.name,
                        method,
                        class.methods[method].decl.params.len(),
                    );
                    self.add_edge(caller, id, expr);
                } else {
                    // Dynamic dispatch: every application method with this
                    // declared name is a candidate target.
                    let candidates = self.methods_by_name.get(method.as_str());
                    match candidates {
                        Some(ids) => {
                            for id in ids.clone() {
                                self.add_edge(caller, id, expr);
                            }
                        }
                        None if LIST_BUILTIN_METHODS.contains(&method.as_str()) => {}
                        None => self.dangling.push(DanglingCall {
                            caller: caller.to_string(),
                            name: method.clone(),
                            line: expr.span.line,
                        }),
                    }
                }
                self.walk_expr(caller, own_class, object);
                for a in args {
                    self.walk_expr(caller, own_class, a);
                }
            }
            ExprKind::New { class, args } => {
                if let Some(def) = self.project.classes.get(class).filter(|c| !c.in_test_file) {
                    if let Some(ctor_id) = &def.ctor_id {
                        self.add_edge(caller, ctor_id.clone(), expr);
                    }
                }
                for a in args {
                    self.walk_expr(caller, own_class, a);
                }
            }
            ExprKind::Field { object, .. } => self.walk_expr(caller, own_class, object),
            ExprKind::ListLit(elems) => {
                for e in elems {
                    self.walk_expr(caller, own_class, e);
                }
            }
            ExprKind::Unary { operand, .. } => self.walk_expr(caller, own_class, operand),
            ExprKind::Binary { lhs, rhs, .. } => {
                self.walk_expr(caller, own_class, lhs);
                self.walk_expr(caller, own_class, rhs);
            }
            ExprKind::IsType { object, .. } => self.walk_expr(caller, own_class, object),
            _ => {}
        }
    }
}

fn is_builtin_function(name: &str) -> bool {
    matches!(
        name,
        "assert"
            | "assertTrue"
            | "assertFalse"
            | "assertEquals"
            | "assertNull"
            | "assertNotNull"
            | "fail"
            | "print"
            | "str"
            | "len"
            | "charAt"
            | "currentTimeMillis"
            | "nanoTime"
    ) || name.starts_with("__obs")
}

/// Ranked externally-invokable methods that can reach `target`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntryPoints {
    pub methods: Vec<MethodId>,
    /// True when the search hit the depth cap and may be incomplete.
    pub capped: bool,
}

/// If the target is externally invokable it is its own entry point;
/// otherwise the public methods with a call path to it, ranked by shortest
/// path then id.
pub fn accessible_entry_points(
    graph: &CallGraph,
    descriptors: &BTreeMap<MethodId, MethodDescriptor>,
    target: &MethodId,
) -> EntryPoints {
    if descriptors
        .get(target)
        .is_some_and(|d| d.visibility == Visibility::ExternallyInvokable)
    {
        return EntryPoints {
            methods: vec![target.clone()],
            capped: false,
        };
    }
    let (dist, capped) = graph.bfs(target, true, SEARCH_DEPTH_CAP);
    let mut ranked: Vec<(usize, MethodId)> = dist
        .into_iter()
        .filter(|(id, d)| {
            *d > 0
                && descriptors
                    .get(id)
                    .is_some_and(|m| m.visibility == Visibility::ExternallyInvokable)
        })
        .map(|(id, d)| (d, id))
        .collect();
    ranked.sort();
    EntryPoints {
        methods: ranked.into_iter().map(|(_, id)| id).collect(),
        capped,
    }
}

/// Externally invokable methods through which a test can observe `field` of
/// `class`: methods with a call path to a direct reader of the field.
/// Methods that write the field are mutators, not observers, and are
/// excluded as reader endpoints; constructors never qualify.
pub fn field_observers(
    project: &Project,
    graph: &CallGraph,
    descriptors: &BTreeMap<MethodId, MethodDescriptor>,
    class: &str,
    field: &str,
) -> Vec<MethodId> {
    let Some(class_def) = project.classes.get(class) else {
        return Vec::new();
    };
    let mut readers: BTreeSet<MethodId> = BTreeSet::new();
    for m in class_def.methods.values() {
        let mut usage = FieldUsage::default();
        scan_block_for_field(&m.decl.body, field, &mut usage);
        if usage.reads && !usage.writes {
            readers.insert(m.id.clone());
        }
    }
    if readers.is_empty() {
        return Vec::new();
    }

    // Shortest distance from each externally invokable method to a reader.
    let mut best: BTreeMap<MethodId, usize> = BTreeMap::new();
    for reader in &readers {
        let (dist, _) = graph.bfs(reader, true, SEARCH_DEPTH_CAP);
        for (id, d) in dist {
            let admissible = descriptors.get(&id).is_some_and(|m| {
                m.visibility == Visibility::ExternallyInvokable && !m.is_constructor
            });
            if admissible {
                let entry = best.entry(id).or_insert(usize::MAX);
                *entry = (*entry).min(d);
            }
        }
    }
    let mut ranked: Vec<(usize, MethodId)> = best.into_iter().map(|(id, d)| (d, id)).collect();
    ranked.sort();
    ranked.into_iter().map(|(_, id)| id).collect()
}

#[derive(Default)]
struct FieldUsage {
    reads: bool,
    writes: bool,
}

fn scan_block_for_field(block: &Block, field: &str, usage: &mut FieldUsage) {
    for stmt in &block.stmts {
        scan_stmt_for_field(stmt, field, usage);
    }
}

fn scan_stmt_for_field(stmt: &Stmt, field: &str, usage: &mut FieldUsage) {
    match stmt {
        Stmt::Var { init, .. } => scan_expr_for_field(init, field, usage),
        Stmt::Assign { target, value, .. } => {
            if let AssignTarget::Field {
                object,
                field: assigned,
                ..
            } = target
            {
                if assigned == field {
                    usage.writes = true;
                }
                scan_expr_for_field(object, field, usage);
            }
            scan_expr_for_field(value, field, usage);
        }
        Stmt::If {
            cond,
            then_block,
            else_block,
            ..
        } => {
            scan_expr_for_field(cond, field, usage);
            scan_block_for_field(then_block, field, usage);
            if let Some(b) = else_block {
                scan_block_for_field(b, field, usage);
            }
        }
        Stmt::While { cond, body, .. } => {
            scan_expr_for_field(cond, field, usage);
            scan_block_for_field(body, field, usage);
        }
        Stmt::For { iter, body, .. } => {
            scan_expr_for_field(iter, field, usage);
            scan_block_for_field(body, field, usage);
        }
        Stmt::Return { value: Some(v), .. } => scan_expr_for_field(v, field, usage),
        Stmt::Return { value: None, .. } => {}
        Stmt::Throw { value, .. } => scan_expr_for_field(value, field, usage),
        Stmt::Try { body, handler, .. } => {
            scan_block_for_field(body, field, usage);
            scan_block_for_field(handler, field, usage);
        }
        Stmt::Expr { expr, .. } => scan_expr_for_field(expr, field, usage),
        Stmt::Block(b) => scan_block_for_field(b, field, usage),
    }
}

fn scan_expr_for_field(expr: &Expr, field: &str, usage: &mut FieldUsage) {
    match &expr.kind {
        ExprKind::Field {
            object,
            field: read,
        } => {
            if read == field {
                usage.reads = true;
            }
            scan_expr_for_field(object, field, usage);
        }
        ExprKind::ListLit(elems) => {
            for e in elems {
                scan_expr_for_field(e, field, usage);
            }
        }
        ExprKind::Call { args, .. } | ExprKind::New { args, .. } => {
            for a in args {
                scan_expr_for_field(a, field, usage);
            }
        }
        ExprKind::MethodCall { object, args, .. } => {
            scan_expr_for_field(object, field, usage);
            for a in args {
                scan_expr_for_field(a, field, usage);
            }
        }
        ExprKind::Unary { operand, .. } => scan_expr_for_field(operand, field, usage),
        ExprKind::Binary { lhs, rhs, .. } => {
            scan_expr_for_field(lhs, field, usage);
            scan_expr_for_field(rhs, field, usage);
        }
        ExprKind::IsType { object, .. } => scan_expr_for_field(object, field, usage),
        _ => {}
    }
}

/// Dynamic stack distance of a transformed method: the minimum frame count
/// from the test frame over all observed invocations (direct call = 1).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackDistanceSample {
    pub transformation_id: String,
    pub method: MethodId,
    pub distance: u32,
    pub test_id: TestId,
    /// Method-id chain from the test to the method at the shallowest
    /// observed invocation.
    pub chain: Vec<MethodId>,
}

pub fn measure_stack_distance(
    coverage: &CoverageData,
    transformation_id: &str,
    method: &MethodId,
    covering_tests: &BTreeSet<TestId>,
) -> Result<StackDistanceSample> {
    let mut best: Option<(u32, &TestId, &[String])> = None;
    for test in covering_tests {
        if let Some(trace) = coverage.dynamics(test, method) {
            let candidate = (trace.min_depth, test, trace.chain.as_slice());
            best = match best {
                Some(current) if current.0 <= candidate.0 => Some(current),
                _ => Some(candidate),
            };
        }
    }
    match best {
        Some((distance, test_id, chain)) => Ok(StackDistanceSample {
            transformation_id: transformation_id.to_string(),
            method: method.clone(),
            distance,
            test_id: test_id.clone(),
            chain: chain.to_vec(),
        }),
        None => Err(Error::ReachViolated {
            method: method.clone(),
            tests: covering_tests.len(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapter::discover_methods_in;
    use crate::config::PathFilter;

    const SET_SRC: &str = include_str!("../../../fixtures/versioned-set/src/versioned_set.mini");

    fn setup() -> (Project, CallGraph, BTreeMap<MethodId, MethodDescriptor>) {
        let project =
            Project::from_sources(vec![("src/versioned_set.mini".into(), SET_SRC.into())]);
        assert!(project.errors.is_empty());
        let graph = build_call_graph(&project);
        let descriptors: BTreeMap<MethodId, MethodDescriptor> =
            discover_methods_in(&project, &PathFilter::default())
                .methods
                .into_iter()
                .map(|m| (m.id.clone(), m))
                .collect();
        (project, graph, descriptors)
    }

    fn id(name: &str, arity: usize) -> String {
        format!("src/versioned_set.mini::VersionedSet::{name}/{arity}")
    }

    #[test]
    fn fixture_edges_exist() {
        let (_, graph, _) = setup();
        assert!(graph.has_edge(&id("add", 1), &id("incrementVersion", 0)));
        assert!(graph.has_edge(&id("intersect", 1), &id("isEmpty", 0)));
        assert!(graph.has_edge(&id("isEmpty", 0), &id("size", 0)));
        assert!(graph.has_edge(&id("equals", 1), &id("contains", 1)));
    }

    #[test]
    fn leaf_method_has_no_outgoing_edges() {
        let (_, graph, _) = setup();
        assert_eq!(graph.callees(&id("getVersion", 0)).count(), 0);
    }

    #[test]
    fn public_target_is_its_own_entry_point() {
        let (_, graph, descriptors) = setup();
        let entry = accessible_entry_points(&graph, &descriptors, &id("isEmpty", 0));
        assert_eq!(entry.methods, vec![id("isEmpty", 0)]);
        assert!(!entry.capped);
    }

    #[test]
    fn private_method_resolves_to_public_caller() {
        let (_, graph, descriptors) = setup();
        let entry = accessible_entry_points(&graph, &descriptors, &id("incrementVersion", 0));
        // `add` is the only direct caller; `intersect` reaches it through
        // `result.add(item)` and ranks behind by path length.
        assert_eq!(entry.methods.first(), Some(&id("add", 1)));
        assert_eq!(entry.methods, vec![id("add", 1), id("intersect", 1)]);
    }

    #[test]
    fn unreachable_private_method_has_no_entry_points() {
        let project = Project::from_sources(vec![(
            "src/a.mini".into(),
            "class A { private fn hidden(): int { return 1; } }".into(),
        )]);
        let graph = build_call_graph(&project);
        let descriptors: BTreeMap<MethodId, MethodDescriptor> =
            discover_methods_in(&project, &PathFilter::default())
                .methods
                .into_iter()
                .map(|m| (m.id.clone(), m))
                .collect();
        let entry =
            accessible_entry_points(&graph, &descriptors, &"src/a.mini::A::hidden/0".to_string());
        assert!(entry.methods.is_empty());
    }

    #[test]
    fn version_field_is_observed_only_through_its_getter() {
        let (project, graph, descriptors) = setup();
        let observers = field_observers(&project, &graph, &descriptors, "VersionedSet", "version");
        // incrementVersion reads the field but also writes it, so it is a
        // mutator; intersect writes it outright. Only getVersion remains.
        assert_eq!(observers, vec![id("getVersion", 0)]);
    }

    #[test]
    fn elements_field_observers_include_transitive_readers() {
        let (project, graph, descriptors) = setup();
        let observers = field_observers(&project, &graph, &descriptors, "VersionedSet", "elements");
        let expected: BTreeSet<MethodId> =
            ["add", "contains", "equals", "intersect", "isEmpty", "size"]
                .iter()
                .map(|n| {
                    id(
                        n,
                        if matches!(*n, "add" | "contains" | "equals" | "intersect") {
                            1
                        } else {
                            0
                        },
                    )
                })
                .collect();
        assert_eq!(observers.iter().cloned().collect::<BTreeSet<_>>(), expected);
        // Direct readers rank before the transitive isEmpty.
        let is_empty_rank = observers
            .iter()
            .position(|m| m == &id("isEmpty", 0))
            .unwrap();
        let size_rank = observers.iter().position(|m| m == &id("size", 0)).unwrap();
        assert!(size_rank < is_empty_rank);
    }

    #[test]
    fn field_with_no_readers_has_no_observers() {
        let project = Project::from_sources(vec![(
            "src/w.mini".into(),
            "class W { var secret; constructor() { this.secret = 1; } fn poke(): void { this.secret = 2; } }"
                .into(),
        )]);
        let graph = build_call_graph(&project);
        let descriptors: BTreeMap<MethodId, MethodDescriptor> =
            discover_methods_in(&project, &PathFilter::default())
                .methods
                .into_iter()
                .map(|m| (m.id.clone(), m))
                .collect();
        assert!(field_observers(&project, &graph, &descriptors, "W", "secret").is_empty());
    }

    #[test]
    fn ranking_is_stable() {
        let (project, graph, descriptors) = setup();
        let a = field_observers(&project, &graph, &descriptors, "VersionedSet", "elements");
        let b = field_observers(&project, &graph, &descriptors, "VersionedSet", "elements");
        assert_eq!(a, b);
    }
}
