//! Syntax tree for mini sources. Every node carries a byte-accurate span so
//! analyses can splice source text and key observation sites by position.

use serde::{Deserialize, Serialize};

use crate::error::Pos;

/// Half-open byte range in one source file, with the line/column of its start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub lo: usize,
    pub hi: usize,
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(start: Pos, end: Pos) -> Self {
        Span {
            lo: start.offset,
            hi: end.offset,
            line: start.line,
            col: start.col,
        }
    }

    pub fn dummy() -> Self {
        Span {
            lo: 0,
            hi: 0,
            line: 0,
            col: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceFile {
    /// Path relative to the project root, `/`-separated.
    pub path: String,
    pub items: Vec<Item>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Class(ClassDecl),
    Fn(FnDecl),
    Test(TestDecl),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDecl {
    pub name: String,
    pub fields: Vec<FieldDecl>,
    pub ctor: Option<CtorDecl>,
    pub methods: Vec<FnDecl>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDecl {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtorDecl {
    pub params: Vec<String>,
    pub body: Block,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnDecl {
    pub name: String,
    pub params: Vec<String>,
    pub return_type: Option<TypeName>,
    pub private: bool,
    pub body: Block,
    /// Whole declaration, keyword through closing brace.
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestDecl {
    pub name: String,
    pub body: Block,
    pub span: Span,
}

/// Declared return type. Anything that is not a primitive name is treated as
/// a class (reference) type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeName {
    Void,
    Bool,
    Int,
    Float,
    Char,
    Str,
    List,
    Class(String),
}

impl TypeName {
    pub fn parse(name: &str) -> TypeName {
        match name {
            "void" => TypeName::Void,
            "bool" => TypeName::Bool,
            "int" => TypeName::Int,
            "float" => TypeName::Float,
            "char" => TypeName::Char,
            "str" => TypeName::Str,
            "list" => TypeName::List,
            other => TypeName::Class(other.to_string()),
        }
    }

    pub fn render(&self) -> String {
        match self {
            TypeName::Void => "void".into(),
            TypeName::Bool => "bool".into(),
            TypeName::Int => "int".into(),
            TypeName::Float => "float".into(),
            TypeName::Char => "char".into(),
            TypeName::Str => "str".into(),
            TypeName::List => "list".into(),
            TypeName::Class(name) => name.clone(),
        }
    }
}

/// Braced statement list. The span covers the braces themselves, which is
/// what body replacement splices over.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Var {
        name: String,
        init: Expr,
        span: Span,
    },
    Assign {
        target: AssignTarget,
        value: Expr,
        span: Span,
    },
    If {
        cond: Expr,
        then_block: Block,
        else_block: Option<Block>,
        span: Span,
    },
    While {
        cond: Expr,
        body: Block,
        span: Span,
    },
    For {
        var: String,
        iter: Expr,
        body: Block,
        span: Span,
    },
    Return {
        value: Option<Expr>,
        span: Span,
    },
    Throw {
        value: Expr,
        span: Span,
    },
    Try {
        body: Block,
        catch_var: String,
        handler: Block,
        span: Span,
    },
    Expr {
        expr: Expr,
        span: Span,
    },
    Block(Block),
}

#[derive(Debug, Clone, PartialEq)]
pub enum AssignTarget {
    Var {
        name: String,
        span: Span,
    },
    Field {
        object: Expr,
        field: String,
        span: Span,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Float(f64),
    Str(String),
    Char(char),
    Bool(bool),
    Null,
    This,
    Var(String),
    ListLit(Vec<Expr>),
    Field {
        object: Box<Expr>,
        field: String,
    },
    /// Call of a top-level function or builtin by bare name.
    Call {
        callee: String,
        args: Vec<Expr>,
    },
    MethodCall {
        object: Box<Expr>,
        method: String,
        args: Vec<Expr>,
    },
    New {
        class: String,
        args: Vec<Expr>,
    },
    Unary {
        op: UnOp,
        operand: Box<Expr>,
    },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    IsType {
        object: Box<Expr>,
        class: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Eq => "==",
            BinOp::NotEq => "!=",
            BinOp::Lt => "<",
            BinOp::LtEq => "<=",
            BinOp::Gt => ">",
            BinOp::GtEq => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }
}

impl Expr {
    /// A constant expression produces the same value on every evaluation and
    /// reads no program state: literals, and unary/binary combinations of
    /// constants. These are not worth observing.
    pub fn is_constant(&self) -> bool {
        match &self.kind {
            ExprKind::Int(_)
            | ExprKind::Float(_)
            | ExprKind::Str(_)
            | ExprKind::Char(_)
            | ExprKind::Bool(_)
            | ExprKind::Null => true,
            ExprKind::Unary { operand, .. } => operand.is_constant(),
            ExprKind::Binary { lhs, rhs, .. } => lhs.is_constant() && rhs.is_constant(),
            _ => false,
        }
    }
}
