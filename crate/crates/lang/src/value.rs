//! Runtime values for the mini interpreter.

use std::cell::RefCell;
use std::rc::Rc;

/// Class shape shared by every instance: name plus field names in
/// declaration order.
#[derive(Debug, PartialEq, Eq)]
pub struct ClassInfo {
    pub name: String,
    pub fields: Vec<String>,
}

#[derive(Debug)]
pub struct ObjectData {
    pub class: Rc<ClassInfo>,
    /// One slot per `ClassInfo::fields` entry.
    pub fields: RefCell<Vec<Value>>,
}

#[derive(Debug, Clone)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Char(char),
    Str(Rc<str>),
    List(Rc<RefCell<Vec<Value>>>),
    Object(Rc<ObjectData>),
    /// Distinguished assertion-failure payload. Thrown by the assert
    /// builtins; a test that ends with one of these *fails*, any other
    /// uncaught value makes it *error*. First-class so catch-and-rethrow
    /// keeps the distinction.
    Failure(Rc<str>),
    Null,
    /// Result of void calls and statements; never observable state.
    Unit,
}

impl Value {
    pub fn str(s: impl Into<String>) -> Value {
        Value::Str(Rc::from(s.into().into_boxed_str()))
    }

    pub fn list(items: Vec<Value>) -> Value {
        Value::List(Rc::new(RefCell::new(items)))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Bool(_) => "bool",
            Value::Char(_) => "char",
            Value::Str(_) => "str",
            Value::List(_) => "list",
            Value::Object(_) => "object",
            Value::Failure(_) => "failure",
            Value::Null => "null",
            Value::Unit => "void",
        }
    }

    pub fn is_unit(&self) -> bool {
        matches!(self, Value::Unit)
    }
}

/// Structural equality: primitives, strings and chars by value, lists
/// element-wise, objects by identity.
pub fn values_equal(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => x == y,
        (Value::Float(x), Value::Float(y)) => x == y,
        (Value::Bool(x), Value::Bool(y)) => x == y,
        (Value::Char(x), Value::Char(y)) => x == y,
        (Value::Str(x), Value::Str(y)) => x == y,
        (Value::Failure(x), Value::Failure(y)) => x == y,
        (Value::Null, Value::Null) => true,
        (Value::Unit, Value::Unit) => true,
        (Value::List(x), Value::List(y)) => {
            if Rc::ptr_eq(x, y) {
                return true;
            }
            let (x, y) = (x.borrow(), y.borrow());
            x.len() == y.len() && x.iter().zip(y.iter()).all(|(a, b)| values_equal(a, b))
        }
        (Value::Object(x), Value::Object(y)) => Rc::ptr_eq(x, y),
        _ => false,
    }
}

/// Human-oriented rendering used by `str()`, string concatenation and
/// assertion messages. Deterministic: object identity is never printed.
pub fn display_value(v: &Value) -> String {
    match v {
        Value::Int(x) => x.to_string(),
        Value::Float(x) => format!("{x:?}"),
        Value::Bool(x) => x.to_string(),
        Value::Char(x) => x.to_string(),
        Value::Str(x) => x.to_string(),
        Value::Failure(x) => x.to_string(),
        Value::Null => "null".to_string(),
        Value::Unit => "void".to_string(),
        Value::List(items) => {
            let inner: Vec<String> = items.borrow().iter().map(display_value).collect();
            format!("[{}]", inner.join(", "))
        }
        Value::Object(obj) => format!("<{}>", obj.class.name),
    }
}
