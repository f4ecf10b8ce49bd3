//! State extraction from runtime values.
//!
//! The *basic state* of a value is a small set of property/value pairs:
//! scalars expose their own value, references expose nullness, lists expose
//! their size. The *(full) state* additionally expands one level into an
//! object's fields, each field contributing its basic state under the field
//! name. Field expansion is exactly one level deep, so cyclic object graphs
//! are harmless.

use serde::{Deserialize, Serialize};

use crate::value::Value;

/// Rendered length limit for string property values.
const MAX_STRING_CHARS: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateProp {
    /// Dotted property path, e.g. `value`, `null`, `elements.size`.
    pub path: String,
    /// Rendered value; comparisons are exact on this text.
    pub value: String,
    /// Value kind tag: int, float, bool, char, str, null.
    pub kind: String,
}

fn prop(path: &str, value: String, kind: &str) -> StateProp {
    StateProp {
        path: path.to_string(),
        value,
        kind: kind.to_string(),
    }
}

/// Render a scalar value for the observation log. Strings longer than the
/// limit are truncated and tagged with their full length.
pub fn render_scalar(v: &Value) -> (String, &'static str) {
    match v {
        Value::Int(x) => (x.to_string(), "int"),
        Value::Float(x) => (format!("{x:?}"), "float"),
        Value::Bool(x) => (x.to_string(), "bool"),
        Value::Char(x) => (x.to_string(), "char"),
        Value::Str(x) => (truncate_text(x), "str"),
        Value::Failure(x) => (truncate_text(x), "str"),
        Value::Null => ("null".to_string(), "null"),
        other => (format!("<{}>", other.kind_name()), "opaque"),
    }
}

fn truncate_text(s: &str) -> String {
    let count = s.chars().count();
    if count <= MAX_STRING_CHARS {
        s.to_string()
    } else {
        let head: String = s.chars().take(MAX_STRING_CHARS).collect();
        format!("{head}...[len={count}]")
    }
}

/// Basic state of a value: scalars yield `(value, v)`, object references
/// yield `(null, flag)`, lists yield nullness plus `(size, n)`.
pub fn basic_state(v: &Value) -> Vec<StateProp> {
    match v {
        Value::Int(_)
        | Value::Float(_)
        | Value::Bool(_)
        | Value::Char(_)
        | Value::Str(_)
        | Value::Failure(_) => {
            let (value, kind) = render_scalar(v);
            vec![prop("value", value, kind)]
        }
        Value::Null => vec![prop("null", "true".into(), "bool")],
        Value::Object(_) => vec![prop("null", "false".into(), "bool")],
        Value::List(items) => vec![
            prop("null", "false".into(), "bool"),
            prop("size", items.borrow().len().to_string(), "int"),
        ],
        Value::Unit => vec![],
    }
}

/// Full state: the basic state plus, for objects, the basic state of every
/// field prefixed by the field name. The `value` leaf of a scalar field
/// collapses into the bare field name, so an integer field `version` shows
/// up as `(version, 0)` rather than `(version.value, 0)`.
pub fn value_state(v: &Value) -> Vec<StateProp> {
    let mut props = basic_state(v);
    if let Value::Object(obj) = v {
        let fields = obj.fields.borrow();
        for (name, field_value) in obj.class.fields.iter().zip(fields.iter()) {
            for p in basic_state(field_value) {
                let path = if p.path == "value" {
                    name.clone()
                } else {
                    format!("{name}.{}", p.path)
                };
                props.push(StateProp { path, ..p });
            }
        }
    }
    props
}
