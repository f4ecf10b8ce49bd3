//! The mini subject language: a small class-based language with a `src/` +
//! `tests/` project layout, parsed, printed and interpreted in-process.
//! The interpreter exposes tracing and state-observation hooks that the
//! analysis pipeline drives through generated `__obs_*` calls.

pub mod ast;
pub mod error;
pub mod interp;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod project;
pub mod state;
pub mod token;
pub mod value;

pub use ast::{Span, TypeName};
pub use error::{LangError, Pos};
pub use interp::{Engine, MethodTrace, ObsRecord, Observer, Session, TestOutcome, Tracer};
pub use project::{Project, SOURCE_EXT, SRC_DIR, TESTS_DIR};
pub use state::{basic_state, render_scalar, value_state, StateProp};
pub use value::{display_value, values_equal, Value};
