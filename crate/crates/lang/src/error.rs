use thiserror::Error;

/// Source position, 1-based line and column plus byte offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub offset: usize,
    pub line: u32,
    pub col: u32,
}

impl Pos {
    pub fn start() -> Self {
        Pos {
            offset: 0,
            line: 1,
            col: 1,
        }
    }
}

impl std::fmt::Display for Pos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Error)]
pub enum LangError {
    #[error("{file}:{pos}: lex error: {message}")]
    Lex {
        file: String,
        pos: Pos,
        message: String,
    },
    #[error("{file}:{pos}: parse error: {message}")]
    Parse {
        file: String,
        pos: Pos,
        message: String,
    },
    #[error("{file}: duplicate definition of `{name}`")]
    Duplicate { file: String, name: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl LangError {
    /// File the error was raised for, when position information exists.
    pub fn file(&self) -> &str {
        match self {
            LangError::Lex { file, .. }
            | LangError::Parse { file, .. }
            | LangError::Duplicate { file, .. }
            | LangError::Io { path: file, .. } => file,
        }
    }
}

pub type Result<T> = std::result::Result<T, LangError>;
