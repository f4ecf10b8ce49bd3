//! Hand-rolled lexer for mini sources. Comments (`//` and `/* */`) are
//! skipped; positions are tracked per byte so spans can be used for exact
//! source splicing.

use crate::error::{LangError, Pos, Result};
use crate::token::{keyword, Token, TokenKind};

pub struct Lexer<'s> {
    src: &'s str,
    file: String,
    pos: Pos,
}

impl<'s> Lexer<'s> {
    pub fn new(file: &str, src: &'s str) -> Self {
        Lexer {
            src,
            file: file.to_string(),
            pos: Pos::start(),
        }
    }

    pub fn tokenize(mut self) -> Result<Vec<Token>> {
        let mut tokens = Vec::new();
        loop {
            self.skip_trivia()?;
            let start = self.pos;
            let Some(c) = self.peek() else {
                tokens.push(Token {
                    kind: TokenKind::Eof,
                    start,
                    end: start,
                });
                return Ok(tokens);
            };
            let kind = match c {
                '(' => self.single(TokenKind::LParen),
                ')' => self.single(TokenKind::RParen),
                '{' => self.single(TokenKind::LBrace),
                '}' => self.single(TokenKind::RBrace),
                '[' => self.single(TokenKind::LBracket),
                ']' => self.single(TokenKind::RBracket),
                ',' => self.single(TokenKind::Comma),
                ';' => self.single(TokenKind::Semi),
                ':' => self.single(TokenKind::Colon),
                '.' => self.single(TokenKind::Dot),
                '+' => self.single(TokenKind::Plus),
                '-' => self.single(TokenKind::Minus),
                '*' => self.single(TokenKind::Star),
                '/' => self.single(TokenKind::Slash),
                '%' => self.single(TokenKind::Percent),
                '=' => self.pair('=', TokenKind::EqEq, TokenKind::Assign),
                '!' => self.pair('=', TokenKind::NotEq, TokenKind::Bang),
                '<' => self.pair('=', TokenKind::LtEq, TokenKind::Lt),
                '>' => self.pair('=', TokenKind::GtEq, TokenKind::Gt),
                '&' => self.double('&', TokenKind::AndAnd, start)?,
                '|' => self.double('|', TokenKind::OrOr, start)?,
                '"' => self.string(start)?,
                '\'' => self.char_lit(start)?,
                c if c.is_ascii_digit() => self.number(start)?,
                c if c.is_alphabetic() || c == '_' => self.ident(),
                other => {
                    return Err(self.err(start, format!("unexpected character `{other}`")));
                }
            };
            tokens.push(Token {
                kind,
                start,
                end: self.pos,
            });
        }
    }

    fn err(&self, pos: Pos, message: String) -> LangError {
        LangError::Lex {
            file: self.file.clone(),
            pos,
            message,
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos.offset..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos.offset += c.len_utf8();
        if c == '\n' {
            self.pos.line += 1;
            self.pos.col = 1;
        } else {
            self.pos.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) -> Result<()> {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('/') if self.src[self.pos.offset..].starts_with("//") => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                Some('/') if self.src[self.pos.offset..].starts_with("/*") => {
                    let open = self.pos;
                    self.bump();
                    self.bump();
                    loop {
                        if self.src[self.pos.offset..].starts_with("*/") {
                            self.bump();
                            self.bump();
                            break;
                        }
                        if self.bump().is_none() {
                            return Err(self.err(open, "unterminated block comment".into()));
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn single(&mut self, kind: TokenKind) -> TokenKind {
        self.bump();
        kind
    }

    fn pair(&mut self, next: char, matched: TokenKind, alone: TokenKind) -> TokenKind {
        self.bump();
        if self.peek() == Some(next) {
            self.bump();
            matched
        } else {
            alone
        }
    }

    fn double(&mut self, expected: char, kind: TokenKind, start: Pos) -> Result<TokenKind> {
        self.bump();
        if self.peek() == Some(expected) {
            self.bump();
            Ok(kind)
        } else {
            Err(self.err(start, format!("expected `{expected}{expected}`")))
        }
    }

    fn string(&mut self, start: Pos) -> Result<TokenKind> {
        self.bump(); // opening quote
        let mut text = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => {
                    return Err(self.err(start, "unterminated string literal".into()))
                }
                Some('"') => return Ok(TokenKind::Str(text)),
                Some('\\') => text.push(self.escape(start)?),
                Some(c) => text.push(c),
            }
        }
    }

    fn char_lit(&mut self, start: Pos) -> Result<TokenKind> {
        self.bump(); // opening quote
        let c = match self.bump() {
            None | Some('\n') => return Err(self.err(start, "unterminated char literal".into())),
            Some('\\') => self.escape(start)?,
            Some('\'') => return Err(self.err(start, "empty char literal".into())),
            Some(c) => c,
        };
        match self.bump() {
            Some('\'') => Ok(TokenKind::Char(c)),
            _ => Err(self.err(
                start,
                "char literal must contain exactly one character".into(),
            )),
        }
    }

    fn escape(&mut self, start: Pos) -> Result<char> {
        match self.bump() {
            Some('n') => Ok('\n'),
            Some('t') => Ok('\t'),
            Some('r') => Ok('\r'),
            Some('0') => Ok('\0'),
            Some('\\') => Ok('\\'),
            Some('"') => Ok('"'),
            Some('\'') => Ok('\''),
            Some(other) => Err(self.err(start, format!("unknown escape `\\{other}`"))),
            None => Err(self.err(start, "unterminated escape".into())),
        }
    }

    fn number(&mut self, start: Pos) -> Result<TokenKind> {
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.bump();
        }
        // A float needs a digit after the dot; `1.add(...)` stays an int
        // followed by a method call.
        let mut is_float = false;
        if self.peek() == Some('.') {
            let after_dot = self.src[self.pos.offset + 1..].chars().next();
            if matches!(after_dot, Some(c) if c.is_ascii_digit()) {
                is_float = true;
                self.bump();
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.bump();
                }
            }
        }
        if matches!(self.peek(), Some('e') | Some('E')) {
            let mut lookahead = self.src[self.pos.offset + 1..].chars();
            let mut next = lookahead.next();
            if matches!(next, Some('+') | Some('-')) {
                next = lookahead.next();
            }
            if matches!(next, Some(c) if c.is_ascii_digit()) {
                is_float = true;
                self.bump();
                if matches!(self.peek(), Some('+') | Some('-')) {
                    self.bump();
                }
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.bump();
                }
            }
        }
        let text = &self.src[start.offset..self.pos.offset];
        if is_float {
            text.parse::<f64>()
                .map(TokenKind::Float)
                .map_err(|e| self.err(start, format!("bad float literal: {e}")))
        } else {
            text.parse::<i64>()
                .map(TokenKind::Int)
                .map_err(|e| self.err(start, format!("integer literal out of range: {e}")))
        }
    }

    fn ident(&mut self) -> TokenKind {
        let start = self.pos.offset;
        while matches!(self.peek(), Some(c) if c.is_alphanumeric() || c == '_') {
            self.bump();
        }
        let word = &self.src[start..self.pos.offset];
        keyword(word).unwrap_or_else(|| TokenKind::Ident(word.to_string()))
    }
}
