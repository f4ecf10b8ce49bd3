//! Recursive-descent parser producing the `ast` types.

use crate::ast::*;
use crate::error::{LangError, Pos, Result};
use crate::lexer::Lexer;
use crate::token::{Token, TokenKind};

pub fn parse_file(path: &str, src: &str) -> Result<SourceFile> {
    let tokens = Lexer::new(path, src).tokenize()?;
    let mut parser = Parser {
        file: path.to_string(),
        tokens,
        idx: 0,
    };
    parser.file_items(path)
}

/// Parse a single expression, used by tests and tooling.
pub fn parse_expr(src: &str) -> Result<Expr> {
    let tokens = Lexer::new("<expr>", src).tokenize()?;
    let mut parser = Parser {
        file: "<expr>".to_string(),
        tokens,
        idx: 0,
    };
    let expr = parser.expr()?;
    parser.expect(TokenKind::Eof)?;
    Ok(expr)
}

struct Parser {
    file: String,
    tokens: Vec<Token>,
    idx: usize,
}

impl Parser {
    fn file_items(&mut self, path: &str) -> Result<SourceFile> {
        let mut items = Vec::new();
        while !self.check(&TokenKind::Eof) {
            items.push(self.item()?);
        }
        Ok(SourceFile {
            path: path.to_string(),
            items,
        })
    }

    fn item(&mut self) -> Result<Item> {
        match self.peek_kind() {
            TokenKind::Class => Ok(Item::Class(self.class_decl()?)),
            TokenKind::Test => Ok(Item::Test(self.test_decl()?)),
            TokenKind::Fn | TokenKind::Private => Ok(Item::Fn(self.fn_decl()?)),
            other => Err(self.error(format!(
                "expected `class`, `fn`, `test` or `private`, found {}",
                other.describe()
            ))),
        }
    }

    fn class_decl(&mut self) -> Result<ClassDecl> {
        let start = self.pos();
        self.expect(TokenKind::Class)?;
        let name = self.ident()?;
        self.expect(TokenKind::LBrace)?;
        let mut fields = Vec::new();
        let mut ctor = None;
        let mut methods = Vec::new();
        while !self.check(&TokenKind::RBrace) {
            match self.peek_kind() {
                TokenKind::Var => {
                    let fstart = self.pos();
                    self.expect(TokenKind::Var)?;
                    let fname = self.ident()?;
                    self.expect(TokenKind::Semi)?;
                    fields.push(FieldDecl {
                        name: fname,
                        span: Span::new(fstart, self.prev_end()),
                    });
                }
                TokenKind::Constructor => {
                    let cstart = self.pos();
                    self.expect(TokenKind::Constructor)?;
                    let params = self.param_list()?;
                    let body = self.block()?;
                    if ctor.is_some() {
                        return Err(self.error("class already has a constructor".into()));
                    }
                    ctor = Some(CtorDecl {
                        params,
                        body,
                        span: Span::new(cstart, self.prev_end()),
                    });
                }
                TokenKind::Fn | TokenKind::Private => methods.push(self.fn_decl()?),
                other => {
                    return Err(
                        self.error(format!("expected class member, found {}", other.describe()))
                    )
                }
            }
        }
        self.expect(TokenKind::RBrace)?;
        Ok(ClassDecl {
            name,
            fields,
            ctor,
            methods,
            span: Span::new(start, self.prev_end()),
        })
    }

    fn fn_decl(&mut self) -> Result<FnDecl> {
        let start = self.pos();
        let private = if self.check(&TokenKind::Private) {
            self.bump();
            true
        } else {
            false
        };
        self.expect(TokenKind::Fn)?;
        let name = self.ident()?;
        let params = self.param_list()?;
        let return_type = if self.check(&TokenKind::Colon) {
            self.bump();
            Some(TypeName::parse(&self.ident()?))
        } else {
            None
        };
        let body = self.block()?;
        Ok(FnDecl {
            name,
            params,
            return_type,
            private,
            body,
            span: Span::new(start, self.prev_end()),
        })
    }

    fn test_decl(&mut self) -> Result<TestDecl> {
        let start = self.pos();
        self.expect(TokenKind::Test)?;
        let name = self.ident()?;
        self.expect(TokenKind::LParen)?;
        self.expect(TokenKind::RParen)?;
        let body = self.block()?;
        Ok(TestDecl {
            name,
            body,
            span: Span::new(start, self.prev_end()),
        })
    }

    fn param_list(&mut self) -> Result<Vec<String>> {
        self.expect(TokenKind::LParen)?;
        let mut params = Vec::new();
        if !self.check(&TokenKind::RParen) {
            loop {
                params.push(self.ident()?);
                if self.check(&TokenKind::Comma) {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(TokenKind::RParen)?;
        Ok(params)
    }

    fn block(&mut self) -> Result<Block> {
        let start = self.pos();
        self.expect(TokenKind::LBrace)?;
        let mut stmts = Vec::new();
        while !self.check(&TokenKind::RBrace) {
            stmts.push(self.stmt()?);
        }
        self.expect(TokenKind::RBrace)?;
        Ok(Block {
            stmts,
            span: Span::new(start, self.prev_end()),
        })
    }

    fn stmt(&mut self) -> Result<Stmt> {
        let start = self.pos();
        match self.peek_kind() {
            TokenKind::Var => {
                self.bump();
                let name = self.ident()?;
                self.expect(TokenKind::Assign)?;
                let init = self.expr()?;
                self.expect(TokenKind::Semi)?;
                Ok(Stmt::Var {
                    name,
                    init,
                    span: Span::new(start, self.prev_end()),
                })
            }
            TokenKind::If => self.if_stmt(),
            TokenKind::While => {
                self.bump();
                self.expect(TokenKind::LParen)?;
                let cond = self.expr()?;
                self.expect(TokenKind::RParen)?;
                let body = self.block()?;
                Ok(Stmt::While {
                    cond,
                    body,
                    span: Span::new(start, self.prev_end()),
                })
            }
            TokenKind::For => {
                self.bump();
                self.expect(TokenKind::LParen)?;
                let var = self.ident()?;
                self.expect(TokenKind::In)?;
                let iter = self.expr()?;
                self.expect(TokenKind::RParen)?;
                let body = self.block()?;
                Ok(Stmt::For {
                    var,
                    iter,
                    body,
                    span: Span::new(start, self.prev_end()),
                })
            }
            TokenKind::Return => {
                self.bump();
                let value = if self.check(&TokenKind::Semi) {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect(TokenKind::Semi)?;
                Ok(Stmt::Return {
                    value,
                    span: Span::new(start, self.prev_end()),
                })
            }
            TokenKind::Throw => {
                self.bump();
                let value = self.expr()?;
                self.expect(TokenKind::Semi)?;
                Ok(Stmt::Throw {
                    value,
                    span: Span::new(start, self.prev_end()),
                })
            }
            TokenKind::Try => {
                self.bump();
                let body = self.block()?;
                self.expect(TokenKind::Catch)?;
                self.expect(TokenKind::LParen)?;
                let catch_var = self.ident()?;
                self.expect(TokenKind::RParen)?;
                let handler = self.block()?;
                Ok(Stmt::Try {
                    body,
                    catch_var,
                    handler,
                    span: Span::new(start, self.prev_end()),
                })
            }
            TokenKind::LBrace => Ok(Stmt::Block(self.block()?)),
            _ => {
                let expr = self.expr()?;
                if self.check(&TokenKind::Assign) {
                    let target = match expr.kind {
                        ExprKind::Var(name) => AssignTarget::Var {
                            name,
                            span: expr.span,
                        },
                        ExprKind::Field { object, field } => AssignTarget::Field {
                            object: *object,
                            field,
                            span: expr.span,
                        },
                        _ => {
                            return Err(self
                                .error("assignment target must be a variable or a field".into()))
                        }
                    };
                    self.bump();
                    let value = self.expr()?;
                    self.expect(TokenKind::Semi)?;
                    Ok(Stmt::Assign {
                        target,
                        value,
                        span: Span::new(start, self.prev_end()),
                    })
                } else {
                    self.expect(TokenKind::Semi)?;
                    Ok(Stmt::Expr {
                        expr,
                        span: Span::new(start, self.prev_end()),
                    })
                }
            }
        }
    }

    fn if_stmt(&mut self) -> Result<Stmt> {
        let start = self.pos();
        self.expect(TokenKind::If)?;
        self.expect(TokenKind::LParen)?;
        let cond = self.expr()?;
        self.expect(TokenKind::RParen)?;
        let then_block = self.block()?;
        let else_block = if self.check(&TokenKind::Else) {
            self.bump();
            if self.check(&TokenKind::If) {
                // `else if` nests as an else block holding a single if.
                let nested_start = self.pos();
                let nested = self.if_stmt()?;
                Some(Block {
                    stmts: vec![nested],
                    span: Span::new(nested_start, self.prev_end()),
                })
            } else {
                Some(self.block()?)
            }
        } else {
            None
        };
        Ok(Stmt::If {
            cond,
            then_block,
            else_block,
            span: Span::new(start, self.prev_end()),
        })
    }

    fn expr(&mut self) -> Result<Expr> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.and_expr()?;
        while self.check(&TokenKind::OrOr) {
            self.bump();
            let rhs = self.and_expr()?;
            lhs = self.binary(BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.equality_expr()?;
        while self.check(&TokenKind::AndAnd) {
            self.bump();
            let rhs = self.equality_expr()?;
            lhs = self.binary(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn equality_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.rel_expr()?;
        loop {
            let op = match self.peek_kind() {
                TokenKind::EqEq => BinOp::Eq,
                TokenKind::NotEq => BinOp::NotEq,
                _ => break,
            };
            self.bump();
            let rhs = self.rel_expr()?;
            lhs = self.binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn rel_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.additive_expr()?;
        loop {
            match self.peek_kind() {
                TokenKind::Is => {
                    self.bump();
                    let class = self.ident()?;
                    let span = Span {
                        hi: self.prev_end().offset,
                        ..lhs.span
                    };
                    lhs = Expr {
                        kind: ExprKind::IsType {
                            object: Box::new(lhs),
                            class,
                        },
                        span,
                    };
                }
                TokenKind::Lt | TokenKind::LtEq | TokenKind::Gt | TokenKind::GtEq => {
                    let op = match self.peek_kind() {
                        TokenKind::Lt => BinOp::Lt,
                        TokenKind::LtEq => BinOp::LtEq,
                        TokenKind::Gt => BinOp::Gt,
                        _ => BinOp::GtEq,
                    };
                    self.bump();
                    let rhs = self.additive_expr()?;
                    lhs = self.binary(op, lhs, rhs);
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn additive_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek_kind() {
                TokenKind::Plus => BinOp::Add,
                TokenKind::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = self.binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn mul_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.unary_expr()?;
        loop {
            let op = match self.peek_kind() {
                TokenKind::Star => BinOp::Mul,
                TokenKind::Slash => BinOp::Div,
                TokenKind::Percent => BinOp::Rem,
                _ => break,
            };
            self.bump();
            let rhs = self.unary_expr()?;
            lhs = self.binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary_expr(&mut self) -> Result<Expr> {
        let start = self.pos();
        let op = match self.peek_kind() {
            TokenKind::Bang => Some(UnOp::Not),
            TokenKind::Minus => Some(UnOp::Neg),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let operand = self.unary_expr()?;
            let span = Span::new(start, self.prev_end());
            Ok(Expr {
                kind: ExprKind::Unary {
                    op,
                    operand: Box::new(operand),
                },
                span,
            })
        } else {
            self.postfix_expr()
        }
    }

    fn postfix_expr(&mut self) -> Result<Expr> {
        let start = self.pos();
        let mut expr = self.primary_expr()?;
        while self.check(&TokenKind::Dot) {
            self.bump();
            let name = self.ident()?;
            if self.check(&TokenKind::LParen) {
                let args = self.arg_list()?;
                let span = Span::new(start, self.prev_end());
                expr = Expr {
                    kind: ExprKind::MethodCall {
                        object: Box::new(expr),
                        method: name,
                        args,
                    },
                    span,
                };
            } else {
                let span = Span::new(start, self.prev_end());
                expr = Expr {
                    kind: ExprKind::Field {
                        object: Box::new(expr),
                        field: name,
                    },
                    span,
                };
            }
        }
        Ok(expr)
    }

    fn primary_expr(&mut self) -> Result<Expr> {
        let start = self.pos();
        let token = self.bump().clone();
        let kind = match token.kind {
            TokenKind::Int(v) => ExprKind::Int(v),
            TokenKind::Float(v) => ExprKind::Float(v),
            TokenKind::Str(s) => ExprKind::Str(s),
            TokenKind::Char(c) => ExprKind::Char(c),
            TokenKind::True => ExprKind::Bool(true),
            TokenKind::False => ExprKind::Bool(false),
            TokenKind::Null => ExprKind::Null,
            TokenKind::This => ExprKind::This,
            TokenKind::New => {
                let class = self.ident()?;
                let args = self.arg_list()?;
                ExprKind::New { class, args }
            }
            TokenKind::LBracket => {
                let mut elems = Vec::new();
                if !self.check(&TokenKind::RBracket) {
                    loop {
                        elems.push(self.expr()?);
                        if self.check(&TokenKind::Comma) {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(TokenKind::RBracket)?;
                ExprKind::ListLit(elems)
            }
            TokenKind::LParen => {
                let inner = self.expr()?;
                self.expect(TokenKind::RParen)?;
                // Parenthesized expressions keep the inner node; the wider
                // span keeps splicing and site identity unambiguous.
                inner.kind
            }
            TokenKind::Ident(name) => {
                if self.check(&TokenKind::LParen) {
                    let args = self.arg_list()?;
                    ExprKind::Call { callee: name, args }
                } else {
                    ExprKind::Var(name)
                }
            }
            other => {
                return Err(self.error(format!("expected expression, found {}", other.describe())))
            }
        };
        Ok(Expr {
            kind,
            span: Span::new(start, self.prev_end()),
        })
    }

    fn arg_list(&mut self) -> Result<Vec<Expr>> {
        self.expect(TokenKind::LParen)?;
        let mut args = Vec::new();
        if !self.check(&TokenKind::RParen) {
            loop {
                args.push(self.expr()?);
                if self.check(&TokenKind::Comma) {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(TokenKind::RParen)?;
        Ok(args)
    }

    fn binary(&mut self, op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        let span = Span {
            hi: rhs.span.hi,
            ..lhs.span
        };
        Expr {
            kind: ExprKind::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            },
            span,
        }
    }

    // Token plumbing

    fn peek_kind(&self) -> &TokenKind {
        &self.tokens[self.idx].kind
    }

    fn check(&self, kind: &TokenKind) -> bool {
        self.peek_kind() == kind
    }

    fn pos(&self) -> Pos {
        self.tokens[self.idx].start
    }

    fn prev_end(&self) -> Pos {
        self.tokens[self.idx.saturating_sub(1)].end
    }

    fn bump(&mut self) -> &Token {
        let token = &self.tokens[self.idx];
        if self.idx + 1 < self.tokens.len() {
            self.idx += 1;
        }
        token
    }

    fn expect(&mut self, kind: TokenKind) -> Result<()> {
        if self.check(&kind) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!(
                "expected {}, found {}",
                kind.describe(),
                self.peek_kind().describe()
            )))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek_kind().clone() {
            TokenKind::Ident(name) => {
                self.bump();
                Ok(name)
            }
            other => Err(self.error(format!("expected identifier, found {}", other.describe()))),
        }
    }

    fn error(&self, message: String) -> LangError {
        LangError::Parse {
            file: self.file.clone(),
            pos: self.pos(),
            message,
        }
    }
}
