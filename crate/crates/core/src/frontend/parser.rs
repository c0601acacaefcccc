//! Recursive-descent parser with precedence climbing for expressions.
//!
//! Precedence, tightest first: postfix indexing, the derivative tick `'`,
//! unary `-`/`!`, `* /`, `+ -`, comparisons, `&&`, `||`.

use std::collections::HashSet;

use super::ast::*;
use super::lexer::{Token, TokenKind};
use crate::diag::{Diagnostic, Span};

pub fn parse(tokens: &[Token]) -> Result<SyntaxTree, Diagnostic> {
    Parser::new(tokens).tree()
}

/// Parses a single expression; used by tests and tooling.
pub fn parse_expr(tokens: &[Token]) -> Result<Expr, Diagnostic> {
    let mut p = Parser::new(tokens);
    let e = p.expr()?;
    p.skip_newlines();
    if !p.at_end() {
        return Err(p.unexpected(&["end of input"]));
    }
    Ok(e)
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl<'t> Parser<'t> {
    fn new(tokens: &'t [Token]) -> Self {
        Parser { tokens, pos: 0 }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<TokenKind> {
        self.tokens.get(self.pos).map(|t| t.kind)
    }

    fn peek_at(&self, ahead: usize) -> Option<TokenKind> {
        self.tokens.get(self.pos + ahead).map(|t| t.kind)
    }

    fn here(&self) -> Span {
        match self.tokens.get(self.pos) {
            Some(t) => t.span(),
            None => self.end_span(),
        }
    }

    fn end_span(&self) -> Span {
        match self.tokens.last() {
            Some(t) => Span::new(t.line, t.col + t.lexeme.chars().count() as u32),
            None => Span::new(1, 1),
        }
    }

    fn bump(&mut self) -> &'t Token {
        let t = &self.tokens[self.pos];
        self.pos += 1;
        t
    }

    fn eat(&mut self, kind: TokenKind) -> bool {
        if self.peek() == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn skip_newlines(&mut self) {
        while self.peek() == Some(TokenKind::Newline) {
            self.pos += 1;
        }
    }

    fn unexpected(&self, expected: &[&str]) -> Diagnostic {
        let found = match self.tokens.get(self.pos) {
            Some(t) if t.kind == TokenKind::Newline => "end of line".to_string(),
            Some(t) => format!("`{}`", t.lexeme),
            None => "end of input".to_string(),
        };
        let list = match expected {
            [] => "more input".to_string(),
            [one] => one.to_string(),
            [init @ .., last] => format!("{} or {}", init.join(", "), last),
        };
        Diagnostic::error(
            self.here(),
            format!("syntax error: expected {list}, found {found}"),
        )
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<&'t Token> {
        if self.peek() == Some(kind) {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&[kind.describe()]))
        }
    }

    fn ident(&mut self) -> PResult<(String, Span)> {
        let t = self.expect(TokenKind::Ident)?;
        Ok((t.lexeme.clone(), t.span()))
    }

    fn end_of_statement(&mut self) -> PResult<()> {
        match self.peek() {
            None | Some(TokenKind::RBrace) => Ok(()),
            Some(TokenKind::Newline) => {
                self.skip_newlines();
                Ok(())
            }
            _ => Err(self.unexpected(&["end of line"])),
        }
    }

    fn tree(mut self) -> PResult<SyntaxTree> {
        let mut constants = Vec::new();
        let mut parameters = Vec::new();
        let mut function: Option<FuncDecl> = None;
        let mut names: HashSet<String> = HashSet::new();
        let mut declare = |name: &str, span: Span| -> PResult<()> {
            if !names.insert(name.to_string()) {
                return Err(Diagnostic::error(
                    span,
                    format!("duplicate declaration of `{name}`"),
                ));
            }
            Ok(())
        };
        self.skip_newlines();
        while !self.at_end() {
            match self.peek() {
                Some(TokenKind::Const) => {
                    let span = self.bump().span();
                    self.expect(TokenKind::Int)?;
                    let (name, nspan) = self.ident()?;
                    self.expect(TokenKind::Assign)?;
                    let value = self.expr()?;
                    declare(&name, nspan)?;
                    constants.push(ConstDecl { name, value, span });
                }
                Some(TokenKind::Parameter) => {
                    let span = self.bump().span();
                    self.expect(TokenKind::LBracket)?;
                    let size = self.expr()?;
                    self.expect(TokenKind::RBracket)?;
                    let (name, nspan) = self.ident()?;
                    declare(&name, nspan)?;
                    parameters.push(ParameterDecl { name, size, span });
                }
                Some(TokenKind::Real) | Some(TokenKind::Int) => {
                    let span = self.here();
                    if function.is_some() {
                        return Err(Diagnostic::error(
                            span,
                            "only one function declaration is allowed per program",
                        ));
                    }
                    let f = self.function()?;
                    declare(&f.name, f.span)?;
                    for a in &f.args {
                        declare(&a.name, a.span)?;
                    }
                    function = Some(f);
                }
                _ => {
                    return Err(self.unexpected(&[
                        "`const`",
                        "`parameter`",
                        "function declaration",
                    ]))
                }
            }
            if !self.at_end() {
                if self.peek() != Some(TokenKind::Newline) {
                    return Err(self.unexpected(&["end of line"]));
                }
                self.skip_newlines();
            }
        }
        let function = function.ok_or_else(|| {
            Diagnostic::error(self.end_span(), "program has no function declaration")
        })?;
        Ok(SyntaxTree {
            constants,
            parameters,
            function,
        })
    }

    fn type_spec(&mut self) -> PResult<TypeSpec> {
        match self.peek() {
            Some(TokenKind::Int) => {
                self.bump();
                Ok(TypeSpec::Int)
            }
            Some(TokenKind::Real) => {
                self.bump();
                if self.eat(TokenKind::LBracket) {
                    let size = self.expr()?;
                    self.expect(TokenKind::RBracket)?;
                    Ok(TypeSpec::RealArray(size))
                } else {
                    Ok(TypeSpec::Real)
                }
            }
            _ => Err(self.unexpected(&["`real`", "`int`"])),
        }
    }

    fn function(&mut self) -> PResult<FuncDecl> {
        let ret = self.type_spec()?;
        let (name, span) = self.ident()?;
        self.skip_newlines();
        self.expect(TokenKind::LParen)?;
        let mut args = Vec::new();
        if !self.eat(TokenKind::RParen) {
            loop {
                let span = self.here();
                let ty = self.type_spec()?;
                let (name, _) = self.ident()?;
                args.push(Arg { ty, name, span });
                if self.eat(TokenKind::Comma) {
                    continue;
                }
                if self.eat(TokenKind::RParen) {
                    break;
                }
                return Err(self.unexpected(&["`,`", "`)`"]));
            }
        }
        self.skip_newlines();
        let body = self.block()?;
        Ok(FuncDecl {
            ret,
            name,
            args,
            body,
            span,
        })
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect(TokenKind::LBrace)?;
        self.skip_newlines();
        let mut body = Vec::new();
        while self.peek() != Some(TokenKind::RBrace) {
            if self.at_end() {
                return Err(self.unexpected(&["`}`"]));
            }
            body.push(self.statement()?);
            self.end_of_statement()?;
        }
        self.bump();
        Ok(body)
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let span = self.here();
        let kind = match self.peek() {
            Some(TokenKind::Real) | Some(TokenKind::Int) => {
                let ty = self.type_spec()?;
                let (name, _) = self.ident()?;
                let init = if self.eat(TokenKind::Assign) {
                    Some(self.expr()?)
                } else {
                    None
                };
                StmtKind::VarDecl { ty, name, init }
            }
            Some(TokenKind::For) => {
                self.bump();
                let (var, _) = self.ident()?;
                self.expect(TokenKind::Assign)?;
                self.expect(TokenKind::LBracket)?;
                let lo = self.expr()?;
                self.expect(TokenKind::Colon)?;
                let hi = self.expr()?;
                self.expect(TokenKind::RBracket)?;
                self.skip_newlines();
                let body = if self.peek() == Some(TokenKind::LBrace) {
                    self.block()?
                } else if self.at_end() {
                    return Err(self.unexpected(&["loop body"]));
                } else {
                    vec![self.statement()?]
                };
                StmtKind::For { var, lo, hi, body }
            }
            Some(TokenKind::If) => {
                self.bump();
                self.expect(TokenKind::LParen)?;
                let cond = self.expr()?;
                self.expect(TokenKind::RParen)?;
                self.skip_newlines();
                let then_body = self.block()?;
                let mut look = self.pos;
                while self.tokens.get(look).map(|t| t.kind) == Some(TokenKind::Newline) {
                    look += 1;
                }
                let else_body = if self.tokens.get(look).map(|t| t.kind) == Some(TokenKind::Else) {
                    self.pos = look + 1;
                    self.skip_newlines();
                    if self.peek() == Some(TokenKind::If) {
                        Some(vec![self.statement()?])
                    } else {
                        Some(self.block()?)
                    }
                } else {
                    None
                };
                StmtKind::If {
                    cond,
                    then_body,
                    else_body,
                }
            }
            Some(TokenKind::Discard) => {
                self.bump();
                let target = self.place()?;
                self.expect(TokenKind::Tick)?;
                let wrt = self.place()?;
                StmtKind::Discard { target, wrt }
            }
            Some(TokenKind::Ident) => {
                let target = self.place()?;
                if self.eat(TokenKind::Tick) {
                    let wrt = self.place()?;
                    self.expect(TokenKind::Assign)?;
                    let value = self.expr()?;
                    StmtKind::DerivAssign { target, wrt, value }
                } else {
                    let op = match self.peek() {
                        Some(TokenKind::Assign) => AssignOp::Set,
                        Some(TokenKind::PlusAssign) => AssignOp::Add,
                        _ => return Err(self.unexpected(&["`=`", "`+=`", "`'`"])),
                    };
                    self.bump();
                    let value = self.expr()?;
                    StmtKind::Assign { target, op, value }
                }
            }
            _ => {
                return Err(self.unexpected(&[
                    "`real`",
                    "`int`",
                    "`for`",
                    "`if`",
                    "`discard`",
                    "identifier",
                ]))
            }
        };
        Ok(Stmt { kind, span })
    }

    fn place(&mut self) -> PResult<Place> {
        let (name, span) = self.ident()?;
        let sel = if self.eat(TokenKind::LBracket) {
            let lo = if self.peek() == Some(TokenKind::Colon) {
                None
            } else {
                Some(Box::new(self.expr()?))
            };
            if self.eat(TokenKind::Colon) {
                let hi = if self.peek() == Some(TokenKind::RBracket) {
                    None
                } else {
                    Some(Box::new(self.expr()?))
                };
                self.expect(TokenKind::RBracket)?;
                Selector::Slice(lo, hi)
            } else {
                self.expect(TokenKind::RBracket)?;
                // `lo` is always present here: an empty `[]` fails in expr().
                Selector::Index(lo.expect("index expression"))
            }
        } else {
            Selector::Whole
        };
        Ok(Place { name, sel, span })
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek().and_then(binop_of) {
            if op.precedence() < min_prec {
                break;
            }
            let span = self.here();
            self.bump();
            let rhs = self.binary(op.precedence() + 1)?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let span = self.here();
        match self.peek() {
            Some(TokenKind::Minus) => {
                self.bump();
                let e = self.unary()?;
                Ok(Expr::new(ExprKind::Neg(Box::new(e)), span))
            }
            Some(TokenKind::Bang) => {
                self.bump();
                let e = self.unary()?;
                Ok(Expr::new(ExprKind::Not(Box::new(e)), span))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let span = self.here();
        match self.peek() {
            Some(TokenKind::IntLit) => {
                let t = self.bump();
                // the lexer already validated the range
                let v = t.lexeme.parse::<i64>().unwrap_or_default();
                Ok(Expr::new(ExprKind::Int(v), span))
            }
            Some(TokenKind::RealLit) => {
                let t = self.bump();
                let v = t.lexeme.parse::<f64>().unwrap_or_default();
                Ok(Expr::new(ExprKind::Real(v), span))
            }
            Some(TokenKind::LParen) => {
                self.bump();
                let e = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            Some(TokenKind::Ident) if self.peek_at(1) == Some(TokenKind::LParen) => {
                let (name, _) = self.ident()?;
                self.bump();
                let mut args = Vec::new();
                if !self.eat(TokenKind::RParen) {
                    loop {
                        args.push(self.expr()?);
                        if self.eat(TokenKind::Comma) {
                            continue;
                        }
                        self.expect(TokenKind::RParen)?;
                        break;
                    }
                }
                Ok(Expr::new(ExprKind::Call(name, args), span))
            }
            Some(TokenKind::Ident) => {
                let place = self.place()?;
                if self.eat(TokenKind::Tick) {
                    let wrt = self.place()?;
                    Ok(Expr::new(ExprKind::Deriv(place, wrt), span))
                } else {
                    Ok(Expr::new(ExprKind::Place(place), span))
                }
            }
            _ => Err(self.unexpected(&["expression"])),
        }
    }
}

fn binop_of(kind: TokenKind) -> Option<BinOp> {
    use TokenKind::*;
    Some(match kind {
        Plus => BinOp::Add,
        Minus => BinOp::Sub,
        Star => BinOp::Mul,
        Slash => BinOp::Div,
        EqEq => BinOp::Eq,
        NotEq => BinOp::Ne,
        Lt => BinOp::Lt,
        Le => BinOp::Le,
        Gt => BinOp::Gt,
        Ge => BinOp::Ge,
        AndAnd => BinOp::And,
        OrOr => BinOp::Or,
        _ => return None,
    })
}
