//! Tokenizer for `.landau` sources.
//!
//! Statements end at end-of-line. Newline tokens are suppressed inside `( )`
//! and `[ ]`, and after any token that cannot end a statement (binary
//! operators, `=`, `,`, the derivative tick), so long expressions may wrap.

use crate::diag::{Diagnostic, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    // keywords
    Const,
    Int,
    Real,
    Parameter,
    For,
    If,
    Else,
    Discard,
    // atoms
    Ident,
    IntLit,
    RealLit,
    // punctuation
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Assign,
    PlusAssign,
    Plus,
    Minus,
    Star,
    Slash,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
    Bang,
    Tick,
    Colon,
    Newline,
}

/// Coarse token classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenClass {
    Keyword,
    Identifier,
    IntegerLiteral,
    RealLiteral,
    Punctuation,
    DerivativeTick,
    SliceColon,
}

impl TokenKind {
    pub fn class(self) -> TokenClass {
        use TokenKind::*;
        match self {
            Const | Int | Real | Parameter | For | If | Else | Discard => TokenClass::Keyword,
            Ident => TokenClass::Identifier,
            IntLit => TokenClass::IntegerLiteral,
            RealLit => TokenClass::RealLiteral,
            Tick => TokenClass::DerivativeTick,
            Colon => TokenClass::SliceColon,
            _ => TokenClass::Punctuation,
        }
    }

    /// Human-readable name used in "expected ..." messages.
    pub fn describe(self) -> &'static str {
        use TokenKind::*;
        match self {
            Const => "`const`",
            Int => "`int`",
            Real => "`real`",
            Parameter => "`parameter`",
            For => "`for`",
            If => "`if`",
            Else => "`else`",
            Discard => "`discard`",
            Ident => "identifier",
            IntLit => "integer literal",
            RealLit => "real literal",
            LParen => "`(`",
            RParen => "`)`",
            LBracket => "`[`",
            RBracket => "`]`",
            LBrace => "`{`",
            RBrace => "`}`",
            Comma => "`,`",
            Assign => "`=`",
            PlusAssign => "`+=`",
            Plus => "`+`",
            Minus => "`-`",
            Star => "`*`",
            Slash => "`/`",
            EqEq => "`==`",
            NotEq => "`!=`",
            Lt => "`<`",
            Le => "`<=`",
            Gt => "`>`",
            Ge => "`>=`",
            AndAnd => "`&&`",
            OrOr => "`||`",
            Bang => "`!`",
            Tick => "`'`",
            Colon => "`:`",
            Newline => "end of line",
        }
    }

    fn continues_line(self) -> bool {
        use TokenKind::*;
        matches!(
            self,
            Assign
                | PlusAssign
                | Plus
                | Minus
                | Star
                | Slash
                | EqEq
                | NotEq
                | Lt
                | Le
                | Gt
                | Ge
                | AndAnd
                | OrOr
                | Bang
                | Tick
                | Comma
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub line: u32,
    pub col: u32,
    /// Byte offset of the lexeme in the source text.
    pub offset: usize,
}

impl Token {
    pub fn span(&self) -> Span {
        Span::new(self.line, self.col)
    }
}

pub const HEADER: &str = "#lang landau";

/// Tokenizes a complete source file. The first non-blank line must be the
/// `#lang landau` header.
pub fn tokenize(source: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut line_start = 0usize;
    let mut line_no = 1u32;
    loop {
        let end = source[line_start..]
            .find('\n')
            .map(|i| line_start + i)
            .unwrap_or(source.len());
        let line = &source[line_start..end];
        if !line.trim().is_empty() {
            if line.trim() != HEADER {
                let col = line.len() - line.trim_start().len();
                return Err(Diagnostic::error(
                    Span::new(line_no, col as u32 + 1),
                    format!("missing `{HEADER}` header"),
                ));
            }
            let body = (end + 1).min(source.len());
            return Lexer::new(source, body, line_no + 1).run();
        }
        if end >= source.len() {
            return Err(Diagnostic::error(
                Span::new(line_no, 1),
                format!("missing `{HEADER}` header"),
            ));
        }
        line_start = end + 1;
        line_no += 1;
    }
}

/// Tokenizes a fragment without the header check.
pub fn tokenize_fragment(text: &str) -> Result<Vec<Token>, Diagnostic> {
    Lexer::new(text, 0, 1).run()
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: u32,
    line_start: usize,
    depth: u32,
    tokens: Vec<Token>,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, start: usize, line: u32) -> Self {
        Lexer {
            src,
            bytes: src.as_bytes(),
            pos: start,
            line,
            line_start: start,
            depth: 0,
            tokens: Vec::new(),
        }
    }

    fn col(&self, at: usize) -> u32 {
        (self.src[self.line_start..at].chars().count() + 1) as u32
    }

    fn push(&mut self, kind: TokenKind, start: usize) {
        let col = self.col(start);
        self.tokens.push(Token {
            kind,
            lexeme: self.src[start..self.pos].to_string(),
            line: self.line,
            col,
            offset: start,
        });
    }

    fn newline(&mut self) {
        let start = self.pos;
        self.pos += 1;
        let wanted = self.depth == 0
            && self
                .tokens
                .last()
                .is_some_and(|t| t.kind != TokenKind::Newline && !t.kind.continues_line());
        if wanted {
            self.push(TokenKind::Newline, start);
        }
        self.line += 1;
        self.line_start = self.pos;
    }

    fn run(mut self) -> Result<Vec<Token>, Diagnostic> {
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            let start = self.pos;
            match c {
                b'\n' => self.newline(),
                b' ' | b'\t' | b'\r' => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b'0'..=b'9' => self.number(start)?,
                b'.' if self.peek_digit(1) => self.number(start)?,
                c if c == b'_' || c.is_ascii_alphabetic() => {
                    while self.pos < self.bytes.len()
                        && (self.bytes[self.pos] == b'_'
                            || self.bytes[self.pos].is_ascii_alphanumeric())
                    {
                        self.pos += 1;
                    }
                    let kind = match &self.src[start..self.pos] {
                        "const" => TokenKind::Const,
                        "int" => TokenKind::Int,
                        "real" => TokenKind::Real,
                        "parameter" => TokenKind::Parameter,
                        "for" => TokenKind::For,
                        "if" => TokenKind::If,
                        "else" => TokenKind::Else,
                        "discard" => TokenKind::Discard,
                        _ => TokenKind::Ident,
                    };
                    self.push(kind, start);
                }
                _ => self.punct(start)?,
            }
        }
        if self
            .tokens
            .last()
            .is_some_and(|t| t.kind == TokenKind::Newline)
        {
            self.tokens.pop();
        }
        Ok(self.tokens)
    }

    fn peek_digit(&self, ahead: usize) -> bool {
        self.bytes
            .get(self.pos + ahead)
            .is_some_and(|b| b.is_ascii_digit())
    }

    fn number(&mut self, start: usize) -> Result<(), Diagnostic> {
        let mut real = false;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos < self.bytes.len() && self.bytes[self.pos] == b'.' {
            real = true;
            self.pos += 1;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if self.pos < self.bytes.len() && matches!(self.bytes[self.pos], b'e' | b'E') {
            let mut look = self.pos + 1;
            if look < self.bytes.len() && matches!(self.bytes[look], b'+' | b'-') {
                look += 1;
            }
            if look < self.bytes.len() && self.bytes[look].is_ascii_digit() {
                real = true;
                self.pos = look;
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        if self.pos < self.bytes.len()
            && (self.bytes[self.pos] == b'_' || self.bytes[self.pos].is_ascii_alphabetic())
        {
            return Err(Diagnostic::error(
                Span::new(self.line, self.col(self.pos)),
                format!(
                    "illegal character `{}` after number",
                    self.src[self.pos..].chars().next().unwrap_or('?')
                ),
            ));
        }
        let text = &self.src[start..self.pos];
        if real {
            match text.parse::<f64>() {
                Err(_) => {
                    return Err(Diagnostic::error(
                        Span::new(self.line, self.col(start)),
                        format!("malformed real literal `{text}`"),
                    ))
                }
                Ok(v) if v.is_infinite() => {
                    return Err(Diagnostic::error(
                        Span::new(self.line, self.col(start)),
                        format!("real literal `{text}` is out of range"),
                    ))
                }
                Ok(_) => {}
            }
            self.push(TokenKind::RealLit, start);
        } else {
            if text.parse::<i64>().is_err() {
                return Err(Diagnostic::error(
                    Span::new(self.line, self.col(start)),
                    format!("integer literal `{text}` is out of range"),
                ));
            }
            self.push(TokenKind::IntLit, start);
        }
        Ok(())
    }

    fn punct(&mut self, start: usize) -> Result<(), Diagnostic> {
        use TokenKind::*;
        let c = self.bytes[self.pos];
        let next = self.bytes.get(self.pos + 1).copied();
        let (kind, len) = match (c, next) {
            (b'+', Some(b'=')) => (PlusAssign, 2),
            (b'=', Some(b'=')) => (EqEq, 2),
            (b'!', Some(b'=')) => (NotEq, 2),
            (b'<', Some(b'=')) => (Le, 2),
            (b'>', Some(b'=')) => (Ge, 2),
            (b'&', Some(b'&')) => (AndAnd, 2),
            (b'|', Some(b'|')) => (OrOr, 2),
            (b'(', _) => (LParen, 1),
            (b')', _) => (RParen, 1),
            (b'[', _) => (LBracket, 1),
            (b']', _) => (RBracket, 1),
            (b'{', _) => (LBrace, 1),
            (b'}', _) => (RBrace, 1),
            (b',', _) => (Comma, 1),
            (b'=', _) => (Assign, 1),
            (b'+', _) => (Plus, 1),
            (b'-', _) => (Minus, 1),
            (b'*', _) => (Star, 1),
            (b'/', _) => (Slash, 1),
            (b'<', _) => (Lt, 1),
            (b'>', _) => (Gt, 1),
            (b'!', _) => (Bang, 1),
            (b'\'', _) => (Tick, 1),
            (b':', _) => (Colon, 1),
            _ => {
                let ch = self.src[self.pos..].chars().next().unwrap_or('?');
                return Err(Diagnostic::error(
                    Span::new(self.line, self.col(start)),
                    format!("illegal character `{ch}`"),
                ));
            }
        };
        self.pos += len;
        match kind {
            LParen | LBracket => self.depth += 1,
            RParen | RBracket => self.depth = self.depth.saturating_sub(1),
            _ => {}
        }
        self.push(kind, start);
        Ok(())
    }
}
