//! Tokenizer and expression parser shared by the text formats.

use std::fmt;

use thiserror::Error;

use crate::ta::expr::{BinOp, CmpOp, Expr};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.col)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{pos}: {msg}")]
pub struct SyntaxError {
    pub pos: Pos,
    pub msg: String,
}

impl SyntaxError {
    pub fn new(pos: Pos, msg: impl Into<String>) -> Self {
        SyntaxError { pos, msg: msg.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Sym(&'static str),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(v) => write!(f, "`{v}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
        }
    }
}

const SYMBOLS: &[&str] = &[
    "-->", "A[]", "E<>", "==", "!=", "<=", ">=", "&&", "||", "->", ":=", "..", "(", ")", "[", "]", "{", "}", ",", ";", ":", "=", "<", ">", "+", "-",
    "*", "!", "?", "~", "@", "|", "&", ".",
];

/// Tokenizes one line (or a whole text); `#` and `//` start comments.
pub fn tokenize(text: &str, first_line: usize) -> Result<Vec<(Tok, Pos)>, SyntaxError> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut k = 0;
        while k < chars.len() {
            let c = chars[k];
            let pos = Pos { line: first_line + ln, col: k + 1 };
            if c.is_whitespace() {
                k += 1;
                continue;
            }
            if c == '#' || (c == '/' && chars.get(k + 1) == Some(&'/')) {
                break;
            }
            if c.is_ascii_digit() {
                let start = k;
                while k < chars.len() && chars[k].is_ascii_digit() {
                    k += 1;
                }
                let s: String = chars[start..k].iter().collect();
                let v = s.parse::<i64>().map_err(|_| SyntaxError::new(pos, format!("integer `{s}` out of range")))?;
                out.push((Tok::Int(v), pos));
                continue;
            }
            if c.is_alphabetic() || c == '_' {
                let start = k;
                while k < chars.len() {
                    let d = chars[k];
                    let dotted = d == '.' && chars.get(k + 1).is_some_and(|n| n.is_alphabetic() || *n == '_');
                    if d.is_alphanumeric() || d == '_' || dotted {
                        k += 1;
                    } else {
                        break;
                    }
                }
                let word: String = chars[start..k].iter().collect();
                if (word == "A" || word == "E") && k + 1 < chars.len() {
                    let two: String = chars[k..k + 2].iter().collect();
                    if (word == "A" && two == "[]") || (word == "E" && two == "<>") {
                        out.push((Tok::Sym(if word == "A" { "A[]" } else { "E<>" }), pos));
                        k += 2;
                        continue;
                    }
                }
                out.push((Tok::Ident(word), pos));
                continue;
            }
            let rest: String = chars[k..].iter().collect();
            match SYMBOLS.iter().find(|s| !s.starts_with(|c: char| c.is_alphabetic()) && rest.starts_with(**s)) {
                Some(s) => {
                    out.push((Tok::Sym(s), pos));
                    k += s.chars().count();
                }
                None => return Err(SyntaxError::new(pos, format!("unexpected character `{c}`"))),
            }
        }
    }
    Ok(out)
}

/// Cursor over a token list.
pub struct Tokens {
    toks: Vec<(Tok, Pos)>,
    k: usize,
    end: Pos,
}

impl Tokens {
    pub fn new(toks: Vec<(Tok, Pos)>, end: Pos) -> Self {
        Tokens { toks, k: 0, end }
    }

    pub fn parse(text: &str, line: usize) -> Result<Self, SyntaxError> {
        let toks = tokenize(text, line)?;
        let end = Pos { line, col: text.chars().count() + 1 };
        Ok(Tokens::new(toks, end))
    }

    pub fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.k).map(|(t, _)| t)
    }

    pub fn peek_at(&self, n: usize) -> Option<&Tok> {
        self.toks.get(self.k + n).map(|(t, _)| t)
    }

    pub fn pos(&self) -> Pos {
        self.toks.get(self.k).map(|(_, p)| *p).unwrap_or(self.end)
    }

    pub fn at_end(&self) -> bool {
        self.k >= self.toks.len()
    }

    pub fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.k).map(|(t, _)| t.clone());
        self.k += 1;
        t
    }

    pub fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    pub fn is_word(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(x)) if x == s)
    }

    pub fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.k += 1;
            true
        } else {
            false
        }
    }

    pub fn eat_word(&mut self, s: &str) -> bool {
        if self.is_word(s) {
            self.k += 1;
            true
        } else {
            false
        }
    }

    pub fn error(&self, msg: impl Into<String>) -> SyntaxError {
        SyntaxError::new(self.pos(), msg)
    }

    fn found(&self) -> String {
        match self.peek() {
            Some(t) => t.to_string(),
            None => "end of line".to_string(),
        }
    }

    pub fn expect_sym(&mut self, s: &str) -> Result<(), SyntaxError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{s}`, found {}", self.found())))
        }
    }

    pub fn expect_word(&mut self, s: &str) -> Result<(), SyntaxError> {
        if self.eat_word(s) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{s}`, found {}", self.found())))
        }
    }

    pub fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.k += 1;
                Ok(s)
            }
            _ => Err(self.error(format!("expected identifier, found {}", self.found()))),
        }
    }

    /// Optionally signed integer literal.
    pub fn int(&mut self) -> Result<i64, SyntaxError> {
        let neg = self.eat_sym("-");
        match self.peek() {
            Some(Tok::Int(v)) => {
                let v = *v;
                self.k += 1;
                Ok(if neg { -v } else { v })
            }
            _ => Err(self.error(format!("expected integer, found {}", self.found()))),
        }
    }

    pub fn finish(&self) -> Result<(), SyntaxError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error(format!("unexpected {}", self.found())))
        }
    }

    /// Full expression, stopping at the first token that cannot continue it.
    pub fn expr(&mut self) -> Result<Expr, SyntaxError> {
        self.imply()
    }

    fn imply(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.or()?;
        while self.eat_word("imply") {
            let rhs = self.or()?;
            lhs = Expr::bin(BinOp::Imply, lhs, rhs);
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.and()?;
        while self.eat_word("or") || self.eat_sym("||") {
            let rhs = self.and()?;
            lhs = Expr::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.not()?;
        while self.eat_word("and") || self.eat_sym("&&") {
            let rhs = self.not()?;
            lhs = Expr::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn not(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat_word("not") || self.eat_sym("!") {
            return Ok(Expr::not(self.not()?));
        }
        self.cmp()
    }

    fn cmp(&mut self) -> Result<Expr, SyntaxError> {
        let lhs = self.sum()?;
        let op = match self.peek() {
            Some(Tok::Sym("<")) => CmpOp::Lt,
            Some(Tok::Sym("<=")) => CmpOp::Le,
            Some(Tok::Sym("==")) => CmpOp::Eq,
            Some(Tok::Sym("!=")) => CmpOp::Ne,
            Some(Tok::Sym(">=")) => CmpOp::Ge,
            Some(Tok::Sym(">")) => CmpOp::Gt,
            _ => return Ok(lhs),
        };
        self.k += 1;
        let rhs = self.sum()?;
        Ok(Expr::cmp(op, lhs, rhs))
    }

    fn sum(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.product()?;
        loop {
            let op = if self.eat_sym("+") {
                BinOp::Add
            } else if self.is_sym("-") && !matches!(self.peek_at(1), Some(Tok::Sym("->")) | Some(Tok::Sym("-"))) {
                self.k += 1;
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.product()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn product(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.unary()?;
        while self.eat_sym("*") {
            let rhs = self.unary()?;
            lhs = Expr::bin(BinOp::Mul, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat_sym("-") {
            return Ok(match self.unary()? {
                Expr::Int(v) => Expr::Int(-v),
                e => Expr::Neg(Box::new(e)),
            });
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        let pos = self.pos();
        match self.next() {
            Some(Tok::Int(v)) => Ok(Expr::Int(v)),
            Some(Tok::Ident(w)) => match w.as_str() {
                "true" => Ok(Expr::Bool(true)),
                "false" => Ok(Expr::Bool(false)),
                "and" | "or" | "not" | "imply" => Err(SyntaxError::new(pos, format!("unexpected keyword `{w}`"))),
                _ => {
                    if self.eat_sym("[") {
                        let i = self.expr()?;
                        self.expect_sym("]")?;
                        Ok(Expr::Index(w, Box::new(i)))
                    } else {
                        Ok(Expr::Name(w))
                    }
                }
            },
            Some(Tok::Sym("(")) => {
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Some(t) => Err(SyntaxError::new(pos, format!("unexpected {t} in expression"))),
            None => Err(SyntaxError::new(pos, "unexpected end of line in expression")),
        }
    }
}

pub fn parse_expr(text: &str) -> Result<Expr, SyntaxError> {
    let mut t = Tokens::parse(text, 1)?;
    let e = t.expr()?;
    t.finish()?;
    Ok(e)
}
