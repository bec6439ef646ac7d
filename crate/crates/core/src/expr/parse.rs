use std::collections::HashMap;

use super::{Expr, Func, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    /// 1-based column.
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| Error::Syntax {
                column: col,
                message: format!("invalid number `{text}`"),
            })?;
            out.push(Token { tok: Tok::Num(v), col });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                col,
            });
        } else if "+-*/^(),;@".contains(c) {
            out.push(Token { tok: Tok::Sym(c), col });
            i += 1;
        } else {
            return Err(Error::Syntax {
                column: col,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    end_col: usize,
    params: &'a HashMap<String, f64>,
}

/// Parses an expression with no named parameters.
pub fn parse(src: &str) -> Result<Expr> {
    parse_with(src, &HashMap::new())
}

/// Parses an expression, substituting named parameters as constants.
pub fn parse_with(src: &str, params: &HashMap<String, f64>) -> Result<Expr> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        end_col: src.chars().count() + 1,
        params,
    };
    let e = p.expr()?;
    if let Some(t) = p.peek() {
        return Err(Error::Syntax {
            column: t.col,
            message: "unexpected trailing input".into(),
        });
    }
    Ok(e)
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn col(&self) -> usize {
        self.peek().map_or(self.end_col, |t| t.col)
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if matches!(self.peek(), Some(Token { tok: Tok::Sym(s), .. }) if *s == c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<()> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    fn error(&self, message: String) -> Error {
        Error::Syntax {
            column: self.col(),
            message,
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_sym('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_sym('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_sym('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_sym('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat_sym('-') {
            Ok(match self.unary()? {
                Expr::Const(c) => Expr::Const(-c),
                e => Expr::Neg(Box::new(e)),
            })
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.eat_sym('^') {
            let neg = self.eat_sym('-');
            let col = self.col();
            match self.peek().map(|t| t.tok.clone()) {
                Some(Tok::Num(v)) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => {
                    self.pos += 1;
                    let n = v as i32;
                    Ok(Expr::Pow(Box::new(base), if neg { -n } else { n }))
                }
                _ => Err(Error::Syntax {
                    column: col,
                    message: "exponent must be an integer literal".into(),
                }),
            }
        } else {
            Ok(base)
        }
    }

    fn signed_number(&mut self) -> Result<f64> {
        let paren = self.eat_sym('(');
        let neg = self.eat_sym('-');
        let v = match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                if neg {
                    -v
                } else {
                    v
                }
            }
            _ => return Err(self.error("expected a number".into())),
        };
        if paren {
            self.expect_sym(')')?;
        }
        Ok(v)
    }

    fn primary(&mut self) -> Result<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error("unexpected end of input".into()));
        };
        self.pos += 1;
        match tok.tok {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            Tok::Sym(c) => Err(Error::Syntax {
                column: tok.col,
                message: format!("unexpected `{c}`"),
            }),
            Tok::Ident(name) => self.identifier(name, tok.col),
        }
    }

    fn call_args(&mut self, name: &str) -> Result<Vec<Expr>> {
        self.expect_sym('(')?;
        let mut args = vec![self.expr()?];
        while self.eat_sym(',') || self.eat_sym(';') {
            args.push(self.expr()?);
        }
        self.expect_sym(')')?;
        let expected = if name == "abs_smooth" { 2 } else { 1 };
        if args.len() != expected {
            return Err(Error::Arity {
                name: name.to_string(),
                expected,
                got: args.len(),
            });
        }
        Ok(args)
    }

    fn identifier(&mut self, name: String, col: usize) -> Result<Expr> {
        let func = match name.as_str() {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "tanh" => Some(Func::Tanh),
            _ => None,
        };
        if let Some(f) = func {
            let mut args = self.call_args(&name)?;
            return Ok(Expr::Call(f, Box::new(args.remove(0))));
        }
        if name == "abs_smooth" {
            let mut args = self.call_args(&name)?;
            let eps = match args.pop() {
                Some(Expr::Const(e)) if e > 0.0 => e,
                _ => {
                    return Err(Error::Syntax {
                        column: col,
                        message: "abs_smooth needs a positive constant ε".into(),
                    })
                }
            };
            return Ok(Expr::AbsSmooth(Box::new(args.remove(0)), eps));
        }
        if name == "s" {
            return Ok(Expr::Var(Var::S));
        }
        if let Some(var) = indexed_var(&name) {
            return match var {
                IndexedVar::Plain(v) => Ok(Expr::Var(v)),
                IndexedVar::Lag(i) => {
                    self.expect_sym('@')?;
                    let s = self.signed_number()?;
                    Ok(Expr::Var(Var::SegLag(i, s)))
                }
            };
        }
        if let Some(v) = self.params.get(&name) {
            return Ok(Expr::Const(*v));
        }
        Err(Error::UnknownIdentifier(name))
    }
}

enum IndexedVar {
    Plain(Var),
    Lag(usize),
}

fn indexed_var(name: &str) -> Option<IndexedVar> {
    let index = |digits: &str| -> Option<usize> {
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        digits.parse::<usize>().ok().filter(|k| *k >= 1).map(|k| k - 1)
    };
    if let Some(rest) = name.strip_prefix("th") {
        return index(rest).map(|i| IndexedVar::Plain(Var::Phase(i)));
    }
    for (prefix, ctor) in [
        ("y1_", Var::Current as fn(usize) -> Var),
        ("y2_", Var::Delayed),
        ("x0_", Var::SegZero),
    ] {
        if let Some(rest) = name.strip_prefix(prefix) {
            return index(rest).map(|i| IndexedVar::Plain(ctor(i)));
        }
    }
    name.strip_prefix("xm_").and_then(index).map(IndexedVar::Lag)
}
