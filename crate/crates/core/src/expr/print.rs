use std::fmt;

use super::Expr;

// Binding strength; a child printed in a context stronger than its own is
// parenthesized.
const ADD: u8 = 1;
const MUL: u8 = 2;
const UNARY: u8 = 3;
const POW: u8 = 4;
const ATOM: u8 = 5;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => UNARY,
        Expr::Const(_) | Expr::Var(_) | Expr::Call(..) | Expr::AbsSmooth(..) => ATOM,
        Expr::Neg(_) => UNARY,
        Expr::Add(..) | Expr::Sub(..) => ADD,
        Expr::Mul(..) | Expr::Div(..) => MUL,
        Expr::Pow(..) => POW,
    }
}

fn write(e: &Expr, ctx: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let paren = prec(e) < ctx;
    if paren {
        f.write_str("(")?;
    }
    match e {
        Expr::Const(c) => write!(f, "{c}")?,
        Expr::Var(v) => f.write_str(&v.name())?,
        Expr::Neg(a) => {
            f.write_str("-")?;
            write(a, UNARY, f)?;
        }
        Expr::Add(a, b) => binary(a, " + ", b, ADD, f)?,
        Expr::Sub(a, b) => binary(a, " - ", b, ADD, f)?,
        Expr::Mul(a, b) => binary(a, "*", b, MUL, f)?,
        Expr::Div(a, b) => binary(a, "/", b, MUL, f)?,
        Expr::Pow(a, n) => {
            write(a, ATOM, f)?;
            write!(f, "^{n}")?;
        }
        Expr::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write(a, 0, f)?;
            f.write_str(")")?;
        }
        Expr::AbsSmooth(a, eps) => {
            f.write_str("abs_smooth(")?;
            write(a, 0, f)?;
            write!(f, "; {eps})")?;
        }
    }
    if paren {
        f.write_str(")")?;
    }
    Ok(())
}

fn binary(a: &Expr, op: &str, b: &Expr, level: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    write(a, level, f)?;
    f.write_str(op)?;
    write(b, level + 1, f)
}

/// Canonical form; `parse(&e.to_string())` reproduces `e` structurally.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write(self, 0, f)
    }
}
