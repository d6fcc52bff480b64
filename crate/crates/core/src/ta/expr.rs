//! Integer/boolean data expressions used in guards, updates and queries.

use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }

    pub fn apply(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Ge => a >= b,
            CmpOp::Gt => a > b,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    And,
    Or,
    Imply,
    Cmp(CmpOp),
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Imply => "imply",
            BinOp::Cmp(c) => c.symbol(),
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Imply => 1,
            BinOp::Or => 2,
            BinOp::And => 3,
            BinOp::Cmp(_) => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul => 6,
        }
    }
}

/// Source-level expression over names.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Name(String),
    Index(String, Box<Expr>),
    Not(Box<Expr>),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn name(s: &str) -> Expr {
        Expr::Name(s.to_string())
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Cmp(op), a, b)
    }

    pub fn and(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::And, a, b)
    }

    pub fn or(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Or, a, b)
    }

    pub fn not(a: Expr) -> Expr {
        Expr::Not(Box::new(a))
    }

    pub fn index(name: &str, idx: Expr) -> Expr {
        Expr::Index(name.to_string(), Box::new(idx))
    }

    /// Replaces free occurrences of `name` by the constant `value`.
    pub fn substitute(&self, name: &str, value: i64) -> Expr {
        match self {
            Expr::Name(n) if n == name => Expr::Int(value),
            Expr::Index(n, i) => Expr::Index(n.clone(), Box::new(i.substitute(name, value))),
            Expr::Not(e) => Expr::Not(Box::new(e.substitute(name, value))),
            Expr::Neg(e) => Expr::Neg(Box::new(e.substitute(name, value))),
            Expr::Bin(op, a, b) => Expr::Bin(*op, Box::new(a.substitute(name, value)), Box::new(b.substitute(name, value))),
            other => other.clone(),
        }
    }

    /// Names mentioned anywhere in the expression (array names included).
    pub fn names(&self, out: &mut Vec<String>) {
        match self {
            Expr::Name(n) => out.push(n.clone()),
            Expr::Index(n, i) => {
                out.push(n.clone());
                i.names(out);
            }
            Expr::Not(e) | Expr::Neg(e) => e.names(out),
            Expr::Bin(_, a, b) => {
                a.names(out);
                b.names(out);
            }
            Expr::Int(_) | Expr::Bool(_) => {}
        }
    }

    /// Top-level conjuncts.
    pub fn conjuncts(&self) -> Vec<&Expr> {
        match self {
            Expr::Bin(BinOp::And, a, b) => {
                let mut v = a.conjuncts();
                v.extend(b.conjuncts());
                v
            }
            e => vec![e],
        }
    }

    /// Folds a constant expression given a lookup for named constants.
    pub fn eval_const(&self, lookup: &dyn Fn(&str) -> Option<i64>) -> Option<i64> {
        Some(match self {
            Expr::Int(v) => *v,
            Expr::Bool(b) => i64::from(*b),
            Expr::Name(n) => lookup(n)?,
            Expr::Index(..) => return None,
            Expr::Not(e) => i64::from(e.eval_const(lookup)? == 0),
            Expr::Neg(e) => -e.eval_const(lookup)?,
            Expr::Bin(op, a, b) => {
                let x = a.eval_const(lookup)?;
                let y = b.eval_const(lookup)?;
                apply_bin(*op, x, y)
            }
        })
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
        match self {
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Name(n) => write!(f, "{n}"),
            Expr::Index(n, i) => write!(f, "{n}[{i}]"),
            Expr::Not(e) => {
                write!(f, "not ")?;
                e.fmt_prec(f, 7)
            }
            Expr::Neg(e) => {
                write!(f, "-")?;
                e.fmt_prec(f, 7)
            }
            Expr::Bin(op, a, b) => {
                let p = op.precedence();
                if p < parent {
                    write!(f, "(")?;
                }
                a.fmt_prec(f, p)?;
                let sep = if matches!(op, BinOp::And | BinOp::Or | BinOp::Imply) { " " } else { "" };
                write!(f, "{sep}{}{sep}", op.symbol())?;
                // left associative: the right operand binds one tighter
                b.fmt_prec(f, p + 1)?;
                if p < parent {
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

pub(crate) fn apply_bin(op: BinOp, x: i64, y: i64) -> i64 {
    match op {
        BinOp::Add => x + y,
        BinOp::Sub => x - y,
        BinOp::Mul => x * y,
        BinOp::And => i64::from(x != 0 && y != 0),
        BinOp::Or => i64::from(x != 0 || y != 0),
        BinOp::Imply => i64::from(x == 0 || y != 0),
        BinOp::Cmp(c) => i64::from(c.apply(x, y)),
    }
}

/// Expression with names resolved to variable slots.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CExpr {
    Const(i64),
    Var(usize),
    Elem { base: usize, len: usize, index: Box<CExpr> },
    Not(Box<CExpr>),
    Neg(Box<CExpr>),
    Bin(BinOp, Box<CExpr>, Box<CExpr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexOutOfRange {
    pub index: i64,
    pub len: usize,
}

impl CExpr {
    pub fn eval(&self, vars: &[i32]) -> Result<i64, IndexOutOfRange> {
        Ok(match self {
            CExpr::Const(v) => *v,
            CExpr::Var(k) => vars[*k] as i64,
            CExpr::Elem { base, len, index } => {
                let i = index.eval(vars)?;
                if i < 0 || i as usize >= *len {
                    return Err(IndexOutOfRange { index: i, len: *len });
                }
                vars[base + i as usize] as i64
            }
            CExpr::Not(e) => i64::from(e.eval(vars)? == 0),
            CExpr::Neg(e) => -e.eval(vars)?,
            CExpr::Bin(op, a, b) => {
                let x = a.eval(vars)?;
                match op {
                    BinOp::And if x == 0 => 0,
                    BinOp::Or if x != 0 => 1,
                    BinOp::Imply if x == 0 => 1,
                    _ => apply_bin(*op, x, b.eval(vars)?),
                }
            }
        })
    }

    pub fn holds(&self, vars: &[i32]) -> bool {
        matches!(self.eval(vars), Ok(v) if v != 0)
    }
}
