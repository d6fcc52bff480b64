//! State formulas and queries.

use thiserror::Error;

use crate::syntax::{SyntaxError, Tok, Tokens};
use crate::ta::expr::{BinOp, CExpr, CmpOp, Expr};
use crate::ta::model::{ModelError, Network};
use crate::ta::semantics::{deadlocked_part, SymState};
use crate::zones::{Bound, ClockAtom, Zone};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StateFormula {
    True,
    False,
    Deadlock,
    Loc {
        inst: usize,
        loc: usize,
    },
    Data(CExpr),
    /// Conjunction of clock difference atoms.
    Clock(Vec<ClockAtom>),
    Not(Box<StateFormula>),
    And(Box<StateFormula>, Box<StateFormula>),
    Or(Box<StateFormula>, Box<StateFormula>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Query {
    Safety(StateFormula),
    Reach(StateFormula),
    LeadsTo(StateFormula, StateFormula),
    DeadlockFree,
    Locality { channels: Vec<String>, templates: Vec<String> },
}

impl StateFormula {
    pub fn not(f: StateFormula) -> StateFormula {
        StateFormula::Not(Box::new(f))
    }

    pub fn and(a: StateFormula, b: StateFormula) -> StateFormula {
        StateFormula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: StateFormula, b: StateFormula) -> StateFormula {
        StateFormula::Or(Box::new(a), Box::new(b))
    }

    pub fn mentions_deadlock(&self) -> bool {
        match self {
            StateFormula::Deadlock => true,
            StateFormula::Not(a) => a.mentions_deadlock(),
            StateFormula::And(a, b) | StateFormula::Or(a, b) => a.mentions_deadlock() || b.mentions_deadlock(),
            _ => false,
        }
    }

    /// Raises `max_const` to cover every constant compared with a clock.
    pub fn note_constants(&self, max_const: &mut [i32]) {
        match self {
            StateFormula::Clock(atoms) => {
                for a in atoms {
                    let c = a.bound.value().abs();
                    for k in [a.i, a.j] {
                        if k != 0 {
                            max_const[k] = max_const[k].max(c);
                        }
                    }
                }
            }
            StateFormula::Not(a) => a.note_constants(max_const),
            StateFormula::And(a, b) | StateFormula::Or(a, b) => {
                a.note_constants(max_const);
                b.note_constants(max_const);
            }
            _ => {}
        }
    }

    pub fn note_clocks(&self, keep: &mut [bool]) {
        match self {
            StateFormula::Clock(atoms) => {
                for a in atoms {
                    keep[a.i] = true;
                    keep[a.j] = true;
                }
            }
            StateFormula::Not(a) => a.note_clocks(keep),
            StateFormula::And(a, b) | StateFormula::Or(a, b) => {
                a.note_clocks(keep);
                b.note_clocks(keep);
            }
            _ => {}
        }
    }

    /// Valuations of `zone` (a subset of `s.zone`) satisfying the formula,
    /// as a list of zones.
    pub fn restrict(&self, net: &Network, s: &SymState, zone: &Zone) -> Vec<Zone> {
        if zone.is_empty() {
            return Vec::new();
        }
        match self {
            StateFormula::True => vec![zone.clone()],
            StateFormula::False => Vec::new(),
            StateFormula::Loc { inst, loc } => {
                if s.locs[*inst] == *loc {
                    vec![zone.clone()]
                } else {
                    Vec::new()
                }
            }
            StateFormula::Data(e) => {
                if e.holds(&s.vars) {
                    vec![zone.clone()]
                } else {
                    Vec::new()
                }
            }
            StateFormula::Clock(atoms) => {
                let z = zone.and(&atoms.clone().into());
                if z.is_empty() {
                    Vec::new()
                } else {
                    vec![z]
                }
            }
            StateFormula::Deadlock => deadlocked_part(net, s).into_iter().map(|d| d.intersection(zone)).filter(|d| !d.is_empty()).collect(),
            StateFormula::Not(a) => {
                let mut rest = vec![zone.clone()];
                for p in a.restrict(net, s, zone) {
                    rest = rest.iter().flat_map(|r| r.subtract(&p)).collect();
                    if rest.is_empty() {
                        break;
                    }
                }
                rest
            }
            StateFormula::And(a, b) => a.restrict(net, s, zone).iter().flat_map(|p| b.restrict(net, s, p)).collect(),
            StateFormula::Or(a, b) => {
                let mut out = a.restrict(net, s, zone);
                for p in b.restrict(net, s, zone) {
                    if !out.iter().any(|o| o.includes(&p).unwrap_or(false)) {
                        out.push(p);
                    }
                }
                out
            }
        }
    }

    pub fn intersects(&self, net: &Network, s: &SymState) -> bool {
        !self.restrict(net, s, &s.zone).is_empty()
    }
}

fn difference_atoms(i: usize, j: usize, op: CmpOp, k: i32) -> Vec<ClockAtom> {
    match op {
        CmpOp::Lt => vec![ClockAtom::new(i, j, Bound::lt(k))],
        CmpOp::Le => vec![ClockAtom::new(i, j, Bound::le(k))],
        CmpOp::Eq => vec![ClockAtom::new(i, j, Bound::le(k)), ClockAtom::new(j, i, Bound::le(-k))],
        CmpOp::Ge => vec![ClockAtom::new(j, i, Bound::le(-k))],
        CmpOp::Gt => vec![ClockAtom::new(j, i, Bound::lt(-k))],
        CmpOp::Ne => unreachable!("handled by negation"),
    }
}

fn flip(op: CmpOp) -> CmpOp {
    match op {
        CmpOp::Lt => CmpOp::Gt,
        CmpOp::Le => CmpOp::Ge,
        CmpOp::Gt => CmpOp::Lt,
        CmpOp::Ge => CmpOp::Le,
        o => o,
    }
}

struct Resolver<'a> {
    net: &'a Network,
    /// Instances named by location atoms, used for unqualified local names.
    context: Vec<String>,
}

impl Resolver<'_> {
    fn qualify(&self, name: &str) -> String {
        if name.contains('.') || self.net.var(name).is_some() || self.net.array(name).is_some() || self.net.clock(name).is_some() {
            return name.to_string();
        }
        let owners = |insts: &mut dyn Iterator<Item = &str>| -> Vec<String> {
            insts
                .map(|i| format!("{i}.{name}"))
                .filter(|q| self.net.var(q).is_some() || self.net.clock(q).is_some() || self.net.array(q).is_some())
                .collect()
        };
        let local = owners(&mut self.context.iter().map(String::as_str));
        if local.len() == 1 {
            return local[0].clone();
        }
        let all = owners(&mut self.net.instances.iter().map(|i| i.name.as_str()));
        if all.len() == 1 {
            return all[0].clone();
        }
        name.to_string()
    }

    fn qualify_expr(&self, e: &Expr) -> Expr {
        match e {
            Expr::Name(n) if self.net.decls.constant(n).is_none() => Expr::Name(self.qualify(n)),
            Expr::Index(n, i) => Expr::Index(self.qualify(n), Box::new(self.qualify_expr(i))),
            Expr::Not(a) => Expr::Not(Box::new(self.qualify_expr(a))),
            Expr::Neg(a) => Expr::Neg(Box::new(self.qualify_expr(a))),
            Expr::Bin(op, a, b) => Expr::Bin(*op, Box::new(self.qualify_expr(a)), Box::new(self.qualify_expr(b))),
            other => other.clone(),
        }
    }

    fn clock_of(&self, e: &Expr) -> Option<usize> {
        match e {
            Expr::Name(n) => self.net.clock(&self.qualify(n)),
            _ => None,
        }
    }

    /// `x` or `x - y` over clocks.
    fn clock_term(&self, e: &Expr) -> Option<(usize, usize)> {
        if let Some(x) = self.clock_of(e) {
            return Some((x, 0));
        }
        if let Expr::Bin(BinOp::Sub, a, b) = e {
            if let (Some(x), Some(y)) = (self.clock_of(a), self.clock_of(b)) {
                return Some((x, y));
            }
        }
        None
    }

    fn mentions_clock(&self, e: &Expr) -> bool {
        let mut names = Vec::new();
        e.names(&mut names);
        names.iter().any(|n| self.net.clock(&self.qualify(n)).is_some())
    }

    fn location(&self, name: &str) -> Option<StateFormula> {
        let (inst, loc) = name.split_once('.')?;
        let i = self.net.instance_index(inst)?;
        let l = self.net.instances[i].location_index(loc)?;
        Some(StateFormula::Loc { inst: i, loc: l })
    }

    fn resolve(&self, e: &Expr) -> Result<StateFormula, QueryError> {
        Ok(match e {
            Expr::Bool(true) => StateFormula::True,
            Expr::Bool(false) => StateFormula::False,
            Expr::Name(n) if n == "deadlock" => StateFormula::Deadlock,
            Expr::Name(n) => {
                if let Some(f) = self.location(n) {
                    return Ok(f);
                }
                if self.mentions_clock(e) {
                    return Err(QueryError::Invalid(format!("clock `{n}` used as a boolean")));
                }
                StateFormula::Data(self.net.compile_global(&self.qualify_expr(e))?)
            }
            Expr::Not(a) => StateFormula::not(self.resolve(a)?),
            Expr::Bin(BinOp::And, a, b) => StateFormula::and(self.resolve(a)?, self.resolve(b)?),
            Expr::Bin(BinOp::Or, a, b) => StateFormula::or(self.resolve(a)?, self.resolve(b)?),
            Expr::Bin(BinOp::Imply, a, b) => StateFormula::or(StateFormula::not(self.resolve(a)?), self.resolve(b)?),
            Expr::Bin(BinOp::Cmp(op), a, b) if self.mentions_clock(e) => {
                let (term, other, op) = match (self.clock_term(a), self.clock_term(b)) {
                    (Some(t), None) => (t, b, *op),
                    (None, Some(t)) => (t, a, flip(*op)),
                    _ => return Err(QueryError::Invalid(format!("unsupported clock constraint `{e}`"))),
                };
                let k = self.net.const_value(other).ok_or_else(|| QueryError::Invalid(format!("`{other}` is not a constant in `{e}`")))?;
                let k = i32::try_from(k).map_err(|_| QueryError::Invalid(format!("constant out of range in `{e}`")))?;
                if op == CmpOp::Ne {
                    StateFormula::not(StateFormula::Clock(difference_atoms(term.0, term.1, CmpOp::Eq, k)))
                } else {
                    StateFormula::Clock(difference_atoms(term.0, term.1, op, k))
                }
            }
            _ => {
                if self.mentions_clock(e) {
                    return Err(QueryError::Invalid(format!("unsupported clock expression `{e}`")));
                }
                StateFormula::Data(self.net.compile_global(&self.qualify_expr(e))?)
            }
        })
    }
}

fn location_instances(net: &Network, e: &Expr, out: &mut Vec<String>) {
    let mut names = Vec::new();
    e.names(&mut names);
    for n in names {
        if let Some((inst, _)) = n.split_once('.') {
            if net.instance_index(inst).is_some() && !out.iter().any(|o| o == inst) {
                out.push(inst.to_string());
            }
        }
    }
}

pub fn resolve_formula(net: &Network, e: &Expr) -> Result<StateFormula, QueryError> {
    let mut context = Vec::new();
    location_instances(net, e, &mut context);
    Resolver { net, context }.resolve(e)
}

pub fn parse_formula(text: &str, net: &Network) -> Result<StateFormula, QueryError> {
    let e = crate::syntax::parse_expr(text)?;
    resolve_formula(net, &e)
}

fn name_set(t: &mut Tokens) -> Result<Vec<String>, SyntaxError> {
    t.expect_sym("{")?;
    let mut out = Vec::new();
    if t.eat_sym("}") {
        return Ok(out);
    }
    loop {
        out.push(t.ident()?);
        if t.eat_sym("}") {
            return Ok(out);
        }
        t.expect_sym(",")?;
    }
}

pub fn parse_query(text: &str, net: &Network) -> Result<Query, QueryError> {
    let mut t = Tokens::parse(text, 1)?;
    if t.eat_sym("A[]") {
        let e = t.expr()?;
        t.finish()?;
        if let Expr::Not(inner) = &e {
            if **inner == Expr::name("deadlock") {
                return Ok(Query::DeadlockFree);
            }
        }
        return Ok(Query::Safety(resolve_formula(net, &e)?));
    }
    if t.eat_sym("E<>") {
        let e = t.expr()?;
        t.finish()?;
        return Ok(Query::Reach(resolve_formula(net, &e)?));
    }
    if t.is_word("locality") && matches!(t.peek_at(1), Some(Tok::Sym("{"))) {
        t.next();
        let channels = name_set(&mut t)?;
        t.eat_word("in");
        let templates = name_set(&mut t)?;
        t.finish()?;
        return Ok(Query::Locality { channels, templates });
    }
    let p = t.expr()?;
    t.expect_sym("-->")?;
    let q = t.expr()?;
    t.finish()?;
    let p = resolve_formula(net, &p)?;
    let q = resolve_formula(net, &q)?;
    if p.mentions_deadlock() || q.mentions_deadlock() {
        return Err(QueryError::Invalid("leads-to operands may not mention deadlock".into()));
    }
    Ok(Query::LeadsTo(p, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pvm::parse_model;
    use crate::ta::semantics::initial_state;

    fn net() -> Network {
        parse_model(
            "var g 0..3 = 1\ntemplate T\n  clock x\n  var f 0..1 = 0\n  loc a initial inv x<=4\n  loc b\n  edge a -> b guard x>=2\nend\nsystem p=T q=T\n",
        )
        .unwrap()
    }

    #[test]
    fn query_kinds() {
        let n = net();
        assert_eq!(parse_query("A[] not deadlock", &n).unwrap(), Query::DeadlockFree);
        assert!(matches!(parse_query("E<> p.b and p.x>3", &n).unwrap(), Query::Reach(_)));
        assert!(matches!(parse_query("p.a --> p.b", &n).unwrap(), Query::LeadsTo(..)));
        assert!(matches!(parse_query("locality {} {T}", &n).unwrap(), Query::Locality { .. }));
        assert!(parse_query("p.a --> deadlock", &n).is_err());
        assert!(parse_query("E<> p.nowhere", &n).is_err());
    }

    #[test]
    fn clock_atoms_restrict_zone() {
        let n = net();
        let s = initial_state(&n).unwrap();
        let f = parse_formula("p.x == 3 and g == 1", &n).unwrap();
        let z = f.restrict(&n, &s, &s.zone);
        assert_eq!(z.len(), 1);
        assert!(z[0].contains_integer(&[3, 3]) && !z[0].contains_integer(&[2, 2]));
        let g = parse_formula("not (p.x != 3)", &n).unwrap();
        assert_eq!(g.restrict(&n, &s, &s.zone), z);
    }

    #[test]
    fn unqualified_local_resolves_through_location_context() {
        let n = net();
        let s = initial_state(&n).unwrap();
        assert!(parse_formula("p.a imply f==0", &n).unwrap().intersects(&n, &s));
        assert!(parse_formula("f==0", &n).is_err());
    }
}
