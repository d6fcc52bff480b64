//! Minimal BDI agent language: programs, operational semantics,
//! exhaustive interleaving exploration and property checking.

mod agent;
mod explore;
mod query;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::syntax::{SyntaxError, Tok, Tokens};

pub use agent::{agent_step, AgentConfig, Frame, Msg, StepEffect};
pub use explore::{agent_to_untimed, explore, Joint, JointLabel, StateGraph};
pub use query::{check_agent_property, eq1, parse_agent_query, AgentFormula, AgentQuery};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Arg {
    Const(String),
    Var(String),
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Const(s) | Arg::Var(s) => f.write_str(s),
        }
    }
}

pub type Subst = BTreeMap<String, String>;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Arg>,
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pred)?;
        if !self.args.is_empty() {
            let args: Vec<String> = self.args.iter().map(Arg::to_string).collect();
            write!(f, "({})", args.join(", "))?;
        }
        Ok(())
    }
}

impl Atom {
    pub fn new(pred: &str, args: &[&str]) -> Self {
        Atom { pred: pred.into(), args: args.iter().map(|a| arg(a)).collect() }
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|a| matches!(a, Arg::Const(_)))
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|a| match a {
            Arg::Var(v) => Some(v.as_str()),
            Arg::Const(_) => None,
        })
    }

    pub fn apply(&self, s: &Subst) -> Atom {
        let args = self
            .args
            .iter()
            .map(|a| match a {
                Arg::Var(v) => s.get(v).map_or_else(|| a.clone(), |c| Arg::Const(c.clone())),
                c => c.clone(),
            })
            .collect();
        Atom { pred: self.pred.clone(), args }
    }

    /// Extends `s` so that `self` instantiated equals the ground `other`.
    pub fn matches(&self, other: &Atom, s: &Subst) -> Option<Subst> {
        if self.pred != other.pred || self.args.len() != other.args.len() {
            return None;
        }
        let mut s = s.clone();
        for (p, g) in self.args.iter().zip(&other.args) {
            let Arg::Const(g) = g else { return None };
            match p {
                Arg::Const(c) if c == g => {}
                Arg::Const(_) => return None,
                Arg::Var(v) => match s.get(v) {
                    Some(b) if b != g => return None,
                    Some(_) => {}
                    None => {
                        s.insert(v.clone(), g.clone());
                    }
                },
            }
        }
        Some(s)
    }
}

fn arg(s: &str) -> Arg {
    if s.starts_with(|c: char| c.is_uppercase() || c == '_') {
        Arg::Var(s.into())
    } else {
        Arg::Const(s.into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LitKind {
    B,
    NotB,
    G,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Literal {
    pub kind: LitKind,
    pub atom: Atom,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Deed {
    AddGoal(Atom),
    Perform(Atom),
    Wait(Atom),
    AddBelief(Atom),
    RemoveBelief(Atom),
    Send(Arg, Atom),
}

impl Deed {
    pub fn apply(&self, s: &Subst) -> Deed {
        match self {
            Deed::AddGoal(a) => Deed::AddGoal(a.apply(s)),
            Deed::Perform(a) => Deed::Perform(a.apply(s)),
            Deed::Wait(a) => Deed::Wait(a.apply(s)),
            Deed::AddBelief(a) => Deed::AddBelief(a.apply(s)),
            Deed::RemoveBelief(a) => Deed::RemoveBelief(a.apply(s)),
            Deed::Send(r, a) => Deed::Send(
                match r {
                    Arg::Var(v) => s.get(v).map_or_else(|| r.clone(), |c| Arg::Const(c.clone())),
                    c => c.clone(),
                },
                a.apply(s),
            ),
        }
    }

    fn atoms(&self) -> Vec<&Atom> {
        match self {
            Deed::AddGoal(a) | Deed::Perform(a) | Deed::Wait(a) | Deed::AddBelief(a) | Deed::RemoveBelief(a) => vec![a],
            Deed::Send(_, a) => vec![a],
        }
    }
}

impl fmt::Display for Deed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Deed::AddGoal(a) => write!(f, "+!{a}"),
            Deed::Perform(a) => write!(f, "perf({a})"),
            Deed::Wait(a) => write!(f, "*{a}"),
            Deed::AddBelief(a) => write!(f, "+{a}"),
            Deed::RemoveBelief(a) => write!(f, "-{a}"),
            Deed::Send(r, a) => write!(f, "send({r}, {a})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Plan {
    pub trigger: Atom,
    pub guard: Vec<Literal>,
    pub body: Vec<Deed>,
}

/// An agent program plus its environment: initial beliefs and goals,
/// goal predicates kept until believed, percepts answering actions, and
/// percepts that may arrive at any time.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub name: String,
    pub beliefs: Vec<Atom>,
    pub goals: Vec<Atom>,
    pub achieve: BTreeSet<String>,
    pub reacts: Vec<(Atom, Vec<Atom>)>,
    pub perceive: Vec<Atom>,
    pub plans: Vec<Plan>,
}

impl Program {
    pub fn new(name: &str) -> Self {
        Program { name: name.into(), ..Default::default() }
    }

    pub fn reaction(&self, action: &Atom) -> Option<&[Atom]> {
        self.reacts.iter().find(|(a, _)| a == action).map(|(_, r)| r.as_slice())
    }
}

fn parse_atom(t: &mut Tokens) -> Result<Atom, SyntaxError> {
    let pred = t.ident()?;
    if pred.starts_with(|c: char| c.is_uppercase()) {
        return Err(t.error(format!("predicate `{pred}` must start in lower case")));
    }
    let mut args = Vec::new();
    if t.eat_sym("(") {
        loop {
            let a = match t.next() {
                Some(Tok::Ident(s)) => arg(&s),
                Some(Tok::Int(v)) => Arg::Const(v.to_string()),
                _ => return Err(t.error("expected argument")),
            };
            args.push(a);
            if t.eat_sym(")") {
                break;
            }
            t.expect_sym(",")?;
        }
    }
    Ok(Atom { pred, args })
}

fn parse_deed(t: &mut Tokens) -> Result<Deed, SyntaxError> {
    if t.eat_sym("+") {
        if t.eat_sym("!") {
            return Ok(Deed::AddGoal(parse_atom(t)?));
        }
        return Ok(Deed::AddBelief(parse_atom(t)?));
    }
    if t.eat_sym("-") {
        return Ok(Deed::RemoveBelief(parse_atom(t)?));
    }
    if t.eat_sym("*") {
        return Ok(Deed::Wait(parse_atom(t)?));
    }
    if t.eat_word("perf") {
        t.expect_sym("(")?;
        let a = parse_atom(t)?;
        t.expect_sym(")")?;
        return Ok(Deed::Perform(a));
    }
    if t.eat_word("send") {
        t.expect_sym("(")?;
        let r = arg(&t.ident()?);
        t.expect_sym(",")?;
        let a = parse_atom(t)?;
        t.expect_sym(")")?;
        return Ok(Deed::Send(r, a));
    }
    Err(t.error("expected a deed"))
}

fn parse_plan(t: &mut Tokens) -> Result<Plan, SyntaxError> {
    t.expect_sym("+")?;
    t.expect_sym("!")?;
    let trigger = parse_atom(t)?;
    let mut guard = Vec::new();
    if t.eat_sym(":") {
        t.expect_sym("{")?;
        while !t.eat_sym("}") {
            let kind = if t.eat_sym("~") {
                t.expect_word("B")?;
                LitKind::NotB
            } else if t.eat_word("B") {
                LitKind::B
            } else if t.eat_word("G") {
                LitKind::G
            } else {
                return Err(t.error("expected `B`, `~B` or `G`"));
            };
            guard.push(Literal { kind, atom: parse_atom(t)? });
            if !t.is_sym("}") {
                t.expect_sym(",")?;
            }
        }
    }
    t.expect_sym("<")?;
    t.expect_sym("-")?;
    let mut body = Vec::new();
    while !t.at_end() {
        body.push(parse_deed(t)?);
        if !t.eat_sym(";") {
            break;
        }
    }
    t.finish()?;
    let mut bound: BTreeSet<&str> = trigger.vars().collect();
    bound.extend(guard.iter().flat_map(|l| l.atom.vars()));
    for d in &body {
        if let Deed::Send(Arg::Var(v), _) = d {
            if !bound.contains(v.as_str()) {
                return Err(t.error(format!("variable `{v}` is not bound by the trigger or guard")));
            }
        }
        let anonymous_ok = matches!(d, Deed::Wait(_));
        for a in d.atoms() {
            if let Some(v) = a.vars().find(|v| !bound.contains(v) && !(anonymous_ok && v.starts_with('_'))) {
                return Err(t.error(format!("variable `{v}` is not bound by the trigger or guard")));
            }
        }
    }
    Ok(Plan { trigger, guard, body })
}

fn parse_directive(p: &mut Program, t: &mut Tokens) -> Result<(), SyntaxError> {
    t.expect_sym("@")?;
    let word = t.ident()?;
    match word.as_str() {
        "name" => p.name = t.ident()?,
        "belief" => p.beliefs.push(ground(t)?),
        "goal" => p.goals.push(ground(t)?),
        "achieve" => {
            p.achieve.insert(t.ident()?);
        }
        "perceive" => p.perceive.push(ground(t)?),
        "react" => {
            let action = ground(t)?;
            t.expect_sym("->")?;
            let mut outs = vec![ground(t)?];
            while t.eat_sym("|") {
                outs.push(ground(t)?);
            }
            p.reacts.push((action, outs));
        }
        other => return Err(t.error(format!("unknown directive `@{other}`"))),
    }
    t.finish()
}

fn ground(t: &mut Tokens) -> Result<Atom, SyntaxError> {
    let a = parse_atom(t)?;
    if !a.is_ground() {
        return Err(t.error(format!("`{a}` must be ground")));
    }
    Ok(a)
}

/// Parses an agent program: `@` directives one per line, plans one per
/// blank-line separated block.
pub fn parse_program(text: &str, default_name: &str) -> Result<Program, SyntaxError> {
    let mut p = Program::new(default_name);
    let mut block = String::new();
    let mut block_line = 0;
    let lines: Vec<&str> = text.lines().collect();
    for (k, raw) in lines.iter().enumerate() {
        let ln = k + 1;
        let code = raw.split('#').next().unwrap_or("").trim();
        if code.starts_with('@') {
            let mut t = Tokens::parse(code, ln)?;
            parse_directive(&mut p, &mut t)?;
            continue;
        }
        if code.is_empty() {
            if !block.trim().is_empty() {
                p.plans.push(parse_plan(&mut Tokens::parse(&block, block_line)?)?);
            }
            block.clear();
            continue;
        }
        if block.is_empty() {
            block_line = ln;
        }
        block.push_str(code);
        block.push('\n');
    }
    if !block.trim().is_empty() {
        p.plans.push(parse_plan(&mut Tokens::parse(&block, block_line)?)?);
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_plan_and_directives() {
        let p = parse_program(
            "@name f\n@belief name(f)\n@goal joining(f, g)\n@achieve joining\n@react go -> ok | bad\n\n+!joining(X, Y) : { B name(X), ~B done(X), G joining(X, Y) }\n  <- +!speed(1); perf(go); *ok;\n  send(leader, req(X, Y)); +done(X); -name(X)\n",
            "x",
        )
        .unwrap();
        assert_eq!(p.name, "f");
        assert_eq!(p.reacts[0].1.len(), 2);
        let plan = &p.plans[0];
        assert_eq!(plan.guard.len(), 3);
        assert_eq!(plan.guard[1].kind, LitKind::NotB);
        let rendered: Vec<String> = plan.body.iter().map(Deed::to_string).collect();
        assert_eq!(rendered, ["+!speed(1)", "perf(go)", "*ok", "send(leader, req(X, Y))", "+done(X)", "-name(X)"]);
    }

    #[test]
    fn unbound_body_variable_is_rejected() {
        let e = parse_program("+!g : { B a } <- +b(Z)\n", "x").unwrap_err();
        assert!(e.to_string().contains("`Z`"), "{e}");
        assert_eq!(e.pos.line, 1);
    }

    #[test]
    fn matching_binds_consistently() {
        let pat = Atom { pred: "p".into(), args: vec![arg("X"), arg("X")] };
        assert!(pat.matches(&Atom::new("p", &["a", "a"]), &Subst::new()).is_some());
        assert!(pat.matches(&Atom::new("p", &["a", "b"]), &Subst::new()).is_none());
    }
}
