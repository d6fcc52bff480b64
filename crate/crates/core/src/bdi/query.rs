use std::collections::VecDeque;
use std::fmt;
use std::time::Instant;

use super::explore::StateGraph;
use super::{parse_atom, Atom, Program};
use crate::report::Report;
use crate::syntax::{SyntaxError, Tokens};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AgentFormula {
    True,
    False,
    B(String, Atom),
    G(String, Atom),
    D(String, Atom),
    Not(Box<AgentFormula>),
    And(Box<AgentFormula>, Box<AgentFormula>),
    Or(Box<AgentFormula>, Box<AgentFormula>),
    Implies(Box<AgentFormula>, Box<AgentFormula>),
    Always(Box<AgentFormula>),
    Eventually(Box<AgentFormula>),
}

use AgentFormula as F;

impl fmt::Display for AgentFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            F::True => f.write_str("true"),
            F::False => f.write_str("false"),
            F::B(x, a) => write!(f, "B {x} {a}"),
            F::G(x, a) => write!(f, "G {x} {a}"),
            F::D(x, a) => write!(f, "D {x} {a}"),
            F::Not(a) => write!(f, "!{a}"),
            F::And(a, b) => write!(f, "({a} & {b})"),
            F::Or(a, b) => write!(f, "({a} | {b})"),
            F::Implies(a, b) => write!(f, "{a} -> {b}"),
            F::Always(a) => write!(f, "[] {a}"),
            F::Eventually(a) => write!(f, "<> {a}"),
        }
    }
}

impl AgentFormula {
    fn is_temporal(&self) -> bool {
        match self {
            F::Always(_) | F::Eventually(_) => true,
            F::Not(a) => a.is_temporal(),
            F::And(a, b) | F::Or(a, b) | F::Implies(a, b) => a.is_temporal() || b.is_temporal(),
            _ => false,
        }
    }

    fn agents<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            F::B(x, _) | F::G(x, _) | F::D(x, _) => out.push(x),
            F::Not(a) | F::Always(a) | F::Eventually(a) => a.agents(out),
            F::And(a, b) | F::Or(a, b) | F::Implies(a, b) => {
                a.agents(out);
                b.agents(out);
            }
            F::True | F::False => {}
        }
    }

    /// Evaluates a non-temporal formula in state `s`.
    pub fn holds_at(&self, g: &StateGraph, s: usize) -> bool {
        let st = &g.states[s];
        let idx = |x: &str| g.agent(x).expect("agents checked at parse time");
        match self {
            F::True => true,
            F::False => false,
            F::B(x, a) => st.agents[idx(x)].beliefs.contains(a),
            F::G(x, a) => st.agents[idx(x)].goals.contains(a),
            F::D(x, a) => st.last.as_ref().is_some_and(|(i, b)| *i == idx(x) && b == a),
            F::Not(a) => !a.holds_at(g, s),
            F::And(a, b) => a.holds_at(g, s) && b.holds_at(g, s),
            F::Or(a, b) => a.holds_at(g, s) || b.holds_at(g, s),
            F::Implies(a, b) => !a.holds_at(g, s) || b.holds_at(g, s),
            F::Always(_) | F::Eventually(_) => unreachable!("temporal operator in state formula"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentQuery {
    pub text: String,
    pub formula: AgentFormula,
}

fn implies(t: &mut Tokens) -> Result<AgentFormula, SyntaxError> {
    let a = or(t)?;
    if t.eat_sym("->") {
        return Ok(F::Implies(Box::new(a), Box::new(implies(t)?)));
    }
    Ok(a)
}

fn or(t: &mut Tokens) -> Result<AgentFormula, SyntaxError> {
    let mut a = and(t)?;
    while t.eat_sym("|") || t.eat_sym("||") {
        a = F::Or(Box::new(a), Box::new(and(t)?));
    }
    Ok(a)
}

fn and(t: &mut Tokens) -> Result<AgentFormula, SyntaxError> {
    let mut a = unary(t)?;
    while t.eat_sym("&") || t.eat_sym("&&") {
        a = F::And(Box::new(a), Box::new(unary(t)?));
    }
    Ok(a)
}

fn unary(t: &mut Tokens) -> Result<AgentFormula, SyntaxError> {
    if t.eat_sym("!") || t.eat_sym("~") || t.eat_word("not") {
        return Ok(F::Not(Box::new(unary(t)?)));
    }
    if t.is_sym("[") {
        t.expect_sym("[")?;
        t.expect_sym("]")?;
        return Ok(F::Always(Box::new(unary(t)?)));
    }
    if t.eat_sym("<") {
        t.expect_sym(">")?;
        return Ok(F::Eventually(Box::new(unary(t)?)));
    }
    if t.eat_sym("(") {
        let a = implies(t)?;
        t.expect_sym(")")?;
        return Ok(a);
    }
    if t.eat_word("true") {
        return Ok(F::True);
    }
    if t.eat_word("false") {
        return Ok(F::False);
    }
    let kind = t.ident()?;
    let agent = t.ident()?;
    let atom = parse_atom(t)?;
    if !atom.is_ground() {
        return Err(t.error(format!("`{atom}` must be ground")));
    }
    match kind.as_str() {
        "B" => Ok(F::B(agent, atom)),
        "G" => Ok(F::G(agent, atom)),
        "D" => Ok(F::D(agent, atom)),
        _ => Err(t.error(format!("expected `B`, `G` or `D`, found `{kind}`"))),
    }
}

/// The speed-controller safety property for every agent that starts with
/// a goal `joining(X, Y)`.
pub fn eq1(programs: &[Program]) -> Option<AgentFormula> {
    programs
        .iter()
        .flat_map(|p| p.goals.iter().filter(|g| g.pred == "joining" && g.args.len() == 2).map(move |g| (p, g)))
        .map(|(p, g)| {
            let x = p.name.clone();
            let agreement = Atom { pred: "join_agreement".into(), args: g.args.clone() };
            let pre = F::And(Box::new(F::G(x.clone(), g.clone())), Box::new(F::Not(Box::new(F::B(x.clone(), agreement)))));
            let post = F::Not(Box::new(F::D(x, Atom::new("speed_controller", &["1"]))));
            F::Implies(Box::new(F::Always(Box::new(pre))), Box::new(F::Always(Box::new(post))))
        })
        .reduce(|a, b| F::And(Box::new(a), Box::new(b)))
}

/// Parses a query over the agents in `programs`; `eq1` names the preset.
pub fn parse_agent_query(text: &str, programs: &[Program]) -> Result<AgentQuery, SyntaxError> {
    let formula = if text.trim() == "eq1" {
        eq1(programs).ok_or_else(|| SyntaxError::new(Default::default(), "no agent has a joining goal"))?
    } else {
        let mut t = Tokens::parse(text, 1)?;
        let f = implies(&mut t)?;
        t.finish()?;
        f
    };
    let mut names = Vec::new();
    formula.agents(&mut names);
    if let Some(x) = names.iter().find(|x| !programs.iter().any(|p| p.name == **x)) {
        return Err(SyntaxError::new(Default::default(), format!("unknown agent `{x}`")));
    }
    Ok(AgentQuery { text: text.trim().to_string(), formula })
}

/// Breadth-first search from the initial state through states satisfying
/// `keep`, returning a shortest path to a state satisfying `bad`.
fn find(g: &StateGraph, keep: &dyn Fn(usize) -> bool, bad: &dyn Fn(usize) -> bool) -> Option<Vec<usize>> {
    if !keep(0) {
        return None;
    }
    let mut parent: Vec<Option<usize>> = vec![None; g.len()];
    let mut seen = vec![false; g.len()];
    seen[0] = true;
    let mut queue = VecDeque::from([0]);
    while let Some(s) = queue.pop_front() {
        if bad(s) {
            let mut path = vec![s];
            let mut cur = s;
            while let Some(p) = parent[cur] {
                path.push(p);
                cur = p;
            }
            path.reverse();
            return Some(path);
        }
        for (_, t) in &g.edges[s] {
            if !seen[*t] && keep(*t) {
                seen[*t] = true;
                parent[*t] = Some(s);
                queue.push_back(*t);
            }
        }
    }
    None
}

/// A path avoiding `p` that ends in a terminal state or closes a cycle.
fn avoid_forever(g: &StateGraph, p: &AgentFormula) -> Option<(Vec<usize>, Option<usize>)> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    if p.holds_at(g, 0) {
        return None;
    }
    let mut mark = vec![Mark::New; g.len()];
    let mut stack: Vec<(usize, usize)> = vec![(0, 0)];
    mark[0] = Mark::Active;
    while let Some(&(s, k)) = stack.last() {
        if g.is_terminal(s) {
            return Some((stack.iter().map(|(s, _)| *s).collect(), None));
        }
        if k == g.edges[s].len() {
            mark[s] = Mark::Done;
            stack.pop();
            continue;
        }
        stack.last_mut().expect("non-empty").1 += 1;
        let t = g.edges[s][k].1;
        if p.holds_at(g, t) {
            continue;
        }
        match mark[t] {
            Mark::Active => {
                let mut path: Vec<usize> = stack.iter().map(|(s, _)| *s).collect();
                path.push(t);
                let start = path.iter().position(|x| *x == t);
                return Some((path, start));
            }
            Mark::New => {
                mark[t] = Mark::Active;
                stack.push((t, 0));
            }
            Mark::Done => {}
        }
    }
    None
}

fn render_path(g: &StateGraph, path: &[usize], loop_start: Option<usize>) -> String {
    let mut out = String::new();
    for (k, w) in path.windows(2).enumerate() {
        let label = g.edges[w[0]].iter().find(|(_, t)| *t == w[1]).map(|(l, _)| l.render(&g.names)).unwrap_or_default();
        out.push_str(&format!("step {}: {}\n", k + 1, label));
    }
    if let Some(l) = loop_start {
        out.push_str(&format!("loop {l}\n"));
    }
    out
}

type Verdict = Result<(), (Vec<usize>, Option<usize>)>;

fn check(g: &StateGraph, f: &AgentFormula) -> Result<Verdict, String> {
    if !f.is_temporal() {
        return Ok(if f.holds_at(g, 0) { Ok(()) } else { Err((vec![0], None)) });
    }
    match f {
        F::And(a, b) => match check(g, a)? {
            Ok(()) => check(g, b),
            e => Ok(e),
        },
        F::Always(p) if !p.is_temporal() => Ok(match find(g, &|_| true, &|s| !p.holds_at(g, s)) {
            Some(path) => Err((path, None)),
            None => Ok(()),
        }),
        F::Eventually(p) if !p.is_temporal() => Ok(match avoid_forever(g, p) {
            Some(v) => Err(v),
            None => Ok(()),
        }),
        F::Implies(a, b) => match (a.as_ref(), b.as_ref()) {
            (F::Always(a), F::Always(b)) if !a.is_temporal() && !b.is_temporal() => {
                Ok(match find(g, &|s| a.holds_at(g, s), &|s| !b.holds_at(g, s)) {
                    Some(path) => Err((path, None)),
                    None => Ok(()),
                })
            }
            _ => Err(format!("unsupported formula shape `{f}`")),
        },
        _ => Err(format!("unsupported formula shape `{f}`")),
    }
}

/// Checks `q` over all paths of `g`. `[] A -> [] B` is read on prefixes:
/// every state reachable through `A`-states satisfies `B`.
pub fn check_agent_property(g: &StateGraph, q: &AgentQuery) -> Result<Report, String> {
    let start = Instant::now();
    let verdict = check(g, &q.formula)?;
    let r = Report::new(q.text.clone(), verdict.is_ok(), g.len(), start.elapsed());
    Ok(match verdict {
        Ok(()) => r,
        Err((path, l)) => r.with_trace(render_path(g, &path, l)),
    })
}
