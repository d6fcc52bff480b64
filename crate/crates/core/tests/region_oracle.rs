//! Model-checking verdicts against an explicit region-graph checker.
//!
//! Random networks of two processes, each owning one clock, with constants
//! at most 5, a shared channel and a shared 0..1 variable. The oracle
//! explores the region graph (integer parts up to 5, fractional ordering)
//! with the same step rules as the network semantics and decides
//! reachability, safety and deadlock freedom on it.

use std::collections::{HashSet, VecDeque};

use platoon_core::mc::{check_query, query_abstraction, Options};
use platoon_core::pvm::{parse_document, parse_model, serialize};
use proptest::prelude::*;
use proptest::test_runner::TestRunner;

const M: i32 = 5;
const CLOCKS: [&str; 2] = ["x", "y"];
const PROCS: [&str; 2] = ["p", "q"];

#[derive(Clone, Copy, Debug)]
enum Op {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Op {
    fn text(self) -> &'static str {
        match self {
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Gt => ">",
            Op::Ge => ">=",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Sync {
    None,
    Send,
    Recv,
}

#[derive(Clone, Debug)]
struct Edge {
    src: usize,
    dst: usize,
    guard: Vec<(Op, i32)>,
    reset: bool,
    sync: Sync,
    when: Option<i32>,
    set: Option<i32>,
}

#[derive(Clone, Debug)]
struct Proc {
    inv: Vec<Option<(bool, i32)>>,
    committed: Vec<bool>,
    edges: Vec<Edge>,
}

#[derive(Clone, Debug)]
struct Model {
    procs: [Proc; 2],
}

impl Model {
    fn text(&self) -> String {
        let mut out = String::from("chan a\nvar n 0..1 = 0\n\n");
        for (k, p) in self.procs.iter().enumerate() {
            let x = CLOCKS[k];
            out += &format!("template T{k}\n  clock {x}\n");
            for l in 0..p.inv.len() {
                out += &format!("  loc l{l}");
                if l == 0 {
                    out += " initial";
                } else if p.committed[l] {
                    out += " committed";
                }
                if let Some((strict, c)) = p.inv[l] {
                    out += &format!(" inv {x}{}{c}", if strict { "<" } else { "<=" });
                }
                out += "\n";
            }
            for e in &p.edges {
                out += &format!("  edge l{} -> l{}", e.src, e.dst);
                let mut g: Vec<String> = e.guard.iter().map(|(op, c)| format!("{x}{}{c}", op.text())).collect();
                if let Some(v) = e.when {
                    g.push(format!("n=={v}"));
                }
                if !g.is_empty() {
                    out += &format!(" guard {}", g.join(" and "));
                }
                match e.sync {
                    Sync::Send => out += " sync a!",
                    Sync::Recv => out += " sync a?",
                    Sync::None => {}
                }
                let mut d = Vec::new();
                if e.reset {
                    d.push(format!("{x}=0"));
                }
                if let Some(v) = e.set {
                    d.push(format!("n={v}"));
                }
                if !d.is_empty() {
                    out += &format!(" do {}", d.join(", "));
                }
                out += "\n";
            }
            out += "end\n\n";
        }
        out + "system p=T0 q=T1\n"
    }
}

/// Clock region: integer parts (`M + 1` stands for "above M") and the
/// bounded clocks with non-zero fractional part grouped by increasing
/// fractional part.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Region {
    ints: [i32; 2],
    classes: Vec<Vec<usize>>,
}

impl Region {
    fn zero() -> Region {
        Region { ints: [0, 0], classes: Vec::new() }
    }

    fn frac_zero(&self, c: usize) -> bool {
        self.ints[c] <= M && !self.classes.iter().any(|k| k.contains(&c))
    }

    fn holds(&self, c: usize, op: Op, k: i32) -> bool {
        let i = self.ints[c];
        if i > M {
            return matches!(op, Op::Gt | Op::Ge);
        }
        if self.frac_zero(c) {
            return match op {
                Op::Lt => i < k,
                Op::Le => i <= k,
                Op::Gt => i > k,
                Op::Ge => i >= k,
            };
        }
        match op {
            Op::Lt | Op::Le => i < k,
            Op::Gt | Op::Ge => i >= k,
        }
    }

    fn delay(&self) -> Option<Region> {
        let mut r = self.clone();
        let zeros: Vec<usize> = (0..2).filter(|&c| self.frac_zero(c)).collect();
        if !zeros.is_empty() {
            let mut first = Vec::new();
            for c in zeros {
                if r.ints[c] == M {
                    r.ints[c] = M + 1;
                } else {
                    first.push(c);
                }
            }
            if !first.is_empty() {
                r.classes.insert(0, first);
            }
            return Some(r);
        }
        let last = r.classes.pop()?;
        for c in last {
            r.ints[c] += 1;
        }
        Some(r)
    }

    fn reset(&mut self, c: usize) {
        self.ints[c] = 0;
        for k in &mut self.classes {
            k.retain(|&d| d != c);
        }
        self.classes.retain(|k| !k.is_empty());
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct State {
    locs: [usize; 2],
    n: i32,
    r: Region,
}

struct Oracle<'a> {
    m: &'a Model,
}

impl Oracle<'_> {
    fn committed(&self, s: &State) -> bool {
        (0..2).any(|k| self.m.procs[k].committed[s.locs[k]])
    }

    fn inv_ok(&self, locs: &[usize; 2], r: &Region) -> bool {
        (0..2).all(|k| match self.m.procs[k].inv[locs[k]] {
            None => true,
            Some((strict, c)) => r.holds(k, if strict { Op::Lt } else { Op::Le }, c),
        })
    }

    fn enabled(&self, s: &State, k: usize, e: &Edge) -> bool {
        e.src == s.locs[k] && e.when.is_none_or(|v| v == s.n) && e.guard.iter().all(|(op, c)| s.r.holds(k, *op, *c))
    }

    fn actions(&self, s: &State) -> Vec<State> {
        let committed = self.committed(s);
        let from_committed = |k: usize| self.m.procs[k].committed[s.locs[k]];
        let mut out = Vec::new();
        for k in 0..2 {
            for e in &self.m.procs[k].edges {
                if !self.enabled(s, k, e) {
                    continue;
                }
                match e.sync {
                    Sync::None if !committed || from_committed(k) => out.extend(self.fire(s, &[(k, e)])),
                    Sync::Send => {
                        let j = 1 - k;
                        if committed && !from_committed(k) && !from_committed(j) {
                            continue;
                        }
                        for f in &self.m.procs[j].edges {
                            if f.sync == Sync::Recv && self.enabled(s, j, f) {
                                out.extend(self.fire(s, &[(k, e), (j, f)]));
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
        out
    }

    fn fire(&self, s: &State, parts: &[(usize, &Edge)]) -> Option<State> {
        let mut t = s.clone();
        for (k, e) in parts {
            t.locs[*k] = e.dst;
            if let Some(v) = e.set {
                t.n = v;
            }
            if e.reset {
                t.r.reset(*k);
            }
        }
        self.inv_ok(&t.locs, &t.r).then_some(t)
    }

    fn delay(&self, s: &State) -> Option<State> {
        if self.committed(s) {
            return None;
        }
        let r = s.r.delay()?;
        self.inv_ok(&s.locs, &r).then(|| State { r, ..s.clone() })
    }

    fn deadlocked(&self, s: &State) -> bool {
        let mut cur = s.clone();
        loop {
            if !self.actions(&cur).is_empty() {
                return false;
            }
            match self.delay(&cur) {
                Some(next) if next != cur => cur = next,
                _ => return true,
            }
        }
    }

    fn reachable(&self) -> Vec<State> {
        let init = State { locs: [0, 0], n: 0, r: Region::zero() };
        let mut seen = HashSet::from([init.clone()]);
        let mut queue = VecDeque::from([init]);
        let mut out = Vec::new();
        while let Some(s) = queue.pop_front() {
            for t in self.actions(&s).into_iter().chain(self.delay(&s)) {
                if seen.insert(t.clone()) {
                    queue.push_back(t);
                }
            }
            out.push(s);
        }
        out
    }
}

fn edge(nlocs: usize) -> impl Strategy<Value = Edge> {
    (
        0..nlocs,
        0..nlocs,
        prop::collection::vec((prop_oneof![Just(Op::Lt), Just(Op::Le), Just(Op::Gt), Just(Op::Ge)], 0..=M), 0..3),
        any::<bool>(),
        prop_oneof![2 => Just(Sync::None), 1 => Just(Sync::Send), 1 => Just(Sync::Recv)],
        prop::option::weighted(0.3, 0..=1i32),
        prop::option::weighted(0.3, 0..=1i32),
    )
        .prop_map(|(src, dst, guard, reset, sync, when, set)| Edge { src, dst, guard, reset, sync, when, set })
}

fn process() -> impl Strategy<Value = Proc> {
    (2usize..=4).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::option::weighted(0.4, (any::<bool>(), 1..=M)), n),
            prop::collection::vec(prop::bool::weighted(0.15), n),
            prop::collection::vec(edge(n), 1..=6),
        )
            .prop_map(|(inv, mut committed, edges)| {
                committed[0] = false;
                Proc { inv, committed, edges }
            })
    })
}

fn model() -> impl Strategy<Value = Model> {
    (process(), process()).prop_map(|(p, q)| Model { procs: [p, q] })
}

#[derive(Clone, Debug)]
struct Targets {
    locs: [usize; 2],
    clock: usize,
    op: Op,
    c: i32,
    n: Option<i32>,
}

fn targets() -> impl Strategy<Value = Targets> {
    (0..4usize, 0..4usize, 0..2usize, prop_oneof![Just(Op::Gt), Just(Op::Ge), Just(Op::Lt), Just(Op::Le)], 0..=M, prop::option::of(0..=1i32))
        .prop_map(|(a, b, clock, op, c, n)| Targets { locs: [a, b], clock, op, c, n })
}

fn check(net: &platoon_core::ta::model::Network, q: &str, options: Options) -> bool {
    let o = check_query(net, q, options).unwrap_or_else(|e| panic!("{q}: {e}"));
    if let Some(t) = &o.trace {
        let abs = query_abstraction(net, q).unwrap();
        let abs = if options.extrapolate { Some(&abs) } else { None };
        t.replay(net, abs).unwrap_or_else(|e| panic!("{q}: trace does not replay: {e}"));
    }
    o.holds
}

/// Reach, safety and deadlock queries with their region-graph verdicts.
fn expected(m: &Model, t: &Targets) -> Vec<(String, bool)> {
    let oracle = Oracle { m };
    let states = oracle.reachable();
    let locs = [t.locs[0] % m.procs[0].inv.len(), t.locs[1] % m.procs[1].inv.len()];

    let mut reach = format!("E<> p.l{} and q.l{}", locs[0], locs[1]);
    if let Some(v) = t.n {
        reach += &format!(" and n=={v}");
    }
    let reached = states.iter().any(|s| s.locs == locs && t.n.is_none_or(|v| v == s.n));

    let clk = format!("{}.{}", PROCS[t.clock], CLOCKS[t.clock]);
    let safety = format!("A[] p.l{} imply {clk} {} {}", locs[0], t.op.text(), t.c);
    let safe = states.iter().all(|s| s.locs[0] != locs[0] || s.r.holds(t.clock, t.op, t.c));

    let deadlock_free = !states.iter().any(|s| oracle.deadlocked(s));
    vec![(reach, reached), (safety, safe), ("A[] not deadlock".into(), deadlock_free)]
}

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    TestRunner::new(ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }).run(&strategy, test).map_err(|e| e.to_string())
}

/// Reach, safety and deadlock verdicts (1 and 3 workers) on `cases` random models.
pub fn region_suite(cases: u32) -> Result<(), String> {
    run(cases, (model(), targets()), |(m, t)| {
        let net = parse_model(&m.text()).unwrap();
        for (q, expect) in expected(&m, &t) {
            for workers in [1, 3] {
                let got = check(&net, &q, Options { workers, ..Options::default() });
                prop_assert_eq!(got, expect, "{} with {} workers\n{}", q, workers, m.text());
            }
        }
        Ok(())
    })
}

/// Same verdicts with and without extrapolation on models whose clocks are
/// bounded by invariants.
pub fn extrapolation_suite(cases: u32) -> Result<(), String> {
    run(cases, (model(), targets()), |(mut m, t)| {
        for p in &mut m.procs {
            for (l, inv) in p.inv.iter_mut().enumerate() {
                if inv.is_none() && !p.committed[l] {
                    *inv = Some((false, M));
                }
            }
        }
        let net = parse_model(&m.text()).unwrap();
        for (q, expect) in expected(&m, &t) {
            for extrapolate in [true, false] {
                let got = check(&net, &q, Options { extrapolate, ..Options::default() });
                prop_assert_eq!(got, expect, "{} with extrapolate={}\n{}", q, extrapolate, m.text());
            }
        }
        Ok(())
    })
}

pub fn round_trip_suite(cases: u32) -> Result<(), String> {
    run(cases, (model(), targets()), |(m, t)| {
        let net = parse_model(&m.text()).unwrap();
        let queries: Vec<String> = expected(&m, &t).into_iter().map(|(q, _)| q).collect();
        let text = serialize(&net, &queries);
        let doc = parse_document(&text).unwrap();
        prop_assert_eq!(&doc.network.templates, &net.templates);
        prop_assert_eq!(&doc.network.instances, &net.instances);
        prop_assert_eq!(&doc.queries, &queries);
        prop_assert_eq!(serialize(&doc.network, &doc.queries), text);
        Ok(())
    })
}

#[test]
fn verdicts_match_region_graph() {
    region_suite(150).unwrap();
}

#[test]
fn verdicts_do_not_depend_on_extrapolation() {
    extrapolation_suite(150).unwrap();
}

#[test]
fn random_models_round_trip() {
    round_trip_suite(150).unwrap();
}
