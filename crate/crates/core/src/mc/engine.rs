//! Breadth-first zone-graph exploration and the query checks.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::formula::{Query, StateFormula};
use super::trace::Trace;
use crate::ta::model::{ModelError, Network};
use crate::ta::semantics::{deadlocked_part, enabled_labels, fire, initial_state_with, invariant, Abstraction, EdgeLabel, SymState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Options {
    pub workers: usize,
    /// Disables extrapolation and dead-clock freeing (useful only for
    /// oracle comparisons on models whose zone graph is finite without it).
    pub extrapolate: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options { workers: 1, extrapolate: true }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub holds: bool,
    pub trace: Option<Trace>,
    pub states: usize,
    pub elapsed: Duration,
    /// Extra explanation, e.g. offending edges of a locality check.
    pub note: Option<String>,
}

/// Explored zone graph with parent pointers.
pub struct Graph {
    pub states: Vec<SymState>,
    pub parent: Vec<Option<(usize, EdgeLabel)>>,
}

impl Graph {
    pub fn path_to(&self, mut k: usize) -> Trace {
        let mut states = vec![self.states[k].clone()];
        let mut labels = Vec::new();
        while let Some((p, l)) = &self.parent[k] {
            states.push(self.states[*p].clone());
            labels.push(l.clone());
            k = *p;
        }
        states.reverse();
        labels.reverse();
        Trace { states, labels, loop_start: None }
    }
}

pub struct Explorer<'a> {
    pub net: &'a Network,
    pub abstraction: Abstraction,
    pub options: Options,
}

type Key = (Vec<usize>, Vec<i32>);

impl<'a> Explorer<'a> {
    pub fn new(net: &'a Network, formulas: &[&StateFormula], options: Options) -> Self {
        Explorer { net, abstraction: query_abstraction(net, formulas), options }
    }

    pub fn extrapolation(&self) -> Option<&Abstraction> {
        self.options.extrapolate.then_some(&self.abstraction)
    }

    pub fn initial(&self) -> Result<SymState, ModelError> {
        initial_state_with(self.net, self.extrapolation())
    }

    fn expand(&self, s: &SymState) -> Vec<(EdgeLabel, SymState)> {
        let ex = self.extrapolation();
        enabled_labels(self.net, s).into_iter().filter_map(|l| fire(self.net, s, &s.zone, &l, ex).map(|t| (l, t))).collect()
    }

    /// Maps `f` over `items` using the configured worker count; the result
    /// order matches the input order.
    fn par_map<T: Sync, U: Send>(&self, items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
        if self.options.workers <= 1 || items.len() < 2 {
            return items.iter().map(f).collect();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(self.options.workers).build() {
            Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
            Err(_) => items.iter().map(f).collect(),
        }
    }

    /// BFS with inclusion checking. Stops at the first inserted state
    /// satisfying `goal` (in deterministic insertion order).
    pub fn search(&self, goal: &(dyn Fn(&SymState) -> bool + Sync)) -> Result<(Graph, Option<usize>), ModelError> {
        let init = self.initial()?;
        let mut graph = Graph { states: vec![init.clone()], parent: vec![None] };
        let mut index: HashMap<Key, Vec<usize>> = HashMap::new();
        index.entry((init.locs.clone(), init.vars.clone())).or_default().push(0);
        if goal(&init) {
            return Ok((graph, Some(0)));
        }
        let mut frontier = vec![0usize];
        while !frontier.is_empty() {
            let expanded: Vec<Vec<(EdgeLabel, SymState, bool)>> = {
                let states = &graph.states;
                let items: Vec<&SymState> = frontier.iter().map(|k| &states[*k]).collect();
                self.par_map(&items, |s| {
                    self.expand(s)
                        .into_iter()
                        .map(|(l, t)| {
                            let g = goal(&t);
                            (l, t, g)
                        })
                        .collect()
                })
            };
            let mut next = Vec::new();
            for (src, succs) in frontier.iter().zip(expanded) {
                for (label, t, is_goal) in succs {
                    let key = (t.locs.clone(), t.vars.clone());
                    let bucket = index.entry(key).or_default();
                    if bucket.iter().any(|k| graph.states[*k].zone.includes(&t.zone).unwrap_or(false)) {
                        continue;
                    }
                    let id = graph.states.len();
                    bucket.push(id);
                    graph.states.push(t);
                    graph.parent.push(Some((*src, label)));
                    if is_goal {
                        return Ok((graph, Some(id)));
                    }
                    next.push(id);
                }
            }
            frontier = next;
        }
        Ok((graph, None))
    }

    pub fn reach(&self, phi: &StateFormula) -> Result<Outcome, ModelError> {
        let start = Instant::now();
        let (graph, found) = self.search(&|s| phi.intersects(self.net, s))?;
        Ok(Outcome {
            holds: found.is_some(),
            trace: found.map(|k| self.witness(&graph, k, phi)),
            states: graph.states.len(),
            elapsed: start.elapsed(),
            note: None,
        })
    }

    /// Path to state `k`, with the final zone narrowed to the part satisfying `phi`.
    fn witness(&self, graph: &Graph, k: usize, phi: &StateFormula) -> Trace {
        let mut t = graph.path_to(k);
        let last = t.states.last_mut().expect("non-empty path");
        if let Some(z) = phi.restrict(self.net, last, &last.zone).into_iter().next() {
            last.zone = z;
        }
        t
    }

    pub fn safety(&self, phi: &StateFormula) -> Result<Outcome, ModelError> {
        let bad = StateFormula::not(phi.clone());
        let mut o = self.reach(&bad)?;
        o.holds = !o.holds;
        Ok(o)
    }

    pub fn deadlock_free(&self) -> Result<Outcome, ModelError> {
        self.safety(&StateFormula::not(StateFormula::Deadlock))
    }

    /// Full reachable zone graph (no early stop).
    pub fn explore(&self) -> Result<Graph, ModelError> {
        Ok(self.search(&|_| false)?.0)
    }

    pub fn leads_to(&self, p: &StateFormula, q: &StateFormula) -> Result<Outcome, ModelError> {
        let start = Instant::now();
        let graph = self.explore()?;
        let not_q = StateFormula::not(q.clone());
        let p_not_q = StateFormula::and(p.clone(), not_q.clone());
        let mut search = LeadsToSearch { ex: self, not_q: &not_q, nodes: Vec::new(), ids: HashMap::new(), status: Vec::new() };
        for (k, s) in graph.states.iter().enumerate() {
            for piece in p_not_q.restrict(self.net, s, &s.zone) {
                let zone = if s.is_committed(self.net) { piece } else { piece.up().and(&invariant(self.net, &s.locs)) };
                let sub = SymState { locs: s.locs.clone(), vars: s.vars.clone(), zone };
                for z in not_q.restrict(self.net, &sub, &sub.zone) {
                    let root = SymState { locs: s.locs.clone(), vars: s.vars.clone(), zone: z };
                    if let Some((path, loop_start)) = search.run(root) {
                        let mut trace = graph.path_to(k);
                        let prefix = trace.states.len() - 1;
                        trace.states.truncate(prefix);
                        for (j, (label, st)) in path.into_iter().enumerate() {
                            if let Some(l) = label {
                                trace.labels.push(l);
                            } else {
                                debug_assert_eq!(j, 0);
                            }
                            trace.states.push(st);
                        }
                        trace.loop_start = loop_start.map(|l| l + prefix);
                        return Ok(Outcome {
                            holds: false,
                            trace: Some(trace),
                            states: graph.states.len() + search.nodes.len(),
                            elapsed: start.elapsed(),
                            note: Some(if loop_start.is_some() { "q-avoiding cycle".into() } else { "q-avoiding deadlock".into() }),
                        });
                    }
                }
            }
        }
        Ok(Outcome { holds: true, trace: None, states: graph.states.len() + search.nodes.len(), elapsed: start.elapsed(), note: None })
    }

    pub fn check(&self, query: &Query) -> Result<Outcome, ModelError> {
        match query {
            Query::Safety(f) => self.safety(f),
            Query::Reach(f) => self.reach(f),
            Query::LeadsTo(p, q) => self.leads_to(p, q),
            Query::DeadlockFree => self.deadlock_free(),
            Query::Locality { channels, templates } => channel_locality(self.net, channels, templates),
        }
    }
}

/// Model abstraction with the constants and clocks of `formulas` added.
pub fn query_abstraction(net: &Network, formulas: &[&StateFormula]) -> Abstraction {
    let mut a = Abstraction::of(net);
    for f in formulas {
        f.note_constants(&mut a.max_const);
        f.note_clocks(&mut a.keep);
    }
    a
}

const NEW: u8 = 0;
const ACTIVE: u8 = 1;
const DONE: u8 = 2;

struct LeadsToSearch<'e, 'a> {
    ex: &'e Explorer<'a>,
    not_q: &'e StateFormula,
    nodes: Vec<SymState>,
    ids: HashMap<SymState, usize>,
    status: Vec<u8>,
}

impl LeadsToSearch<'_, '_> {
    fn id(&mut self, s: SymState) -> usize {
        if let Some(k) = self.ids.get(&s) {
            return *k;
        }
        let k = self.nodes.len();
        self.ids.insert(s.clone(), k);
        self.nodes.push(s);
        self.status.push(NEW);
        k
    }

    fn children(&self, k: usize) -> Vec<(EdgeLabel, SymState)> {
        let s = &self.nodes[k];
        let net = self.ex.net;
        let mut out = Vec::new();
        for (l, t) in self.ex.expand(s) {
            for z in self.not_q.restrict(net, &t, &t.zone) {
                out.push((l.clone(), SymState { locs: t.locs.clone(), vars: t.vars.clone(), zone: z }));
            }
        }
        out
    }

    /// Depth-first search for a ¬q cycle or ¬q deadlock from `root`.
    /// Returns the path (first label `None`) and the loop index if cyclic.
    #[allow(clippy::type_complexity)]
    fn run(&mut self, root: SymState) -> Option<(Vec<(Option<EdgeLabel>, SymState)>, Option<usize>)> {
        let r = self.id(root);
        if self.status[r] == DONE {
            return None;
        }
        let mut stack: Vec<(usize, Option<EdgeLabel>, Vec<(EdgeLabel, SymState)>)> = Vec::new();
        let path_of = |stack: &Vec<(usize, Option<EdgeLabel>, Vec<(EdgeLabel, SymState)>)>, nodes: &Vec<SymState>| {
            stack.iter().map(|(k, l, _)| (l.clone(), nodes[*k].clone())).collect::<Vec<_>>()
        };
        self.status[r] = ACTIVE;
        if !deadlocked_part(self.ex.net, &self.nodes[r]).is_empty() {
            return Some((vec![(None, self.nodes[r].clone())], None));
        }
        let mut kids = self.children(r);
        kids.reverse();
        stack.push((r, None, kids));
        while let Some(top) = stack.last_mut() {
            let Some((label, child)) = top.2.pop() else {
                let (k, _, _) = stack.pop().expect("non-empty");
                self.status[k] = DONE;
                continue;
            };
            let c = self.id(child);
            match self.status[c] {
                DONE => continue,
                ACTIVE => {
                    let mut path = path_of(&stack, &self.nodes);
                    let at = stack.iter().position(|(k, _, _)| *k == c).expect("active node on stack");
                    path.push((Some(label), self.nodes[c].clone()));
                    return Some((path, Some(at)));
                }
                _ => {
                    self.status[c] = ACTIVE;
                    if !deadlocked_part(self.ex.net, &self.nodes[c]).is_empty() {
                        let mut path = path_of(&stack, &self.nodes);
                        path.push((Some(label), self.nodes[c].clone()));
                        return Some((path, None));
                    }
                    let mut kids = self.children(c);
                    kids.reverse();
                    stack.push((c, Some(label), kids));
                }
            }
        }
        None
    }
}

/// Structural check: every edge synchronising on one of `channels` belongs
/// to one of `templates`.
pub fn channel_locality(net: &Network, channels: &[String], templates: &[String]) -> Result<Outcome, ModelError> {
    let start = Instant::now();
    for c in channels {
        if net.decls.chan(c).is_none() {
            return Err(ModelError::Undeclared { kind: "channel", name: c.clone() });
        }
    }
    let mut offending = Vec::new();
    for t in &net.templates {
        if templates.contains(&t.name) {
            continue;
        }
        for e in &t.edges {
            if let Some(s) = &e.sync {
                if channels.contains(&s.chan) {
                    offending.push(format!("{}: {} -> {} sync {}", t.name, e.source, e.target, s.render()));
                }
            }
        }
    }
    Ok(Outcome {
        holds: offending.is_empty(),
        trace: None,
        states: 0,
        elapsed: start.elapsed(),
        note: (!offending.is_empty()).then(|| format!("offending edges: {}", offending.join("; "))),
    })
}
