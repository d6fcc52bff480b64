//! Finite automata over synchronisation labels.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::model::{Location, Sync, Template};

/// Nondeterministic automaton with ε-moves (`None` labels). Every state is
/// accepting, so the language is prefix-closed.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FiniteAutomaton {
    pub states: Vec<String>,
    pub initial: usize,
    pub transitions: Vec<(usize, Option<String>, usize)>,
}

/// Deterministic automaton whose states are subsets of an NFA's states;
/// state 0 is initial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dfa {
    pub subsets: Vec<BTreeSet<usize>>,
    pub next: Vec<BTreeMap<String, usize>>,
}

impl Dfa {
    pub fn step(&self, state: usize, label: &str) -> Option<usize> {
        self.next[state].get(label).copied()
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    /// Merges states with the same future (Moore refinement); merged
    /// states carry the union of their subsets. State 0 stays initial.
    pub fn minimize(&self) -> Dfa {
        let n = self.len();
        let mut class = vec![0usize; n];
        loop {
            let mut sigs: Vec<(usize, Vec<(&String, usize)>)> = Vec::new();
            let mut next_class = vec![0usize; n];
            for s in 0..n {
                let sig = (class[s], self.next[s].iter().map(|(l, t)| (l, class[*t])).collect::<Vec<_>>());
                next_class[s] = match sigs.iter().position(|x| *x == sig) {
                    Some(k) => k,
                    None => {
                        sigs.push(sig);
                        sigs.len() - 1
                    }
                };
            }
            let stable = sigs.len() == class.iter().collect::<BTreeSet<_>>().len();
            class = next_class;
            if stable {
                break;
            }
        }
        let mut order: Vec<usize> = Vec::new();
        let mut rename = BTreeMap::new();
        let mut queue = VecDeque::from([0usize]);
        while let Some(s) = queue.pop_front() {
            if rename.contains_key(&class[s]) {
                continue;
            }
            rename.insert(class[s], order.len());
            order.push(class[s]);
            queue.extend(self.next[s].values().copied());
        }
        let mut dfa = Dfa { subsets: vec![BTreeSet::new(); order.len()], next: vec![BTreeMap::new(); order.len()] };
        for s in 0..n {
            let Some(&k) = rename.get(&class[s]) else { continue };
            dfa.subsets[k].extend(self.subsets[s].iter().copied());
            for (l, t) in &self.next[s] {
                dfa.next[k].insert(l.clone(), rename[&class[*t]]);
            }
        }
        dfa
    }
}

/// Label of a synchronisation with any channel index dropped, e.g. `abort!`.
pub fn sync_label(s: &Sync) -> String {
    format!("{}{}", s.chan, s.dir.symbol())
}

impl FiniteAutomaton {
    pub fn new() -> Self {
        FiniteAutomaton::default()
    }

    pub fn add_state(&mut self, name: impl Into<String>) -> usize {
        self.states.push(name.into());
        self.states.len() - 1
    }

    pub fn add_transition(&mut self, from: usize, label: Option<String>, to: usize) {
        self.transitions.push((from, label, to));
    }

    pub fn state(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    /// Untimed skeleton of a template: locations kept, edges labelled by
    /// their synchronisation, internal edges become ε.
    pub fn from_template(t: &Template) -> Self {
        let mut a = FiniteAutomaton::new();
        for l in &t.locations {
            a.add_state(l.name.clone());
        }
        a.initial = a.state(&t.initial).unwrap_or(0);
        for e in &t.edges {
            let (Some(s), Some(d)) = (a.state(&e.source), a.state(&e.target)) else { continue };
            a.add_transition(s, e.sync.as_ref().map(sync_label), d);
        }
        a
    }

    pub fn alphabet(&self) -> BTreeSet<String> {
        self.transitions.iter().filter_map(|(_, l, _)| l.clone()).collect()
    }

    fn adjacency(&self) -> Vec<Vec<(Option<&str>, usize)>> {
        let mut adj = vec![Vec::new(); self.states.len()];
        for (f, l, t) in &self.transitions {
            adj[*f].push((l.as_deref(), *t));
        }
        adj
    }

    fn closure_in(adj: &[Vec<(Option<&str>, usize)>], mut out: BTreeSet<usize>) -> BTreeSet<usize> {
        let mut queue: VecDeque<usize> = out.iter().copied().collect();
        while let Some(s) = queue.pop_front() {
            for (l, t) in &adj[s] {
                if l.is_none() && out.insert(*t) {
                    queue.push_back(*t);
                }
            }
        }
        out
    }

    fn step_in(adj: &[Vec<(Option<&str>, usize)>], set: &BTreeSet<usize>, label: &str) -> BTreeSet<usize> {
        let next = set.iter().flat_map(|s| adj[*s].iter()).filter(|(l, _)| *l == Some(label)).map(|(_, t)| *t).collect();
        Self::closure_in(adj, next)
    }

    pub fn closure(&self, set: &BTreeSet<usize>) -> BTreeSet<usize> {
        Self::closure_in(&self.adjacency(), set.clone())
    }

    pub fn step(&self, set: &BTreeSet<usize>, label: &str) -> BTreeSet<usize> {
        Self::step_in(&self.adjacency(), set, label)
    }

    pub fn start(&self) -> BTreeSet<usize> {
        if self.states.is_empty() {
            return BTreeSet::new();
        }
        self.closure(&BTreeSet::from([self.initial]))
    }

    /// Length of the longest accepted prefix of `word`.
    pub fn accepted_prefix<S: AsRef<str>>(&self, word: &[S]) -> usize {
        if self.states.is_empty() {
            return 0;
        }
        let adj = self.adjacency();
        let mut cur = Self::closure_in(&adj, BTreeSet::from([self.initial]));
        for (k, w) in word.iter().enumerate() {
            cur = Self::step_in(&adj, &cur, w.as_ref());
            if cur.is_empty() {
                return k;
            }
        }
        word.len()
    }

    pub fn accepts<S: AsRef<str>>(&self, word: &[S]) -> bool {
        self.accepted_prefix(word) == word.len()
    }

    /// Same automaton with every label outside `visible` turned into ε.
    pub fn hide_except(&self, visible: &BTreeSet<String>) -> FiniteAutomaton {
        let mut a = self.clone();
        for (_, l, _) in &mut a.transitions {
            if l.as_ref().is_some_and(|x| !visible.contains(x)) {
                *l = None;
            }
        }
        a
    }

    /// Subset construction from the ε-closure of `from`. The result has no
    /// ε-moves; empty subsets are not materialised.
    pub fn determinize(&self, from: &BTreeSet<usize>) -> Dfa {
        let adj = self.adjacency();
        let alphabet = self.alphabet();
        let mut dfa = Dfa { subsets: vec![Self::closure_in(&adj, from.clone())], next: vec![BTreeMap::new()] };
        let mut k = 0;
        while k < dfa.subsets.len() {
            for a in &alphabet {
                let t = Self::step_in(&adj, &dfa.subsets[k], a);
                if t.is_empty() {
                    continue;
                }
                let j = match dfa.subsets.iter().position(|s| *s == t) {
                    Some(j) => j,
                    None => {
                        dfa.subsets.push(t);
                        dfa.next.push(BTreeMap::new());
                        dfa.subsets.len() - 1
                    }
                };
                dfa.next[k].insert(a.clone(), j);
            }
            k += 1;
        }
        dfa
    }

    /// Template with the same locations and labelled edges; ε-moves become
    /// internal edges. Channel indices are not recoverable and are omitted.
    pub fn to_template(&self, name: &str) -> Template {
        let mut t = Template::new(name);
        t.locations = self.states.iter().map(|s| Location::new(s)).collect();
        t.initial = self.states.get(self.initial).cloned().unwrap_or_default();
        for (f, l, d) in &self.transitions {
            let mut e = super::model::Edge::new(&self.states[*f], &self.states[*d]);
            if let Some(l) = l {
                let (chan, dir) = l.split_at(l.len() - 1);
                e = e.sync(if dir == "!" { Sync::send(chan, None) } else { Sync::recv(chan, None) });
            }
            t.edges.push(e);
        }
        t
    }
}

/// Drops every clock, invariant, guard and update; locations and
/// synchronisations are kept verbatim.
pub fn untimed_projection(t: &Template) -> Template {
    let mut u = t.clone();
    u.clocks.clear();
    u.vars.clear();
    for l in &mut u.locations {
        l.invariant.clear();
    }
    for e in &mut u.edges {
        e.clock_guard.clear();
        e.data_guard = None;
        e.updates.clear();
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ta::model::Edge;

    #[test]
    fn prefix_acceptance_with_epsilon() {
        let mut a = FiniteAutomaton::new();
        let s0 = a.add_state("s0");
        let s1 = a.add_state("s1");
        let s2 = a.add_state("s2");
        a.add_transition(s0, Some("a!".into()), s1);
        a.add_transition(s1, None, s2);
        a.add_transition(s2, Some("b?".into()), s0);
        assert!(a.accepts(&["a!", "b?", "a!"]));
        assert_eq!(a.accepted_prefix(&["a!", "a!"]), 1);
        assert_eq!(a.alphabet().len(), 2);
    }

    #[test]
    fn determinize_hidden_labels() {
        let mut a = FiniteAutomaton::new();
        let s0 = a.add_state("s0");
        let s1 = a.add_state("s1");
        let s2 = a.add_state("s2");
        a.add_transition(s0, Some("x!".into()), s1);
        a.add_transition(s1, Some("a!".into()), s2);
        a.add_transition(s0, Some("a!".into()), s0);
        let d = a.hide_except(&BTreeSet::from(["a!".to_string()])).determinize(&BTreeSet::from([s0]));
        assert_eq!(d.subsets[0], BTreeSet::from([s0, s1]));
        let n = d.step(0, "a!").unwrap();
        assert_eq!(d.subsets[n], BTreeSet::from([s0, s1, s2]));
        assert_eq!(d.step(0, "x!"), None);
        let m = d.minimize();
        assert_eq!(m.len(), 1);
        assert_eq!(m.step(0, "a!"), Some(0));
    }

    #[test]
    fn empty_automaton() {
        let a = FiniteAutomaton::from_template(&Template::new("E"));
        assert!(a.alphabet().is_empty());
        assert!(a.accepts::<&str>(&[]));
    }

    #[test]
    fn projection_of_untimed_is_identity() {
        let mut t = Template::new("U");
        t.locations = vec![Location::new("a"), Location::new("b")];
        t.initial = "a".into();
        t.edges = vec![Edge::new("a", "b").sync(Sync::send("go", None))];
        assert_eq!(untimed_projection(&t), t);
        assert_eq!(FiniteAutomaton::from_template(&t).to_template("U"), t);
    }
}
