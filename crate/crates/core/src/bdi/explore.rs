use std::collections::{HashMap, VecDeque};

use super::agent::{AgentConfig, StepEffect};
use super::{Atom, Program};
use crate::ta::automaton::FiniteAutomaton;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Joint {
    pub agents: Vec<AgentConfig>,
    /// Action performed by the step that entered this state.
    pub last: Option<(usize, Atom)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct JointLabel {
    pub agent: usize,
    pub effect: StepEffect,
}

impl JointLabel {
    pub fn render(&self, names: &[String]) -> String {
        let who = &names[self.agent];
        match &self.effect {
            StepEffect::Internal => format!("{who} step"),
            StepEffect::Perform(a) => format!("{who} perf {a}"),
            StepEffect::Send(r, m) => format!("{who} send {r} {m}"),
            StepEffect::Receive(m) => format!("{who} recv {m}"),
            StepEffect::Fail(g) => format!("{who} fail {g}"),
        }
    }
}

/// Label of an effect in the communication skeleton, if visible.
pub fn visible(e: &StepEffect) -> Option<String> {
    match e {
        StepEffect::Perform(a) => Some(format!("perf {a}")),
        StepEffect::Send(r, m) => Some(format!("send {r} {m}")),
        _ => None,
    }
}

#[derive(Clone, Debug, Default)]
pub struct StateGraph {
    pub names: Vec<String>,
    pub states: Vec<Joint>,
    pub edges: Vec<Vec<(JointLabel, usize)>>,
    pub depth: Vec<usize>,
    /// States at the depth bound are kept but not expanded.
    pub expanded: Vec<bool>,
}

impl StateGraph {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.expanded[s] && self.edges[s].is_empty()
    }

    pub fn agent(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Uniformly random walk of at most `steps` transitions.
    pub fn random_path(&self, rng: &mut impl rand::Rng, steps: usize) -> Vec<&JointLabel> {
        let mut s = 0;
        let mut out = Vec::new();
        for _ in 0..steps {
            if self.edges[s].is_empty() {
                break;
            }
            let (l, t) = &self.edges[s][rng.gen_range(0..self.edges[s].len())];
            out.push(l);
            s = *t;
        }
        out
    }
}

fn joint_successors(programs: &[Program], j: &Joint) -> Vec<(JointLabel, Joint)> {
    let mut out = Vec::new();
    for (i, cfg) in j.agents.iter().enumerate() {
        let mut steps: Vec<_> = cfg.internal(&programs[i]).into_iter().collect();
        steps.extend(cfg.deliver());
        for (effect, next) in steps {
            let mut agents = j.agents.clone();
            agents[i] = next;
            if let StepEffect::Send(r, m) = &effect {
                if let Some(k) = programs.iter().position(|p| p.name == *r) {
                    *agents[k].inbox.entry(super::Msg::Belief(m.clone())).or_insert(0) += 1;
                }
            }
            let last = match &effect {
                StepEffect::Perform(a) => Some((i, a.clone())),
                _ => None,
            };
            out.push((JointLabel { agent: i, effect }, Joint { agents, last }));
        }
    }
    out
}

/// Breadth-first exploration of all interleavings up to `depth_bound`
/// steps. Messages to agents outside `programs` are dropped.
pub fn explore(programs: &[Program], depth_bound: usize) -> StateGraph {
    let init = Joint { agents: programs.iter().map(AgentConfig::initial).collect(), last: None };
    let mut g = StateGraph { names: programs.iter().map(|p| p.name.clone()).collect(), ..Default::default() };
    let mut index: HashMap<Joint, usize> = HashMap::new();
    index.insert(init.clone(), 0);
    g.states.push(init);
    g.edges.push(Vec::new());
    g.depth.push(0);
    g.expanded.push(false);
    let mut queue = VecDeque::from([0]);
    while let Some(s) = queue.pop_front() {
        if g.depth[s] >= depth_bound {
            continue;
        }
        g.expanded[s] = true;
        for (label, next) in joint_successors(programs, &g.states[s]) {
            let t = match index.get(&next) {
                Some(t) => *t,
                None => {
                    let t = g.states.len();
                    index.insert(next.clone(), t);
                    g.states.push(next);
                    g.edges.push(Vec::new());
                    g.depth.push(g.depth[s] + 1);
                    g.expanded.push(false);
                    queue.push_back(t);
                    t
                }
            };
            g.edges[s].push((label, t));
        }
    }
    g
}

/// Communication skeleton of one agent: perform and send steps are
/// labelled, everything else is silent. The environment answers every
/// ground wait, delivers reactions and percepts, and drops sends.
pub fn agent_to_untimed(program: &Program) -> FiniteAutomaton {
    let mut fa = FiniteAutomaton::new();
    let init = AgentConfig::initial(program);
    let mut index: HashMap<AgentConfig, usize> = HashMap::new();
    index.insert(init.clone(), fa.add_state("q0"));
    let mut queue = VecDeque::from([init]);
    while let Some(c) = queue.pop_front() {
        let s = index[&c];
        let mut steps: Vec<(StepEffect, AgentConfig)> = c.internal(program).into_iter().collect();
        steps.extend(c.deliver());
        for p in c.awaiting() {
            if p.is_ground() {
                let mut n = c.clone();
                n.beliefs.insert(p.clone());
                steps.push((StepEffect::Receive(p.clone()), n));
            }
        }
        for (eff, n) in steps {
            let t = match index.get(&n) {
                Some(t) => *t,
                None => {
                    let t = fa.add_state(format!("q{}", fa.states.len()));
                    index.insert(n.clone(), t);
                    queue.push_back(n);
                    t
                }
            };
            let label = visible(&eff);
            if label.is_some() || s != t {
                fa.add_transition(s, label, t);
            }
        }
    }
    fa
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bdi::parse_program;

    #[test]
    fn straight_line_body_is_a_path() {
        let p = parse_program("@goal g\n\n+!g : { } <- +a; +b; +c\n", "solo").unwrap();
        let g = explore(&[p], 50);
        // event, three deeds, frame completion
        assert_eq!(g.len(), 6);
        assert!((0..5).all(|s| g.edges[s].len() == 1 && g.edges[s][0].1 == s + 1));
        assert!(g.is_terminal(5));
    }

    #[test]
    fn empty_program_skeleton() {
        let fa = agent_to_untimed(&Program::new("e"));
        assert_eq!(fa.states.len(), 1);
        assert!(fa.alphabet().is_empty());
    }

    #[test]
    fn depth_bound_cuts_exploration() {
        let p = parse_program("@goal g\n\n+!g : { } <- +a; +b; +c\n", "solo").unwrap();
        let g = explore(&[p], 2);
        assert_eq!(g.len(), 3);
        assert!(!g.expanded[2] && !g.is_terminal(2));
    }
}
