use std::collections::{BTreeMap, BTreeSet};

use super::{Atom, Deed, LitKind, Literal, Program, Subst};

/// Inbox entry. A choice is delivered as exactly one of its alternatives.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Msg {
    Belief(Atom),
    Choice(Vec<Atom>),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Frame {
    pub goal: Atom,
    pub body: Vec<Deed>,
    pub pc: usize,
}

impl Frame {
    pub fn current(&self) -> Option<&Deed> {
        self.body.get(self.pc)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentConfig {
    pub beliefs: BTreeSet<Atom>,
    pub goals: BTreeSet<Atom>,
    /// Top-level goal events not yet handled.
    pub events: Vec<Atom>,
    /// Each intention is a stack of frames, innermost last.
    pub intentions: Vec<Vec<Frame>>,
    pub inbox: BTreeMap<Msg, usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum StepEffect {
    Internal,
    Perform(Atom),
    Send(String, Atom),
    Receive(Atom),
    Fail(Atom),
}

fn believes(beliefs: &BTreeSet<Atom>, pattern: &Atom) -> bool {
    beliefs.iter().any(|b| pattern.matches(b, &Subst::new()).is_some())
}

fn solve(lits: &[Literal], cfg: &AgentConfig, s: Subst) -> Option<Subst> {
    let Some((first, rest)) = lits.split_first() else { return Some(s) };
    match first.kind {
        LitKind::NotB => {
            if believes(&cfg.beliefs, &first.atom.apply(&s)) {
                None
            } else {
                solve(rest, cfg, s)
            }
        }
        LitKind::B | LitKind::G => {
            let pool = if first.kind == LitKind::B { &cfg.beliefs } else { &cfg.goals };
            pool.iter().filter_map(|a| first.atom.matches(a, &s)).find_map(|s2| solve(rest, cfg, s2))
        }
    }
}

/// First plan in declaration order whose trigger matches `goal` and whose
/// guard holds.
pub fn select(program: &Program, cfg: &AgentConfig, goal: &Atom) -> Option<Frame> {
    program.plans.iter().find_map(|p| {
        let s = p.trigger.matches(goal, &Subst::new())?;
        let s = solve(&p.guard, cfg, s)?;
        Some(Frame { goal: goal.clone(), body: p.body.iter().map(|d| d.apply(&s)).collect(), pc: 0 })
    })
}

fn fail(cfg: &mut AgentConfig, goal: &Atom) -> StepEffect {
    cfg.goals.remove(goal);
    cfg.beliefs.insert(Atom { pred: format!("failed_to_{}", goal.pred), args: Vec::new() });
    StepEffect::Fail(goal.clone())
}

fn push_inbox(cfg: &mut AgentConfig, m: Msg) {
    *cfg.inbox.entry(m).or_insert(0) += 1;
}

impl AgentConfig {
    pub fn initial(program: &Program) -> Self {
        let mut cfg = AgentConfig {
            beliefs: program.beliefs.iter().cloned().collect(),
            goals: program.goals.iter().cloned().collect(),
            events: program.goals.clone(),
            ..Default::default()
        };
        for p in &program.perceive {
            push_inbox(&mut cfg, Msg::Belief(p.clone()));
        }
        cfg
    }

    /// Whether the top frame of intention `i` waits for an absent belief.
    pub fn suspended(&self, i: usize) -> bool {
        match self.intentions[i].last().and_then(Frame::current) {
            Some(Deed::Wait(p)) => !believes(&self.beliefs, p),
            _ => false,
        }
    }

    /// Awaited atoms of all suspended intentions.
    pub fn awaiting(&self) -> Vec<&Atom> {
        (0..self.intentions.len())
            .filter(|i| self.suspended(*i))
            .filter_map(|i| match self.intentions[i].last().and_then(Frame::current) {
                Some(Deed::Wait(p)) => Some(p),
                _ => None,
            })
            .collect()
    }

    pub fn deliver(&self) -> Vec<(StepEffect, AgentConfig)> {
        let mut out = Vec::new();
        for m in self.inbox.keys() {
            let mut base = self.clone();
            let n = base.inbox.get_mut(m).expect("present");
            *n -= 1;
            if *n == 0 {
                base.inbox.remove(m);
            }
            let alts = match m {
                Msg::Belief(a) => std::slice::from_ref(a),
                Msg::Choice(v) => v.as_slice(),
            };
            for a in alts {
                let mut c = base.clone();
                c.beliefs.insert(a.clone());
                out.push((StepEffect::Receive(a.clone()), c));
            }
        }
        out
    }

    /// The unique internal step, if any: handle a goal event, finish a
    /// frame, or execute the next deed of the first runnable intention.
    pub fn internal(&self, program: &Program) -> Option<(StepEffect, AgentConfig)> {
        let mut c = self.clone();
        if !c.events.is_empty() {
            let g = c.events.remove(0);
            c.goals.insert(g.clone());
            let eff = match select(program, &c, &g) {
                Some(f) => {
                    c.intentions.push(vec![f]);
                    StepEffect::Internal
                }
                None => fail(&mut c, &g),
            };
            return Some((eff, c));
        }
        let i = (0..c.intentions.len()).find(|i| !c.suspended(*i))?;
        let frame = c.intentions[i].last().expect("non-empty intention").clone();
        let deed = match frame.current() {
            None => {
                c.intentions[i].pop();
                let g = frame.goal;
                let eff = if program.achieve.contains(&g.pred) && !c.beliefs.contains(&g) {
                    match select(program, &c, &g) {
                        Some(f) => {
                            c.intentions[i].push(f);
                            StepEffect::Internal
                        }
                        None => fail(&mut c, &g),
                    }
                } else {
                    c.goals.remove(&g);
                    StepEffect::Internal
                };
                if c.intentions[i].is_empty() {
                    c.intentions.remove(i);
                }
                return Some((eff, c));
            }
            Some(d) => d.clone(),
        };
        c.intentions[i].last_mut().expect("non-empty").pc += 1;
        let eff = match deed {
            Deed::AddGoal(g) => {
                c.goals.insert(g.clone());
                match select(program, &c, &g) {
                    Some(f) => {
                        c.intentions[i].push(f);
                        StepEffect::Internal
                    }
                    None => fail(&mut c, &g),
                }
            }
            Deed::Perform(a) => {
                match program.reaction(&a) {
                    Some([one]) => push_inbox(&mut c, Msg::Belief(one.clone())),
                    Some(alts) => push_inbox(&mut c, Msg::Choice(alts.to_vec())),
                    None => {}
                }
                StepEffect::Perform(a)
            }
            Deed::Wait(_) => StepEffect::Internal,
            Deed::AddBelief(a) => {
                c.beliefs.insert(a);
                StepEffect::Internal
            }
            Deed::RemoveBelief(a) => {
                c.beliefs.retain(|b| a.matches(b, &Subst::new()).is_none());
                StepEffect::Internal
            }
            Deed::Send(r, m) => StepEffect::Send(r.to_string(), m),
        };
        Some((eff, c))
    }
}

/// All configurations reachable by one step: the internal step plus one
/// successor per deliverable inbox message and alternative.
pub fn agent_step(cfg: &AgentConfig, program: &Program) -> Vec<(StepEffect, AgentConfig)> {
    let mut out: Vec<_> = cfg.internal(program).into_iter().collect();
    out.extend(cfg.deliver());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bdi::parse_program;

    #[test]
    fn empty_program_is_quiescent() {
        let p = Program::new("a");
        assert!(agent_step(&AgentConfig::initial(&p), &p).is_empty());
    }

    #[test]
    fn wait_suspends_until_belief_arrives() {
        let p = parse_program("@goal g\n@react go -> near\n\n+!g : { } <- perf(go); *near; +done\n", "a").unwrap();
        let mut c = AgentConfig::initial(&p);
        c = c.internal(&p).unwrap().1;
        let (eff, c2) = c.internal(&p).unwrap();
        assert_eq!(eff, StepEffect::Perform(Atom::new("go", &[])));
        assert!(c2.suspended(0));
        assert!(c2.internal(&p).is_none());
        let steps = agent_step(&c2, &p);
        assert_eq!(steps.len(), 1);
        let c3 = &steps[0].1;
        assert!(!c3.suspended(0));
        let c4 = c3.internal(&p).unwrap().1.internal(&p).unwrap().1;
        assert!(c4.beliefs.contains(&Atom::new("done", &[])));
    }

    #[test]
    fn missing_plan_records_failure() {
        let p = parse_program("@goal g\n\n+!g : { B never } <- +x\n", "a").unwrap();
        let (eff, c) = AgentConfig::initial(&p).internal(&p).unwrap();
        assert!(matches!(eff, StepEffect::Fail(_)));
        assert!(c.beliefs.contains(&Atom::new("failed_to_g", &[])));
        assert!(c.goals.is_empty());
    }

    #[test]
    fn guard_binds_variables_in_order() {
        let p = parse_program("@belief p(a)\n@belief p(b)\n@goal g\n\n+!g : { B p(X), ~B q(X) } <- +q(X)\n", "a").unwrap();
        let c = AgentConfig::initial(&p).internal(&p).unwrap().1;
        assert_eq!(c.intentions[0][0].body, vec![Deed::AddBelief(Atom::new("q", &["a"]))]);
    }
}
