//! Concrete runs with clock values on a fixed grid.

use rand::Rng;

use super::model::{LValue, Network};
use super::semantics::{apply_updates, EdgeLabel};
use crate::zones::ClockConstraint;

/// Clock valuation in units of `1/scale`, plus locations and data.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConcreteState {
    pub locs: Vec<usize>,
    pub vars: Vec<i32>,
    pub clocks: Vec<i64>,
}

pub struct Simulator<'a> {
    pub net: &'a Network,
    pub scale: i64,
    /// When set, synchronising edges fire alone (the partner is the environment).
    pub open: bool,
}

impl<'a> Simulator<'a> {
    pub fn new(net: &'a Network, scale: i64, open: bool) -> Self {
        Simulator { net, scale, open }
    }

    pub fn initial(&self) -> ConcreteState {
        ConcreteState {
            locs: self.net.instances.iter().map(|i| i.initial).collect(),
            vars: self.net.initial_vars(),
            clocks: vec![0; self.net.num_clocks()],
        }
    }

    fn holds(&self, g: &ClockConstraint, clocks: &[i64]) -> bool {
        g.holds_scaled(clocks, self.scale)
    }

    fn invariant_holds(&self, locs: &[usize], clocks: &[i64]) -> bool {
        locs.iter().enumerate().all(|(i, l)| self.holds(&self.net.instances[i].locations[*l].invariant, clocks))
    }

    pub fn committed(&self, s: &ConcreteState) -> bool {
        s.locs.iter().enumerate().any(|(i, l)| self.net.instances[i].locations[*l].committed)
    }

    pub fn can_delay(&self, s: &ConcreteState, d: i64) -> bool {
        if d == 0 {
            return true;
        }
        if self.committed(s) {
            return false;
        }
        let moved: Vec<i64> = s.clocks.iter().map(|c| c + d).collect();
        self.invariant_holds(&s.locs, &moved)
    }

    pub fn delay(&self, s: &ConcreteState, d: i64) -> ConcreteState {
        ConcreteState { locs: s.locs.clone(), vars: s.vars.clone(), clocks: s.clocks.iter().map(|c| c + d).collect() }
    }

    fn candidate_labels(&self, s: &ConcreteState) -> Vec<EdgeLabel> {
        if !self.open {
            let sym =
                super::semantics::SymState { locs: s.locs.clone(), vars: s.vars.clone(), zone: crate::zones::Zone::init(self.net.num_clocks()) };
            return super::semantics::enabled_labels(self.net, &sym);
        }
        let committed = self.committed(s);
        let mut out = Vec::new();
        for (i, inst) in self.net.instances.iter().enumerate() {
            if committed && !inst.locations[s.locs[i]].committed {
                continue;
            }
            for (ei, e) in inst.edges.iter().enumerate() {
                if e.source == s.locs[i] && e.data_guard.as_ref().is_none_or(|g| g.holds(&s.vars)) {
                    out.push(EdgeLabel { parts: vec![(i, ei)] });
                }
            }
        }
        out
    }

    /// Fires `label` without delay, or `None` if a guard or the target
    /// invariant fails.
    pub fn fire(&self, s: &ConcreteState, label: &EdgeLabel) -> Option<ConcreteState> {
        let mut clocks = s.clocks.clone();
        for (i, e) in &label.parts {
            if !self.holds(&self.net.instances[*i].edges[*e].clock_guard, &s.clocks) {
                return None;
            }
        }
        let vars = apply_updates(self.net, label, &s.vars)?;
        let mut locs = s.locs.clone();
        for (i, e) in &label.parts {
            let edge = &self.net.instances[*i].edges[*e];
            for (c, v) in &edge.resets {
                clocks[c - 1] = *v as i64 * self.scale;
            }
            locs[*i] = edge.target;
        }
        if !self.invariant_holds(&locs, &clocks) {
            return None;
        }
        Some(ConcreteState { locs, vars, clocks })
    }

    pub fn enabled(&self, s: &ConcreteState) -> Vec<(EdgeLabel, ConcreteState)> {
        self.candidate_labels(s).into_iter().filter_map(|l| self.fire(s, &l).map(|t| (l, t))).collect()
    }

    /// Synchronisation labels of `label` as seen from outside, channel
    /// indices dropped; internal steps yield nothing.
    pub fn visible(&self, label: &EdgeLabel) -> Vec<String> {
        label
            .parts
            .iter()
            .filter_map(|(i, e)| self.net.instances[*i].edges[*e].sync.map(|(ch, dir)| format!("{}{}", self.net.channel_base(ch), dir.symbol())))
            .collect()
    }

    /// Random run of at most `steps` discrete steps with delays drawn from
    /// `0..=max_delay` grid units. Global variables listed in `env_vars` are
    /// re-drawn from their domains before each step.
    pub fn random_run<R: Rng>(&self, rng: &mut R, steps: usize, max_delay: i64, env_vars: &[usize]) -> Vec<(EdgeLabel, ConcreteState)> {
        let mut s = self.initial();
        let mut out = Vec::new();
        for _ in 0..steps {
            for &k in env_vars {
                let d = &self.net.vars[k];
                s.vars[k] = rng.gen_range(d.lo..=d.hi);
            }
            let options: Vec<Vec<(EdgeLabel, ConcreteState)>> =
                (0..=max_delay).filter(|d| self.can_delay(&s, *d)).map(|d| self.enabled(&self.delay(&s, d))).filter(|m| !m.is_empty()).collect();
            if options.is_empty() {
                break;
            }
            let moves = &options[rng.gen_range(0..options.len())];
            let (l, t) = moves[rng.gen_range(0..moves.len())].clone();
            s = t.clone();
            out.push((l, t));
        }
        out
    }
}

/// Resolves an lvalue to its slot for the current data.
pub fn slot_of(lv: &LValue, vars: &[i32]) -> Option<usize> {
    match lv {
        LValue::Var(k) => Some(*k),
        LValue::Elem { base, len, index } => {
            let k = index.eval(vars).ok()?;
            (k >= 0 && (k as usize) < *len).then(|| base + k as usize)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ta::expr::{CmpOp, Expr};
    use crate::ta::model::*;
    use rand::SeedableRng;

    #[test]
    fn respects_guards_and_invariants() {
        let mut t = Template::new("T");
        t.clocks = vec!["x".into()];
        t.locations = vec![Location::new("a").with_invariant(ClockCmp::new("x", CmpOp::Le, Expr::Int(3))), Location::new("b")];
        t.initial = "a".into();
        t.edges = vec![Edge::new("a", "b").clock(ClockCmp::new("x", CmpOp::Ge, Expr::Int(2)))];
        let net =
            Network::new(Declarations::default(), vec![t], vec![InstanceDecl { name: "p".into(), template: "T".into(), args: vec![] }]).unwrap();
        let sim = Simulator::new(&net, 2, false);
        let s0 = sim.initial();
        assert!(sim.enabled(&s0).is_empty());
        assert!(sim.can_delay(&s0, 6) && !sim.can_delay(&s0, 7));
        assert_eq!(sim.enabled(&sim.delay(&s0, 4)).len(), 1);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let run = sim.random_run(&mut rng, 5, 6, &[]);
        assert_eq!(run.len(), 1);
    }
}
