//! Witness and counterexample runs: rendering, parsing and replay.

use std::fmt::Write as _;

use thiserror::Error;

use crate::ta::model::Network;
use crate::ta::semantics::{enabled_labels, fire, initial_state_with, Abstraction, EdgeLabel, SymState};
use crate::zones::{Bound, Zone};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub states: Vec<SymState>,
    /// `labels[k]` leads from `states[k]` to `states[k + 1]`.
    pub labels: Vec<EdgeLabel>,
    /// For a lasso, the index the last state loops back to.
    pub loop_start: Option<usize>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("line {0}: {1}")]
    Syntax(usize, String),
    #[error("step {0}: {1}")]
    Replay(usize, String),
}

impl Trace {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn render(&self, net: &Network) -> String {
        let mut out = String::new();
        for (k, s) in self.states.iter().enumerate() {
            if k > 0 {
                let _ = writeln!(out, "step {}: {}", k, self.labels[k - 1].render(net));
            }
            let _ = writeln!(out, "state {}: {}", k, s.render(net));
        }
        if let Some(l) = self.loop_start {
            let _ = writeln!(out, "loop {l}");
        }
        out
    }

    /// Checks that the first state lies in the initial state and that each
    /// step is a successor of its predecessor under the recorded label.
    pub fn replay(&self, net: &Network, abstraction: Option<&Abstraction>) -> Result<(), TraceError> {
        let first = self.states.first().ok_or_else(|| TraceError::Replay(0, "empty trace".into()))?;
        let init = initial_state_with(net, abstraction).map_err(|e| TraceError::Replay(0, e.to_string()))?;
        check_within(first, &init).map_err(|m| TraceError::Replay(0, m))?;
        for (k, label) in self.labels.iter().enumerate() {
            let prev = &self.states[k];
            if !enabled_labels(net, prev).contains(label) {
                return Err(TraceError::Replay(k + 1, format!("`{}` is not enabled", label.render(net))));
            }
            let next =
                fire(net, prev, &prev.zone, label, abstraction).ok_or_else(|| TraceError::Replay(k + 1, "transition has no successor".into()))?;
            check_within(&self.states[k + 1], &next).map_err(|m| TraceError::Replay(k + 1, m))?;
        }
        if let Some(l) = self.loop_start {
            let last = self.states.last().expect("non-empty");
            if l >= self.states.len() || self.states[l] != *last {
                return Err(TraceError::Replay(self.labels.len(), format!("loop target {l} does not match final state")));
            }
        }
        Ok(())
    }
}

fn check_within(s: &SymState, outer: &SymState) -> Result<(), String> {
    if s.locs != outer.locs || s.vars != outer.vars {
        return Err("discrete state differs from the computed successor".into());
    }
    if !outer.zone.includes(&s.zone).unwrap_or(false) {
        return Err("zone is not contained in the computed successor".into());
    }
    Ok(())
}

fn parse_zone(text: &str, net: &Network) -> Result<Zone, String> {
    let n = net.num_clocks();
    let text = text.trim();
    if text == "false" {
        return Ok(Zone::empty(n));
    }
    let mut z = Zone::unconstrained(n);
    if text == "true" {
        return Ok(z);
    }
    for part in text.split(", ") {
        let (k, op) = ["<=", ">=", "<", ">"]
            .iter()
            .filter_map(|op| part.find(op).map(|k| (k, *op)))
            .min_by_key(|(k, op)| (*k, std::cmp::Reverse(op.len())))
            .ok_or_else(|| format!("bad constraint `{part}`"))?;
        let lhs = &part[..k];
        let rhs: i32 = part[k + op.len()..].parse().map_err(|_| format!("bad constant in `{part}`"))?;
        let clock = |name: &str| net.clock(name).ok_or_else(|| format!("unknown clock `{name}`"));
        let (i, j) = match lhs.split_once('-') {
            Some((a, b)) => (clock(a)?, clock(b)?),
            None => (clock(lhs)?, 0),
        };
        let (i, j, b) = match op {
            "<=" => (i, j, Bound::le(rhs)),
            "<" => (i, j, Bound::lt(rhs)),
            ">=" => (j, i, Bound::le(-rhs)),
            _ => (j, i, Bound::lt(-rhs)),
        };
        z.constrain(i, j, b);
    }
    Ok(z)
}

fn parse_state(text: &str, net: &Network) -> Result<SymState, String> {
    let open = text.find('(').ok_or("missing location list")?;
    let close = text.find(')').ok_or("missing `)`")?;
    let vopen = text.find('[').ok_or("missing variable list")?;
    let vclose = text.find("] {").ok_or("missing `]`")?;
    let zopen = vclose + 2;
    let zclose = text.rfind('}').ok_or("missing `}`")?;
    let mut locs = vec![usize::MAX; net.instances.len()];
    for item in text[open + 1..close].split_whitespace() {
        let (inst, loc) = item.split_once('.').ok_or_else(|| format!("bad location `{item}`"))?;
        let i = net.instance_index(inst).ok_or_else(|| format!("unknown instance `{inst}`"))?;
        locs[i] = net.instances[i].location_index(loc).ok_or_else(|| format!("unknown location `{item}`"))?;
    }
    if locs.contains(&usize::MAX) {
        return Err("location list incomplete".into());
    }
    let mut vars = vec![i32::MIN; net.vars.len()];
    for item in text[vopen + 1..vclose].split_whitespace() {
        let (name, v) = item.split_once('=').ok_or_else(|| format!("bad assignment `{item}`"))?;
        let k = net.vars.iter().position(|s| s.name == name).ok_or_else(|| format!("unknown variable `{name}`"))?;
        vars[k] = v.parse().map_err(|_| format!("bad value `{v}`"))?;
    }
    if vars.contains(&i32::MIN) {
        return Err("variable list incomplete".into());
    }
    let zone = parse_zone(&text[zopen + 1..zclose], net)?;
    Ok(SymState { locs, vars, zone })
}

/// Parses the text produced by [`Trace::render`]. Step labels are matched
/// against the enabled transitions of the preceding state.
pub fn parse_trace(text: &str, net: &Network) -> Result<Trace, TraceError> {
    let mut states = Vec::new();
    let mut label_text: Vec<(usize, String)> = Vec::new();
    let mut loop_start = None;
    for (ln, line) in text.lines().enumerate() {
        let ln = ln + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (head, body) = line.split_once(':').map(|(h, b)| (h, b.trim())).unwrap_or((line, ""));
        let mut words = head.split_whitespace();
        let kind = words.next().unwrap_or("");
        let idx: Option<usize> = words.next().and_then(|w| w.parse().ok());
        match kind {
            "state" => {
                if idx != Some(states.len()) {
                    return Err(TraceError::Syntax(ln, "state index out of order".into()));
                }
                states.push(parse_state(body, net).map_err(|m| TraceError::Syntax(ln, m))?);
            }
            "step" => label_text.push((ln, body.to_string())),
            "loop" => loop_start = idx,
            _ => return Err(TraceError::Syntax(ln, format!("unexpected line `{line}`"))),
        }
    }
    if states.len() != label_text.len() + 1 {
        return Err(TraceError::Syntax(text.lines().count(), "state and step counts do not match".into()));
    }
    let mut labels = Vec::new();
    for (k, (ln, t)) in label_text.iter().enumerate() {
        let label = enabled_labels(net, &states[k])
            .into_iter()
            .find(|l| l.render(net) == *t)
            .ok_or_else(|| TraceError::Syntax(*ln, format!("no enabled transition `{t}`")))?;
        labels.push(label);
    }
    Ok(Trace { states, labels, loop_start })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pvm::parse_model;
    use crate::ta::semantics::{initial_state, successors};

    #[test]
    fn render_parse_replay() {
        let net = parse_model(
            "chan go\nvar n 0..3 = 0\ntemplate A\n  clock x\n  loc a initial inv x<=3\n  loc b\n  edge a -> b guard x>=2 sync go! do n=n+1, x=0\nend\ntemplate B\n  loc i initial\n  edge i -> i sync go?\nend\nsystem p=A q=B\n",
        )
        .unwrap();
        let s0 = initial_state(&net).unwrap();
        let (l, s1) = successors(&net, &s0).remove(0);
        let t = Trace { states: vec![s0, s1], labels: vec![l], loop_start: None };
        let text = t.render(&net);
        assert!(text.contains("step 1: p.a -> p.b sync go! & q.i -> q.i sync go?"), "{text}");
        let back = parse_trace(&text, &net).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.render(&net), text);
        back.replay(&net, Some(&Abstraction::of(&net))).unwrap();
    }
}
