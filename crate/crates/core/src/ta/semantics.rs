//! Symbolic (zone) semantics of a network.

use std::fmt::Write as _;

use super::model::{CEdge, LValue, ModelError, Network, SyncDir};
use crate::zones::{Bound, ClockAtom, ClockConstraint, Zone};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SymState {
    pub locs: Vec<usize>,
    pub vars: Vec<i32>,
    pub zone: Zone,
}

/// Edges taking part in one discrete step; for a synchronisation the
/// sender comes first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeLabel {
    pub parts: Vec<(usize, usize)>,
}

impl EdgeLabel {
    pub fn render(&self, net: &Network) -> String {
        let mut out = String::new();
        for (k, (i, e)) in self.parts.iter().enumerate() {
            if k > 0 {
                out.push_str(" & ");
            }
            let inst = &net.instances[*i];
            let edge = &inst.edges[*e];
            let _ = write!(out, "{}.{} -> {}.{}", inst.name, inst.locations[edge.source].name, inst.name, inst.locations[edge.target].name);
            if let Some((ch, dir)) = edge.sync {
                let _ = write!(out, " sync {}{}", net.channels[ch], dir.symbol());
            }
        }
        out
    }
}

impl SymState {
    pub fn is_committed(&self, net: &Network) -> bool {
        self.locs.iter().enumerate().any(|(i, l)| net.instances[i].locations[*l].committed)
    }

    /// Sorted `name=value` list followed by the zone constraints.
    pub fn render(&self, net: &Network) -> String {
        let mut locs: Vec<String> =
            self.locs.iter().enumerate().map(|(i, l)| format!("{}.{}", net.instances[i].name, net.instances[i].locations[*l].name)).collect();
        locs.sort();
        let mut vars: Vec<String> = net.vars.iter().zip(&self.vars).map(|(v, x)| format!("{}={}", v.name, x)).collect();
        vars.sort();
        format!("({}) [{}] {{{}}}", locs.join(" "), vars.join(" "), self.zone.render(&net.clocks))
    }
}

pub fn invariant(net: &Network, locs: &[usize]) -> ClockConstraint {
    let mut atoms = Vec::new();
    for (i, l) in locs.iter().enumerate() {
        atoms.extend(net.instances[i].locations[*l].invariant.atoms.iter().copied());
    }
    atoms.into()
}

fn committed_locs(net: &Network, locs: &[usize]) -> bool {
    locs.iter().enumerate().any(|(i, l)| net.instances[i].locations[*l].committed)
}

/// Zone normalisation applied to every computed state: clocks that are dead
/// in the current locations are freed (unless kept) and the rest is
/// extrapolated to the maximal constants.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Abstraction {
    pub max_const: Vec<i32>,
    pub keep: Vec<bool>,
}

impl Abstraction {
    /// Model constants only; no clock is kept beyond liveness.
    pub fn of(net: &Network) -> Abstraction {
        Abstraction { max_const: net.max_constants().to_vec(), keep: vec![false; net.clocks.len()] }
    }

    pub fn apply(&self, net: &Network, locs: &[usize], zone: Zone) -> Zone {
        let mut z = zone;
        for (i, l) in locs.iter().enumerate() {
            for &c in net.dead_clocks(i, *l) {
                if !self.keep[c] {
                    z = z.free(c);
                }
            }
        }
        z.extrapolate(&self.max_const)
    }
}

pub fn initial_state(net: &Network) -> Result<SymState, ModelError> {
    initial_state_with(net, Some(&Abstraction::of(net)))
}

pub fn initial_state_with(net: &Network, abstraction: Option<&Abstraction>) -> Result<SymState, ModelError> {
    let locs: Vec<usize> = net.instances.iter().map(|i| i.initial).collect();
    let inv = invariant(net, &locs);
    let mut zone = Zone::init(net.num_clocks()).and(&inv);
    if zone.is_empty() {
        return Err(ModelError::InitialInvariant);
    }
    if !committed_locs(net, &locs) {
        zone = zone.up().and(&inv);
    }
    if let Some(a) = abstraction {
        zone = a.apply(net, &locs, zone);
    }
    Ok(SymState { locs, vars: net.initial_vars(), zone })
}

/// Discrete steps whose data guards hold, in declaration order.
pub fn enabled_labels(net: &Network, s: &SymState) -> Vec<EdgeLabel> {
    let committed = s.is_committed(net);
    let from_committed = |i: usize| net.instances[i].locations[s.locs[i]].committed;
    let data_ok = |e: &CEdge| e.data_guard.as_ref().is_none_or(|g| g.holds(&s.vars));
    let mut out = Vec::new();
    for (i, inst) in net.instances.iter().enumerate() {
        for (ei, e) in inst.edges.iter().enumerate() {
            if e.source != s.locs[i] || !data_ok(e) {
                continue;
            }
            match e.sync {
                None => {
                    if !committed || from_committed(i) {
                        out.push(EdgeLabel { parts: vec![(i, ei)] });
                    }
                }
                Some((ch, SyncDir::Send)) => {
                    for (j, other) in net.instances.iter().enumerate() {
                        if j == i {
                            continue;
                        }
                        if committed && !from_committed(i) && !from_committed(j) {
                            continue;
                        }
                        for (ej, f) in other.edges.iter().enumerate() {
                            if f.source == s.locs[j] && f.sync == Some((ch, SyncDir::Recv)) && data_ok(f) {
                                out.push(EdgeLabel { parts: vec![(i, ei), (j, ej)] });
                            }
                        }
                    }
                }
                Some((_, SyncDir::Recv)) => {}
            }
        }
    }
    out
}

/// Applies data updates (sender first); `None` if an update leaves its domain.
pub fn apply_updates(net: &Network, label: &EdgeLabel, vars: &[i32]) -> Option<Vec<i32>> {
    let mut vars = vars.to_vec();
    for (i, e) in &label.parts {
        let edge = &net.instances[*i].edges[*e];
        for (lv, val) in &edge.updates {
            let v = val.eval(&vars).ok()?;
            let slot = match lv {
                LValue::Var(k) => *k,
                LValue::Elem { base, len, index } => {
                    let k = index.eval(&vars).ok()?;
                    if k < 0 || k as usize >= *len {
                        return None;
                    }
                    base + k as usize
                }
            };
            let d = &net.vars[slot];
            if v < d.lo as i64 || v > d.hi as i64 {
                return None;
            }
            vars[slot] = v as i32;
        }
    }
    Some(vars)
}

fn target_locs(net: &Network, s: &SymState, label: &EdgeLabel) -> Vec<usize> {
    let mut locs = s.locs.clone();
    for (i, e) in &label.parts {
        locs[*i] = net.instances[*i].edges[*e].target;
    }
    locs
}

fn resets(net: &Network, label: &EdgeLabel) -> Vec<(usize, i32)> {
    label.parts.iter().flat_map(|(i, e)| net.instances[*i].edges[*e].resets.iter().copied()).collect()
}

fn guard(net: &Network, label: &EdgeLabel) -> ClockConstraint {
    let atoms: Vec<ClockAtom> = label.parts.iter().flat_map(|(i, e)| net.instances[*i].edges[*e].clock_guard.atoms.iter().copied()).collect();
    atoms.into()
}

/// Fires `label` from the valuations in `zone` (assumed to lie in `s`).
pub fn fire(net: &Network, s: &SymState, zone: &Zone, label: &EdgeLabel, abstraction: Option<&Abstraction>) -> Option<SymState> {
    let vars = apply_updates(net, label, &s.vars)?;
    let locs = target_locs(net, s, label);
    let mut z = zone.and(&guard(net, label));
    if z.is_empty() {
        return None;
    }
    for (c, v) in resets(net, label) {
        z = z.reset(c, v);
    }
    let inv = invariant(net, &locs);
    z = z.and(&inv);
    if z.is_empty() {
        return None;
    }
    if !committed_locs(net, &locs) {
        z = z.up().and(&inv);
    }
    if let Some(a) = abstraction {
        z = a.apply(net, &locs, z);
    }
    Some(SymState { locs, vars, zone: z })
}

pub fn successors(net: &Network, s: &SymState) -> Vec<(EdgeLabel, SymState)> {
    successors_with(net, s, Some(&Abstraction::of(net)))
}

pub fn successors_with(net: &Network, s: &SymState, abstraction: Option<&Abstraction>) -> Vec<(EdgeLabel, SymState)> {
    enabled_labels(net, s).into_iter().filter_map(|l| fire(net, s, &s.zone, &l, abstraction).map(|t| (l, t))).collect()
}

/// Valuations of `zone` from which `label` can fire: guard plus the
/// target invariant evaluated after the resets.
pub fn enabling_zone(net: &Network, s: &SymState, zone: &Zone, label: &EdgeLabel) -> Zone {
    if apply_updates(net, label, &s.vars).is_none() {
        return Zone::empty(net.num_clocks());
    }
    let locs = target_locs(net, s, label);
    let rs = resets(net, label);
    let value = |k: usize| rs.iter().rev().find(|(c, _)| *c == k).map(|(_, v)| *v);
    let mut z = zone.and(&guard(net, label));
    for a in &invariant(net, &locs).atoms {
        let (mut i, mut j, mut b) = (a.i, a.j, a.bound);
        if let Some(v) = value(i) {
            i = 0;
            b = b.add(Bound::le(-v));
        }
        if let Some(v) = value(j) {
            j = 0;
            b = b.add(Bound::le(v));
        }
        if i == j {
            if b < Bound::ZERO {
                return Zone::empty(net.num_clocks());
            }
            continue;
        }
        z = z.and_atom(&ClockAtom::new(i, j, b));
    }
    z
}

/// Part of `s.zone` from which no discrete step is possible after any
/// admissible delay.
pub fn deadlocked_part(net: &Network, s: &SymState) -> Vec<Zone> {
    let committed = s.is_committed(net);
    let mut rest = vec![s.zone.clone()];
    for label in enabled_labels(net, s) {
        let en = enabling_zone(net, s, &s.zone, &label);
        if en.is_empty() {
            continue;
        }
        let en = if committed { en } else { en.down().intersection(&s.zone) };
        rest = rest.iter().flat_map(|z| z.subtract(&en)).collect();
        if rest.is_empty() {
            break;
        }
    }
    rest
}
