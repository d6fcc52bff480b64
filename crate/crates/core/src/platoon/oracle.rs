//! Exhaustive exploration of a discretized platoon: concrete lane-change
//! controllers acting on a shared traffic snapshot, driven by untimed agent
//! and continuous skeletons. Every reachable snapshot is checked for `cc`.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::time::Instant;

use num_traits::Zero;

use crate::acta::{Acta, ActaError, ActaState};
use crate::mlsl::{self, real, Lane, Real, TrafficSnapshot, VehicleId, VehicleState};
use crate::report::Report;
use crate::ta::automaton::{Dfa, FiniteAutomaton};
use crate::ta::model::SyncDir;

use super::config::{ConfigError, ScenarioConfig};
use super::models::{agent_template, continuous_template, spatial_model};

const PLATOON_LANE: Lane = 1;
const LEADER: VehicleId = 1;
/// Cells a follower outside the platoon may drift from its formation slot.
const SLACK: i64 = 3;
/// Cells between consecutive formation slots.
const SPACING: i64 = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct Ctrl {
    loc: usize,
    x: i64,
    n: Lane,
    l: Lane,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Joint {
    ts: TrafficSnapshot,
    ctrl: Vec<Ctrl>,
    agent: Vec<usize>,
    cont: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Label {
    Tick,
    Edge(usize, usize),
    Move(usize, i64),
}

struct World {
    acta: Acta,
    /// Agent skeletons starting outside (0) and inside (1) the platoon.
    agents: [Dfa; 2],
    agent_labels: BTreeSet<String>,
    cont: Dfa,
    cont_labels: BTreeSet<String>,
    /// Skeleton used by each follower.
    kind: Vec<usize>,
    ids: Vec<VehicleId>,
    cell: i64,
    road: i64,
    lanes: Lane,
    /// Constants compared with the controller clock, per location.
    bounds: Vec<Vec<i64>>,
}

fn labels(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn skeleton(fa: &FiniteAutomaton, visible: &BTreeSet<String>, start: &str) -> Dfa {
    let s = fa.state(start).expect("skeleton start location");
    fa.hide_except(visible).determinize(&BTreeSet::from([s])).minimize()
}

fn clock_bounds(a: &Acta) -> Result<Vec<Vec<i64>>, ConfigError> {
    let consts: HashMap<&str, i64> = a.consts.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let mut out = Vec::new();
    for l in &a.locations {
        let outgoing = a.edges.iter().filter(|e| e.source == l.name).flat_map(|e| &e.clock_guard);
        let mut b = vec![0];
        for c in l.invariant.iter().chain(outgoing) {
            let v =
                c.bound.eval_const(&|n| consts.get(n).copied()).ok_or_else(|| ConfigError::Invalid(format!("unknown constant in `{}`", c.bound)))?;
            b.push(v);
        }
        b.sort_unstable();
        b.dedup();
        out.push(b);
    }
    Ok(out)
}

fn partner_label(chan: &str, dir: SyncDir) -> String {
    match dir {
        SyncDir::Send => format!("{chan}?"),
        SyncDir::Recv => format!("{chan}!"),
    }
}

impl World {
    fn new(cfg: &ScenarioConfig) -> Result<World, ConfigError> {
        cfg.validate()?;
        if cfg.lanes < 2 {
            return Err(ConfigError::Invalid("the oracle needs at least two lanes".into()));
        }
        let agent_labels = labels(&["change_lane_join!", "change_lane_leave!", "changed_lane?", "abort?"]);
        let cont_labels = labels(&["phy_changing_lane?", "phy_changed_lane!"]);
        let afa = FiniteAutomaton::from_template(&agent_template());
        let cfa = FiniteAutomaton::from_template(&continuous_template());
        let acta = spatial_model(cfg);
        let world = World {
            bounds: clock_bounds(&acta)?,
            acta,
            agents: [skeleton(&afa, &agent_labels, "idle"), skeleton(&afa, &agent_labels, "in_platoon")],
            agent_labels,
            cont: skeleton(&cfa, &cont_labels, "manual"),
            cont_labels,
            kind: (0..cfg.followers).map(|j| j % 2).collect(),
            ids: (0..cfg.followers as VehicleId).map(|j| j + 2).collect(),
            cell: cfg.cell_len(),
            road: cfg.oracle_road_len,
            lanes: cfg.lanes,
        };
        if world.leader_pos() < (SPACING * cfg.followers.div_ceil(2) as i64 + SLACK) * world.cell {
            return Err(ConfigError::Invalid(format!("a road of {} cells cannot hold {} vehicles", cfg.oracle_cells, cfg.followers + 1)));
        }
        Ok(world)
    }

    fn leader_pos(&self) -> i64 {
        self.road - 2 * self.cell
    }

    fn home(&self, k: usize) -> i64 {
        self.leader_pos() - SPACING * self.cell * (k as i64 / 2 + 1)
    }

    /// Leader in front on the platoon lane; followers in side-by-side pairs
    /// behind it, the first of each pair outside the platoon.
    fn initial(&self) -> Joint {
        let vehicle = |pos: i64, lane: Lane| VehicleState::new(real(pos), real(self.cell), real(self.cell), lane);
        let mut ts = TrafficSnapshot::new(self.lanes).with(LEADER, vehicle(self.leader_pos(), PLATOON_LANE));
        let mut ctrl = Vec::new();
        for (j, id) in self.ids.iter().enumerate() {
            let lane = if self.kind[j] == 0 { PLATOON_LANE + 1 } else { PLATOON_LANE };
            ts = ts.with(*id, vehicle(self.home(j), lane));
            ctrl.push(Ctrl { loc: self.acta.location_index(&self.acta.initial).unwrap_or(0), x: 0, n: lane, l: lane });
        }
        Joint { ts, ctrl, agent: vec![0; self.ids.len()], cont: vec![0; self.ids.len()] }
    }

    /// Compact encoding of the follower part of a joint state.
    fn key(&self, s: &Joint) -> Box<[i16]> {
        let bits = |set: &BTreeSet<Lane>| set.iter().fold(0i16, |acc, l| acc | 1 << l);
        let mut out = Vec::with_capacity(self.ids.len() * 9);
        for (k, id) in self.ids.iter().enumerate() {
            let v = &s.ts.vehicles[id];
            let c = s.ctrl[k];
            out.extend([
                (v.pos / real(self.cell)).to_integer() as i16,
                bits(&v.res),
                bits(&v.clm),
                c.loc as i16,
                c.x as i16,
                c.n as i16,
                c.l as i16,
                s.agent[k] as i16,
                s.cont[k] as i16,
            ]);
        }
        out.into_boxed_slice()
    }

    fn acta_state(&self, s: &Joint, k: usize) -> ActaState {
        let c = s.ctrl[k];
        ActaState { loc: c.loc, clocks: vec![real(c.x)], snapshot: s.ts.clone(), ego: self.ids[k], n: c.n, l: c.l }
    }

    /// Representative of the clock region of `x` in `loc`: exact at the
    /// constants compared with the clock there, the least integer of each
    /// open interval in between. At most one controller is away from its
    /// initial location at a time, so single-clock regions are exact.
    fn region(&self, loc: usize, x: i64) -> i64 {
        let consts = &self.bounds[loc];
        if consts.contains(&x) {
            return x;
        }
        consts.iter().rev().find(|c| **c < x).map_or(x, |c| c + 1)
    }

    fn committed(&self, c: &Ctrl) -> bool {
        self.acta.locations[c.loc].committed
    }

    fn idle(&self, c: &Ctrl) -> bool {
        self.acta.locations[c.loc].name == self.acta.initial
    }

    fn successors(&self, s: &Joint) -> Result<Vec<(Label, Joint)>, ActaError> {
        let mut out = Vec::new();
        let urgent = s.ctrl.iter().any(|c| self.committed(c));
        let busy = s.ctrl.iter().any(|c| !self.idle(c));
        for k in 0..self.ids.len() {
            if urgent && !self.committed(&s.ctrl[k]) {
                continue;
            }
            if busy && self.idle(&s.ctrl[k]) {
                continue;
            }
            let st = self.acta_state(s, k);
            for (e, edge) in self.acta.edges.iter().enumerate() {
                if edge.source != self.acta.locations[st.loc].name {
                    continue;
                }
                let mut agent = s.agent[k];
                let mut cont = s.cont[k];
                if let Some(sync) = &edge.sync {
                    let want = partner_label(&sync.chan, sync.dir);
                    let moved = if self.agent_labels.contains(&want) {
                        self.agents[self.kind[k]].step(agent, &want).map(|a| agent = a)
                    } else if self.cont_labels.contains(&want) {
                        self.cont.step(cont, &want).map(|c| cont = c)
                    } else {
                        None
                    };
                    if moved.is_none() {
                        continue;
                    }
                }
                let ns = match self.acta.step(&st, e, Real::zero()) {
                    Ok(ns) => ns,
                    Err(
                        ActaError::WrongSource
                        | ActaError::Invariant(_)
                        | ActaError::ClockGuard(_)
                        | ActaError::SpatialGuard
                        | ActaError::BadLane(_)
                        | ActaError::Action(_),
                    ) => continue,
                    Err(err) => return Err(err),
                };
                let mut t = s.clone();
                let x = if self.acta.locations[ns.loc].name == self.acta.initial { 0 } else { self.region(ns.loc, ns.clocks[0].to_integer()) };
                t.ctrl[k] = Ctrl { loc: ns.loc, x, n: ns.n, l: ns.l };
                t.ts = ns.snapshot;
                t.agent[k] = agent;
                t.cont[k] = cont;
                out.push((Label::Edge(k, e), t));
            }
        }
        if urgent {
            return Ok(out);
        }
        if let Some(k) = (0..self.ids.len()).find(|k| !self.idle(&s.ctrl[*k])) {
            let c = s.ctrl[k];
            let st = self.acta_state(s, k);
            let consts = &self.bounds[c.loc];
            let mut targets = vec![c.x + 1];
            if let Some(b) = consts.iter().find(|b| **b > c.x + 1) {
                if !consts.contains(&c.x) {
                    targets.push(*b);
                }
            }
            for x in targets {
                if !self.acta.can_delay(&st, real(x - c.x))? {
                    continue;
                }
                let x = self.region(c.loc, x);
                if x != c.x {
                    let mut t = s.clone();
                    t.ctrl[k].x = x;
                    out.push((Label::Tick, t));
                }
            }
        }
        if busy {
            return Ok(out);
        }
        for k in 0..self.ids.len() {
            for d in [-1, 1] {
                if let Some(t) = self.shift(s, k, d) {
                    out.push((Label::Move(k, d), t));
                }
            }
        }
        Ok(out)
    }

    /// Speed adjustment of an idle follower outside the platoon by one cell
    /// within its slot, allowed only if it keeps a gap to every vehicle
    /// sharing a lane.
    fn shift(&self, s: &Joint, k: usize, d: i64) -> Option<Joint> {
        let c = &s.ctrl[k];
        let id = self.ids[k];
        let v = s.ts.vehicles.get(&id)?;
        if !self.idle(c) || c.n == PLATOON_LANE || !v.clm.is_empty() || v.res.len() != 1 {
            return None;
        }
        let pos = v.pos + real(d * self.cell);
        let len = v.ps + v.sd;
        let home = real(self.home(k));
        if pos < home - real(SLACK * self.cell) || pos > home + real(SLACK * self.cell) {
            return None;
        }
        if pos < Real::zero() || pos + len > real(self.road) {
            return None;
        }
        for (other, w) in &s.ts.vehicles {
            let shares = w.res.iter().chain(&w.clm).any(|l| v.res.contains(l));
            if *other != id && shares {
                let (lo, hi) = w.extent();
                if !(pos + len < lo || hi < pos) {
                    return None;
                }
            }
        }
        let mut t = s.clone();
        t.ts.vehicles.get_mut(&id)?.pos = pos;
        Some(t)
    }

    fn render(&self, l: Label) -> String {
        match l {
            Label::Tick => "delay".into(),
            Label::Edge(k, e) => {
                let edge = &self.acta.edges[e];
                let what = edge.sync.as_ref().map(|s| format!("{}{}", s.chan, s.dir.symbol())).unwrap_or_else(|| "tau".into());
                format!("v{} {} -> {} {}", self.ids[k], edge.source, edge.target, what)
            }
            Label::Move(k, d) => format!("v{} {}", self.ids[k], if d < 0 { "falls back" } else { "moves up" }),
        }
    }
}

fn collisions(ts: &TrafficSnapshot) -> Result<Vec<VehicleId>, mlsl::MlslError> {
    let mut out = Vec::new();
    for id in ts.vehicles.keys() {
        if mlsl::cc(ts, *id)? {
            out.push(*id);
        }
    }
    Ok(out)
}

/// Breadth-first search up to `cfg.oracle_steps` steps for a snapshot in
/// which some vehicle's reservation overlaps another's. The report holds
/// iff none is found; a violation carries the witness action sequence.
pub fn safety_oracle(cfg: &ScenarioConfig) -> Result<Report, ConfigError> {
    let start = Instant::now();
    let world = World::new(cfg)?;
    let query = "A[] forall e. not cc(e)";
    let fail = |e: String| ConfigError::Invalid(format!("oracle step failed: {e}"));
    let init = world.initial();
    let mut cc_cache: HashMap<TrafficSnapshot, bool> = HashMap::new();
    let mut seen: HashSet<Box<[i16]>> = HashSet::from([world.key(&init)]);
    let mut parent: Vec<Option<(u32, Label)>> = vec![None];
    let mut frontier = vec![(0u32, init)];
    let mut depth = 0;
    let mut bad = None;
    'search: {
        let hit = collisions(&frontier[0].1.ts).map_err(|e| fail(e.to_string()))?;
        if !hit.is_empty() {
            bad = Some((0, hit));
            break 'search;
        }
        while !frontier.is_empty() && depth < cfg.oracle_steps {
            depth += 1;
            let mut next = Vec::new();
            for (k, s) in &frontier {
                let succs = world.successors(s).map_err(|e| fail(e.to_string()))?;
                for (label, t) in succs {
                    if !seen.insert(world.key(&t)) {
                        continue;
                    }
                    let id = parent.len() as u32;
                    parent.push(Some((*k, label)));
                    let collides = match cc_cache.get(&t.ts) {
                        Some(c) => *c,
                        None => {
                            let c = !collisions(&t.ts).map_err(|e| fail(e.to_string()))?.is_empty();
                            cc_cache.insert(t.ts.clone(), c);
                            c
                        }
                    };
                    if collides {
                        let hit = collisions(&t.ts).map_err(|e| fail(e.to_string()))?;
                        bad = Some((id, hit));
                        break 'search;
                    }
                    next.push((id, t));
                }
            }
            frontier = next;
        }
    }
    let saturated = bad.is_none() && frontier.is_empty();
    let mut report = Report::new(query, bad.is_none(), parent.len(), start.elapsed()).with_note(format!(
        "{} snapshots, depth {}{}",
        cc_cache.len() + 1,
        depth,
        if saturated {
            ", state space exhausted"
        } else if bad.is_none() {
            ", step bound reached"
        } else {
            ""
        }
    ));
    if let Some((mut k, hit)) = bad {
        let mut steps = Vec::new();
        while let Some((p, l)) = parent[k as usize] {
            steps.push(world.render(l));
            k = p;
        }
        steps.reverse();
        let mut trace: String = steps.iter().enumerate().map(|(i, s)| format!("step {}: {}\n", i + 1, s)).collect();
        trace.push_str(&format!("collision: {}\n", hit.iter().map(|v| format!("v{v}")).collect::<Vec<_>>().join(" ")));
        report = report.with_trace(trace);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skeletons_are_small() {
        let w = World::new(&ScenarioConfig::default()).unwrap();
        assert_eq!(w.agents.iter().map(|d| d.len()).collect::<Vec<_>>(), vec![4, 4]);
        assert_eq!(w.cont.subsets.len(), 2);
        assert_eq!(w.agents[0].step(0, "change_lane_leave!"), None);
        assert!(w.agents[0].step(0, "change_lane_join!").is_some());
        assert!(w.agents[1].step(0, "change_lane_leave!").is_some());
    }

    #[test]
    fn single_follower_is_safe() {
        let r = safety_oracle(&ScenarioConfig::default().with_followers(1)).unwrap();
        assert!(r.verdict.holds(), "{r:?}");
    }

    #[test]
    fn road_too_short() {
        let cfg = ScenarioConfig { oracle_cells: 4, oracle_road_len: 20, ..ScenarioConfig::default() };
        assert!(matches!(safety_oracle(&cfg), Err(ConfigError::Invalid(_))));
    }
}
