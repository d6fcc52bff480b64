//! Timed automata with spatial guards and actions, the lane-change
//! controller, and its untimed and timed abstractions.

use std::collections::HashMap;

use num_traits::Zero;
use thiserror::Error;

use crate::mlsl::{self, ActionError, Lane, MlslError, Real, SpatialAction, SpatialFormula, Term, TrafficSnapshot, VehicleId};
use crate::report::Report;
use crate::ta::automaton::{sync_label, FiniteAutomaton};
use crate::ta::expr::{CmpOp, Expr};
use crate::ta::model::{Assign, ClockCmp, Edge, Location, Sync, Template, VarDecl};

/// Lane operand of a spatial action.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LaneRef {
    /// The target lane `l`.
    Target,
    /// The current lane `n` plus an offset.
    Current(i32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActaAction {
    Claim(LaneRef),
    Reserve,
    WithdrawClaim,
    WithdrawReservation(LaneRef),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LaneUpdate {
    /// `l := n + d`
    SetTarget(i32),
    /// `n := l`
    Commit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActaEdge {
    pub source: String,
    pub target: String,
    pub sync: Option<Sync>,
    pub clock_guard: Vec<ClockCmp>,
    pub spatial_guard: Option<SpatialFormula>,
    pub action: Option<ActaAction>,
    pub resets: Vec<String>,
    pub updates: Vec<LaneUpdate>,
}

impl ActaEdge {
    fn new(source: &str, target: &str, sync: Sync) -> Self {
        ActaEdge {
            source: source.into(),
            target: target.into(),
            sync: Some(sync),
            clock_guard: Vec::new(),
            spatial_guard: None,
            action: None,
            resets: Vec::new(),
            updates: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Acta {
    pub name: String,
    pub clocks: Vec<String>,
    pub locations: Vec<Location>,
    pub initial: String,
    pub edges: Vec<ActaEdge>,
    pub consts: Vec<(String, i64)>,
}

/// Lane-change controller for joining and leaving, parameterized by its
/// two deadlines and the lane direction of each manoeuvre.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpatialControllerModel {
    pub t_dl: i64,
    pub t_lc: i64,
    pub join_dir: i32,
    pub leave_dir: i32,
}

impl Default for SpatialControllerModel {
    fn default() -> Self {
        SpatialControllerModel { t_dl: 5, t_lc: 30, join_dir: -1, leave_dir: 1 }
    }
}

fn ego_chan(name: &str, send: bool) -> Sync {
    let idx = Some(Expr::name("ego"));
    if send {
        Sync::send(name, idx)
    } else {
        Sync::recv(name, idx)
    }
}

pub fn no_pc_guard() -> SpatialFormula {
    SpatialFormula::not(SpatialFormula::exists("c", SpatialFormula::potential_collision(Term::Var("c".into()))))
}

fn x_cmp(op: CmpOp, bound: Expr) -> ClockCmp {
    ClockCmp::new("x", op, bound)
}

impl SpatialControllerModel {
    pub fn acta(&self) -> Acta {
        let mut join = ActaEdge::new("init", "wait", ego_chan("change_lane_join", false));
        join.action = Some(ActaAction::Claim(LaneRef::Current(self.join_dir)));
        join.updates = vec![LaneUpdate::SetTarget(self.join_dir)];
        join.resets = vec!["x".into()];
        let mut leave = ActaEdge::new("init", "wait", ego_chan("change_lane_leave", false));
        leave.action = Some(ActaAction::Claim(LaneRef::Current(self.leave_dir)));
        leave.updates = vec![LaneUpdate::SetTarget(self.leave_dir)];
        leave.resets = vec!["x".into()];
        let mut abort = ActaEdge::new("wait", "init", ego_chan("abort", true));
        abort.clock_guard = vec![x_cmp(CmpOp::Gt, Expr::Int(0))];
        abort.action = Some(ActaAction::WithdrawClaim);
        let mut change = ActaEdge::new("wait", "change", ego_chan("phy_changing_lane", true));
        change.clock_guard = vec![x_cmp(CmpOp::Gt, Expr::Int(0)), x_cmp(CmpOp::Lt, Expr::name("t_dl"))];
        change.spatial_guard = Some(no_pc_guard());
        change.action = Some(ActaAction::Reserve);
        let mut changed = ActaEdge::new("change", "post", ego_chan("phy_changed_lane", false));
        changed.clock_guard = vec![x_cmp(CmpOp::Gt, Expr::Int(0))];
        let mut done = ActaEdge::new("post", "init", ego_chan("changed_lane", true));
        done.action = Some(ActaAction::WithdrawReservation(LaneRef::Target));
        done.updates = vec![LaneUpdate::Commit];
        Acta {
            name: "Spatial".into(),
            clocks: vec!["x".into()],
            locations: vec![
                Location::new("init"),
                Location::new("wait").with_invariant(x_cmp(CmpOp::Le, Expr::name("t_dl"))),
                Location::new("change").with_invariant(x_cmp(CmpOp::Le, Expr::name("t_lc"))),
                Location::new("post").committed(),
            ],
            initial: "init".into(),
            edges: vec![join, leave, abort, change, changed, done],
            consts: vec![("t_dl".into(), self.t_dl), ("t_lc".into(), self.t_lc)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ActaState {
    pub loc: usize,
    pub clocks: Vec<Real>,
    pub snapshot: TrafficSnapshot,
    pub ego: VehicleId,
    pub n: Lane,
    pub l: Lane,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ActaError {
    #[error("edge does not leave the current location")]
    WrongSource,
    #[error("delay violates the invariant of `{0}`")]
    Invariant(String),
    #[error("clock guard `{0}` violated")]
    ClockGuard(String),
    #[error("spatial guard violated")]
    SpatialGuard,
    #[error("lane {0} outside the motorway")]
    BadLane(i64),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error(transparent)]
    Spatial(#[from] MlslError),
    #[error("unknown constant `{0}`")]
    UnknownConstant(String),
}

impl Acta {
    pub fn location_index(&self, name: &str) -> Option<usize> {
        self.locations.iter().position(|l| l.name == name)
    }

    fn constant(&self, e: &Expr) -> Result<i64, ActaError> {
        let map: HashMap<&str, i64> = self.consts.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        e.eval_const(&|n| map.get(n).copied()).ok_or_else(|| ActaError::UnknownConstant(e.to_string()))
    }

    fn clock_holds(&self, c: &ClockCmp, clocks: &[Real]) -> Result<bool, ActaError> {
        let k = self.clocks.iter().position(|x| *x == c.clock).ok_or_else(|| ActaError::UnknownConstant(c.clock.clone()))?;
        let b = mlsl::real(self.constant(&c.bound)?);
        let v = clocks[k];
        Ok(match c.op {
            CmpOp::Lt => v < b,
            CmpOp::Le => v <= b,
            CmpOp::Eq => v == b,
            CmpOp::Ne => v != b,
            CmpOp::Ge => v >= b,
            CmpOp::Gt => v > b,
        })
    }

    fn all_hold(&self, cs: &[ClockCmp], clocks: &[Real]) -> Result<Option<String>, ActaError> {
        for c in cs {
            if !self.clock_holds(c, clocks)? {
                return Ok(Some(c.as_expr().to_string()));
            }
        }
        Ok(None)
    }

    pub fn initial_state(&self, snapshot: TrafficSnapshot, ego: VehicleId, lane: Lane) -> ActaState {
        ActaState {
            loc: self.location_index(&self.initial).unwrap_or(0),
            clocks: vec![Real::zero(); self.clocks.len()],
            snapshot,
            ego,
            n: lane,
            l: lane,
        }
    }

    /// Whether `delay` can elapse in the current location.
    pub fn can_delay(&self, s: &ActaState, delay: Real) -> Result<bool, ActaError> {
        let loc = &self.locations[s.loc];
        if delay > Real::zero() && loc.committed {
            return Ok(false);
        }
        let moved: Vec<Real> = s.clocks.iter().map(|c| *c + delay).collect();
        Ok(self.all_hold(&loc.invariant, &moved)?.is_none())
    }

    /// Lets `delay` elapse, then takes edge `e`.
    pub fn step(&self, s: &ActaState, e: usize, delay: Real) -> Result<ActaState, ActaError> {
        let edge = &self.edges[e];
        let src = &self.locations[s.loc];
        if edge.source != src.name {
            return Err(ActaError::WrongSource);
        }
        if !self.can_delay(s, delay)? {
            return Err(ActaError::Invariant(src.name.clone()));
        }
        let mut clocks: Vec<Real> = s.clocks.iter().map(|c| *c + delay).collect();
        if let Some(g) = self.all_hold(&edge.clock_guard, &clocks)? {
            return Err(ActaError::ClockGuard(g));
        }
        if let Some(g) = &edge.spatial_guard {
            if !mlsl::eval(g, &s.snapshot, &s.snapshot.full_view(s.ego))? {
                return Err(ActaError::SpatialGuard);
            }
        }
        let lane = |r: LaneRef| -> Result<Lane, ActaError> {
            let v = match r {
                LaneRef::Target => s.l as i64,
                LaneRef::Current(d) => s.n as i64 + d as i64,
            };
            if v < 1 || v > s.snapshot.lanes as i64 {
                return Err(ActaError::BadLane(v));
            }
            Ok(v as Lane)
        };
        let snapshot = match edge.action {
            None => s.snapshot.clone(),
            Some(a) => {
                let act = match a {
                    ActaAction::Claim(r) => SpatialAction::Claim(s.ego, lane(r)?),
                    ActaAction::Reserve => SpatialAction::Reserve(s.ego),
                    ActaAction::WithdrawClaim => SpatialAction::WithdrawClaim(s.ego),
                    ActaAction::WithdrawReservation(r) => SpatialAction::WithdrawReservation(s.ego, lane(r)?),
                };
                mlsl::apply_action(&s.snapshot, act)?
            }
        };
        for r in &edge.resets {
            if let Some(k) = self.clocks.iter().position(|c| c == r) {
                clocks[k] = Real::zero();
            }
        }
        let (mut n, mut l) = (s.n, s.l);
        for u in &edge.updates {
            match u {
                LaneUpdate::SetTarget(d) => {
                    let v = n as i64 + *d as i64;
                    if v < 1 || v > s.snapshot.lanes as i64 {
                        return Err(ActaError::BadLane(v));
                    }
                    l = v as Lane;
                }
                LaneUpdate::Commit => n = l,
            }
        }
        let loc = self.location_index(&edge.target).ok_or(ActaError::WrongSource)?;
        if let Some(g) = self.all_hold(&self.locations[loc].invariant, &clocks)? {
            return Err(ActaError::Invariant(g));
        }
        Ok(ActaState { loc, clocks, snapshot, ego: s.ego, n, l })
    }
}

pub fn acta_step(a: &Acta, s: &ActaState, e: usize, delay: Real) -> Result<ActaState, ActaError> {
    a.step(s, e, delay)
}

/// Keeps locations and synchronisation labels only.
pub fn abstract_untimed(a: &Acta) -> FiniteAutomaton {
    let mut fa = FiniteAutomaton::new();
    for l in &a.locations {
        fa.add_state(l.name.clone());
    }
    fa.initial = fa.state(&a.initial).unwrap_or(0);
    for e in &a.edges {
        let (Some(s), Some(d)) = (fa.state(&e.source), fa.state(&e.target)) else { continue };
        fa.add_transition(s, e.sync.as_ref().map(sync_label), d);
    }
    fa
}

fn is_no_pc(f: &SpatialFormula) -> bool {
    *f == no_pc_guard()
}

/// Whether a spatial guard forces `¬∃c. pc(c, ego)` syntactically.
fn implies_no_pc(f: &SpatialFormula) -> bool {
    match f {
        SpatialFormula::And(a, b) => implies_no_pc(a) || implies_no_pc(b),
        other => is_no_pc(other),
    }
}

/// Timed automaton over the claim array `c` and flags `pc`, `r`. With
/// `id = None` the result is a template with parameter `id`.
pub fn abstract_timed(a: &Acta, id: Option<i64>) -> Result<Template, String> {
    let idx = match id {
        Some(k) => Expr::Int(k),
        None => Expr::name("id"),
    };
    let mut t = Template::new(&a.name);
    if id.is_none() {
        t.params = vec!["id".into()];
    }
    t.clocks = a.clocks.clone();
    t.vars = vec![VarDecl::int("r", 0, 1, 0)];
    t.locations = a.locations.clone();
    t.initial = a.initial.clone();
    for e in &a.edges {
        let mut edge = Edge::new(&e.source, &e.target);
        edge.clock_guard = e.clock_guard.clone();
        if let Some(g) = &e.spatial_guard {
            if !is_no_pc(g) {
                return Err(format!("spatial guard on {} -> {} has no timed abstraction", e.source, e.target));
            }
            edge = edge.data(Expr::not(Expr::name("pc")));
        }
        edge.sync = e.sync.as_ref().map(|s| Sync { chan: s.chan.clone(), index: s.index.as_ref().map(|_| idx.clone()), dir: s.dir });
        let claim = |v: i64| Assign::elem("c", idx.clone(), Expr::Int(v));
        match e.action {
            Some(ActaAction::Claim(_)) => edge.updates.push(claim(1)),
            Some(ActaAction::WithdrawClaim) => edge.updates.push(claim(0)),
            Some(ActaAction::Reserve) => {
                edge.updates.push(claim(0));
                edge.updates.push(Assign::new("r", Expr::Int(1)));
            }
            Some(ActaAction::WithdrawReservation(_)) => edge.updates.push(Assign::new("r", Expr::Int(0))),
            None => {}
        }
        for r in &e.resets {
            edge.updates.push(Assign::new(r, Expr::Int(0)));
        }
        t.edges.push(edge);
    }
    Ok(t)
}

/// Road abstraction: `pc` may rise while some vehicle holds a claim and
/// stays up for a positive duration.
pub fn road_abstraction(ids: &[i64]) -> Result<Template, String> {
    let guard = ids
        .iter()
        .map(|i| Expr::index("c", Expr::Int(*i)))
        .reduce(Expr::or)
        .ok_or_else(|| "road abstraction needs at least one vehicle".to_string())?;
    let mut t = Template::new("Road");
    t.clocks = vec!["y".into()];
    t.locations = vec![Location::new("free"), Location::new("potential")];
    t.initial = "free".into();
    t.edges = vec![
        Edge::new("free", "potential").data(guard).update(Assign::new("pc", Expr::Int(1))).update(Assign::new("y", Expr::Int(0))),
        Edge::new("potential", "free").clock(ClockCmp::new("y", CmpOp::Gt, Expr::Int(0))).update(Assign::new("pc", Expr::Int(0))),
    ];
    Ok(t)
}

/// Every edge that turns a claim into a reservation must be guarded by
/// `¬∃c. pc(c, ego)`.
pub fn check_lc_guard(a: &Acta) -> Report {
    let start = std::time::Instant::now();
    let offending: Vec<String> = a
        .edges
        .iter()
        .filter(|e| e.action == Some(ActaAction::Reserve))
        .filter(|e| !e.spatial_guard.as_ref().is_some_and(implies_no_pc))
        .map(|e| format!("{} -> {}", e.source, e.target))
        .collect();
    let r = Report::new("LC guard", offending.is_empty(), a.edges.len(), start.elapsed());
    if offending.is_empty() {
        r
    } else {
        r.with_note(format!("reserve without pc guard: {}", offending.join("; ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlsl::{real, VehicleState};
    use crate::ta::automaton::untimed_projection;

    fn setup() -> (Acta, ActaState) {
        let a = SpatialControllerModel::default().acta();
        let ts = TrafficSnapshot::new(2).with(1, VehicleState::new(real(0), real(4), real(6), 2));
        let s = a.initial_state(ts, 1, 2);
        (a, s)
    }

    #[test]
    fn join_claims_and_resets() {
        let (a, s) = setup();
        let w = a.step(&s, 0, real(3)).unwrap();
        assert_eq!(a.locations[w.loc].name, "wait");
        assert_eq!(w.l, 1);
        assert_eq!(w.clocks[0], real(0));
        assert!(w.snapshot.vehicles[&1].clm.contains(&1));
        let back = a.step(&w, 2, real(1)).unwrap();
        assert!(back.snapshot.vehicles[&1].clm.is_empty());
        assert_eq!(a.step(&w, 2, real(0)), Err(ActaError::ClockGuard("x>0".into())));
    }

    #[test]
    fn potential_collision_blocks_reserve() {
        let (a, s) = setup();
        let mut w = a.step(&s, 0, real(0)).unwrap();
        w.snapshot.vehicles.insert(2, VehicleState::new(real(5), real(4), real(6), 1));
        assert_eq!(a.step(&w, 3, real(1)), Err(ActaError::SpatialGuard));
        w.snapshot.vehicles.insert(2, VehicleState::new(real(50), real(4), real(6), 1));
        let c = a.step(&w, 3, real(1)).unwrap();
        assert_eq!(c.snapshot.vehicles[&1].res.len(), 2);
    }

    #[test]
    fn abstractions_agree() {
        let a = SpatialControllerModel::default().acta();
        let u = abstract_untimed(&a);
        assert_eq!(u.states.len(), 4);
        let labels: Vec<String> = u.alphabet().into_iter().collect();
        assert_eq!(labels, vec!["abort!", "change_lane_join?", "change_lane_leave?", "changed_lane!", "phy_changed_lane?", "phy_changing_lane!"]);
        let t = abstract_timed(&a, Some(2)).unwrap();
        assert_eq!(FiniteAutomaton::from_template(&t), u);
        assert_eq!(untimed_projection(&t).locations.len(), 4);
        let change = &t.edges[3];
        assert_eq!(change.guard_expr().unwrap().to_string(), "x>0 and x<t_dl and not pc");
        assert_eq!(change.updates.iter().map(Assign::render).collect::<Vec<_>>(), vec!["c[2] = 0", "r = 1"]);
    }

    #[test]
    fn road_guard_lists_every_vehicle() {
        let r = road_abstraction(&[2, 3, 4, 5]).unwrap();
        assert_eq!(r.edges[0].data_guard.as_ref().unwrap().to_string(), "c[2] or c[3] or c[4] or c[5]");
        assert!(road_abstraction(&[]).is_err());
    }

    #[test]
    fn lc_guard_check() {
        let mut a = SpatialControllerModel::default().acta();
        assert!(check_lc_guard(&a).verdict.holds());
        a.edges[3].spatial_guard = None;
        let r = check_lc_guard(&a);
        assert!(!r.verdict.holds() && r.note.unwrap().contains("wait -> change"));
        a.edges.retain(|e| e.action != Some(ActaAction::Reserve));
        assert!(check_lc_guard(&a).verdict.holds());
    }
}
