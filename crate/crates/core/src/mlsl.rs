//! Multi-lane spatial model: traffic snapshots, views, the reservation and
//! claim atoms, and the spatial actions.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_rational::Rational64;
use num_traits::Zero;
use thiserror::Error;

pub type Real = Rational64;
pub type VehicleId = u32;
pub type Lane = u32;

pub fn real(v: i64) -> Real {
    Rational64::from_integer(v)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VehicleState {
    pub pos: Real,
    pub ps: Real,
    pub sd: Real,
    pub res: BTreeSet<Lane>,
    pub clm: BTreeSet<Lane>,
}

impl VehicleState {
    pub fn new(pos: Real, ps: Real, sd: Real, lane: Lane) -> Self {
        VehicleState { pos, ps, sd, res: BTreeSet::from([lane]), clm: BTreeSet::new() }
    }

    /// Closed interval occupied by reservations and claims.
    pub fn extent(&self) -> (Real, Real) {
        (self.pos, self.pos + self.ps + self.sd)
    }

    pub fn invariants_hold(&self, lanes: Lane) -> bool {
        let in_range = |s: &BTreeSet<Lane>| s.iter().all(|l| *l >= 1 && *l <= lanes);
        let contiguous = match (self.res.first(), self.res.last()) {
            (Some(a), Some(b)) => (b - a) as usize + 1 == self.res.len(),
            _ => false,
        };
        let claim_ok = match self.clm.first() {
            None => true,
            Some(c) => self.res.len() == 1 && self.res.first().is_some_and(|r| r.abs_diff(*c) == 1),
        };
        self.ps > Real::zero()
            && self.sd >= Real::zero()
            && (1..=2).contains(&self.res.len())
            && contiguous
            && self.clm.len() <= 1
            && self.res.is_disjoint(&self.clm)
            && claim_ok
            && in_range(&self.res)
            && in_range(&self.clm)
    }
}

pub fn occupied_extent(v: &VehicleState) -> (Real, Real) {
    v.extent()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TrafficSnapshot {
    pub lanes: Lane,
    pub vehicles: BTreeMap<VehicleId, VehicleState>,
}

/// Lanes `lanes.0..=lanes.1` and extension `[ext.0, ext.1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct View {
    pub lanes: (Lane, Lane),
    pub ext: (Real, Real),
    pub owner: VehicleId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Term {
    Ego,
    Id(VehicleId),
    Var(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpatialFormula {
    True,
    Re(Term),
    Cl(Term),
    Neq(Term, Term),
    Not(Box<SpatialFormula>),
    And(Box<SpatialFormula>, Box<SpatialFormula>),
    Or(Box<SpatialFormula>, Box<SpatialFormula>),
    Exists(String, Box<SpatialFormula>),
    Somewhere(Box<SpatialFormula>),
}

impl SpatialFormula {
    pub fn re(t: Term) -> Self {
        SpatialFormula::Re(t)
    }

    pub fn cl(t: Term) -> Self {
        SpatialFormula::Cl(t)
    }

    pub fn not(a: Self) -> Self {
        SpatialFormula::Not(Box::new(a))
    }

    pub fn and(a: Self, b: Self) -> Self {
        SpatialFormula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Self, b: Self) -> Self {
        SpatialFormula::Or(Box::new(a), Box::new(b))
    }

    pub fn exists(v: &str, a: Self) -> Self {
        SpatialFormula::Exists(v.to_string(), Box::new(a))
    }

    pub fn somewhere(a: Self) -> Self {
        SpatialFormula::Somewhere(Box::new(a))
    }

    /// `c ≠ ego ∧ somewhere(re(ego) ∧ re(c))`
    pub fn collision_check(c: Term) -> Self {
        Self::and(SpatialFormula::Neq(c.clone(), Term::Ego), Self::somewhere(Self::and(Self::re(Term::Ego), Self::re(c))))
    }

    /// `c ≠ ego ∧ somewhere(cl(ego) ∧ (re(c) ∨ cl(c)))`
    pub fn potential_collision(c: Term) -> Self {
        Self::and(
            SpatialFormula::Neq(c.clone(), Term::Ego),
            Self::somewhere(Self::and(Self::cl(Term::Ego), Self::or(Self::re(c.clone()), Self::cl(c)))),
        )
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MlslError {
    #[error("unbound vehicle variable `{0}`")]
    Unbound(String),
    #[error("unknown vehicle {0}")]
    UnknownVehicle(VehicleId),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ActionError {
    #[error("unknown vehicle {0}")]
    UnknownVehicle(VehicleId),
    #[error("lane {0} does not exist")]
    LaneOutOfRange(Lane),
    #[error("vehicle {vehicle}: lane {lane} is not adjacent to its reservation")]
    NonAdjacentClaim { vehicle: VehicleId, lane: Lane },
    #[error("vehicle {0} already holds a claim")]
    DoubleClaim(VehicleId),
    #[error("vehicle {0} reserves two lanes and cannot claim")]
    ClaimWhileChanging(VehicleId),
    #[error("vehicle {0} has no claim to reserve")]
    ReserveWithoutClaim(VehicleId),
    #[error("vehicle {0} has no claim to withdraw")]
    WithdrawWithoutClaim(VehicleId),
    #[error("vehicle {vehicle}: lane {lane} is not reserved")]
    ShrinkToUnreservedLane { vehicle: VehicleId, lane: Lane },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpatialAction {
    Claim(VehicleId, Lane),
    Reserve(VehicleId),
    WithdrawClaim(VehicleId),
    WithdrawReservation(VehicleId, Lane),
}

impl SpatialAction {
    pub fn vehicle(&self) -> VehicleId {
        match *self {
            SpatialAction::Claim(c, _) | SpatialAction::Reserve(c) | SpatialAction::WithdrawClaim(c) | SpatialAction::WithdrawReservation(c, _) => c,
        }
    }
}

impl TrafficSnapshot {
    pub fn new(lanes: Lane) -> Self {
        TrafficSnapshot { lanes, vehicles: BTreeMap::new() }
    }

    pub fn with(mut self, id: VehicleId, v: VehicleState) -> Self {
        self.vehicles.insert(id, v);
        self
    }

    pub fn vehicle(&self, id: VehicleId) -> Result<&VehicleState, MlslError> {
        self.vehicles.get(&id).ok_or(MlslError::UnknownVehicle(id))
    }

    /// All lanes and the hull of all vehicle extents.
    pub fn full_view(&self, owner: VehicleId) -> View {
        let lo = self.vehicles.values().map(|v| v.extent().0).min().unwrap_or_else(Real::zero);
        let hi = self.vehicles.values().map(|v| v.extent().1).max().unwrap_or_else(Real::zero);
        View { lanes: (1, self.lanes), ext: (lo, hi), owner }
    }

    pub fn invariants_hold(&self) -> bool {
        self.vehicles.values().all(|v| v.invariants_hold(self.lanes))
    }
}

/// Candidate subview endpoints: vehicle extent endpoints inside the view
/// plus the view's own endpoints, sorted.
pub fn endpoints(ts: &TrafficSnapshot, view: &View) -> Vec<Real> {
    let (a, b) = view.ext;
    let mut pts: BTreeSet<Real> = BTreeSet::from([a, b]);
    for v in ts.vehicles.values() {
        let (s, e) = v.extent();
        for p in [s, e] {
            if p >= a && p <= b {
                pts.insert(p);
            }
        }
    }
    pts.into_iter().collect()
}

struct Eval<'a> {
    ts: &'a TrafficSnapshot,
    env: HashMap<String, VehicleId>,
}

impl Eval<'_> {
    fn id(&self, t: &Term, view: &View) -> Result<VehicleId, MlslError> {
        match t {
            Term::Ego => Ok(view.owner),
            Term::Id(c) => Ok(*c),
            Term::Var(v) => self.env.get(v).copied().ok_or_else(|| MlslError::Unbound(v.clone())),
        }
    }

    fn atom(&self, view: &View, lanes: impl Fn(&VehicleState) -> &BTreeSet<Lane>, c: VehicleId) -> Result<bool, MlslError> {
        let v = self.ts.vehicle(c)?;
        if view.lanes.0 != view.lanes.1 || view.ext.0 >= view.ext.1 {
            return Ok(false);
        }
        let (s, e) = v.extent();
        Ok(lanes(v).contains(&view.lanes.0) && s <= view.ext.0 && view.ext.1 <= e)
    }

    fn eval(&mut self, f: &SpatialFormula, view: &View) -> Result<bool, MlslError> {
        Ok(match f {
            SpatialFormula::True => true,
            SpatialFormula::Re(t) => {
                let c = self.id(t, view)?;
                self.atom(view, |v| &v.res, c)?
            }
            SpatialFormula::Cl(t) => {
                let c = self.id(t, view)?;
                self.atom(view, |v| &v.clm, c)?
            }
            SpatialFormula::Neq(a, b) => self.id(a, view)? != self.id(b, view)?,
            SpatialFormula::Not(a) => !self.eval(a, view)?,
            SpatialFormula::And(a, b) => self.eval(a, view)? && self.eval(b, view)?,
            SpatialFormula::Or(a, b) => self.eval(a, view)? || self.eval(b, view)?,
            SpatialFormula::Exists(x, a) => {
                let saved = self.env.get(x).copied();
                let ids: Vec<VehicleId> = self.ts.vehicles.keys().copied().collect();
                let mut found = false;
                for c in ids {
                    self.env.insert(x.clone(), c);
                    if self.eval(a, view)? {
                        found = true;
                        break;
                    }
                }
                match saved {
                    Some(c) => self.env.insert(x.clone(), c),
                    None => self.env.remove(x),
                };
                found
            }
            SpatialFormula::Somewhere(a) => {
                let pts = endpoints(self.ts, view);
                for l1 in view.lanes.0..=view.lanes.1 {
                    for l2 in l1..=view.lanes.1 {
                        for (i, x) in pts.iter().enumerate() {
                            for y in &pts[i + 1..] {
                                let sub = View { lanes: (l1, l2), ext: (*x, *y), owner: view.owner };
                                if self.eval(a, &sub)? {
                                    return Ok(true);
                                }
                            }
                        }
                    }
                }
                false
            }
        })
    }
}

pub fn eval(f: &SpatialFormula, ts: &TrafficSnapshot, view: &View) -> Result<bool, MlslError> {
    ts.vehicle(view.owner)?;
    Eval { ts, env: HashMap::new() }.eval(f, view)
}

/// Evaluates `f` with variables pre-bound.
pub fn eval_with(f: &SpatialFormula, ts: &TrafficSnapshot, view: &View, env: &[(&str, VehicleId)]) -> Result<bool, MlslError> {
    let env = env.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    Eval { ts, env }.eval(f, view)
}

/// Some other vehicle's reservation overlaps ego's reservation.
pub fn cc(ts: &TrafficSnapshot, ego: VehicleId) -> Result<bool, MlslError> {
    let f = SpatialFormula::exists("c", SpatialFormula::collision_check(Term::Var("c".into())));
    eval(&f, ts, &ts.full_view(ego))
}

/// Ego's claim overlaps the claim or reservation of `c`.
pub fn pc(ts: &TrafficSnapshot, c: VehicleId, ego: VehicleId) -> Result<bool, MlslError> {
    ts.vehicle(c)?;
    eval(&SpatialFormula::potential_collision(Term::Id(c)), ts, &ts.full_view(ego))
}

/// `∃c. pc(c, ego)`
pub fn any_pc(ts: &TrafficSnapshot, ego: VehicleId) -> Result<bool, MlslError> {
    for c in ts.vehicles.keys() {
        if pc(ts, *c, ego)? {
            return Ok(true);
        }
    }
    Ok(false)
}

pub fn apply_action(ts: &TrafficSnapshot, a: SpatialAction) -> Result<TrafficSnapshot, ActionError> {
    let c = a.vehicle();
    let mut out = ts.clone();
    let lanes = ts.lanes;
    let v = out.vehicles.get_mut(&c).ok_or(ActionError::UnknownVehicle(c))?;
    match a {
        SpatialAction::Claim(_, n) => {
            if n < 1 || n > lanes {
                return Err(ActionError::LaneOutOfRange(n));
            }
            if !v.clm.is_empty() {
                return Err(ActionError::DoubleClaim(c));
            }
            if v.res.len() != 1 {
                return Err(ActionError::ClaimWhileChanging(c));
            }
            let r = *v.res.first().expect("one lane");
            if r.abs_diff(n) != 1 {
                return Err(ActionError::NonAdjacentClaim { vehicle: c, lane: n });
            }
            v.clm = BTreeSet::from([n]);
        }
        SpatialAction::Reserve(_) => {
            if v.clm.is_empty() {
                return Err(ActionError::ReserveWithoutClaim(c));
            }
            let clm = std::mem::take(&mut v.clm);
            v.res.extend(clm);
        }
        SpatialAction::WithdrawClaim(_) => {
            if v.clm.is_empty() {
                return Err(ActionError::WithdrawWithoutClaim(c));
            }
            v.clm.clear();
        }
        SpatialAction::WithdrawReservation(_, n) => {
            if !v.res.contains(&n) {
                return Err(ActionError::ShrinkToUnreservedLane { vehicle: c, lane: n });
            }
            v.res = BTreeSet::from([n]);
        }
    }
    Ok(out)
}
