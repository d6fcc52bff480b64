//! Abstraction evidence: bounded trace inclusion of the lane-change
//! controller in its timed and untimed abstractions, and random-run
//! inclusion of agent and continuous runs in their untimed skeletons.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::time::Instant;

use num_traits::Zero;
use rand::rngs::StdRng;
use rand::SeedableRng;

use crate::acta::{abstract_timed, abstract_untimed, Acta, ActaState};
use crate::mlsl::{self, real, Lane, Real, TrafficSnapshot, VehicleId, VehicleState};
use crate::report::Report;
use crate::ta::automaton::{sync_label, untimed_projection, FiniteAutomaton};
use crate::ta::concrete::{ConcreteState, Simulator};
use crate::ta::model::{InstanceDecl, Network, Template};

use super::config::ScenarioConfig;
use super::models::{agent_template, continuous_template, declarations, spatial_model, BuildError};

const EGO: VehicleId = 2;
const EGO_LANE: Lane = 2;
const NEIGHBOURS: [(VehicleId, Lane); 2] = [(3, 1), (4, 3)];

/// Ego on the middle of three lanes; the neighbours either drive alongside
/// (`blocked`) or far ahead.
fn place(ts: &TrafficSnapshot, blocked: bool) -> TrafficSnapshot {
    let mut out = ts.clone();
    for (id, _) in NEIGHBOURS {
        if let Some(v) = out.vehicles.get_mut(&id) {
            v.pos = if blocked { real(0) } else { real(100) };
        }
    }
    out
}

fn initial_snapshot() -> TrafficSnapshot {
    let veh = |pos: i64, lane: Lane| VehicleState::new(real(pos), real(5), real(5), lane);
    let mut ts = TrafficSnapshot::new(3).with(EGO, veh(0, EGO_LANE));
    for (id, lane) in NEIGHBOURS {
        ts = ts.with(id, veh(100, lane));
    }
    ts
}

fn single(net_decls: crate::ta::model::Declarations, t: Template, name: &str, args: Vec<i64>) -> Result<Network, BuildError> {
    let template = t.name.clone();
    Ok(Network::new(net_decls, vec![t], vec![InstanceDecl { name: name.into(), template, args }])?)
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct Node {
    concrete: ActaState,
    timed: Vec<ConcreteState>,
    untimed: BTreeSet<usize>,
}

/// Bounded trace inclusion of the spatial controller of `cfg` in its
/// timed and untimed abstractions.
pub fn trace_inclusion_evidence(cfg: &ScenarioConfig, bound: usize) -> Result<Report, BuildError> {
    let a = spatial_model(cfg);
    trace_inclusion_between(cfg, &a, &a, bound)
}

/// Every trace of `concrete` with unit delays and at most `bound` steps,
/// under an environment that may block or free the neighbouring lanes
/// before each step, must be matched by the timed abstraction of
/// `abstraction` (same delays and synchronisations, `pc` set from the
/// snapshot, claim and reservation flags agreeing) and by its untimed
/// abstraction. The report carries the first violating trace.
pub fn trace_inclusion_between(cfg: &ScenarioConfig, concrete: &Acta, abstraction: &Acta, bound: usize) -> Result<Report, BuildError> {
    let start = Instant::now();
    let query = format!("traces({}) included in abstractions, bound {bound}", concrete.name);
    let mut decls = declarations(cfg);
    for (k, v) in &abstraction.consts {
        match decls.consts.iter_mut().find(|(n, _)| n == k) {
            Some(c) => c.1 = *v,
            None => decls.consts.push((k.clone(), *v)),
        }
    }
    let template = abstract_timed(abstraction, Some(EGO as i64)).map_err(BuildError::Abstraction)?;
    let net = single(decls, template, "s2", Vec::new())?;
    let sim = Simulator::new(&net, 1, true);
    let missing = |n: &str| BuildError::Abstraction(format!("abstraction lacks `{n}`"));
    let pc = net.var("pc").ok_or_else(|| missing("pc"))?;
    let r = net.var("s2.r").ok_or_else(|| missing("r"))?;
    let (c0, _) = net.array("c").ok_or_else(|| missing("c"))?;
    let claim = c0 + EGO as usize;
    let untimed = abstract_untimed(abstraction);

    let init = Node { concrete: concrete.initial_state(initial_snapshot(), EGO, EGO_LANE), timed: vec![sim.initial()], untimed: untimed.start() };
    let mut seen = HashSet::from([init.clone()]);
    let mut queue = VecDeque::from([(init, Vec::<String>::new())]);
    let mut checked = 0usize;
    let mut violation = None;
    'search: while let Some((node, trace)) = queue.pop_front() {
        if trace.len() >= bound {
            continue;
        }
        for blocked in [false, true] {
            let here = ActaState { snapshot: place(&node.concrete.snapshot, blocked), ..node.concrete.clone() };
            let env = if blocked { "blocked" } else { "free" };
            let mut steps: Vec<(String, Node)> = Vec::new();
            if concrete.can_delay(&here, real(1)).unwrap_or(false) {
                let mut c = here.clone();
                for x in &mut c.clocks {
                    *x += real(1);
                }
                let timed = node.timed.iter().filter(|s| sim.can_delay(s, 1)).map(|s| sim.delay(s, 1)).collect();
                steps.push((format!("{env}: delay 1"), Node { concrete: c, timed, untimed: node.untimed.clone() }));
            }
            let pc_now = mlsl::any_pc(&here.snapshot, EGO).unwrap_or(false) as i32;
            for (e, edge) in concrete.edges.iter().enumerate() {
                let Ok(c) = concrete.step(&here, e, Real::zero()) else { continue };
                let label = edge.sync.as_ref().map(sync_label);
                let ego = &c.snapshot.vehicles[&EGO];
                let (has_claim, reserving) = (!ego.clm.is_empty() as i32, (ego.res.len() == 2) as i32);
                let mut timed: Vec<ConcreteState> = Vec::new();
                for s in &node.timed {
                    let mut s = s.clone();
                    s.vars[pc] = pc_now;
                    for (l, t) in sim.enabled(&s) {
                        let seen_label = sim.visible(&l).into_iter().next();
                        if seen_label == label && t.vars[claim] == has_claim && t.vars[r] == reserving && !timed.contains(&t) {
                            timed.push(t);
                        }
                    }
                }
                timed.sort_by(|a, b| (&a.locs, &a.vars, &a.clocks).cmp(&(&b.locs, &b.vars, &b.clocks)));
                let untimed_next = match &label {
                    Some(l) => untimed.step(&node.untimed, l),
                    None => untimed.closure(&node.untimed),
                };
                let name = format!("{env}: {} -> {} {}", edge.source, edge.target, label.clone().unwrap_or_else(|| "tau".into()));
                steps.push((name, Node { concrete: c, timed, untimed: untimed_next }));
            }
            for (name, next) in steps {
                checked += 1;
                let mut t = trace.clone();
                t.push(name);
                if next.timed.is_empty() || next.untimed.is_empty() {
                    let which = if next.timed.is_empty() { "timed" } else { "untimed" };
                    violation = Some((which, t));
                    break 'search;
                }
                if seen.insert(next.clone()) {
                    queue.push_back((next, t));
                }
            }
        }
    }
    let r = Report::new(query, violation.is_none(), seen.len(), start.elapsed());
    Ok(match violation {
        None => r.with_note(format!("{checked} steps checked")),
        Some((which, t)) => {
            let text: String = t.iter().enumerate().map(|(i, s)| format!("step {}: {}\n", i + 1, s)).collect();
            r.with_note(format!("no matching step in the {which} abstraction")).with_trace(text)
        }
    })
}

/// Random runs of the timed agent and continuous templates (synchronising
/// alone, `busy` redrawn each step) whose label sequences must be accepted
/// by their untimed skeletons.
pub fn skeleton_inclusion_evidence(cfg: &ScenarioConfig, runs: usize, seed: u64) -> Result<Report, BuildError> {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut steps = 0usize;
    for t in [agent_template(), continuous_template()] {
        let skeleton = FiniteAutomaton::from_template(&untimed_projection(&t));
        let name = t.name.clone();
        let net = single(declarations(cfg), t, "p", vec![2])?;
        let sim = Simulator::new(&net, 1, true);
        let env: Vec<usize> = net.var("busy").into_iter().collect();
        for run in 0..runs {
            let path = sim.random_run(&mut rng, 40, cfg.t_lc, &env);
            steps += path.len();
            let word: Vec<String> = path.iter().flat_map(|(l, _)| sim.visible(l)).collect();
            if !skeleton.accepts(&word) {
                let k = skeleton.accepted_prefix(&word);
                return Ok(Report::new(format!("untimed skeleton inclusion ({runs} runs)"), false, steps, start.elapsed())
                    .with_note(format!("{name} run {run} leaves its skeleton at label {}", k + 1))
                    .with_trace(word.join("\n")));
            }
        }
    }
    Ok(Report::new(format!("untimed skeleton inclusion ({runs} runs)"), true, steps, start.elapsed()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acta::SpatialControllerModel;

    #[test]
    fn bound_one_is_trivial() {
        let r = trace_inclusion_evidence(&ScenarioConfig::default(), 1).unwrap();
        assert!(r.verdict.holds(), "{r:?}");
    }

    #[test]
    fn shorter_waiting_deadline_is_not_an_abstraction() {
        let cfg = ScenarioConfig::default();
        let weak = SpatialControllerModel { t_dl: cfg.t_dl - 2, t_lc: cfg.t_lc, join_dir: -1, leave_dir: 1 }.acta();
        let r = trace_inclusion_between(&cfg, &spatial_model(&cfg), &weak, 12).unwrap();
        assert!(!r.verdict.holds());
        assert!(r.trace.unwrap().contains("delay 1"));
    }
}
