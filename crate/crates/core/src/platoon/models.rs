use crate::acta::{abstract_timed, road_abstraction, Acta, ActaAction, SpatialControllerModel};
use crate::ta::automaton::untimed_projection;
use crate::ta::expr::{CmpOp, Expr};
use crate::ta::model::{Assign, ChanDecl, ClockCmp, Declarations, Edge, InstanceDecl, Location, ModelError, Network, Sync, Template, VarDecl};

use super::config::{ConfigError, ScenarioConfig, GAP_MAX, GAP_MIN};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompositionKind {
    /// Timed agents, timed continuous controllers, timed spatial abstraction.
    TimedVerification,
    /// Continuous controllers reduced to their untimed skeletons.
    SpatialVerification,
    /// Every component reduced to its untimed skeleton.
    AgentVerification,
}

pub const CHANNELS: &[&str] = &[
    "up",
    "down",
    "to_leader",
    "from_leader",
    "change_lane_join",
    "change_lane_leave",
    "abort",
    "changed_lane",
    "phy_changing_lane",
    "phy_changed_lane",
    "speed_auto",
    "speed_manual",
    "steering_auto",
    "steering_manual",
    "joining_distance",
];

fn id() -> Option<Expr> {
    Some(Expr::name("id"))
}

fn send(ch: &str) -> Sync {
    Sync::send(ch, id())
}

fn recv(ch: &str) -> Sync {
    Sync::recv(ch, id())
}

fn set(v: &str, k: i64) -> Assign {
    Assign::new(v, Expr::Int(k))
}

fn cmp(clock: &str, op: CmpOp, bound: &str) -> ClockCmp {
    ClockCmp::new(clock, op, Expr::name(bound))
}

fn locs(names: &[&str], committed: &[&str]) -> Vec<Location> {
    names
        .iter()
        .map(|n| {
            let l = Location::new(n);
            if committed.contains(n) {
                l.committed()
            } else {
                l
            }
        })
        .collect()
}

/// Follower agent: joins through the leader, then leaves again.
pub fn agent_template() -> Template {
    let mut t = Template::new("Agent");
    t.params = vec!["id".into()];
    t.clocks = vec!["process_time".into()];
    t.vars = vec![VarDecl::boolean("failed_to_join", false), VarDecl::boolean("failed_to_leave", false)];
    t.locations = locs(
        &[
            "idle",
            "wait_agree",
            "lane_join",
            "wait_lane_join",
            "speed_join",
            "wait_distance",
            "steer_join",
            "confirm_join",
            "wait_join_ack",
            "join_completed",
            "in_platoon",
            "wait_leave_agree",
            "steer_leave",
            "speed_leave",
            "lane_leave",
            "wait_lane_leave",
            "reengage",
            "wait_reengage",
            "steer_reengage",
            "confirm_leave",
            "wait_leave_ack",
            "leave_completed",
        ],
        &[
            "lane_join",
            "speed_join",
            "steer_join",
            "confirm_join",
            "join_completed",
            "steer_leave",
            "speed_leave",
            "lane_leave",
            "reengage",
            "steer_reengage",
            "confirm_leave",
            "leave_completed",
        ],
    );
    t.initial = "idle".into();
    let free = || Expr::cmp(CmpOp::Eq, Expr::name("busy"), Expr::Int(0));
    t.edges = vec![
        Edge::new("idle", "wait_agree")
            .data(free())
            .sync(send("up"))
            .update(set("busy", 1))
            .update(set("failed_to_join", 0))
            .update(set("process_time", 0)),
        Edge::new("wait_agree", "lane_join").sync(recv("down")),
        Edge::new("lane_join", "wait_lane_join").sync(send("change_lane_join")),
        Edge::new("wait_lane_join", "speed_join").sync(recv("changed_lane")),
        Edge::new("wait_lane_join", "idle").sync(recv("abort")).update(set("failed_to_join", 1)).update(set("busy", 0)),
        Edge::new("speed_join", "wait_distance").sync(send("speed_auto")),
        Edge::new("wait_distance", "steer_join").sync(recv("joining_distance")),
        Edge::new("steer_join", "confirm_join").sync(send("steering_auto")),
        Edge::new("confirm_join", "wait_join_ack").sync(send("up")),
        Edge::new("wait_join_ack", "join_completed").sync(recv("down")),
        Edge::new("join_completed", "in_platoon").update(set("busy", 0)),
        Edge::new("in_platoon", "wait_leave_agree")
            .data(free())
            .sync(send("up"))
            .update(set("busy", 1))
            .update(set("failed_to_leave", 0))
            .update(set("process_time", 0)),
        Edge::new("wait_leave_agree", "steer_leave").sync(recv("down")),
        Edge::new("steer_leave", "speed_leave").sync(send("steering_manual")),
        Edge::new("speed_leave", "lane_leave").sync(send("speed_manual")),
        Edge::new("lane_leave", "wait_lane_leave").sync(send("change_lane_leave")),
        Edge::new("wait_lane_leave", "confirm_leave").sync(recv("changed_lane")),
        Edge::new("wait_lane_leave", "reengage").sync(recv("abort")).update(set("failed_to_leave", 1)),
        Edge::new("reengage", "wait_reengage").sync(send("speed_auto")),
        Edge::new("wait_reengage", "steer_reengage").sync(recv("joining_distance")),
        Edge::new("steer_reengage", "in_platoon").sync(send("steering_auto")).update(set("busy", 0)),
        Edge::new("confirm_leave", "wait_leave_ack").sync(send("up")),
        Edge::new("wait_leave_ack", "leave_completed").sync(recv("down")),
        Edge::new("leave_completed", "idle").update(set("busy", 0)),
    ];
    t
}

/// Speed and steering controllers plus the physical lane change.
pub fn continuous_template() -> Template {
    let mut t = Template::new("Continuous");
    t.params = vec!["id".into()];
    t.clocks = vec!["z".into()];
    t.locations = vec![
        Location::new("manual"),
        Location::new("closing").with_invariant(cmp("z", CmpOp::Le, "gap_max")),
        Location::new("speed_auto"),
        Location::new("auto"),
        Location::new("steer_manual"),
        Location::new("changing").with_invariant(cmp("z", CmpOp::Le, "lc_max")),
    ];
    t.initial = "manual".into();
    t.edges = vec![
        Edge::new("manual", "closing").sync(recv("speed_auto")).update(set("z", 0)),
        Edge::new("closing", "speed_auto").clock(cmp("z", CmpOp::Ge, "gap_min")).sync(send("joining_distance")),
        Edge::new("speed_auto", "auto").sync(recv("steering_auto")),
        Edge::new("auto", "steer_manual").sync(recv("steering_manual")),
        Edge::new("steer_manual", "manual").sync(recv("speed_manual")),
        Edge::new("manual", "changing").sync(recv("phy_changing_lane")).update(set("z", 0)),
        Edge::new("changing", "manual").clock(cmp("z", CmpOp::Ge, "lc_min")).sync(send("phy_changed_lane")),
    ];
    t
}

/// Relays requests to the leader and answers back, each way taking
/// exactly the message latency.
pub fn comms_template(ids: &[i64], max_id: i64) -> Template {
    let mut t = Template::new("Comms");
    t.clocks = vec!["m".into()];
    t.vars = vec![VarDecl::int("cur", 0, max_id, 0)];
    t.locations = vec![
        Location::new("idle"),
        Location::new("fwd").with_invariant(cmp("m", CmpOp::Le, "msg_latency")),
        Location::new("await"),
        Location::new("back").with_invariant(cmp("m", CmpOp::Le, "msg_latency")),
    ];
    t.initial = "idle".into();
    let is = |v: &str, i: i64| Expr::cmp(CmpOp::Eq, Expr::name(v), Expr::Int(i));
    for i in ids {
        let k = || Some(Expr::Int(*i));
        t.edges.extend([
            Edge::new("idle", "fwd").sync(Sync::recv("up", k())).update(set("cur", *i)).update(set("m", 0)),
            Edge::new("fwd", "await").clock(cmp("m", CmpOp::Ge, "msg_latency")).data(is("cur", *i)).sync(Sync::send("to_leader", k())),
            Edge::new("await", "back").data(is("cur", *i)).sync(Sync::recv("from_leader", k())).update(set("m", 0)),
            Edge::new("back", "idle").clock(cmp("m", CmpOp::Ge, "msg_latency")).data(is("cur", *i)).sync(Sync::send("down", k())),
        ]);
    }
    t
}

/// Leader: grants every request immediately.
pub fn leader_template(ids: &[i64], max_id: i64) -> Template {
    let mut t = Template::new("Leader");
    t.vars = vec![VarDecl::int("req", 0, max_id, 0)];
    t.locations = locs(&["idle", "answering"], &["answering"]);
    t.initial = "idle".into();
    for i in ids {
        t.edges.push(Edge::new("idle", "answering").sync(Sync::recv("to_leader", Some(Expr::Int(*i)))).update(set("req", *i)));
    }
    for i in ids {
        t.edges.push(
            Edge::new("answering", "idle")
                .data(Expr::cmp(CmpOp::Eq, Expr::name("req"), Expr::Int(*i)))
                .sync(Sync::send("from_leader", Some(Expr::Int(*i)))),
        );
    }
    t
}

/// The lane-change controller of a scenario; without the LC guard the
/// reserve edge loses its potential-collision check.
pub fn spatial_model(cfg: &ScenarioConfig) -> Acta {
    let mut a = SpatialControllerModel { t_dl: cfg.t_dl, t_lc: cfg.t_lc, join_dir: -1, leave_dir: 1 }.acta();
    if !cfg.lc_guard {
        for e in a.edges.iter_mut().filter(|e| e.action == Some(ActaAction::Reserve)) {
            e.spatial_guard = None;
        }
    }
    a
}

pub fn declarations(cfg: &ScenarioConfig) -> Declarations {
    let size = cfg.followers + 2;
    Declarations {
        consts: vec![
            ("t_dl".into(), cfg.t_dl),
            ("t_lc".into(), cfg.t_lc),
            ("ch_l_b".into(), cfg.ch_l_b),
            ("msg_latency".into(), cfg.msg_latency),
            ("lc_min".into(), cfg.lc_min()),
            ("lc_max".into(), cfg.lc_max()),
            ("gap_min".into(), GAP_MIN),
            ("gap_max".into(), GAP_MAX),
        ],
        clocks: Vec::new(),
        chans: CHANNELS.iter().map(|c| ChanDecl { name: (*c).into(), size: Some(size) }).collect(),
        vars: vec![VarDecl::int("busy", 0, 1, 0), VarDecl::boolean("pc", false), VarDecl::bool_array("c", size)],
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Abstraction(String),
}

/// One leader, and per follower an agent, a continuous controller and a
/// spatial controller; one communication relay and the road.
pub fn build_platoon(cfg: &ScenarioConfig, kind: CompositionKind) -> Result<Network, BuildError> {
    build_with(cfg, kind, &spatial_model(cfg))
}

pub fn build_with(cfg: &ScenarioConfig, kind: CompositionKind, spatial: &Acta) -> Result<Network, BuildError> {
    cfg.validate()?;
    let ids = cfg.follower_ids();
    let max_id = cfg.followers as i64 + 1;
    let mut templates = vec![
        leader_template(&ids, max_id),
        agent_template(),
        continuous_template(),
        abstract_timed(spatial, None).map_err(BuildError::Abstraction)?,
        comms_template(&ids, max_id),
        road_abstraction(&ids).map_err(BuildError::Abstraction)?,
    ];
    let untimed: &[&str] = match kind {
        CompositionKind::TimedVerification => &[],
        CompositionKind::SpatialVerification => &["Continuous"],
        CompositionKind::AgentVerification => &["Leader", "Agent", "Continuous", "Spatial", "Comms", "Road"],
    };
    for t in templates.iter_mut().filter(|t| untimed.contains(&t.name.as_str())) {
        *t = untimed_projection(t);
    }
    let inst = |name: String, template: &str, args: Vec<i64>| InstanceDecl { name, template: template.into(), args };
    let mut system = vec![inst("leader".into(), "Leader", vec![])];
    for i in &ids {
        system.push(inst(format!("a{i}"), "Agent", vec![*i]));
        system.push(inst(format!("v{i}"), "Continuous", vec![*i]));
        system.push(inst(format!("s{i}"), "Spatial", vec![*i]));
    }
    system.push(inst("comms".into(), "Comms", vec![]));
    system.push(inst("road".into(), "Road", vec![]));
    Ok(Network::new(declarations(cfg), templates, system)?)
}

/// The proof obligations, in order.
pub fn obligation_queries() -> Vec<String> {
    vec![
        "A[] not deadlock".into(),
        "E<> a2.join_completed".into(),
        "E<> a2.leave_completed".into(),
        "A[] a2.join_completed imply (a2.process_time >= 50 and a2.process_time < 90)".into(),
        "A[] a2.leave_completed imply (a2.process_time >= 30 and a2.process_time < 50)".into(),
        "locality {phy_changing_lane, phy_changed_lane} in {Spatial, Continuous}".into(),
    ]
}

pub fn spatial_queries() -> Vec<String> {
    vec!["(s2.wait and pc and s2.x == t_dl) --> (a2.failed_to_join or a2.failed_to_leave)".into(), "A[] not (s2.change and pc)".into()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_instance_count() {
        let net = build_platoon(&ScenarioConfig::default(), CompositionKind::TimedVerification).unwrap();
        assert_eq!(net.instances.len(), 1 + 4 * 3 + 1 + 1);
        let count = |t: &str| net.instances.iter().filter(|i| i.template == t).count();
        assert_eq!((count("Leader"), count("Agent"), count("Continuous"), count("Spatial")), (1, 4, 4, 4));
    }

    #[test]
    fn untimed_kinds_drop_clocks() {
        let cfg = ScenarioConfig::default().with_followers(1);
        let net = build_platoon(&cfg, CompositionKind::SpatialVerification).unwrap();
        assert!(net.clock("v2.z").is_none() && net.clock("s2.x").is_some());
        let net = build_platoon(&cfg, CompositionKind::AgentVerification).unwrap();
        assert_eq!(net.num_clocks(), 0);
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = ScenarioConfig { t_dl: 40, ..Default::default() };
        assert!(matches!(build_platoon(&cfg, CompositionKind::TimedVerification), Err(BuildError::Config(_))));
    }
}
