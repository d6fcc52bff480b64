use std::time::Instant;

use crate::mc::{check_query, Options};
use crate::report::Report;
use crate::ta::model::Network;

use super::config::{ScenarioConfig, NOMINAL_CHANGE};
use super::models::{build_platoon, obligation_queries, spatial_queries, BuildError, CompositionKind};

/// Checks each query in order; a query that cannot be checked is
/// reported as failing with the error as note.
pub fn run_queries(net: &Network, queries: &[String], options: Options) -> Vec<Report> {
    queries
        .iter()
        .map(|q| match check_query(net, q, options) {
            Ok(o) => Report::from_outcome(q, &o, net),
            Err(e) => Report::new(q.clone(), false, 0, Default::default()).with_note(e.to_string()),
        })
        .collect()
}

/// The six proof obligations on the timed composition, followed by an
/// aggregate verdict.
pub fn run_proof_obligations(cfg: &ScenarioConfig, options: Options) -> Result<Vec<Report>, BuildError> {
    let start = Instant::now();
    let net = build_platoon(cfg, CompositionKind::TimedVerification)?;
    let mut reports = run_queries(&net, &obligation_queries(), options);
    let all = reports.iter().all(|r| r.verdict.holds());
    let states = reports.iter().map(|r| r.states).max().unwrap_or(0);
    reports.push(Report::new("all proof obligations", all, states, start.elapsed()));
    Ok(reports)
}

/// The potential-collision properties on the spatial composition.
pub fn run_spatial_properties(cfg: &ScenarioConfig, options: Options) -> Result<Vec<Report>, BuildError> {
    let net = build_platoon(cfg, CompositionKind::SpatialVerification)?;
    Ok(run_queries(&net, &spatial_queries(), options))
}

/// Reachability of a lane change (claim to completion, measured by the
/// controller clock of the first follower) ending below `20 - ch_l_b` or
/// above `20 + ch_l_b`.
pub fn duration_queries(cfg: &ScenarioConfig) -> Vec<String> {
    vec![format!("E<> s2.post and s2.x < {}", NOMINAL_CHANGE - cfg.ch_l_b), format!("E<> s2.post and s2.x > {}", NOMINAL_CHANGE + cfg.ch_l_b)]
}

/// Holds iff neither bracketing query is reachable on the timed composition.
pub fn check_lane_change_duration(cfg: &ScenarioConfig, options: Options) -> Result<Report, BuildError> {
    let start = Instant::now();
    let net = build_platoon(cfg, CompositionKind::TimedVerification)?;
    let reports = run_queries(&net, &duration_queries(cfg), options);
    let escaped: Vec<&Report> = reports.iter().filter(|r| r.verdict.holds() || r.note.is_some()).collect();
    let states = reports.iter().map(|r| r.states).max().unwrap_or(0);
    let lo = NOMINAL_CHANGE - cfg.ch_l_b;
    let hi = NOMINAL_CHANGE + cfg.ch_l_b;
    let r = Report::new(format!("lane change duration within [{lo}, {hi}]"), escaped.is_empty(), states, start.elapsed());
    Ok(match escaped.first() {
        None => r,
        Some(e) => {
            let r = r.with_note(format!("reachable: {}", e.query));
            match &e.trace {
                Some(t) => r.with_trace(t.clone()),
                None => r,
            }
        }
    })
}
