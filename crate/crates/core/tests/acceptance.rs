//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit status
//! if any criterion fails.

#[path = "dbm_oracle.rs"]
#[allow(dead_code)]
mod dbm_oracle;
#[path = "region_oracle.rs"]
#[allow(dead_code)]
mod region_oracle;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use platoon_core::bdi::{check_agent_property, explore, parse_agent_query, parse_program, Atom, Deed, LitKind, Program};
use platoon_core::mc::{check_query, parse_trace, query_abstraction, Options};
use platoon_core::platoon::{
    build_platoon, obligation_queries, run_proof_obligations, run_spatial_properties, safety_oracle, skeleton_inclusion_evidence, spatial_queries,
    trace_inclusion_evidence, CompositionKind, ScenarioConfig,
};
use platoon_core::pvm::{parse_model, serialize};
use platoon_core::ta::model::Network;

type Outcome = Result<String, String>;
type Suite = fn(u32) -> Result<(), String>;

fn fixture(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let t = start.elapsed();
    if t > limit {
        return Err(format!("{what} took {:.1}s, limit {}s", t.as_secs_f64(), limit.as_secs()));
    }
    Ok(())
}

/// The query must fail with a counterexample that replays, also after a
/// round trip through its text form.
fn failing_with_replay(net: &Network, query: &str) -> Outcome {
    let o = check_query(net, query, Options::default()).map_err(|e| e.to_string())?;
    if o.holds {
        return Err(format!("`{query}` unexpectedly holds"));
    }
    let trace = o.trace.ok_or_else(|| format!("`{query}` fails without a trace"))?;
    let abs = query_abstraction(net, query).map_err(|e| e.to_string())?;
    trace.replay(net, Some(&abs)).map_err(|e| format!("trace of `{query}` does not replay: {e}"))?;
    let again = parse_trace(&trace.render(net), net).map_err(|e| format!("trace text of `{query}` does not parse: {e}"))?;
    again.replay(net, Some(&abs)).map_err(|e| format!("parsed trace of `{query}` does not replay: {e}"))?;
    Ok(format!("`{query}` fails, {}-step trace replays", trace.len()))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let reports = run_proof_obligations(&ScenarioConfig::default(), Options { workers: 1, ..Options::default() }).map_err(|e| e.to_string())?;
    if let Some(r) = reports.iter().find(|r| !r.verdict.holds()) {
        return Err(format!("`{}` fails", r.query));
    }
    within(start, Duration::from_secs(300), "obligations")?;
    let states = reports.iter().map(|r| r.states).max().unwrap_or(0);
    Ok(format!("{} obligations hold, at most {states} states, {:.1}s", reports.len() - 1, start.elapsed().as_secs_f64()))
}

fn criterion_2() -> Outcome {
    let reports = run_spatial_properties(&ScenarioConfig::default(), Options::default()).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for r in &reports {
        if !r.verdict.holds() {
            return Err(format!("`{}` fails", r.query));
        }
        if r.wall_seconds > 300.0 {
            return Err(format!("`{}` took {:.1}s", r.query, r.wall_seconds));
        }
        out.push(format!("{:.2}s", r.wall_seconds));
    }
    Ok(format!("{} properties hold ({})", reports.len(), out.join(", ")))
}

fn criterion_3() -> Outcome {
    let cfg = ScenarioConfig::default();
    let no_lc = build_platoon(&ScenarioConfig { lc_guard: false, ..cfg.clone() }, CompositionKind::SpatialVerification).map_err(|e| e.to_string())?;
    let a = failing_with_replay(&no_lc, &spatial_queries()[1])?;
    let wide = ScenarioConfig { ch_l_b: cfg.ch_l_b + 40, ..cfg };
    let net = build_platoon(&wide, CompositionKind::TimedVerification).map_err(|e| e.to_string())?;
    let b = failing_with_replay(&net, &obligation_queries()[3])?;
    Ok(format!("without guard: {a}; ch_l_b+40: {b}"))
}

fn criterion_4() -> Outcome {
    let query = &obligation_queries()[5];
    let net = build_platoon(&ScenarioConfig::default().with_followers(1), CompositionKind::TimedVerification).map_err(|e| e.to_string())?;
    let o = check_query(&net, query, Options::default()).map_err(|e| e.to_string())?;
    if !o.holds {
        return Err(format!("fails on the shipped model: {:?}", o.note));
    }
    let text = serialize(&net, &[]);
    let at = text.find("template Agent(id)").ok_or("no Agent template")?;
    let end = at + text[at..].find("\nend").ok_or("unterminated Agent template")?;
    let mutated = format!("{}\n  edge idle -> idle sync phy_changing_lane[id]!{}", &text[..end], &text[end..]);
    let mutant = parse_model(&mutated).map_err(|e| e.to_string())?;
    let o = check_query(&mutant, query, Options::default()).map_err(|e| e.to_string())?;
    if o.holds {
        return Err("holds on the mutated model".into());
    }
    Ok(format!("holds; mutant rejected ({})", o.note.unwrap_or_default().lines().next().unwrap_or("")))
}

fn programs() -> Result<Vec<Program>, String> {
    let f = parse_program(&fixture("follower.bdi"), "follower").map_err(|e| e.to_string())?;
    let l = parse_program(&fixture("leader.bdi"), "leader").map_err(|e| e.to_string())?;
    Ok(vec![f, l])
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let ps = programs()?;
    let q = parse_agent_query("eq1", &ps).map_err(|e| e.to_string())?;
    for depth in [30, 50, 100] {
        let r = check_agent_property(&explore(&ps, depth), &q).map_err(|e| e.to_string())?;
        if !r.verdict.holds() {
            return Err(format!("eq1 fails at depth {depth}"));
        }
    }
    let mut mutant = ps.clone();
    let plan = mutant[0]
        .plans
        .iter_mut()
        .find(|p| p.body.first() == Some(&Deed::AddGoal(Atom::new("speed_contr", &["1"]))))
        .ok_or("no speed-control plan in the follower")?;
    plan.guard.retain(|l| !(l.kind == LitKind::B && l.atom.pred == "join_agreement"));
    let mut witness = 0;
    for depth in [30, 50, 100] {
        let r = check_agent_property(&explore(&mutant, depth), &q).map_err(|e| e.to_string())?;
        if r.verdict.holds() {
            return Err(format!("guard-removal mutant holds at depth {depth}"));
        }
        witness = r.trace.ok_or("mutant fails without a witness")?.lines().count();
    }
    within(start, Duration::from_secs(60), "agent checks")?;
    Ok(format!("holds at depths 30/50/100; mutant fails with a {witness}-step witness, {:.1}s", start.elapsed().as_secs_f64()))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let cfg = ScenarioConfig::default();
    let r = safety_oracle(&cfg).map_err(|e| e.to_string())?;
    if !r.verdict.holds() {
        return Err(format!("cc reachable: {}", r.trace.unwrap_or_default().lines().last().unwrap_or("")));
    }
    let no_lc = safety_oracle(&ScenarioConfig { lc_guard: false, ..cfg }).map_err(|e| e.to_string())?;
    let last = no_lc.trace.clone().unwrap_or_default();
    if no_lc.verdict.holds() || !last.contains("collision") {
        return Err("cc not reachable without the guard".into());
    }
    within(start, Duration::from_secs(600), "oracle")?;
    Ok(format!(
        "no cc in {} states ({}); without guard {}, {:.1}s",
        r.states,
        r.note.unwrap_or_default(),
        last.lines().last().unwrap_or(""),
        start.elapsed().as_secs_f64()
    ))
}

fn criterion_7() -> Outcome {
    let suites: [(&str, u32, Suite); 7] = [
        ("DBM enumeration", 1000, dbm_oracle::dbm_suite),
        ("region graph", 150, region_oracle::region_suite),
        ("extrapolation", 100, region_oracle::extrapolation_suite),
        ("pvm round trip", 100, region_oracle::round_trip_suite),
        ("somewhere", 600, mlsl_oracle::somewhere_suite),
        ("subview completeness", 500, mlsl_oracle::completeness_suite),
        ("monotonicity", 500, mlsl_oracle::monotonicity_suite),
    ];
    let mut done = Vec::new();
    for (name, cases, suite) in suites {
        suite(cases).map_err(|e| format!("{name}: {e}"))?;
        done.push(format!("{name} {cases}"));
    }
    Ok(format!("0 disagreements ({})", done.join(", ")))
}

fn criterion_8() -> Outcome {
    let cfg = ScenarioConfig::default();
    let t = trace_inclusion_evidence(&cfg, 12).map_err(|e| e.to_string())?;
    if !t.verdict.holds() {
        return Err(format!("{}: {}", t.query, t.note.unwrap_or_default()));
    }
    let s = skeleton_inclusion_evidence(&cfg, 10_000, 7).map_err(|e| e.to_string())?;
    if !s.verdict.holds() {
        return Err(format!("{}: {}", s.query, s.note.unwrap_or_default()));
    }
    Ok(format!("bound 12 inclusion holds ({} nodes); 10000 runs per skeleton accepted ({} steps)", t.states, s.states))
}

fn main() {
    let criteria: [fn() -> Outcome; 8] = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8];
    let mut failed = 0;
    for (k, c) in criteria.iter().enumerate() {
        match c() {
            Ok(detail) => println!("criterion {}: PASS  {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {why}", k + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
