use std::path::PathBuf;

use platoon_core::platoon::{build_platoon, obligation_queries, parse_scenario, spatial_queries, CompositionKind, ScenarioConfig};
use platoon_core::pvm::{parse_document, parse_model, serialize};

fn fixture(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn shipped_models_match_the_builders() {
    let cfg = ScenarioConfig::default();
    let timed = build_platoon(&cfg, CompositionKind::TimedVerification).unwrap();
    assert_eq!(fixture("platoon.pvm"), serialize(&timed, &obligation_queries()));
    let spatial = build_platoon(&cfg, CompositionKind::SpatialVerification).unwrap();
    assert_eq!(fixture("platoon_spatial.pvm"), serialize(&spatial, &spatial_queries()));
    let no_lc = ScenarioConfig { lc_guard: false, ..cfg };
    let spatial = build_platoon(&no_lc, CompositionKind::SpatialVerification).unwrap();
    assert_eq!(fixture("platoon_spatial_noLC.pvm"), serialize(&spatial, &spatial_queries()));
}

#[test]
fn shipped_models_round_trip() {
    for name in ["platoon.pvm", "platoon_spatial.pvm", "platoon_spatial_noLC.pvm"] {
        let text = fixture(name);
        let doc = parse_document(&text).unwrap();
        let again = serialize(&doc.network, &doc.queries);
        assert_eq!(again, text, "{name}");
        let back = parse_document(&again).unwrap();
        assert_eq!(back.network.templates, doc.network.templates);
        assert_eq!(back.network.instances, doc.network.instances);
        assert_eq!(back.queries, doc.queries);
    }
}

#[test]
fn broken_models_report_lines() {
    let e = parse_model(&fixture("broken.pvm")).unwrap_err();
    assert_eq!(e.line(), 8);
    let e = parse_model(&fixture("undeclared.pvm")).unwrap_err();
    assert_eq!(e.line(), 9);
    assert!(e.to_string().contains("stop"), "{e}");
}

#[test]
fn scenarios_parse() {
    assert_eq!(parse_scenario(&fixture("platoon.scn")).unwrap(), ScenarioConfig::default());
    let no_lc = parse_scenario(&fixture("platoon_noLC.scn")).unwrap();
    assert_eq!(no_lc, ScenarioConfig { lc_guard: false, ..ScenarioConfig::default() });
}
