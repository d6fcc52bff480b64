//! Regenerates the shipped .pvm fixtures from the default scenario.
//!
//!     cargo run -p platoon-core --example write_fixtures -- fixtures

use std::path::PathBuf;

use platoon_core::platoon::*;
use platoon_core::pvm::serialize;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    let cfg = ScenarioConfig::default();
    let no_lc = ScenarioConfig { lc_guard: false, ..cfg.clone() };
    let outputs = [
        ("platoon.pvm", &cfg, CompositionKind::TimedVerification, obligation_queries()),
        ("platoon_spatial.pvm", &cfg, CompositionKind::SpatialVerification, spatial_queries()),
        ("platoon_spatial_noLC.pvm", &no_lc, CompositionKind::SpatialVerification, spatial_queries()),
    ];
    for (name, cfg, kind, queries) in outputs {
        let net = build_platoon(cfg, kind)?;
        std::fs::write(dir.join(name), serialize(&net, &queries))?;
    }
    Ok(())
}
