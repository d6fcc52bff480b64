//! Platoon models, composition builders, proof obligations, the spatial
//! safety oracle and abstraction evidence.

mod config;
mod inclusion;
mod models;
mod obligations;
mod oracle;

pub use config::{parse_scenario, ConfigError, ScenarioConfig};
pub use inclusion::{skeleton_inclusion_evidence, trace_inclusion_between, trace_inclusion_evidence};
pub use models::{
    agent_template, build_platoon, build_with, comms_template, continuous_template, leader_template, obligation_queries, spatial_model,
    spatial_queries, BuildError, CompositionKind,
};
pub use obligations::{check_lane_change_duration, duration_queries, run_proof_obligations, run_queries, run_spatial_properties};
pub use oracle::safety_oracle;
