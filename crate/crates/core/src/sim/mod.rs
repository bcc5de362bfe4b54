//! Monte-Carlo simulation of a distributed sensor network.

mod config;
mod montecarlo;
mod network;
mod ospa;
mod truth;

pub use config::{
    BirthMode, FilterConfig, FusionConfig, Layout, MotionConfig, NetworkConfig, ObjectSpec,
    OspaConfig, Scale, ScenarioConfig, SensorConfig, UpdateMode,
};
pub use montecarlo::{
    fusion_snapshots, run_montecarlo, simulate_run, FusionSnapshot, MonteCarloSummary, RunOptions,
    RunResult, StepRecord, StepSummary,
};
pub use network::{NetworkTopology, TopologyKind};
pub use ospa::{hungarian, ospa};
pub use truth::{generate_measurements, generate_scan, generate_truth, GroundTruth};
