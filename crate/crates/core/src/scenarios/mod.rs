//! Scenario descriptions, constructors for the standard examples, and
//! closed-form physical estimates.

mod builders;
mod config;
mod golden;
mod multiparticle;
mod physical;

pub use builders::{
    build_eq5, build_eq6, build_gaussian_pair, build_golden, doubling_period, CellModel, GaussianPair,
    InitialLayout,
};
pub use config::{
    CellInfo, CellSpec, ComponentSpec, EngineMode, GRule, GSpec, ResidualPolicy, ResolvedScenario, ScenarioConfig,
    DEFAULT_HANDOFF_THRESHOLD, DEFAULT_POPULATION_CAP, MIXED_FAMILY,
};
pub use golden::{run_golden, GoldenReport, GoldenRun};
pub use multiparticle::{multiparticle_stream, MultiparticleStream};
pub use physical::{
    branch_interval, condition8_gaussian, energy_drift_rate, mass_threshold, spreading_delay, spreading_log_measure,
    PhysicalParams, RateScaling, SpreadingDelay, GRW_RATE, GRW_WIDTH, HBAR, PROTON_MASS,
};
