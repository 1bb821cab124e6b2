use std::path::PathBuf;

use branchsim_core::scenarios::{CellModel, EngineMode, InitialLayout, RateScaling, ResidualPolicy};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::units::{parse_length, parse_mass, parse_mass_sweep, MassSweep};

#[derive(Debug, Parser)]
#[command(name = "branchsim", version, about = "Deterministic simulator of anomalous branching and outcome counting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output format of the record.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Emit a gnuplot-readable whitespace table instead.
    #[arg(long, global = true)]
    pub plot_data: bool,

    /// Write to this file instead of standard output.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    /// Record wall-clock time in the output.
    #[arg(long, global = true)]
    pub timing: bool,

    /// Print the fully resolved configuration and exit.
    #[arg(long, global = true)]
    pub print_config: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario from a JSON configuration file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: ScenarioOverrides,
    },
    /// Two equal cells branching in step.
    Eq5 {
        /// Number of doubling periods to run, sampled once per period.
        #[arg(long)]
        doublings: Option<u32>,
        #[command(flatten)]
        overrides: ScenarioOverrides,
    },
    /// Cells of measure 2/3 and 1/3, one period apart.
    Eq6 {
        #[arg(long)]
        doublings: Option<u32>,
        #[command(flatten)]
        overrides: ScenarioOverrides,
    },
    /// Two spread-out packets of different widths.
    Gaussian {
        #[arg(long, value_enum, default_value_t = CellsArg::Uniform)]
        cells: CellsArg,
        /// Periods to run past the first branching of the wider packet.
        #[arg(long, default_value_t = 20.0)]
        periods: f64,
        #[command(flatten)]
        overrides: ScenarioOverrides,
    },
    /// Long run at the golden-ratio split.
    Golden {
        #[arg(long, default_value_t = 8000.0)]
        horizon: f64,
        #[arg(long, default_value_t = 64)]
        samples_per_decade: u32,
        #[arg(long)]
        components: Option<u32>,
        #[arg(long, value_enum)]
        layout: Option<LayoutArg>,
    },
    /// Merged branching events of many independent particles.
    Multiparticle {
        #[arg(long, default_value_t = 100)]
        particles: u32,
        #[arg(long, default_value_t = 0.5)]
        z: f64,
        #[arg(long, default_value_t = 1.0)]
        tau1: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Approximate number of events to generate.
        #[arg(long, default_value_t = 10_000)]
        events: u64,
    },
    /// Spreading delay, mass thresholds and branch intervals.
    Regime(RegimeArgs),
    /// Recompute the summary of a saved JSON record.
    Analyze {
        record: PathBuf,
        /// Also rerun the recorded invocation and compare the rows.
        #[arg(long)]
        rerun: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Aggregated,
    Hybrid,
}

impl From<ModeArg> for EngineMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => EngineMode::Exact,
            ModeArg::Aggregated => EngineMode::Aggregated,
            ModeArg::Hybrid => EngineMode::Hybrid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    CountAsSplit,
    CountAsOne,
    Exclude,
}

impl From<PolicyArg> for ResidualPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::CountAsSplit => ResidualPolicy::CountAsSplit,
            PolicyArg::CountAsOne => ResidualPolicy::CountAsOne,
            PolicyArg::Exclude => ResidualPolicy::Exclude,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CellsArg {
    Uniform,
    Shells,
}

impl From<CellsArg> for CellModel {
    fn from(c: CellsArg) -> Self {
        match c {
            CellsArg::Uniform => CellModel::Uniform,
            CellsArg::Shells => CellModel::GaussianShells,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    Single,
    LogUniform,
    StationaryQuantiles,
}

impl From<LayoutArg> for InitialLayout {
    fn from(l: LayoutArg) -> Self {
        match l {
            LayoutArg::Single => InitialLayout::Single,
            LayoutArg::LogUniform => InitialLayout::LogUniform,
            LayoutArg::StationaryQuantiles => InitialLayout::StationaryQuantiles,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScalingArg {
    MassIndependent,
    ProportionalToMass,
}

impl From<ScalingArg> for RateScaling {
    fn from(s: ScalingArg) -> Self {
        match s {
            ScalingArg::MassIndependent => RateScaling::MassIndependent,
            ScalingArg::ProportionalToMass => RateScaling::ProportionalToMass,
        }
    }
}

/// Flags that replace fields of a scenario configuration.
#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioOverrides {
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    #[arg(long)]
    pub z: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub population_cap: Option<usize>,
    #[arg(long)]
    pub handoff_threshold: Option<f64>,
    #[arg(long)]
    pub exact_bits: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct RegimeArgs {
    /// Particle mass with unit suffix, e.g. `1.67e-24g`.
    #[arg(long, value_parser = parse_mass)]
    pub mass: Option<f64>,
    /// Localization width with unit suffix, e.g. `1e-5cm`.
    #[arg(long, value_parser = parse_length)]
    pub width: Option<f64>,
    /// Branching rate at the reference mass, 1/s.
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long, value_enum, default_value_t = ScalingArg::MassIndependent)]
    pub scaling: ScalingArg,
    /// Mass at which the rate is `--rate`, with unit suffix.
    #[arg(long, value_parser = parse_mass)]
    pub reference_mass: Option<f64>,
    /// Split parameter used for the branch interval.
    #[arg(long, default_value_t = 0.5)]
    pub z: f64,
    /// Search horizon for the next branching, in units of the branching time.
    #[arg(long, default_value_t = 1000.0)]
    pub horizon_factor: f64,
    /// Log-spaced masses `FROM:TO:POINTS`, each with a unit suffix.
    #[arg(long, value_parser = parse_mass_sweep, conflicts_with = "mass")]
    pub sweep_mass: Option<MassSweep>,
    /// Worker threads for sweeps (default: `BRANCHSIM_THREADS`, then all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}
