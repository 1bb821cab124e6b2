use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{LogMeasure, SplitParameter, DEFAULT_EXACT_BITS, DEFAULT_RATIO_TOLERANCE};

/// Which engine executes a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineMode {
    /// Labeled sub-branches, one per world.
    Exact,
    /// Classes of sub-branches keyed by split exponents.
    Aggregated,
    /// Exact until the residual superposition is negligible, then aggregated.
    Hybrid,
}

/// How the unlabeled residual superposition is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualPolicy {
    /// One sub-branch for every outcome family it spans.
    #[default]
    CountAsSplit,
    /// A single sub-branch of its own (reported under [`MIXED_FAMILY`]).
    CountAsOne,
    /// Not counted.
    Exclude,
}

/// Family name under which `CountAsOne` reports the residual.
pub const MIXED_FAMILY: &str = "mixed";

/// The growth prefactor `g` of the pointer operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GSpec {
    Value(f64),
    Rule(GRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GRule {
    /// Choose `g` so that the largest initial `M` is exactly one at `t = 0`.
    NormalizeFirstEvent,
}

/// One pointer cell of the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub cell_id: u32,
    /// Measure of the initial state along this cell.
    pub m0: f64,
    /// Number of identical, independent copies of this cell (uniform-cell
    /// approximation). Only the aggregated engine accepts values above one.
    #[serde(default = "one")]
    pub multiplicity: u64,
}

fn one() -> u64 {
    1
}

/// The cells of one initial component, all belonging to one outcome family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub family: String,
    pub cells: Vec<CellSpec>,
}

/// Declarative description of a run.
///
/// All components together form the initial state `|phi>|L0>`; in the
/// exact engine they are one sub-branch carrying the initial label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub components: Vec<ComponentSpec>,
    pub z: f64,
    #[serde(default = "default_ratio_tolerance")]
    pub ratio_tolerance: f64,
    pub tau: f64,
    pub g: GSpec,
    pub mode: EngineMode,
    #[serde(default)]
    pub residual_policy: ResidualPolicy,
    pub horizon: f64,
    #[serde(default)]
    pub sample_times: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_population_cap")]
    pub population_cap: usize,
    #[serde(default = "default_handoff_threshold")]
    pub handoff_threshold: f64,
    #[serde(default = "default_exact_bits")]
    pub exact_bits: u64,
}

fn default_ratio_tolerance() -> f64 {
    DEFAULT_RATIO_TOLERANCE
}

pub const DEFAULT_POPULATION_CAP: usize = 1_000_000;

/// Residual share of the count at which hybrid mode hands off, `2^-20`.
pub const DEFAULT_HANDOFF_THRESHOLD: f64 = 1.0 / 1_048_576.0;

fn default_population_cap() -> usize {
    DEFAULT_POPULATION_CAP
}

fn default_handoff_threshold() -> f64 {
    DEFAULT_HANDOFF_THRESHOLD
}

fn default_exact_bits() -> u64 {
    DEFAULT_EXACT_BITS
}

/// Tolerance on the total initial measure.
const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// A cell after validation, with its component and family resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct CellInfo {
    pub cell_id: u32,
    pub family: u32,
    pub component: u32,
    pub m0: LogMeasure,
    pub multiplicity: u64,
}

/// A validated scenario with derived quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedScenario {
    pub sp: SplitParameter,
    pub tau: f64,
    pub ln_g: f64,
    pub families: Vec<String>,
    pub cells: Vec<CellInfo>,
}

impl ResolvedScenario {
    pub fn g(&self) -> f64 {
        self.ln_g.exp()
    }

    pub fn family_of_cell(&self, cell_index: usize) -> u32 {
        self.cells[cell_index].family
    }
}

impl ScenarioConfig {
    /// Checks the invariants and derives `Z`, `g` and the cell table.
    pub fn resolve(&self) -> Result<ResolvedScenario> {
        let sp = SplitParameter::new(self.z, self.ratio_tolerance)
            .map_err(|e| Error::Config(e.to_string()))?;
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau = {} must be positive", self.tau)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon = {} must be positive", self.horizon)));
        }
        if self.sample_times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config("sample times must be finite".into()));
        }
        if !(self.handoff_threshold > 0.0 && self.handoff_threshold < 1.0) {
            return Err(Error::Config("handoff threshold must lie in (0, 1)".into()));
        }
        if self.components.is_empty() {
            return Err(Error::Config("scenario has no components".into()));
        }

        let mut families: Vec<String> = Vec::new();
        let mut cells = Vec::new();
        let mut ids = BTreeSet::new();
        let mut total = 0.0;
        for (ci, comp) in self.components.iter().enumerate() {
            if comp.cells.is_empty() {
                return Err(Error::Config(format!("component {ci} has no cells")));
            }
            let family = match families.iter().position(|f| *f == comp.family) {
                Some(i) => i,
                None => {
                    families.push(comp.family.clone());
                    families.len() - 1
                }
            } as u32;
            for cell in &comp.cells {
                if !ids.insert(cell.cell_id) {
                    return Err(Error::Config(format!("duplicate cell id {}", cell.cell_id)));
                }
                if cell.multiplicity == 0 {
                    return Err(Error::Config(format!("cell {} has zero multiplicity", cell.cell_id)));
                }
                let m0 = LogMeasure::from_measure(cell.m0).map_err(|e| Error::Config(e.to_string()))?;
                total += cell.m0 * cell.multiplicity as f64;
                cells.push(CellInfo {
                    cell_id: cell.cell_id,
                    family,
                    component: ci as u32,
                    m0,
                    multiplicity: cell.multiplicity,
                });
            }
        }
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::Config(format!("initial measures sum to {total:.17}, not 1")));
        }

        let ln_g = match self.g {
            GSpec::Value(g) if g > 0.0 && g.is_finite() => g.ln(),
            GSpec::Value(g) => return Err(Error::Config(format!("g = {g} must be positive"))),
            GSpec::Rule(GRule::NormalizeFirstEvent) => {
                -cells.iter().map(|c| c.m0.0).fold(f64::NEG_INFINITY, f64::max)
            }
        };
        if let Some(c) = cells.iter().find(|c| c.m0.0 + ln_g > 1e-12) {
            return Err(Error::Config(format!(
                "cell {} starts above threshold (ln M = {:e})",
                c.cell_id,
                c.m0.0 + ln_g
            )));
        }
        Ok(ResolvedScenario { sp, tau: self.tau, ln_g, families, cells })
    }

    /// Sample times in increasing order, restricted to `[0, horizon]`; the
    /// horizon itself when none are given.
    pub fn effective_sample_times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self
            .sample_times
            .iter()
            .copied()
            .filter(|&t| t <= self.horizon)
            .collect();
        if ts.is_empty() {
            ts.push(self.horizon);
        }
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }
}
