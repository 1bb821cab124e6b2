use serde::{Deserialize, Serialize};

use super::config::*;
use crate::error::{Error, Result};
use crate::measure::{golden_split, SplitParameter, DEFAULT_EXACT_BITS, DEFAULT_RATIO_TOLERANCE};

fn base(name: &str, z: f64, components: Vec<ComponentSpec>, g: GSpec, mode: EngineMode, horizon: f64) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        components,
        z,
        ratio_tolerance: DEFAULT_RATIO_TOLERANCE,
        tau: 1.0,
        g,
        mode,
        residual_policy: ResidualPolicy::CountAsSplit,
        horizon,
        sample_times: Vec::new(),
        seed: 0,
        population_cap: DEFAULT_POPULATION_CAP,
        handoff_threshold: DEFAULT_HANDOFF_THRESHOLD,
        exact_bits: DEFAULT_EXACT_BITS,
    }
}

fn single(family: &str, cell_id: u32, m0: f64) -> ComponentSpec {
    ComponentSpec { family: family.into(), cells: vec![CellSpec { cell_id, m0, multiplicity: 1 }] }
}

/// Doubling period `T = tau ln 2` of `M` at `z = 1/2`.
pub fn doubling_period(tau: f64) -> f64 {
    tau * std::f64::consts::LN_2
}

/// Equal superposition of two cells with `g = 2`: both branch at `t = 0`
/// and then every `T`.
pub fn build_eq5() -> ScenarioConfig {
    base(
        "eq5",
        0.5,
        vec![single("A", 0, 0.5), single("B", 1, 0.5)],
        GSpec::Value(2.0),
        EngineMode::Exact,
        10.0 * doubling_period(1.0),
    )
}

/// Measures `2/3` and `1/3` with `g = 1.5`: `A` branches at `t = 0`, `B`
/// one period later.
pub fn build_eq6() -> ScenarioConfig {
    base(
        "eq6",
        0.5,
        vec![single("A", 0, 2.0 / 3.0), single("B", 1, 1.0 / 3.0)],
        GSpec::Value(1.5),
        EngineMode::Exact,
        10.0 * doubling_period(1.0),
    )
}

/// How the cells of a spread-out wave packet are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellModel {
    /// `(width/w)^3` cells of equal measure.
    Uniform,
    /// Radial shells of a 3-D Gaussian of standard deviation `width`, out to
    /// six standard deviations; shell `j` holds `round(4 pi j^2)` cells.
    GaussianShells,
}

/// Two spread-out outcome families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPair {
    pub width_a: f64,
    pub width_b: f64,
    pub measure_a: f64,
    pub measure_b: f64,
    pub w: f64,
    pub z: f64,
    pub tau: f64,
    pub cells: CellModel,
}

impl Default for GaussianPair {
    fn default() -> Self {
        Self {
            width_a: 400.0,
            width_b: 100.0,
            measure_a: 2.0 / 3.0,
            measure_b: 1.0 / 3.0,
            w: 1.0,
            z: 0.5,
            tau: 1.0,
            cells: CellModel::Uniform,
        }
    }
}

const SHELL_CUTOFF_SIGMAS: f64 = 6.0;

/// Shells `(cells, measure per cell)` holding `measure` in total.
fn family_cells(width: f64, w: f64, measure: f64, model: CellModel) -> Result<Vec<(u64, f64)>> {
    match model {
        CellModel::Uniform => {
            let n = (width / w).powi(3).round();
            if !(n >= 1.0) {
                return Err(Error::Domain(format!("width {width} covers no cells of width {w}")));
            }
            Ok(vec![(n as u64, measure / n)])
        }
        CellModel::GaussianShells => {
            let sigma = width / w;
            if !(sigma >= 1.0) {
                return Err(Error::Domain(format!("width {width} is narrower than a cell")));
            }
            let shells = (SHELL_CUTOFF_SIGMAS * sigma).ceil() as u64;
            let raw: Vec<(u64, f64)> = (0..=shells)
                .map(|j| {
                    let r = j as f64;
                    let n = if j == 0 { 1 } else { (4.0 * std::f64::consts::PI * r * r).round() as u64 };
                    (n, (-r * r / (2.0 * sigma * sigma)).exp())
                })
                .collect();
            let total: f64 = raw.iter().map(|&(n, x)| n as f64 * x).sum();
            Ok(raw.into_iter().map(|(n, x)| (n, measure * x / total)).collect())
        }
    }
}

/// Two families whose wave packets spread over many pointer cells; each
/// cell population is one single-cell component with a multiplicity.
pub fn build_gaussian_pair(p: &GaussianPair) -> Result<ScenarioConfig> {
    if ((p.measure_a + p.measure_b) - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("measures {} + {} do not sum to 1", p.measure_a, p.measure_b)));
    }
    let mut components = Vec::new();
    let mut id = 0u32;
    for (family, width, measure) in [("A", p.width_a, p.measure_a), ("B", p.width_b, p.measure_b)] {
        for (n, m0) in family_cells(width, p.w, measure, p.cells)? {
            components.push(ComponentSpec {
                family: family.into(),
                cells: vec![CellSpec { cell_id: id, m0, multiplicity: n }],
            });
            id += 1;
        }
    }
    let mut cfg = base(
        "gaussian",
        p.z,
        components,
        GSpec::Rule(GRule::NormalizeFirstEvent),
        EngineMode::Aggregated,
        30.0 * doubling_period(p.tau),
    );
    cfg.tau = p.tau;
    Ok(cfg)
}

/// Initial placement of the components of the golden-ratio run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialLayout {
    /// All measure on one cell.
    Single,
    /// `ln M` evenly spaced over one maximal split step below threshold.
    LogUniform,
    /// `M` at the mid-quantiles of the stationary distribution.
    StationaryQuantiles,
}

/// Golden-ratio run with `components` single-cell components.
pub fn build_golden(components: u32, layout: InitialLayout, horizon: f64) -> Result<ScenarioConfig> {
    let sp = golden_split();
    let k = if layout == InitialLayout::Single { 1 } else { components.max(1) };
    let ms: Vec<f64> = match layout {
        InitialLayout::Single => vec![1.0],
        InitialLayout::LogUniform => {
            let step = -sp.z_prime().ln();
            (0..k).map(|i| (-step * i as f64 / k as f64).exp()).collect()
        }
        InitialLayout::StationaryQuantiles => {
            (0..k).map(|i| stationary_quantile((k - i) as f64 - 0.5, k as f64, &sp)).collect()
        }
    };
    let total: f64 = ms.iter().sum();
    let comps = ms.iter().enumerate().map(|(i, m)| single("A", i as u32, m / total)).collect();
    Ok(base("golden", sp.z(), comps, GSpec::Rule(GRule::NormalizeFirstEvent), EngineMode::Aggregated, horizon))
}

/// `M` at which the stationary CDF reaches `num/den`.
fn stationary_quantile(num: f64, den: f64, sp: &SplitParameter) -> f64 {
    let q = num / den;
    let zp = sp.z_prime();
    let hi = 1.0 - zp;
    let q_mid = zp * (1.0 / zp - 1.0 / hi);
    if q < q_mid {
        1.0 / (1.0 / zp - q / zp)
    } else {
        1.0 / (1.0 / hi - (q - q_mid))
    }
}
