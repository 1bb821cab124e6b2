//! The branching rule in its general state-vector form.
//!
//! Every basis vector is a pointer cell tensored with a label. A branching on
//! `(cell, label)` uses the one-dimensional projector onto that basis vector,
//! computes the expectation values `<P>` and `<P^2>` from the full state, and
//! adds the relabelled projection with coefficient `sqrt(Z) <P>/<P^2>` while
//! removing `(1 - sqrt(1-Z)) <P>/<P^2>` of the projection in place. This is
//! slower and more general than the reduced rule used by the engines, and is
//! kept as an independent reference for it.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::measure::SplitParameter;

/// Tolerance on `M = 1` at a branching.
pub const THRESHOLD_TOLERANCE: f64 = 1e-9;

/// One labelled event `(cell, time)`.
pub type LabelEvent = (u32, f64);

/// Real-amplitude state over `(cell, label)` basis vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVectorToy {
    amplitudes: BTreeMap<(u32, usize), f64>,
    /// Label registry; entry `i` lists its events oldest first.
    labels: Vec<Vec<LabelEvent>>,
    g: f64,
    tau: f64,
}

/// Index of the initial, event-free label.
pub const INITIAL_LABEL: usize = 0;

impl StateVectorToy {
    pub fn new(g: f64, tau: f64) -> Self {
        Self { amplitudes: BTreeMap::new(), labels: vec![Vec::new()], g, tau }
    }

    /// Registers a label, returning the index of an identical existing one
    /// if there is one.
    pub fn register_label(&mut self, events: Vec<LabelEvent>) -> usize {
        if let Some(i) = self.labels.iter().position(|l| *l == events) {
            return i;
        }
        self.labels.push(events);
        self.labels.len() - 1
    }

    pub fn label(&self, index: usize) -> &[LabelEvent] {
        &self.labels[index]
    }

    pub fn set_amplitude(&mut self, cell: u32, label: usize, amplitude: f64) {
        assert!(label < self.labels.len(), "unregistered label {label}");
        self.amplitudes.insert((cell, label), amplitude);
    }

    pub fn amplitude(&self, cell: u32, label: usize) -> f64 {
        self.amplitudes.get(&(cell, label)).copied().unwrap_or(0.0)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.amplitudes, &self.amplitudes)
    }

    /// `M` for the projector onto `(cell, label)` at time `t`.
    pub fn threshold_quantity(&self, cell: u32, label: usize, t: f64) -> f64 {
        let a = self.amplitude(cell, label);
        self.pointer_weight(t) * a * a
    }

    fn pointer_weight(&self, t: f64) -> f64 {
        self.g * (t / self.tau).exp()
    }

    /// Measure along every `(cell, label)` with non-zero amplitude, keyed by
    /// label content so that states built in different orders compare equal.
    pub fn label_measures(&self) -> BTreeMap<(u32, Vec<(u32, u64)>), f64> {
        self.amplitudes
            .iter()
            .filter(|(_, a)| **a != 0.0)
            .map(|(&(cell, l), a)| {
                let key: Vec<(u32, u64)> = self.labels[l].iter().map(|&(c, t)| (c, t.to_bits())).collect();
                ((cell, key), a * a)
            })
            .collect()
    }
}

fn dot(x: &BTreeMap<(u32, usize), f64>, y: &BTreeMap<(u32, usize), f64>) -> f64 {
    x.iter().filter_map(|(k, a)| y.get(k).map(|b| a * b)).sum()
}

fn axpy(y: &mut BTreeMap<(u32, usize), f64>, alpha: f64, x: &BTreeMap<(u32, usize), f64>) {
    for (k, v) in x {
        *y.entry(*k).or_insert(0.0) += alpha * v;
    }
}

/// Applies one branching on the projector `|cell, label><cell, label|` at
/// time `t`.
pub fn apply_branch_vector(
    state: &StateVectorToy,
    cell: u32,
    label: usize,
    t: f64,
    sp: &SplitParameter,
) -> Result<StateVectorToy> {
    if label >= state.labels.len() {
        return Err(Error::Domain(format!("label index {label} is not registered")));
    }
    let p = state.pointer_weight(t);

    // P |phi>
    let mut projected = BTreeMap::new();
    let c = state.amplitude(cell, label);
    if c != 0.0 {
        projected.insert((cell, label), p * c);
    }
    let expect_p = dot(&state.amplitudes, &projected);
    let expect_p2 = dot(&projected, &projected);
    if expect_p2 == 0.0 {
        return Err(Error::Domain(format!("projection on cell {cell}, label {label} has zero measure")));
    }
    if (expect_p - 1.0).abs() > THRESHOLD_TOLERANCE {
        return Err(Error::Precondition(format!(
            "M = {expect_p} on cell {cell}, label {label} is not at threshold"
        )));
    }

    let mut next = state.clone();
    let mut events = Vec::with_capacity(state.labels[label].len() + 1);
    events.extend_from_slice(&state.labels[label]);
    events.push((cell, t));
    let new_label = next.register_label(events);

    // C(t) P |phi>: the same amplitudes, moved onto the extended label.
    let relabelled: BTreeMap<_, _> = projected.iter().map(|(&(g, _), v)| ((g, new_label), *v)).collect();

    let scale = expect_p / expect_p2;
    axpy(&mut next.amplitudes, sp.z().sqrt() * scale, &relabelled);
    axpy(&mut next.amplitudes, -(1.0 - (1.0 - sp.z()).sqrt()) * scale, &projected);
    Ok(next)
}
