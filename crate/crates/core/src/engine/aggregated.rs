//! Aggregated mode: sub-branches of one initial component with the same
//! split exponents `(a, b)` share a measure and a branch time, so they are
//! stored as one class with a count.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap;
use serde::Serialize;

use super::exact::ExactEngine;
use super::schedule::{simultaneity_window, EventSchedule};
use crate::error::{Error, Result};
use crate::measure::{class_measure, BigCount, ClassKey, ExtFloat, LogMeasure, LogSumExp, SplitParameter};
use crate::scenarios::{ResolvedScenario, ScenarioConfig};

/// Relative tolerance of the total-measure conservation check.
pub const CONSERVATION_TOLERANCE: f64 = 1e-9;

/// Allowed gap between a delivered event time and the class's branch time,
/// in units of `tau`.
pub const EVENT_TIME_TOLERANCE: f64 = 1e-9;

/// Static data of one initial component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentInfo {
    pub family: u32,
    pub cell_id: u32,
    pub m0: LogMeasure,
    pub ln_g: f64,
}

/// Sub-branch counts per class, plus what is needed to interpret them.
#[derive(Debug, Clone)]
pub struct ClassTable {
    entries: FxHashMap<ClassKey, BigCount>,
    components: Vec<ComponentInfo>,
    families: Vec<String>,
    sp: SplitParameter,
    tau: f64,
    exact_bits: u64,
    ln_initial_measure: f64,
}

impl ClassTable {
    /// An empty table; `ln_initial_measure` is the conserved total.
    pub fn new(
        sp: SplitParameter,
        tau: f64,
        exact_bits: u64,
        families: Vec<String>,
        components: Vec<ComponentInfo>,
        ln_initial_measure: f64,
    ) -> Self {
        Self { entries: FxHashMap::default(), components, families, sp, tau, exact_bits, ln_initial_measure }
    }

    /// One class `(c, 0, 0)` per cell, holding the cell's multiplicity.
    /// Requires every initial component to lie along a single cell.
    pub fn from_scenario(config: &ScenarioConfig, scenario: &ResolvedScenario) -> Result<Self> {
        if let Some(c) = config.components.iter().find(|c| c.cells.len() != 1) {
            return Err(Error::Mode(format!(
                "component of family {} spans {} cells; aggregated mode needs single-cell components (use exact or hybrid mode)",
                c.family,
                c.cells.len()
            )));
        }
        let components = scenario
            .cells
            .iter()
            .map(|c| ComponentInfo { family: c.family, cell_id: c.cell_id, m0: c.m0, ln_g: scenario.ln_g })
            .collect();
        let ln_w = crate::measure::logsumexp_accumulate(
            scenario.cells.iter().map(|c| c.m0.0 + (c.multiplicity as f64).ln()),
        );
        let mut table = Self::new(
            scenario.sp,
            scenario.tau,
            config.exact_bits,
            scenario.families.clone(),
            components,
            ln_w,
        );
        for (i, c) in scenario.cells.iter().enumerate() {
            table.add(ClassKey::new(i as u32, 0, 0), &BigCount::from_u64(c.multiplicity));
        }
        Ok(table)
    }

    pub fn sp(&self) -> &SplitParameter {
        &self.sp
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn components(&self) -> &[ComponentInfo] {
        &self.components
    }

    pub fn families(&self) -> &[String] {
        &self.families
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &ClassKey) -> Option<&BigCount> {
        self.entries.get(key)
    }

    /// Entries in unspecified order.
    pub fn iter(&self) -> impl Iterator<Item = (&ClassKey, &BigCount)> {
        self.entries.iter()
    }

    /// Entries sorted by key.
    pub fn sorted(&self) -> Vec<(ClassKey, &BigCount)> {
        let mut v: Vec<_> = self.entries.iter().map(|(k, n)| (*k, n)).collect();
        v.sort_unstable_by_key(|e| e.0);
        v
    }

    pub fn add(&mut self, key: ClassKey, count: &BigCount) {
        let bits = self.exact_bits;
        self.entries.entry(key).or_default().add_assign(count, bits);
    }

    pub fn log_measure(&self, key: ClassKey) -> LogMeasure {
        class_measure(key, self.components[key.component as usize].m0, &self.sp)
    }

    /// `ln M` of every sub-branch in the class at time `t`.
    pub fn ln_threshold_quantity(&self, key: ClassKey, t: f64) -> f64 {
        self.log_measure(key).0 + self.components[key.component as usize].ln_g + t / self.tau
    }

    pub fn branch_time(&self, key: ClassKey) -> f64 {
        -self.tau * (self.log_measure(key).0 + self.components[key.component as usize].ln_g)
    }

    /// Sum of all counts.
    pub fn total_count(&self) -> ExtFloat {
        self.entries.values().fold(ExtFloat::ZERO, |acc, n| acc.add(n.to_ext()))
    }

    /// `ln Σ n m` over all classes.
    pub fn ln_total_measure(&self) -> f64 {
        let mut acc = LogSumExp::new();
        for (k, n) in &self.entries {
            acc.add(n.ln() + self.log_measure(*k).0);
        }
        acc.value()
    }

    pub fn ln_initial_measure(&self) -> f64 {
        self.ln_initial_measure
    }

    /// Relative drift of the total measure; an error beyond
    /// [`CONSERVATION_TOLERANCE`].
    pub fn check_conservation(&self) -> Result<f64> {
        let drift = (self.ln_total_measure() - self.ln_initial_measure).exp_m1().abs();
        if drift > CONSERVATION_TOLERANCE {
            return Err(Error::Invariant(format!("total measure drifted by {drift:e} (relative)")));
        }
        Ok(drift)
    }

    /// Sub-branch counts summed per outcome family.
    pub fn family_counts(&self) -> BTreeMap<String, BigCount> {
        let mut per: Vec<BigCount> = vec![BigCount::zero(); self.families.len()];
        for (k, n) in self.sorted() {
            per[self.components[k.component as usize].family as usize].add_assign(n, self.exact_bits);
        }
        self.families.iter().cloned().zip(per).collect()
    }

    /// Fires class `key` at time `t`: its count moves to both children.
    pub fn apply_branch_reduced(&mut self, key: ClassKey, t: f64) -> Result<()> {
        let expected = self.branch_time(key);
        if !self.entries.contains_key(&key) {
            return Err(Error::Domain(format!("class {key:?} is not present")));
        }
        if (t - expected).abs() > EVENT_TIME_TOLERANCE * self.tau {
            return Err(Error::Scheduling(format!("class {key:?} delivered at {t}, branch time is {expected}")));
        }
        self.fire(key).map(|_| ())
    }

    /// Removes `key` and credits both children, returning the moved count
    /// and whether each child was newly created.
    fn fire(&mut self, key: ClassKey) -> Result<(BigCount, [bool; 2])> {
        let n = self
            .entries
            .remove(&key)
            .ok_or_else(|| Error::Domain(format!("class {key:?} is not present")))?;
        if n.is_zero() {
            return Err(Error::Domain(format!("class {key:?} has zero count")));
        }
        let bits = self.exact_bits;
        let mut created = [false; 2];
        for (i, child) in [key.z_child(), key.residual_child()].into_iter().enumerate() {
            let slot = self.entries.entry(child).or_insert_with(|| {
                created[i] = true;
                BigCount::zero()
            });
            slot.add_assign(&n, bits);
        }
        Ok((n, created))
    }
}

/// A processed batch of simultaneous events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchInfo {
    pub time: f64,
    pub events: usize,
    pub ln_count_before: f64,
    pub ln_count_after: f64,
    /// `ln <M>` just before and just after the batch.
    pub ln_mean_before: f64,
    pub ln_mean_after: f64,
    /// Classes in the table after the batch.
    pub alive_classes: usize,
}

/// Event-driven engine over a [`ClassTable`].
///
/// The total count is maintained incrementally, and the count-weighted mean
/// of `M` follows from it because `Σ n g m` is conserved:
/// `<M>(t) = e^{t/tau} Σ n g m / N(t)`.
#[derive(Debug, Clone)]
pub struct AggregatedEngine {
    table: ClassTable,
    schedule: EventSchedule<ClassKey>,
    now: f64,
    events: u64,
    total: ExtFloat,
    ln_weight: f64,
    batch: Vec<(f64, ClassKey)>,
}

impl AggregatedEngine {
    /// Schedules every class of `table`; `now` is the current time.
    pub fn new(table: ClassTable, now: f64) -> Result<Self> {
        let mut schedule = EventSchedule::with_capacity(table.len());
        let mut weight = LogSumExp::new();
        for (k, n) in table.sorted() {
            let t = table.branch_time(k);
            if t < now - simultaneity_window(now, table.tau) {
                return Err(Error::Precondition(format!("class {k:?} is past threshold at t = {now}")));
            }
            schedule.push(t.max(now), k);
            weight.add(n.ln() + table.log_measure(k).0 + table.components[k.component as usize].ln_g);
        }
        let total = table.total_count();
        Ok(Self { schedule, now, events: 0, total, ln_weight: weight.value(), batch: Vec::new(), table })
    }

    pub fn table(&self) -> &ClassTable {
        &self.table
    }

    pub fn into_table(self) -> ClassTable {
        self.table
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn events_processed(&self) -> u64 {
        self.events
    }

    pub fn next_event_time(&self) -> Option<f64> {
        self.schedule.peek_time()
    }

    pub fn ln_total_count(&self) -> f64 {
        self.total.ln()
    }

    /// `ln <M>` at time `t` from the incremental total count.
    pub fn ln_mean_measure(&self, t: f64) -> f64 {
        self.ln_weight + t / self.table.tau - self.total.ln()
    }

    /// Recomputes the total count from the table.
    pub fn resync_total(&mut self) {
        self.total = self.table.total_count();
    }

    /// Processes the next batch of simultaneous events if it falls at or
    /// before `t`.
    pub fn step_batch(&mut self, t: f64) -> Result<Option<BatchInfo>> {
        let tau = self.table.tau;
        let limit = t + simultaneity_window(t, tau);
        let mut batch = std::mem::take(&mut self.batch);
        let result = match self.schedule.pop_batch(limit, |x| simultaneity_window(x, tau), &mut batch) {
            None => Ok(None),
            Some(first) => {
                let before = self.total.ln();
                let r = batch.iter().try_for_each(|&(time, key)| self.fire(time, key));
                r.map(|_| {
                    let after = self.total.ln();
                    let ln_grown = self.ln_weight + first / tau;
                    Some(BatchInfo {
                        time: first,
                        events: batch.len(),
                        ln_count_before: before,
                        ln_count_after: after,
                        ln_mean_before: ln_grown - before,
                        ln_mean_after: ln_grown - after,
                        alive_classes: self.table.len(),
                    })
                })
            }
        };
        self.batch = batch;
        result
    }

    fn fire(&mut self, time: f64, key: ClassKey) -> Result<()> {
        let expected = self.table.branch_time(key);
        if (time - expected).abs() > EVENT_TIME_TOLERANCE * self.table.tau {
            return Err(Error::Scheduling(format!("class {key:?} delivered at {time}, branch time is {expected}")));
        }
        let (n, created) = self.table.fire(key)?;
        self.total = self.total.add(n.to_ext());
        for (child, new) in [key.z_child(), key.residual_child()].into_iter().zip(created) {
            let tc = self.table.branch_time(child);
            if new {
                self.schedule.push(tc, child);
            } else if tc < time {
                return Err(Error::Scheduling(format!("class {child:?} credited after its branch time")));
            }
        }
        self.now = self.now.max(time);
        self.events += 1;
        Ok(())
    }

    /// Processes every event up to and including `t`, reporting each batch.
    pub fn advance_to<F: FnMut(&BatchInfo)>(&mut self, t: f64, mut observer: F) -> Result<()> {
        while let Some(info) = self.step_batch(t)? {
            observer(&info);
        }
        self.now = self.now.max(t);
        Ok(())
    }
}

/// A class table captured at a sample time.
#[derive(Debug, Clone)]
pub struct TableSample {
    pub time: f64,
    pub events_processed: u64,
    pub table: ClassTable,
}

/// Converts the exact engine's state to classes, one component per cell.
/// A multi-cell sub-branch contributes one count to each of its cells.
pub fn table_from_exact(engine: &ExactEngine, exact_bits: u64) -> ClassTable {
    let scenario = engine.scenario();
    let components = scenario
        .cells
        .iter()
        .map(|c| ComponentInfo { family: c.family, cell_id: c.cell_id, m0: c.m0, ln_g: scenario.ln_g })
        .collect();
    let ln_w = crate::measure::logsumexp_accumulate(scenario.cells.iter().map(|c| c.m0.0));
    let mut table =
        ClassTable::new(scenario.sp, scenario.tau, exact_bits, scenario.families.clone(), components, ln_w);
    let one = BigCount::from_u64(1);
    for sb in engine.sub_branches() {
        for p in &sb.pieces {
            table.add(ClassKey::new(p.cell, p.a, p.b), &one);
        }
    }
    table
}

/// Runs the aggregated engine, sampling the class table at each requested
/// time (or at the horizon) after checking measure conservation.
pub fn run_aggregated(config: &ScenarioConfig, horizon: f64, sample_times: &[f64]) -> Result<Vec<TableSample>> {
    let scenario = config.resolve()?;
    let table = ClassTable::from_scenario(config, &scenario)?;
    let mut engine = AggregatedEngine::new(table, 0.0)?;
    let mut samples = Vec::new();
    for t in sample_grid(sample_times, horizon) {
        engine.advance_to(t, |_| {})?;
        engine.table.check_conservation()?;
        samples.push(TableSample { time: t, events_processed: engine.events, table: engine.table.clone() });
    }
    Ok(samples)
}

/// Result of a hybrid run.
#[derive(Debug, Clone)]
pub struct HybridRun {
    /// Time at which the exact engine handed off, if it did before the horizon.
    pub handoff_time: Option<f64>,
    pub samples: Vec<TableSample>,
}

/// Runs exact mode until the residual superposition's share of the count
/// falls below the configured threshold, then continues in aggregated mode.
/// Samples taken before the handoff are converted to class tables.
pub fn run_hybrid(config: &ScenarioConfig, horizon: f64, sample_times: &[f64]) -> Result<HybridRun> {
    let scenario = config.resolve()?;
    let mut exact = ExactEngine::new(scenario, config.population_cap)?;
    let times = sample_grid(sample_times, horizon);
    let mut samples = Vec::new();
    let mut next = 0;
    let mut handoff_time = None;
    while exact.residual_share() >= config.handoff_threshold {
        match exact.next_event_time() {
            Some(te) if te <= horizon => {
                while next < times.len() && times[next] < te {
                    exact.advance_to(times[next])?;
                    samples.push(exact_sample(&exact, times[next], config.exact_bits)?);
                    next += 1;
                }
                exact.step_batch(te)?;
            }
            _ => break,
        }
    }
    if exact.residual_share() < config.handoff_threshold {
        handoff_time = Some(exact.now());
    }
    if handoff_time.is_none() {
        for &t in &times[next..] {
            exact.advance_to(t)?;
            samples.push(exact_sample(&exact, t, config.exact_bits)?);
        }
        return Ok(HybridRun { handoff_time, samples });
    }
    let now = exact.now();
    let offset = exact.events_processed();
    let mut engine = AggregatedEngine::new(table_from_exact(&exact, config.exact_bits), now)?;
    for &t in &times[next..] {
        engine.advance_to(t, |_| {})?;
        engine.table.check_conservation()?;
        samples.push(TableSample { time: t, events_processed: offset + engine.events, table: engine.table.clone() });
    }
    Ok(HybridRun { handoff_time, samples })
}

fn exact_sample(exact: &ExactEngine, t: f64, exact_bits: u64) -> Result<TableSample> {
    let table = table_from_exact(exact, exact_bits);
    table.check_conservation()?;
    Ok(TableSample { time: t, events_processed: exact.events_processed(), table })
}

fn sample_grid(sample_times: &[f64], horizon: f64) -> Vec<f64> {
    let mut ts: Vec<f64> = sample_times.iter().copied().filter(|&t| t <= horizon).collect();
    if ts.is_empty() {
        ts.push(horizon);
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}
