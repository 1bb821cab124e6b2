//! Exact mode: every sub-branch is kept individually with its label.

use std::collections::BTreeMap;

use serde::Serialize;
use smallvec::SmallVec;

use super::schedule::{simultaneity_window, EventSchedule};
use super::vector::LabelEvent;
use crate::error::{Error, Result};
use crate::measure::{branch_time, exponent_measure, BigCount, LogMeasure};
use crate::scenarios::{ResidualPolicy, ResolvedScenario, ScenarioConfig, MIXED_FAMILY};

/// Handle to a label stored in a [`LabelArena`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct LabelId(u32);

impl LabelId {
    /// The initial label `L0`, with no events.
    pub const ROOT: LabelId = LabelId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy)]
struct LabelNode {
    parent: u32,
    cell_id: u32,
    time: f64,
}

/// Labels as a parent-pointer tree: each event extends an existing label.
#[derive(Debug, Clone)]
pub struct LabelArena {
    nodes: Vec<LabelNode>,
}

impl Default for LabelArena {
    fn default() -> Self {
        Self::new()
    }
}

impl LabelArena {
    pub fn new() -> Self {
        Self { nodes: vec![LabelNode { parent: u32::MAX, cell_id: u32::MAX, time: f64::NEG_INFINITY }] }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn extend(&mut self, parent: LabelId, cell_id: u32, time: f64) -> LabelId {
        let id = u32::try_from(self.nodes.len()).expect("label arena exceeds u32 indices");
        self.nodes.push(LabelNode { parent: parent.0, cell_id, time });
        LabelId(id)
    }

    /// Events of a label, oldest first.
    pub fn events(&self, id: LabelId) -> Vec<LabelEvent> {
        let mut out = Vec::new();
        let mut i = id.0;
        while i != 0 {
            let n = self.nodes[i as usize];
            out.push((n.cell_id, n.time));
            i = n.parent;
        }
        out.reverse();
        out
    }

    pub fn depth(&self, id: LabelId) -> usize {
        let mut d = 0;
        let mut i = id.0;
        while i != 0 {
            d += 1;
            i = self.nodes[i as usize].parent;
        }
        d
    }
}

/// The part of a sub-branch lying along one cell, as split exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CellPiece {
    /// Index into the scenario's cell table.
    pub cell: u32,
    pub a: u32,
    pub b: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubBranch {
    pub label: LabelId,
    pub pieces: SmallVec<[CellPiece; 2]>,
}

impl SubBranch {
    pub fn piece_measure(piece: &CellPiece, scenario: &ResolvedScenario) -> LogMeasure {
        exponent_measure(piece.a, piece.b, scenario.cells[piece.cell as usize].m0, &scenario.sp)
    }

    /// `(cell id, measure)` for every cell the sub-branch lies along.
    pub fn measures(&self, scenario: &ResolvedScenario) -> Vec<(u32, LogMeasure)> {
        self.pieces
            .iter()
            .map(|p| (scenario.cells[p.cell as usize].cell_id, Self::piece_measure(p, scenario)))
            .collect()
    }

    /// The family shared by every piece, or `None` for a superposition
    /// spanning several families.
    pub fn pure_family(&self, scenario: &ResolvedScenario) -> Option<u32> {
        let first = scenario.family_of_cell(self.pieces[0].cell as usize);
        self.pieces
            .iter()
            .all(|p| scenario.family_of_cell(p.cell as usize) == first)
            .then_some(first)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct ExactKey {
    cell: u32,
    a: u32,
    b: u32,
    sub: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactSnapshot {
    pub time: f64,
    pub events_processed: u64,
    pub sub_branches: Vec<SubBranch>,
}

/// Per-family sub-branch counts of one snapshot before a residual policy is
/// applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeTally {
    pub families: Vec<String>,
    /// Sub-branches lying entirely within each family.
    pub pure: Vec<u64>,
    /// Sub-branches spanning more than one family.
    pub residual: u64,
    /// For each family, the number of residual sub-branches touching it.
    pub residual_spans: Vec<u64>,
}

impl OutcomeTally {
    pub fn of(snapshot: &ExactSnapshot, scenario: &ResolvedScenario) -> Self {
        Self::from_sub_branches(&snapshot.sub_branches, scenario)
    }

    pub fn from_sub_branches(subs: &[SubBranch], scenario: &ResolvedScenario) -> Self {
        let nf = scenario.families.len();
        let mut pure = vec![0u64; nf];
        let mut residual = 0;
        let mut residual_spans = vec![0u64; nf];
        let mut seen = vec![false; nf];
        for sb in subs {
            match sb.pure_family(scenario) {
                Some(f) => pure[f as usize] += 1,
                None => {
                    residual += 1;
                    seen.iter_mut().for_each(|s| *s = false);
                    for p in &sb.pieces {
                        seen[scenario.family_of_cell(p.cell as usize) as usize] = true;
                    }
                    for (span, s) in residual_spans.iter_mut().zip(&seen) {
                        *span += u64::from(*s);
                    }
                }
            }
        }
        Self { families: scenario.families.clone(), pure, residual, residual_spans }
    }

    pub fn counts(&self, policy: ResidualPolicy) -> BTreeMap<String, BigCount> {
        let mut out = BTreeMap::new();
        for (i, name) in self.families.iter().enumerate() {
            let n = match policy {
                ResidualPolicy::CountAsSplit => self.pure[i] + self.residual_spans[i],
                ResidualPolicy::CountAsOne | ResidualPolicy::Exclude => self.pure[i],
            };
            out.insert(name.clone(), BigCount::from_u64(n));
        }
        if policy == ResidualPolicy::CountAsOne && self.residual > 0 {
            out.insert(MIXED_FAMILY.to_string(), BigCount::from_u64(self.residual));
        }
        out
    }
}

/// Counts per outcome family under a residual policy.
pub fn outcome_counts(
    snapshot: &ExactSnapshot,
    scenario: &ResolvedScenario,
    policy: ResidualPolicy,
) -> BTreeMap<String, BigCount> {
    OutcomeTally::of(snapshot, scenario).counts(policy)
}

/// Event-driven exact engine.
#[derive(Debug, Clone)]
pub struct ExactEngine {
    scenario: ResolvedScenario,
    labels: LabelArena,
    subs: Vec<SubBranch>,
    schedule: EventSchedule<ExactKey>,
    now: f64,
    cap: usize,
    events: u64,
    mixed: usize,
    batch: Vec<(f64, ExactKey)>,
}

impl ExactEngine {
    /// Starts from the scenario's initial state: one sub-branch with label
    /// `L0` lying along every cell.
    pub fn new(scenario: ResolvedScenario, population_cap: usize) -> Result<Self> {
        if let Some(c) = scenario.cells.iter().find(|c| c.multiplicity != 1) {
            return Err(Error::Mode(format!(
                "cell {} has multiplicity {}; exact mode needs distinct cells (use aggregated mode)",
                c.cell_id, c.multiplicity
            )));
        }
        let pieces = (0..scenario.cells.len() as u32).map(|cell| CellPiece { cell, a: 0, b: 0 }).collect();
        let root = SubBranch { label: LabelId::ROOT, pieces };
        let mixed = usize::from(root.pure_family(&scenario).is_none());
        let mut engine = Self {
            labels: LabelArena::new(),
            subs: vec![root],
            mixed,
            schedule: EventSchedule::new(),
            now: 0.0,
            cap: population_cap.max(1),
            events: 0,
            batch: Vec::new(),
            scenario,
        };
        for cell in 0..engine.scenario.cells.len() as u32 {
            engine.schedule_piece(0, CellPiece { cell, a: 0, b: 0 })?;
        }
        Ok(engine)
    }

    fn schedule_piece(&mut self, sub: u32, p: CellPiece) -> Result<()> {
        let m = SubBranch::piece_measure(&p, &self.scenario);
        let t = branch_time(LogMeasure(m.0 + self.scenario.ln_g), 1.0, self.scenario.tau)?;
        self.schedule.push(t.max(self.now), ExactKey { cell: p.cell, a: p.a, b: p.b, sub });
        Ok(())
    }

    pub fn scenario(&self) -> &ResolvedScenario {
        &self.scenario
    }

    pub fn labels(&self) -> &LabelArena {
        &self.labels
    }

    pub fn sub_branches(&self) -> &[SubBranch] {
        &self.subs
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

    /// Processes the next batch of simultaneous events if it falls at or
    /// before `t`, returning its time.
    pub fn step_batch(&mut self, t: f64) -> Result<Option<f64>> {
        let tau = self.scenario.tau;
        let limit = t + simultaneity_window(t, tau);
        let mut batch = std::mem::take(&mut self.batch);
        let first = self.schedule.pop_batch(limit, |x| simultaneity_window(x, tau), &mut batch);
        let result = batch.iter().try_for_each(|&(time, key)| self.fire(time, key));
        self.batch = batch;
        result.map(|_| first)
    }

    /// Processes every event up to and including time `t`.
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        while self.step_batch(t)?.is_some() {}
        self.now = self.now.max(t);
        Ok(())
    }

    fn fire(&mut self, time: f64, key: ExactKey) -> Result<()> {
        let sub = self
            .subs
            .get_mut(key.sub as usize)
            .ok_or_else(|| Error::Scheduling(format!("event for unknown sub-branch {}", key.sub)))?;
        let piece = sub
            .pieces
            .iter_mut()
            .find(|p| p.cell == key.cell)
            .ok_or_else(|| Error::Scheduling(format!("sub-branch {} has no piece on cell {}", key.sub, key.cell)))?;
        if (piece.a, piece.b) != (key.a, key.b) {
            return Err(Error::Scheduling(format!(
                "stale event for sub-branch {} cell {}: scheduled ({}, {}), found ({}, {})",
                key.sub, key.cell, key.a, key.b, piece.a, piece.b
            )));
        }
        if self.subs.len() >= self.cap {
            return Err(Error::Capacity { cap: self.cap });
        }
        let sub = &mut self.subs[key.sub as usize];
        let piece = sub.pieces.iter_mut().find(|p| p.cell == key.cell).expect("checked above");
        let child = CellPiece { cell: key.cell, a: key.a + 1, b: key.b };
        piece.b += 1;
        let residual = *piece;
        let cell_id = self.scenario.cells[key.cell as usize].cell_id;
        let label = self.labels.extend(sub.label, cell_id, time);
        let new_index = u32::try_from(self.subs.len()).expect("population fits in u32");
        let mut pieces = SmallVec::new();
        pieces.push(child);
        self.subs.push(SubBranch { label, pieces });
        self.now = self.now.max(time);
        self.events += 1;
        self.schedule_piece(key.sub, residual)?;
        self.schedule_piece(new_index, child)
    }

    pub fn snapshot(&self) -> ExactSnapshot {
        ExactSnapshot { time: self.now, events_processed: self.events, sub_branches: self.subs.clone() }
    }

    pub fn tally(&self) -> OutcomeTally {
        OutcomeTally::from_sub_branches(&self.subs, &self.scenario)
    }

    /// Total measure `Σ m` over all pieces of all sub-branches.
    pub fn total_measure(&self) -> f64 {
        crate::measure::logsumexp_accumulate(
            self.subs
                .iter()
                .flat_map(|s| s.pieces.iter())
                .map(|p| SubBranch::piece_measure(p, &self.scenario).0),
        )
        .exp()
    }

    /// Share of the count held by sub-branches spanning several families.
    pub fn residual_share(&self) -> f64 {
        // New sub-branches lie along a single cell, so only the initial one
        // can be mixed.
        self.mixed as f64 / self.subs.len() as f64
    }

    pub fn into_parts(self) -> (ResolvedScenario, LabelArena, Vec<SubBranch>) {
        (self.scenario, self.labels, self.subs)
    }
}

/// Output of [`run_exact`].
#[derive(Debug, Clone)]
pub struct ExactRun {
    pub scenario: ResolvedScenario,
    pub labels: LabelArena,
    pub snapshots: Vec<ExactSnapshot>,
}

impl ExactRun {
    pub fn outcome_counts(&self, snapshot: usize, policy: ResidualPolicy) -> BTreeMap<String, BigCount> {
        outcome_counts(&self.snapshots[snapshot], &self.scenario, policy)
    }
}

/// Runs the exact engine to `horizon`, snapshotting at each requested time
/// not beyond the horizon (or at the horizon when none are given).
pub fn run_exact(config: &ScenarioConfig, horizon: f64, snapshot_times: &[f64]) -> Result<ExactRun> {
    let scenario = config.resolve()?;
    let mut engine = ExactEngine::new(scenario, config.population_cap)?;
    let mut times: Vec<f64> = snapshot_times.iter().copied().filter(|&t| t <= horizon).collect();
    if times.is_empty() {
        times.push(horizon);
    }
    times.sort_by(f64::total_cmp);
    let mut snapshots = Vec::with_capacity(times.len());
    for t in times {
        engine.advance_to(t)?;
        let mut snap = engine.snapshot();
        snap.time = t;
        snapshots.push(snap);
    }
    let (scenario, labels, _) = engine.into_parts();
    Ok(ExactRun { scenario, labels, snapshots })
}
