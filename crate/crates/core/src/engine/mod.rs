//! Event-driven branching engines.
//!
//! A sub-branch whose measure along a pointer cell is `m` reaches the
//! branching threshold `M = m g e^{t/tau} = 1` at a fixed time. At that
//! moment a new sub-branch carrying a fresh label receives `Z m` along the
//! cell while the parent keeps `(1 - Z) m` there; the measures along all
//! other cells are untouched and the total measure is conserved.
//! [`vector`] implements the rule on a full state vector; [`exact`] and
//! [`aggregated`] implement the reduced form.

pub mod aggregated;
pub mod exact;
mod schedule;
pub mod vector;

pub use aggregated::{
    run_aggregated, run_hybrid, table_from_exact, AggregatedEngine, BatchInfo, ClassTable, ComponentInfo,
    HybridRun, TableSample, CONSERVATION_TOLERANCE,
};
pub use exact::{
    outcome_counts, run_exact, CellPiece, ExactEngine, ExactRun, ExactSnapshot, LabelArena, LabelId,
    OutcomeTally, SubBranch,
};
pub use schedule::{simultaneity_window, EventSchedule, SIMULTANEITY_TOLERANCE};
pub use vector::{apply_branch_vector, StateVectorToy, INITIAL_LABEL};
