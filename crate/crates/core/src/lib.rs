//! Randomized gossip with attraction, neglect and repulsion.
//!
//! [`graph`] validates selection matrices and computes Laplacian spectra,
//! [`dynamics`] simulates slots, [`metrics`] measures and classifies runs,
//! [`theory`] evaluates convergence conditions and [`montecarlo`] runs
//! seeded, parallel trial batches.

pub mod dynamics;
pub mod graph;
pub mod metrics;
pub mod montecarlo;
pub mod oracle;
pub mod rng;
pub mod schedule;
pub mod theory;

pub use dynamics::{
    apply_step, ActiveRule, DynamicsError, Event, EventProbabilities, Model, NetworkState, StepOutcome, UpdateMode,
};
pub use graph::{generate, reference_matrix, spectral, GraphError, SelectionMatrix, SpectralData, Topology};
pub use metrics::{classify, dispersion, measure, spread, Classification, MeasureSample};
pub use schedule::{Role, Schedule, ScheduleKind};
pub use theory::{
    critical_measure, theory_report, Claim, ConditionId, Status, TheoryError, TheoryParams, TheoryReport, Verdict,
};
