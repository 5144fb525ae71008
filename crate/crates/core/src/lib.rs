//! KitchenForge: on-demand multi-objective process planning and scheduling
//! for smart commercial kitchens.
//!
//! Given a recipe catalog, a hob/pot resource model and a food order, the
//! engine evolves recipe selections, resource allocations and priorities with
//! a decomposition-based evolutionary algorithm and approximates the Pareto
//! front over makespan, energy and deficiency. Results are served over a
//! message-bus protocol and a CLI.

pub mod metrics;
pub mod moead;
pub mod oracle;
pub mod outputs;
pub mod scenario;
pub mod service;
pub mod twin;

/// Model time unit. All task intervals and durations are whole minutes.
pub type Minutes = u64;

pub use metrics::{MetricKind, MetricRecord, ObservableEffect, ValueType};
pub use moead::{MoeadParams, ParetoArchive, RunOutcome, RunStats};
pub use scenario::{
    build_standard_hob, ExclusionGroup, InstanceSlot, OrderLine, Recipe, Resource, Scenario,
    ScenarioError,
};
pub use twin::{Chromosome, Gene, KitchenTwin, ObjectiveVector, Schedule, ScheduleStatus, Task};
