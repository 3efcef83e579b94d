//! Detection metrics and ablation grids.

mod grid;
mod metrics;

pub use grid::{
    sweep, window_reference, window_validity, ExperimentGrid, ExperimentKind, GridCell, ReferencePoint, SweepAxis,
};
pub use metrics::{confusion, metrics, Confusion, MetricsReport};
