//! Explain tree-ensemble feature importance as a proportional parliament.
//!
//! Feature importances become votes, votes become seats through the D'Hondt
//! highest-averages method, and the resulting parliament can be compared with
//! external attribution values by rank correlation.

pub mod apportion;
pub mod cli;
pub mod pipeline;
pub mod report;
pub mod stats;
pub mod trees;

pub use apportion::{
    dhondt_allocate, dhondt_seats, divisor_oracle_allocate, divisor_oracle_seats, Entity, Quotient,
    SeatAllocation,
};
pub use pipeline::{run_pipeline, Alliance, ImportanceVector, PipelineConfig, PipelineResult};
