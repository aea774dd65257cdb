//! Planted random constraint-satisfaction instances: sampling, exact
//! solution counting, Boolean predicate analysis and Monte-Carlo drivers.

pub mod cli;
pub mod counting;
pub mod dimacs;
pub mod error;
pub mod experiments;
pub mod formula;
pub mod predicate;
pub mod record;
pub mod sampler;
pub mod scalar;

pub use cli::{run_cli, run_cli_with};
pub use error::{CspError, Result};

/// Probability measure on replica tuples in double precision.
pub type Measure = predicate::TupleMeasure<f64>;
/// Probability measure on replica tuples with exact rational weights.
pub type ExactMeasure = predicate::TupleMeasure<num_rational::BigRational>;
