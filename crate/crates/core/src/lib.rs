//! Adaptive moving-mesh solver for scalar 1D conservation laws.
//!
//! Each time step redistributes the nodes by equidistributing a curvature
//! monitor, keeps the new nodes away from old extremes, interpolates the
//! solution onto the new mesh and advances it with an explicit three-point
//! scheme. The [`theory`] module evaluates the extreme-magnitude recursion
//! and the total variation bounds that the simulations are checked against.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod driver;
pub mod error;
pub mod estimator;
pub mod grid;
pub mod remesh;
pub mod scalar;
pub mod schemes;
pub mod theory;

pub use driver::{run, run_with_observer, MasConfig, RunOutput, StepRecord};
pub use error::{MasError, Result};
pub use estimator::{EstimatorParams, MonitorTable};
pub use grid::{CellGeometry, Flux, GridSolution, Mesh, Problem};
pub use remesh::{LambdaRuleParams, LambdaRuleReport};
pub use scalar::Real;
pub use schemes::{EvolutionConstant, SchemeKind, StepContext};
pub use theory::{ExtremeTable, TheoryParams};

pub type Mesh64 = Mesh<f64>;
pub type Mesh32 = Mesh<f32>;
pub type Solution64 = GridSolution<f64>;
pub type Solution32 = GridSolution<f32>;
pub type Problem64 = Problem<f64>;
pub type Problem32 = Problem<f32>;
pub type Config64 = MasConfig<f64>;
pub type Config32 = MasConfig<f32>;
pub type Theory64 = TheoryParams<f64>;
pub type Theory32 = TheoryParams<f32>;
