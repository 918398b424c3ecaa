//! Brittle thin plates: the rescaled and reduced energies, the Kirchhoff-Love
//! lift, grid-based crack approximation and the experiment harness.

pub mod elasticity;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod interpolation;
pub mod kirchhoff_love;
pub mod lab;
pub mod mesh;
pub mod minimize;

pub use elasticity::{LameParams, SymMatrix};
pub use energy::{BoundaryDatum, EnergyBreakdown, LayerQuadrature};
pub use error::{Error, Result};
pub use geometry::CrackSurface;
pub use kirchhoff_love::KLState;
pub use lab::{ExperimentConfig, Table};
pub use mesh::{BoxGrid, NodalField, PlateField};
pub use minimize::{CrackIndicator, SolverConfig};
