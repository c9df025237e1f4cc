//! Finite element solver for the dynamic coupled Stokes-Darcy model.
//!
//! The model couples a transient Stokes flow with a Darcy flow through an
//! interface carrying mass conservation, normal stress balance and a
//! tangential slip condition. A Nitsche-type penalty embeds the normal
//! continuity into the weak form, so each backward-Euler step decouples
//! into a porous solve (with the lagged fluid trace) followed by a fluid
//! solve (with the fresh porous solution).
//!
//! Discretization is lowest-order and non-uniform: MINI elements for the
//! Stokes velocity/pressure pair and RT0 fluxes with piecewise-constant
//! pressures on the porous side.

pub mod assembly;
pub mod error;
pub mod fem;
pub mod mesh;
pub mod solver;
pub mod spaces;
pub mod sparse;
pub mod verification;

pub use assembly::ModelParams;
pub use error::{Error, Result};
pub use mesh::{build_structured_mesh, DomainSpec, PorousSide, Rect, TriMesh};
pub use solver::{ritz_projection, run_transient, sparse_solve, FieldState, TimeGrid};
pub use spaces::{build_spaces, BoundaryData, Spaces};
pub use verification::{
    run_convergence_levels, run_convergence_study, ConvergenceReport, SmoothCase,
    ManufacturedSolution, StudyConfig, TimeRule, ZeroSolution,
};
