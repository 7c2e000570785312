//! Numerical library for thin-slab nematic director fields: minimization of
//! the anisotropic slab energy over unit-sphere-valued fields, detection of
//! the emergent topological defects, and the effective planar machinery
//! (canonical harmonic maps, renormalized energy, vortex core constant) that
//! predicts where the defects sit and how the minimal energy scales.

pub mod core_energy;
pub mod domain;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod field;
pub mod params;
pub mod solver;
pub mod harmonic;
pub mod vortex;

pub use domain::{
    extrude, make_domain, power_law_datum, BoundaryDatum, ChainNode, Domain2D, DomainKind, Grid3D,
    NodeKind,
};
pub use energy::{
    check_gl_bound_strict,
    check_average_bound, check_gl_bound, energy_full, energy_restricted, gl_energy,
    vertical_average, AverageBoundReport, BoundReport, EnergyBreakdown,
};
pub use core_energy::{core_constant, core_energy, CoreConstant, CoreResolution, CoreSample};
pub use error::{Error, Result};
pub use experiments::{run_sweep, SweepConfig, SweepEntry, SweepOutcome};
pub use harmonic::{
    canonical_map, minimize_renormalized, renormalized_energy, solve_psi, RenormalizedReport,
};
pub use solver::{
    el_residual, gradient_check, minimize_full, minimize_gl, GradientCheckReport, SolveOptions,
    SolveReport, StopReason,
};
pub use vortex::{
    current, degree_on_loop, jacobian, locate_defects, Defect, DefectSet, Provenance,
};
pub use field::{init_director, random_admissible, DirectorField, PlanarField, ScalarField2D};
pub use experiments::default_core_constant;
pub use params::{linear_schedule, ScalingParams};
