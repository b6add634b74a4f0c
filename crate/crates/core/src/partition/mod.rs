//! Volume-constrained optimization of noise stability over grid assignments,
//! interface extraction and checks of the variational identities.

mod assignment;
mod mesh;
mod optimizer;
mod structure;
mod variation;

pub use assignment::{objective, round_to_partition, Objective, SoftAssignment, ASSIGNMENT_TOL};
pub use mesh::{extract_interfaces, mesh_csv, normal_samples, InterfaceMesh, MeshElement, NormalSample, MESH_RADIUS};
pub use optimizer::{
    optimize, project_simplex, Mode, OptimizeResult, OptimizerConfig, OptimizerSpec, TraceRow, MAX_VOLUME_TOL, MIN_VOLUME,
};
pub use structure::{dimension_reduction_check, ray_directions, DimensionReport, RayReport, EFFECTIVE_FRACTION};
pub use variation::{
    almost_eigenfunction_check, first_variation_check, ou_difference, translation_second_difference,
    translation_second_variation, translation_second_variation_unconstrained, volume_constraint_matrix, EigenReport,
    EigenResidual, PairVariation, SecondDifference, VariationReport, VolumeConstraint, IN_SUBSPACE_TOL, NULL_TOL,
};
