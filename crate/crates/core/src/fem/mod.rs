//! Q1 finite elements on structured meshes.

pub mod assembly;
pub mod cg;
pub mod function;
pub mod periodic;
pub mod q1;
pub mod sparse;

pub use assembly::{
    assemble_boundary_mass, assemble_load, assemble_mass, assemble_stiffness, boundary_weights, lumped_mass, Scale,
    Tensor2,
};
pub use cg::{solve_cg, CgOptions, CgSolution, Constraint};
pub use function::{boundary_l2, h1_seminorm, interpolate, l2_norm, FeFunction, SurfaceFunction};
pub use periodic::{expand, fold_matrix, fold_vector};
pub use sparse::CsrMatrix;
