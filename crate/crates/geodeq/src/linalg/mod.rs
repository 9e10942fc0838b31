//! Dense matrices of dimension 1..=8 and polynomials, generic over a scalar
//! that may be real, complex, or a first-order jet of either. Everything the
//! construction needs from linear algebra is polynomial in the matrix entries
//! (adjugate, characteristic polynomial, matrix functions via interpolation),
//! so the same code paths propagate derivatives when the scalars are jets.

mod matfun;
mod matrix;
mod poly;
mod roots;

pub use matfun::{
    complex_structure_j, complex_structure_j_jet, eigen_jets, matrix_function,
    matrix_function_jet, matrix_function_targets, polish_cluster, ClusterTargets, EigenJet,
};
pub use matrix::{Scalar, SmallMatrix};
pub use poly::Poly;
pub use roots::{poly_roots, spectral_cluster, Cluster, ClusterKind};
