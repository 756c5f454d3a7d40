//! Gaussian processes on compact Riemannian manifolds.
//!
//! Kernels of the Matérn and squared-exponential families are built from the
//! Laplace–Beltrami eigenpairs of the underlying manifold. Analytic
//! eigensystems are provided for the circle, flat tori and spheres; for
//! arbitrary surfaces the eigenpairs come from a piecewise-linear finite
//! element discretization of a triangle mesh.
//!
//! The typical pipeline is
//!
//! 1. build an [`EigenSystem`] (analytically, or via [`mesh::solve_smallest_eigenpairs`]),
//! 2. wrap it in a [`KernelEvaluator`] with a set of [`Hyperparameters`],
//! 3. condition on a [`Dataset`] with [`gp::fit`] and predict or draw
//!    posterior samples pathwise.

// `!(x > 0.0)` style tests are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gp;
pub mod kernels;
pub mod mesh;
pub mod point;
pub mod spectral;

pub use error::{Error, Result};
pub use gp::{fit, Dataset, ExactPosterior, PriorSampler};
pub use kernels::{Hyperparameters, KernelEvaluator, KernelMode, Smoothness, SpectralWeights};
pub use mesh::{MeshEigenSystem, TriangleMesh};
pub use point::ManifoldPoint;
pub use spectral::{EigenLevel, EigenSystem, ManifoldKind};
