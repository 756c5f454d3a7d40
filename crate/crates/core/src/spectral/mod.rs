//! Laplace–Beltrami eigensystems.
//!
//! An [`EigenSystem`] exposes the spectrum of `-Δ` grouped into levels of
//! equal eigenvalue. Each level can be queried through its *pair sum*
//! `Σ_k f_{n,k}(x) f_{n,k}(x')`, which is all a kernel needs, and, where a
//! concrete orthonormal basis is available, through the individual members
//! `f_{n,k}` (needed for Fourier-feature sampling).
//!
//! Member indices are zero-based: level `n` has members `0..multiplicity`.

use std::fmt;

use crate::error::{Error, Result};
use crate::point::ManifoldPoint;

mod gegenbauer;
mod harmonics;
pub(crate) mod sphere;
mod torus;

pub use gegenbauer::{gegenbauer, gegenbauer_at_one, gegenbauer_sequence};
pub use harmonics::{real_spherical_harmonic, real_spherical_harmonics_degree};
pub use sphere::{sphere_eigensystem, sphere_multiplicity, sphere_volume, SphereEigenSystem};
pub use torus::{circle_eigensystem, torus_eigensystem, TorusEigenSystem};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenLevel {
    pub index: usize,
    pub eigenvalue: f64,
    pub multiplicity: usize,
}

/// Which manifold an eigensystem lives on; used to validate points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ManifoldKind {
    Circle,
    Torus { dim: usize },
    Sphere { dim: usize },
    Mesh { num_faces: usize, num_vertices: usize },
}

impl ManifoldKind {
    pub fn check_point(&self, x: &ManifoldPoint) -> Result<()> {
        let ok = match (self, x) {
            (ManifoldKind::Circle, ManifoldPoint::Circle(_)) => true,
            (ManifoldKind::Circle, ManifoldPoint::Torus(v)) => v.len() == 1,
            (ManifoldKind::Torus { dim }, ManifoldPoint::Torus(v)) => v.len() == *dim,
            (ManifoldKind::Torus { dim: 1 }, ManifoldPoint::Circle(_)) => true,
            (ManifoldKind::Sphere { dim }, ManifoldPoint::Sphere(v)) => v.len() == dim + 1,
            (ManifoldKind::Mesh { num_faces, .. }, ManifoldPoint::Mesh { face, .. }) => {
                if face >= num_faces {
                    return Err(Error::InvalidArgument(format!(
                        "face index {face} out of range ({num_faces} faces)"
                    )));
                }
                true
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ManifoldMismatch {
                expected: self.to_string(),
                found: x.kind_name(),
            })
        }
    }
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifoldKind::Circle => write!(f, "circle"),
            ManifoldKind::Torus { dim } => write!(f, "T^{dim}"),
            ManifoldKind::Sphere { dim } => write!(f, "S^{dim}"),
            ManifoldKind::Mesh { num_vertices, .. } => write!(f, "mesh ({num_vertices} vertices)"),
        }
    }
}

/// Spectrum of the Laplace–Beltrami operator together with its eigenfunctions.
///
/// Implementations are immutable after construction.
pub trait EigenSystem: fmt::Debug + Send + Sync {
    fn kind(&self) -> ManifoldKind;

    /// Intrinsic dimension `d`.
    fn dim(&self) -> usize;

    /// Riemannian volume of the manifold.
    fn volume(&self) -> f64;

    /// Levels sorted by nondecreasing eigenvalue; level 0 is the constant mode.
    fn levels(&self) -> &[EigenLevel];

    fn num_levels(&self) -> usize {
        self.levels().len()
    }

    /// Whether [`EigenSystem::phi`] is available.
    fn has_members(&self) -> bool {
        true
    }

    /// Value of member `member` of level `level` at `x`.
    fn phi(&self, level: usize, member: usize, x: &ManifoldPoint) -> Result<f64>;

    /// All members of `level` at `x`, written into `out` (cleared first).
    fn level_members(&self, level: usize, x: &ManifoldPoint, out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        let mult = self.level(level)?.multiplicity;
        for k in 0..mult {
            out.push(self.phi(level, k, x)?);
        }
        Ok(())
    }

    /// `Σ_k f_{n,k}(x) f_{n,k}(x2)` for level `n`.
    fn pair_sum(&self, level: usize, x: &ManifoldPoint, x2: &ManifoldPoint) -> Result<f64>;

    /// Pair sums of the first `out.len()` levels.
    fn pair_sums(&self, x: &ManifoldPoint, x2: &ManifoldPoint, out: &mut [f64]) -> Result<()> {
        for (n, slot) in out.iter_mut().enumerate() {
            *slot = self.pair_sum(n, x, x2)?;
        }
        Ok(())
    }

    fn level(&self, n: usize) -> Result<&EigenLevel> {
        self.levels().get(n).ok_or_else(|| {
            Error::InvalidArgument(format!("level {n} out of range ({} levels)", self.num_levels()))
        })
    }

    fn check_point(&self, x: &ManifoldPoint) -> Result<()> {
        self.kind().check_point(x)
    }
}

/// Total number of eigenfunctions across all levels.
pub fn num_eigenfunctions(es: &dyn EigenSystem) -> usize {
    es.levels().iter().map(|l| l.multiplicity).sum()
}

pub(crate) fn check_member(level: &EigenLevel, member: usize) -> Result<()> {
    if member >= level.multiplicity {
        return Err(Error::InvalidArgument(format!(
            "member {member} out of range for level {} of multiplicity {}",
            level.index, level.multiplicity
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifold_kind_point_checks() {
        let c = ManifoldKind::Circle;
        assert!(c.check_point(&ManifoldPoint::Circle(0.3)).is_ok());
        assert!(c.check_point(&ManifoldPoint::Sphere(vec![1.0, 0.0, 0.0])).is_err());
        let m = ManifoldKind::Mesh { num_faces: 2, num_vertices: 4 };
        let p = ManifoldPoint::Mesh { face: 5, bary: [1.0, 0.0, 0.0] };
        assert!(m.check_point(&p).is_err());
        let s = ManifoldKind::Sphere { dim: 2 };
        assert!(s.check_point(&ManifoldPoint::Sphere(vec![1.0, 0.0])).is_err());
    }
}
