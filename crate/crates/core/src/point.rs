use std::fmt;

use crate::error::{Error, Result};

/// A point on one of the supported manifolds.
///
/// Circle and torus coordinates live in `[0, 1)`, identified with the angle
/// `2πx`. Sphere points are unit vectors in `R^{d+1}`. Mesh points are given
/// by a face index and barycentric coordinates within that face.
#[derive(Clone, Debug, PartialEq)]
pub enum ManifoldPoint {
    Circle(f64),
    Torus(Vec<f64>),
    Sphere(Vec<f64>),
    Mesh { face: usize, bary: [f64; 3] },
}

const UNIT_TOL: f64 = 1e-12;

fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    // rem_euclid can return exactly 1.0 for tiny negative inputs
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl ManifoldPoint {
    pub fn circle(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::InvalidArgument(format!("circle coordinate {x}")));
        }
        Ok(ManifoldPoint::Circle(wrap_unit(x)))
    }

    pub fn torus(x: &[f64]) -> Result<Self> {
        if x.is_empty() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("torus coordinates {x:?}")));
        }
        Ok(ManifoldPoint::Torus(x.iter().map(|&v| wrap_unit(v)).collect()))
    }

    /// Renormalizes `v` onto the unit sphere. The zero vector is rejected.
    pub fn sphere(v: &[f64]) -> Result<Self> {
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if v.len() < 2 || !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidArgument(format!(
                "sphere point must be a nonzero finite vector, got {v:?}"
            )));
        }
        Ok(ManifoldPoint::Sphere(v.iter().map(|a| a / norm).collect()))
    }

    pub fn mesh(face: usize, bary: [f64; 3]) -> Result<Self> {
        let sum: f64 = bary.iter().sum();
        if bary.iter().any(|b| !(-UNIT_TOL..=1.0 + UNIT_TOL).contains(b)) || (sum - 1.0).abs() > UNIT_TOL
        {
            return Err(Error::InvalidArgument(format!(
                "barycentric coordinates {bary:?} must lie in [0,1] and sum to 1"
            )));
        }
        Ok(ManifoldPoint::Mesh {
            face,
            bary: bary.map(|b| b.clamp(0.0, 1.0)),
        })
    }

    pub fn kind_name(&self) -> String {
        match self {
            ManifoldPoint::Circle(_) => "circle".into(),
            ManifoldPoint::Torus(x) => format!("T^{}", x.len()),
            ManifoldPoint::Sphere(v) => format!("S^{}", v.len() - 1),
            ManifoldPoint::Mesh { .. } => "mesh".into(),
        }
    }
}

impl fmt::Display for ManifoldPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match self {
            ManifoldPoint::Circle(x) => write!(f, "{x}"),
            ManifoldPoint::Torus(x) | ManifoldPoint::Sphere(x) => write!(f, "{}", join(x)),
            ManifoldPoint::Mesh { face, bary } => write!(f, "face:{face}:{}", join(bary)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_wraps_into_unit_interval() {
        assert_eq!(ManifoldPoint::circle(1.25).unwrap(), ManifoldPoint::Circle(0.25));
        assert_eq!(ManifoldPoint::circle(-0.25).unwrap(), ManifoldPoint::Circle(0.75));
        match ManifoldPoint::circle(-1e-300).unwrap() {
            ManifoldPoint::Circle(x) => assert!((0.0..1.0).contains(&x)),
            _ => unreachable!(),
        }
    }

    #[test]
    fn sphere_renormalizes_and_rejects_zero() {
        let p = ManifoldPoint::sphere(&[3.0, 0.0, 4.0]).unwrap();
        assert_eq!(p, ManifoldPoint::Sphere(vec![0.6, 0.0, 0.8]));
        assert!(ManifoldPoint::sphere(&[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn mesh_bary_must_sum_to_one() {
        assert!(ManifoldPoint::mesh(0, [0.2, 0.3, 0.5]).is_ok());
        assert!(ManifoldPoint::mesh(0, [0.2, 0.3, 0.6]).is_err());
        assert!(ManifoldPoint::mesh(0, [-0.1, 0.6, 0.5]).is_err());
    }
}
