use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use super::gegenbauer::{gegenbauer_at_one, gegenbauer_sequence};
use super::harmonics::real_spherical_harmonics_degree;
use super::{check_member, EigenLevel, EigenSystem, ManifoldKind};
use crate::error::{Error, Result};
use crate::point::ManifoldPoint;

/// Unit sphere `S^d ⊂ R^{d+1}`, `d ≥ 2`.
///
/// Pair sums use the addition formula; individual members are real spherical
/// harmonics and only exist for `d = 2`.
#[derive(Clone, Debug)]
pub struct SphereEigenSystem {
    dim: usize,
    volume: f64,
    levels: Vec<EigenLevel>,
    /// `c_{n,d}` per level.
    addition_constants: Vec<f64>,
}

/// `vol(S^d) = 2π^{(d+1)/2} / Γ((d+1)/2)`.
pub fn sphere_volume(dim: usize) -> f64 {
    let h = (dim as f64 + 1.0) / 2.0;
    2.0 * (h * PI.ln() - ln_gamma(h)).exp()
}

/// Dimension of the degree-`n` spherical-harmonic eigenspace on `S^d`:
/// `(2n+d-1) Γ(n+d-1) / (Γ(d) Γ(n+1))`.
pub fn sphere_multiplicity(n: usize, dim: usize) -> usize {
    let (nf, df) = (n as f64, dim as f64);
    let v = (2.0 * nf + df - 1.0).ln() + ln_gamma(nf + df - 1.0) - ln_gamma(df) - ln_gamma(nf + 1.0);
    v.exp().round() as usize
}

pub fn sphere_eigensystem(dim: usize, num_levels: usize) -> Result<SphereEigenSystem> {
    if dim < 2 {
        return Err(Error::InvalidArgument(format!("sphere dimension must be ≥ 2, got {dim}")));
    }
    if num_levels == 0 {
        return Err(Error::InvalidArgument("num_levels must be at least 1".into()));
    }
    let volume = sphere_volume(dim);
    let alpha = (dim as f64 - 1.0) / 2.0;
    let mut levels = Vec::with_capacity(num_levels);
    let mut addition_constants = Vec::with_capacity(num_levels);
    for n in 0..num_levels {
        let multiplicity = sphere_multiplicity(n, dim);
        levels.push(EigenLevel {
            index: n,
            eigenvalue: (n * (n + dim - 1)) as f64,
            multiplicity,
        });
        addition_constants.push(multiplicity as f64 / (volume * gegenbauer_at_one(n, alpha)));
    }
    Ok(SphereEigenSystem {
        dim,
        volume,
        levels,
        addition_constants,
    })
}

impl SphereEigenSystem {
    fn alpha(&self) -> f64 {
        (self.dim as f64 - 1.0) / 2.0
    }

    /// `c_{n,d}` of the addition formula.
    pub fn addition_constant(&self, n: usize) -> f64 {
        self.addition_constants[n]
    }

    fn vector<'a>(&self, x: &'a ManifoldPoint) -> Result<&'a [f64]> {
        self.check_point(x)?;
        match x {
            ManifoldPoint::Sphere(v) => Ok(v),
            _ => unreachable!("checked above"),
        }
    }

    fn cosine(&self, x: &ManifoldPoint, x2: &ManifoldPoint) -> Result<f64> {
        let (a, b) = (self.vector(x)?, self.vector(x2)?);
        Ok(cos_geodesic(a, b))
    }

    fn require_members(&self) -> Result<()> {
        if self.dim != 2 {
            return Err(Error::Unsupported("per-member eigenfunctions only for S²".into()));
        }
        Ok(())
    }
}

/// Clamped inner product of two unit vectors, i.e. `cos d_g`.
pub(crate) fn cos_geodesic(a: &[f64], b: &[f64]) -> f64 {
    let t: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
    t.clamp(-1.0, 1.0)
}

impl EigenSystem for SphereEigenSystem {
    fn kind(&self) -> ManifoldKind {
        ManifoldKind::Sphere { dim: self.dim }
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn volume(&self) -> f64 {
        self.volume
    }

    fn levels(&self) -> &[EigenLevel] {
        &self.levels
    }

    fn has_members(&self) -> bool {
        self.dim == 2
    }

    fn phi(&self, level: usize, member: usize, x: &ManifoldPoint) -> Result<f64> {
        self.require_members()?;
        check_member(self.level(level)?, member)?;
        let mut out = Vec::new();
        real_spherical_harmonics_degree(level, self.vector(x)?, &mut out);
        Ok(out[member])
    }

    fn level_members(&self, level: usize, x: &ManifoldPoint, out: &mut Vec<f64>) -> Result<()> {
        self.require_members()?;
        self.level(level)?;
        real_spherical_harmonics_degree(level, self.vector(x)?, out);
        Ok(())
    }

    fn pair_sum(&self, level: usize, x: &ManifoldPoint, x2: &ManifoldPoint) -> Result<f64> {
        self.level(level)?;
        let t = self.cosine(x, x2)?;
        Ok(self.addition_constants[level] * super::gegenbauer(level, self.alpha(), t))
    }

    fn pair_sums(&self, x: &ManifoldPoint, x2: &ManifoldPoint, out: &mut [f64]) -> Result<()> {
        if out.len() > self.levels.len() {
            return Err(Error::InvalidArgument(format!(
                "requested {} levels, only {} available",
                out.len(),
                self.levels.len()
            )));
        }
        let t = self.cosine(x, x2)?;
        gegenbauer_sequence(self.alpha(), t, out);
        for (slot, c) in out.iter_mut().zip(&self.addition_constants) {
            *slot *= c;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(n: usize, k: usize) -> usize {
        if k > n {
            return 0;
        }
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    /// Harmonic homogeneous polynomials of degree n in m variables:
    /// dim P_n - dim P_{n-2}.
    fn harmonic_dim(n: usize, vars: usize) -> usize {
        let p = |deg: usize| binomial(deg + vars - 1, vars - 1);
        p(n) - if n >= 2 { p(n - 2) } else { 0 }
    }

    #[test]
    fn levels_and_multiplicities() {
        let es = sphere_eigensystem(2, 4).unwrap();
        assert_eq!(es.levels()[1].eigenvalue, 2.0);
        assert_eq!(es.levels()[1].multiplicity, 3);
        assert_eq!(sphere_multiplicity(2, 3), 9);
        for d in 2..7 {
            for n in 0..20 {
                assert_eq!(sphere_multiplicity(n, d), harmonic_dim(n, d + 1), "n={n} d={d}");
            }
        }
    }

    #[test]
    fn volumes() {
        assert!((sphere_volume(2) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_volume(3) - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn constant_level_pair_sum() {
        let es = sphere_eigensystem(2, 3).unwrap();
        let a = ManifoldPoint::sphere(&[1.0, 2.0, 3.0]).unwrap();
        let b = ManifoldPoint::sphere(&[-1.0, 0.5, 0.0]).unwrap();
        assert!((es.pair_sum(0, &a, &b).unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn diagonal_pair_sum_is_multiplicity_over_volume() {
        for d in 2..5 {
            let es = sphere_eigensystem(d, 10).unwrap();
            let mut v = vec![0.0; d + 1];
            v[0] = 1.0;
            let x = ManifoldPoint::sphere(&v).unwrap();
            let mut out = vec![0.0; 10];
            es.pair_sums(&x, &x, &mut out).unwrap();
            for (n, p) in out.iter().enumerate() {
                let expected = es.levels()[n].multiplicity as f64 / es.volume();
                assert!((p - expected).abs() < 1e-12 * expected.max(1.0));
            }
        }
    }

    #[test]
    fn members_only_on_s2() {
        let es = sphere_eigensystem(3, 3).unwrap();
        let x = ManifoldPoint::sphere(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        let err = es.phi(1, 0, &x).unwrap_err();
        assert!(err.to_string().contains("per-member eigenfunctions only for S²"));
        assert!(es.pair_sum(1, &x, &x).is_ok());
    }

    #[test]
    fn antipodal_and_coincident_points_are_finite() {
        let es = sphere_eigensystem(2, 30).unwrap();
        let a = ManifoldPoint::sphere(&[0.0, 0.0, 1.0]).unwrap();
        let b = ManifoldPoint::sphere(&[0.0, 0.0, -1.0]).unwrap();
        let mut out = vec![0.0; 30];
        es.pair_sums(&a, &b, &mut out).unwrap();
        assert!(out.iter().all(|v| v.is_finite()));
    }
}
