use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

use super::{check_member, EigenLevel, EigenSystem, ManifoldKind};
use crate::error::{Error, Result};
use crate::point::ManifoldPoint;

/// Flat torus `T^d = (R/Z)^d` with unit volume.
///
/// Eigenfunctions are `√2 cos(2π τ·x)` and `√2 sin(2π τ·x)` for one
/// representative `τ` of each `±τ` pair in `Z^d`, plus the constant.
/// Members of a level alternate cos/sin per representative.
#[derive(Clone, Debug)]
pub struct TorusEigenSystem {
    dim: usize,
    circle: bool,
    levels: Vec<EigenLevel>,
    /// `rep_offsets[n]..rep_offsets[n+1]` indexes the representatives of level `n`.
    rep_offsets: Vec<usize>,
    /// Flattened frequency vectors, `dim` entries each.
    reps: Vec<i64>,
}

/// Eigensystem of the unit-length circle with `num_levels` levels
/// (frequencies `0..num_levels`).
pub fn circle_eigensystem(num_levels: usize) -> Result<TorusEigenSystem> {
    if num_levels == 0 {
        return Err(Error::InvalidArgument("num_levels must be at least 1".into()));
    }
    let mut es = TorusEigenSystem::build(1, num_levels as i64 - 1);
    es.circle = true;
    Ok(es)
}

/// Eigensystem of `T^d` using every frequency with `‖τ‖_∞ ≤ max_freq`.
pub fn torus_eigensystem(dim: usize, max_freq: usize) -> Result<TorusEigenSystem> {
    if dim == 0 || max_freq == 0 {
        return Err(Error::InvalidArgument(format!(
            "torus needs d ≥ 1 and max_freq ≥ 1 (got d={dim}, max_freq={max_freq})"
        )));
    }
    Ok(TorusEigenSystem::build(dim, max_freq as i64))
}

/// True if the first nonzero coordinate of `tau` is positive.
fn is_half_lattice_rep(tau: &[i64]) -> bool {
    tau.iter().find(|&&t| t != 0).is_some_and(|&t| t > 0)
}

impl TorusEigenSystem {
    fn build(dim: usize, max_freq: i64) -> Self {
        // group by |τ|², which is an integer, so grouping is exact
        let mut groups: BTreeMap<i64, Vec<Vec<i64>>> = BTreeMap::new();
        groups.insert(0, vec![vec![0; dim]]);
        let side = (2 * max_freq + 1) as usize;
        let total = side.pow(dim as u32);
        let mut tau = vec![0i64; dim];
        for mut idx in 0..total {
            for t in tau.iter_mut() {
                *t = (idx % side) as i64 - max_freq;
                idx /= side;
            }
            if is_half_lattice_rep(&tau) {
                let sq: i64 = tau.iter().map(|t| t * t).sum();
                groups.entry(sq).or_default().push(tau.clone());
            }
        }

        let mut levels = Vec::with_capacity(groups.len());
        let mut rep_offsets = vec![0];
        let mut reps = Vec::new();
        for (n, (sq, mut members)) in groups.into_iter().enumerate() {
            members.sort();
            let multiplicity = if sq == 0 { 1 } else { 2 * members.len() };
            levels.push(EigenLevel {
                index: n,
                eigenvalue: 4.0 * PI * PI * sq as f64,
                multiplicity,
            });
            for m in members {
                reps.extend(m);
            }
            rep_offsets.push(reps.len() / dim);
        }
        TorusEigenSystem {
            dim,
            circle: false,
            levels,
            rep_offsets,
            reps,
        }
    }

    fn coords<'a>(&self, x: &'a ManifoldPoint) -> Result<&'a [f64]> {
        self.check_point(x)?;
        Ok(match x {
            ManifoldPoint::Circle(v) => std::slice::from_ref(v),
            ManifoldPoint::Torus(v) => v.as_slice(),
            _ => unreachable!("checked above"),
        })
    }

    fn level_reps(&self, n: usize) -> impl Iterator<Item = &[i64]> {
        let (a, b) = (self.rep_offsets[n], self.rep_offsets[n + 1]);
        self.reps[a * self.dim..b * self.dim].chunks(self.dim)
    }

    fn phase(tau: &[i64], x: &[f64]) -> f64 {
        2.0 * PI * tau.iter().zip(x).map(|(&t, &v)| t as f64 * v).sum::<f64>()
    }
}

impl EigenSystem for TorusEigenSystem {
    fn kind(&self) -> ManifoldKind {
        if self.circle {
            ManifoldKind::Circle
        } else {
            ManifoldKind::Torus { dim: self.dim }
        }
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn volume(&self) -> f64 {
        1.0
    }

    fn levels(&self) -> &[EigenLevel] {
        &self.levels
    }

    fn phi(&self, level: usize, member: usize, x: &ManifoldPoint) -> Result<f64> {
        let lvl = self.level(level)?;
        check_member(lvl, member)?;
        let x = self.coords(x)?;
        if level == 0 {
            return Ok(1.0);
        }
        let tau = self.level_reps(level).nth(member / 2).expect("member checked");
        let p = Self::phase(tau, x);
        Ok(SQRT_2 * if member.is_multiple_of(2) { p.cos() } else { p.sin() })
    }

    fn level_members(&self, level: usize, x: &ManifoldPoint, out: &mut Vec<f64>) -> Result<()> {
        self.level(level)?;
        let x = self.coords(x)?;
        out.clear();
        if level == 0 {
            out.push(1.0);
            return Ok(());
        }
        for tau in self.level_reps(level) {
            let (s, c) = Self::phase(tau, x).sin_cos();
            out.push(SQRT_2 * c);
            out.push(SQRT_2 * s);
        }
        Ok(())
    }

    fn pair_sum(&self, level: usize, x: &ManifoldPoint, x2: &ManifoldPoint) -> Result<f64> {
        self.level(level)?;
        let (a, b) = (self.coords(x)?, self.coords(x2)?);
        Ok(self.pair_sum_diff(level, &diff(a, b)))
    }

    fn pair_sums(&self, x: &ManifoldPoint, x2: &ManifoldPoint, out: &mut [f64]) -> Result<()> {
        if out.len() > self.levels.len() {
            return Err(Error::InvalidArgument(format!(
                "requested {} levels, only {} available",
                out.len(),
                self.levels.len()
            )));
        }
        let delta = diff(self.coords(x)?, self.coords(x2)?);
        for (n, slot) in out.iter_mut().enumerate() {
            *slot = self.pair_sum_diff(n, &delta);
        }
        Ok(())
    }
}

impl TorusEigenSystem {
    /// Pair sum as a function of the coordinate difference `x - x2`.
    fn pair_sum_diff(&self, level: usize, delta: &[f64]) -> f64 {
        if level == 0 {
            return 1.0;
        }
        self.level_reps(level).map(|tau| 2.0 * Self::phase(tau, delta).cos()).sum()
    }
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    // wrapped to [-1/2, 1/2); cos(2π τ·δ) is invariant under integer shifts
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d - d.round()
        })
        .collect()
}
