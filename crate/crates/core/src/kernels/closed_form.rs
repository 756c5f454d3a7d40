use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use super::{spectral_weights, Hyperparameters, Smoothness};
use crate::error::{Error, Result};
use crate::point::ManifoldPoint;
use crate::spectral::{gegenbauer_at_one, gegenbauer_sequence, sphere_eigensystem, ManifoldKind};

/// Terms of the ϑ₃ series are dropped once `q^{n²}` falls below this.
const THETA_TAIL: f64 = 1e-17;

fn unsupported_nu(nu: Smoothness) -> Error {
    Error::Unsupported(format!("closed form for ν = {nu} (only 1/2, 3/2, 5/2, ∞)"))
}

/// Euclidean Matérn / squared-exponential kernel at distance `r`.
pub fn matern_euclidean(nu: Smoothness, kappa: f64, sigma2: f64, r: f64) -> Result<f64> {
    if r < 0.0 || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("distance must be nonnegative, got {r}")));
    }
    let s = r / kappa;
    let v = if nu.is_half(1) {
        (-s).exp()
    } else if nu.is_half(3) {
        let a = 3f64.sqrt() * s;
        (1.0 + a) * (-a).exp()
    } else if nu.is_half(5) {
        let a = 5f64.sqrt() * s;
        (1.0 + a + 5.0 * s * s / 3.0) * (-a).exp()
    } else if nu == Smoothness::Infinite {
        (-s * s / 2.0).exp()
    } else {
        return Err(unsupported_nu(nu));
    };
    Ok(sigma2 * v)
}

/// `ϑ₃(z, q) = 1 + 2 Σ_{n≥1} q^{n²} cos(2nz)`.
pub fn jacobi_theta3(z: f64, q: f64) -> f64 {
    assert!((0.0..1.0).contains(&q), "nome must lie in [0, 1)");
    let mut sum = 1.0;
    let mut n = 1u64;
    loop {
        let term = q.powf((n * n) as f64);
        if term < THETA_TAIL {
            break;
        }
        sum += 2.0 * term * (2.0 * n as f64 * z).cos();
        n += 1;
    }
    sum
}

/// `cosh(u)` and `sinh(u)` scaled by `e^{-scale}`, for `|u| ≤ scale`.
fn scaled_hyperbolic(u: f64, scale: f64) -> (f64, f64) {
    let a = (u.abs() - scale).exp();
    let b = (-u.abs() - scale).exp();
    let c = (a + b) / 2.0;
    let s = (a - b) / 2.0 * u.signum();
    (c, s)
}

/// Exact Matérn / squared-exponential kernel on the unit-length circle.
///
/// `x` and `x2` are circle coordinates in `[0, 1)`. The half-integer forms
/// are evaluated in `u = √(2ν)(r - 1/2)/κ` and renormalized by their value
/// at `r = 0`.
pub fn circle_closed_form(h: &Hyperparameters, x: f64, x2: f64) -> Result<f64> {
    h.validate()?;
    let r = (x - x2).rem_euclid(1.0);
    let k = h.kappa;
    let shape = |u: f64, u0: f64, f: &dyn Fn(f64, f64, f64) -> f64| {
        // both evaluations share the e^{-|u0|} scaling
        let scale = u0.abs();
        let (c, s) = scaled_hyperbolic(u, scale);
        let (c0, s0) = scaled_hyperbolic(u0, scale);
        f(u, c, s) / f(u0, c0, s0)
    };
    let value = if h.nu.is_half(1) {
        let u = (r - 0.5) / k;
        shape(u, -0.5 / k, &|_, c, _| c)
    } else if h.nu.is_half(3) {
        let sq3 = 3f64.sqrt();
        let coth = 1.0 / (sq3 / (2.0 * k)).tanh();
        let a0 = PI * PI * k / 3.0 * (2.0 * k + sq3 * coth);
        let a1 = -2.0 * PI * PI * k * k / 3.0;
        let u = sq3 * (r - 0.5) / k;
        shape(u, -sq3 * 0.5 / k, &|u, c, s| a0 * c + a1 * u * s)
    } else if h.nu.is_half(5) {
        let sq5 = 5f64.sqrt();
        let coth = 1.0 / (sq5 / (2.0 * k)).tanh();
        let pi4 = PI.powi(4);
        let a0 = -pi4 * k * k / 50.0 * (-5.0 + 12.0 * k * k + 6.0 * sq5 * k * coth + 10.0 * coth * coth);
        let a1 = 2.0 * pi4 * k.powi(3) / 25.0 * (3.0 * k + sq5 * coth);
        let a2 = -2.0 * pi4 * k.powi(4) / 25.0;
        let u = sq5 * (r - 0.5) / k;
        shape(u, -sq5 * 0.5 / k, &|u, c, s| a0 * c + a1 * u * s + a2 * u * u * c)
    } else if h.nu == Smoothness::Infinite {
        let q = (-2.0 * PI * PI * k * k).exp();
        jacobi_theta3(PI * r, q) / jacobi_theta3(0.0, q)
    } else {
        return Err(unsupported_nu(h.nu));
    };
    Ok(h.sigma2 * value)
}

/// Periodic summation of the Euclidean kernel over lattice shifts with
/// `‖n‖_∞ ≤ radius`, normalized so that coincident points give `σ²`.
pub fn torus_periodic_kernel(
    nu: Smoothness,
    kappa: f64,
    sigma2: f64,
    x: &[f64],
    x2: &[f64],
    radius: usize,
) -> Result<f64> {
    if x.len() != x2.len() || x.is_empty() {
        return Err(Error::InvalidArgument("torus points of different dimension".into()));
    }
    if radius == 0 {
        return Err(Error::InvalidArgument("periodic radius must be ≥ 1".into()));
    }
    let delta: Vec<f64> = x
        .iter()
        .zip(x2)
        .map(|(a, b)| {
            let d = a - b;
            d - d.round()
        })
        .collect();
    let zero = vec![0.0; x.len()];
    let num = lattice_sum(nu, kappa, &delta, radius)?;
    let den = lattice_sum(nu, kappa, &zero, radius)?;
    Ok(sigma2 * num / den)
}

fn lattice_sum(nu: Smoothness, kappa: f64, delta: &[f64], radius: usize) -> Result<f64> {
    let dim = delta.len();
    let side = 2 * radius + 1;
    let r = radius as i64;
    let mut total = 0.0;
    for mut idx in 0..side.pow(dim as u32) {
        let mut sq = 0.0;
        for d in delta {
            let n = (idx % side) as i64 - r;
            idx /= side;
            let v = d + n as f64;
            sq += v * v;
        }
        total += matern_euclidean(nu, kappa, 1.0, sq.sqrt())?;
    }
    Ok(total)
}

/// `Σ_{n<N} ρ(n) c_{n,d} C_n^{((d-1)/2)}(cos d_g)` on `S^d`, with
/// `c_{n,d} = d_n Γ((d+1)/2) / (2π^{(d+1)/2} C_n(1))`.
pub(crate) fn sphere_gegenbauer_series(
    density: &[f64],
    dim: usize,
    x: &ManifoldPoint,
    x2: &ManifoldPoint,
) -> Result<f64> {
    let (a, b) = match (x, x2) {
        (ManifoldPoint::Sphere(a), ManifoldPoint::Sphere(b)) if a.len() == dim + 1 && b.len() == dim + 1 => {
            (a, b)
        }
        _ => {
            return Err(Error::ManifoldMismatch {
                expected: format!("S^{dim}"),
                found: x.kind_name(),
            })
        }
    };
    let t = crate::spectral::sphere::cos_geodesic(a, b);
    let alpha = (dim as f64 - 1.0) / 2.0;
    let mut c = vec![0.0; density.len()];
    gegenbauer_sequence(alpha, t, &mut c);
    let h = (dim as f64 + 1.0) / 2.0;
    let log_front = ln_gamma(h) - (2f64).ln() - h * PI.ln();
    let mut sum = 0.0;
    for (n, (rho, cn)) in density.iter().zip(&c).enumerate() {
        let dn = crate::spectral::sphere_multiplicity(n, dim) as f64;
        let cnd = dn * log_front.exp() / gegenbauer_at_one(n, alpha);
        sum += rho * cnd * cn;
    }
    Ok(sum)
}

/// Kernel on `S^d` via the Gegenbauer form with `N` levels.
pub fn sphere_gegenbauer_kernel(h: &Hyperparameters, x: &ManifoldPoint, x2: &ManifoldPoint, n: usize) -> Result<f64> {
    let dim = match x {
        ManifoldPoint::Sphere(v) => v.len() - 1,
        other => {
            return Err(Error::ManifoldMismatch {
                expected: "sphere".into(),
                found: other.kind_name(),
            })
        }
    };
    let es = sphere_eigensystem(dim, n)?;
    let w = spectral_weights(h, &es)?;
    sphere_gegenbauer_series(&w.density, dim, x, x2)
}

/// `σ² exp(-d_g² / (2κ²))` with `d_g` the geodesic distance in radians.
///
/// Circle and torus coordinates in `[0, 1)` map to angles `2πx`.
pub fn naive_geodesic_kernel(
    kappa: f64,
    sigma2: f64,
    kind: ManifoldKind,
    x: &ManifoldPoint,
    x2: &ManifoldPoint,
) -> Result<f64> {
    kind.check_point(x)?;
    kind.check_point(x2)?;
    let dist = match (x, x2) {
        (ManifoldPoint::Circle(a), ManifoldPoint::Circle(b)) => wrapped_angle(a - b),
        (ManifoldPoint::Torus(a), ManifoldPoint::Torus(b)) => {
            a.iter().zip(b).map(|(p, q)| wrapped_angle(p - q).powi(2)).sum::<f64>().sqrt()
        }
        (ManifoldPoint::Sphere(a), ManifoldPoint::Sphere(b)) => crate::spectral::sphere::cos_geodesic(a, b).acos(),
        _ => return Err(Error::Unsupported(format!("naive geodesic kernel on {kind}"))),
    };
    Ok(sigma2 * (-dist * dist / (2.0 * kappa * kappa)).exp())
}

fn wrapped_angle(d: f64) -> f64 {
    let r = d.rem_euclid(1.0);
    2.0 * PI * r.min(1.0 - r)
}
