use std::f64::consts::{PI, SQRT_2};

/// Member `k` (zero-based, `0..2n+1`) of the real orthonormal basis of
/// degree-`n` spherical harmonics on S², evaluated at the unit vector `v`.
///
/// Member `k` has order `m = k - n`: negative orders use `sin(|m|φ)`,
/// positive orders `cos(mφ)`.
pub fn real_spherical_harmonic(n: usize, k: usize, v: &[f64]) -> f64 {
    assert!(k <= 2 * n, "member {k} out of range for degree {n}");
    let mut all = Vec::with_capacity(2 * n + 1);
    real_spherical_harmonics_degree(n, v, &mut all);
    all[k]
}

/// All `2n+1` real spherical harmonics of degree `n` at `v`, ordered by
/// `m = -n..=n`.
pub fn real_spherical_harmonics_degree(n: usize, v: &[f64], out: &mut Vec<f64>) {
    debug_assert_eq!(v.len(), 3);
    let (x, y, z) = (v[0], v[1], v[2]);
    let cos_t = z.clamp(-1.0, 1.0);
    let sin_t = (x * x + y * y).sqrt();
    let phi = y.atan2(x);

    out.clear();
    out.resize(2 * n + 1, 0.0);
    let mut pmm = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=n {
        if m > 0 {
            let mf = m as f64;
            pmm *= -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * sin_t;
        }
        let p = normalized_legendre_from(m, n, cos_t, pmm);
        if m == 0 {
            out[n] = p;
        } else {
            let (s, c) = (m as f64 * phi).sin_cos();
            out[n + m] = SQRT_2 * p * c;
            out[n - m] = SQRT_2 * p * s;
        }
    }
}

/// Orthonormalized associated Legendre `P̃_n^m(t)` by upward recurrence in
/// degree starting from `P̃_m^m = pmm`.
fn normalized_legendre_from(m: usize, n: usize, t: f64, pmm: f64) -> f64 {
    if n == m {
        return pmm;
    }
    let mf = m as f64;
    let mut p_prev = pmm;
    let mut p = (2.0 * mf + 3.0).sqrt() * t * pmm;
    for l in (m + 2)..=n {
        let lf = l as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
        let next = a * (t * p - b * p_prev);
        p_prev = p;
        p = next;
    }
    p
}
