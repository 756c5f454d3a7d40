use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{EnvelopeCholesky, MeshEigenSystem, SparseSymmetric};
use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;

const BLOCK: usize = 8;
const SEED: u64 = 0x524d_4750;

/// Outcome of an eigensolve.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    /// `‖S f − λ M f‖ / max(‖S f‖, √ε ‖S‖∞ ‖f‖)` per eigenpair.
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// Operator applications (linear solves) used.
    pub operator_applications: usize,
    /// Krylov basis size at termination; 0 for the dense path.
    pub krylov_dimension: usize,
    pub shift: f64,
}

impl SolveReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// The `n` smallest eigenpairs of `S f = λ M f` with `M = diag(mass)`.
///
/// Works on the symmetric operator `M^{1/2} (S + μM)^{-1} M^{1/2}` with a
/// block Lanczos iteration and full reorthogonalization. When `S` annihilates
/// constants the constant mode is deflated exactly. On hitting the iteration
/// cap the best pairs found are returned with `converged = false`.
pub fn solve_smallest_eigenpairs(
    s: &SparseSymmetric,
    mass: &[f64],
    n: usize,
    tol: f64,
) -> Result<(MeshEigenSystem, SolveReport)> {
    let k = s.dim();
    if mass.len() != k {
        return Err(Error::InvalidArgument(format!("mass has {} entries, matrix has order {k}", mass.len())));
    }
    if n == 0 || n > k {
        return Err(Error::InvalidArgument(format!("requested {n} eigenpairs from a system of order {k}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if let Some(m) = mass.iter().find(|&&m| !(m > 0.0) || !m.is_finite()) {
        return Err(Error::InvalidArgument(format!("mass entries must be positive, found {m}")));
    }

    let sqrt_m: Vec<f64> = mass.iter().map(|m| m.sqrt()).collect();
    let vol: f64 = mass.iter().sum();
    let s_norm = s.norm_inf();
    let shift = 1e-8 * s.trace() / k as f64;

    // constant null vector, in the symmetric frame
    let ones = vec![1.0; k];
    let mut s1 = vec![0.0; k];
    s.mul_vec(&ones, &mut s1);
    let null_resid = s1.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let deflate = null_resid <= 1e-12 * s_norm.max(f64::MIN_POSITIVE);
    let null_vec: Option<DVector<f64>> =
        deflate.then(|| DVector::from_iterator(k, sqrt_m.iter().map(|x| x / vol.sqrt())));

    let residual_of = |f: &[f64], lambda: f64| relative_residual(s, s_norm, mass, f, lambda);
    // symmetric-frame vector → (λ, mass-normalized f)
    let finish = |y: &[f64]| -> (f64, Vec<f64>) {
        let mut f: Vec<f64> = y.iter().zip(&sqrt_m).map(|(a, b)| a / b).collect();
        let mnorm = f.iter().zip(mass).map(|(a, m)| a * a * m).sum::<f64>().sqrt();
        f.iter_mut().for_each(|x| *x /= mnorm);
        (s.quadratic_form(&f), f)
    };

    let fixed = usize::from(deflate);
    let wanted = n - fixed;
    let k_eff = k - fixed;
    let mut pairs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n);
    if let Some(v) = &null_vec {
        pairs.push(finish(v.as_slice()));
    }

    let (converged, applications, krylov) = if wanted == 0 {
        (true, 0, 0)
    } else if k_eff < wanted + 2 * BLOCK + 8 {
        // too small for a Krylov basis to pay off
        let mut b = s.to_dense();
        for i in 0..k {
            for j in 0..k {
                b[(i, j)] /= sqrt_m[i] * sqrt_m[j];
            }
        }
        let eig = SymmetricEigen::new(b);
        let mut idx: Vec<usize> = (0..k).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        for &i in idx.iter().skip(fixed).take(wanted) {
            let y: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            pairs.push(finish(&y));
        }
        let ok = pairs.iter().all(|(l, f)| residual_of(f, *l) <= tol);
        (ok, 0, 0)
    } else {
        let chol = EnvelopeCholesky::factor(&s.add_diagonal(mass, shift))
            .map_err(|e| Error::Numerical(format!("shifted stiffness is not positive definite: {e}")))?;
        let apply = |x: &[f64], out: &mut [f64]| {
            for i in 0..k {
                out[i] = x[i] * sqrt_m[i];
            }
            chol.solve_in_place(out);
            for i in 0..k {
                out[i] *= sqrt_m[i];
            }
        };
        let cap = (10 * n + 100).min(k_eff).max(wanted + 2 * BLOCK);
        let mut accepted: Vec<(f64, Vec<f64>)> = Vec::new();
        let accept = |_: &[f64], y: &DMatrix<f64>, accepted: &mut Vec<(f64, Vec<f64>)>| -> bool {
            accepted.clear();
            for c in 0..y.ncols() {
                let col: Vec<f64> = y.column(c).iter().copied().collect();
                accepted.push(finish(&col));
            }
            accepted.iter().all(|(l, f)| residual_of(f, *l) <= tol)
        };
        let out = block_lanczos(k, wanted, cap, tol, null_vec.as_ref(), apply, |t, y| accept(t, y, &mut accepted))?;
        pairs.extend(accepted);
        (out.converged, out.applications, out.dimension)
    };

    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut eigenvectors = DMatrix::zeros(k, n);
    let mut eigenvalues = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    for (j, (lambda, mut f)) in pairs.into_iter().enumerate() {
        residuals.push(residual_of(&f, lambda));
        let big = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if let Some(p) = f.iter().position(|x| x.abs() >= 0.999 * big) {
            if f[p] < 0.0 {
                f.iter_mut().for_each(|x| *x = -*x);
            }
        }
        eigenvalues.push(lambda.max(0.0));
        eigenvectors.set_column(j, &DVector::from_vec(f));
    }
    let report = SolveReport {
        converged: converged && residuals.iter().all(|&r| r <= tol),
        residuals,
        operator_applications: applications,
        krylov_dimension: krylov,
        shift,
    };
    if !report.converged {
        log::warn!(
            "eigensolver stopped at the iteration cap; worst relative residual {:e}",
            report.max_residual()
        );
    }
    let system = MeshEigenSystem::new(eigenvalues, eigenvectors, mass.to_vec(), 2, vol)?;
    Ok((system, report))
}

/// `‖S f − λ M f‖ / max(‖S f‖, √ε ‖S‖∞ ‖f‖)`; `s_norm` is `‖S‖∞`.
pub(crate) fn relative_residual(s: &SparseSymmetric, s_norm: f64, mass: &[f64], f: &[f64], lambda: f64) -> f64 {
    let mut sf = vec![0.0; f.len()];
    s.mul_vec(f, &mut sf);
    let num = sf
        .iter()
        .zip(f)
        .zip(mass)
        .map(|((a, b), m)| (a - lambda * m * b).powi(2))
        .sum::<f64>()
        .sqrt();
    let fnorm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sfnorm = sf.iter().map(|x| x * x).sum::<f64>().sqrt();
    num / sfnorm.max(f64::EPSILON.sqrt() * s_norm * fnorm).max(f64::MIN_POSITIVE)
}

struct LanczosOutcome {
    converged: bool,
    applications: usize,
    dimension: usize,
}

/// Block Lanczos for the `nev` largest eigenpairs of a symmetric operator,
/// optionally restricted to the orthogonal complement of `deflate`.
/// `accept` receives candidate Ritz values and vectors once the cheap
/// residual estimates pass; a rejection tightens the estimate threshold.
fn block_lanczos<A, F>(
    k: usize,
    nev: usize,
    cap: usize,
    tol: f64,
    deflate: Option<&DVector<f64>>,
    apply: A,
    mut accept: F,
) -> Result<LanczosOutcome>
where
    A: Fn(&[f64], &mut [f64]),
    F: FnMut(&[f64], &DMatrix<f64>) -> bool,
{
    let b = BLOCK;
    let mut rng = ChaCha20Rng::seed_from_u64(SEED);
    let mut q = DMatrix::<f64>::zeros(k, cap);
    let mut t = DMatrix::<f64>::zeros(cap, cap);

    let mut start = DMatrix::from_fn(k, b, |_, _| StandardNormal.sample(&mut rng));
    if let Some(d) = deflate {
        for _ in 0..2 {
            let c = d.tr_mul(&start);
            start -= d * c;
        }
    }
    let (v0, _) = orthonormalize_block(start, &q, 0, deflate, &mut rng);
    q.columns_mut(0, b).copy_from(&v0);

    let check_every = nev.div_ceil(2 * b).max(1);
    let mut est_tol = tol;
    let mut b_prev: Option<DMatrix<f64>> = None;
    let mut applications = 0;
    let mut buf_in = vec![0.0; k];
    let mut buf_out = vec![0.0; k];
    let mut j = 0;
    loop {
        let m = (j + 1) * b;
        let vj = q.columns(j * b, b).into_owned();
        let mut w = DMatrix::<f64>::zeros(k, b);
        for c in 0..b {
            buf_in.iter_mut().zip(vj.column(c).iter()).for_each(|(d, s)| *d = *s);
            apply(&buf_in, &mut buf_out);
            w.column_mut(c).copy_from_slice(&buf_out);
        }
        applications += b;

        let mut aj = vj.tr_mul(&w);
        aj = (&aj + aj.transpose()) * 0.5;
        w -= &vj * &aj;
        if let Some(bp) = &b_prev {
            w -= q.columns((j - 1) * b, b) * bp.transpose();
        }
        for _ in 0..2 {
            let basis = q.columns(0, m);
            let c = basis.tr_mul(&w);
            w -= basis * c;
            if let Some(d) = deflate {
                let c = d.tr_mul(&w);
                w -= d * c;
            }
        }
        t.view_mut((j * b, j * b), (b, b)).copy_from(&aj);
        let (v_next, bj) = orthonormalize_block(w, &q, m, deflate, &mut rng);

        let last = m + b > cap;
        if m >= nev + b && (j % check_every == 0 || last) {
            let tm = t.view((0, 0), (m, m)).into_owned();
            let eig = SymmetricEigen::new(tm);
            let mut idx: Vec<usize> = (0..m).collect();
            idx.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
            idx.truncate(nev);
            let thetas: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
            let passes = idx.iter().zip(&thetas).all(|(&i, th)| {
                let tail = eig.eigenvectors.view((m - b, i), (b, 1));
                (&bj * tail).norm() <= est_tol * th.abs()
            });
            if passes || last {
                let mut sel = DMatrix::<f64>::zeros(m, nev);
                for (c, &i) in idx.iter().enumerate() {
                    sel.set_column(c, &eig.eigenvectors.column(i));
                }
                let y = q.columns(0, m) * sel;
                if accept(&thetas, &y) {
                    return Ok(LanczosOutcome {
                        converged: true,
                        applications,
                        dimension: m,
                    });
                }
                if last {
                    return Ok(LanczosOutcome {
                        converged: false,
                        applications,
                        dimension: m,
                    });
                }
                est_tol *= 1e-2;
            }
        }
        if last {
            // cap reached before enough vectors for a Rayleigh–Ritz step
            return Err(Error::Numerical(format!(
                "Krylov basis of {m} vectors is too small for {nev} eigenpairs"
            )));
        }
        t.view_mut((m, j * b), (b, b)).copy_from(&bj);
        t.view_mut((j * b, m), (b, b)).copy_from(&bj.transpose());
        q.columns_mut(m, b).copy_from(&v_next);
        b_prev = Some(bj);
        j += 1;
    }
}

/// QR of a block against the first `m` basis columns: `w = V R` with `V`
/// orthonormal and orthogonal to the basis. Rank-deficient columns are
/// replaced by fresh random directions with a zero `R` diagonal, or by zero
/// when no direction is left.
fn orthonormalize_block(
    w: DMatrix<f64>,
    q: &DMatrix<f64>,
    m: usize,
    deflate: Option<&DVector<f64>>,
    rng: &mut ChaCha20Rng,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let (k, b) = w.shape();
    let mut v = DMatrix::<f64>::zeros(k, b);
    let mut r = DMatrix::<f64>::zeros(b, b);
    for c in 0..b {
        let mut x = w.column(c).into_owned();
        let orig = x.norm();
        for _ in 0..2 {
            for p in 0..c {
                let d = v.column(p).dot(&x);
                r[(p, c)] += d;
                x.axpy(-d, &v.column(p), 1.0);
            }
        }
        let nx = x.norm();
        if nx > 1e-10 * orig && nx > 0.0 {
            r[(c, c)] = nx;
            v.set_column(c, &(x / nx));
            continue;
        }
        // the space may be exhausted at the final step; a zero column is then harmless
        for _ in 0..4 {
            let mut y = DVector::from_fn(k, |_, _| StandardNormal.sample(&mut *rng));
            for _ in 0..2 {
                if m > 0 {
                    let basis = q.columns(0, m);
                    let cf = basis.tr_mul(&y);
                    y -= basis * cf;
                }
                if let Some(d) = deflate {
                    let cf = d.dot(&y);
                    y.axpy(-cf, d, 1.0);
                }
                for p in 0..c {
                    let cf = v.column(p).dot(&y);
                    y.axpy(-cf, &v.column(p), 1.0);
                }
            }
            let ny = y.norm();
            if ny > 1e-8 {
                v.set_column(c, &(y / ny));
                break;
            }
        }
    }
    (v, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{assemble_cotangent_stiffness, assemble_lumped_mass, shapes};

    fn dense_generalized(s: &SparseSymmetric, mass: &[f64]) -> Vec<f64> {
        let k = s.dim();
        let mut a = s.to_dense();
        for i in 0..k {
            for j in 0..k {
                a[(i, j)] /= (mass[i] * mass[j]).sqrt();
            }
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    #[test]
    fn flat_square_matches_dense_and_neumann_spectrum() {
        let mesh = shapes::unit_square_grid(19);
        assert_eq!(mesh.num_vertices(), 400);
        let s = assemble_cotangent_stiffness(&mesh).unwrap();
        let mass = assemble_lumped_mass(&mesh);
        let (es, report) = solve_smallest_eigenpairs(&s, &mass, 12, 1e-8).unwrap();
        assert!(report.converged, "{report:?}");
        assert!(report.krylov_dimension > 0);
        let oracle = dense_generalized(&s, &mass);
        for (a, b) in es.eigenvalues().iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-8 * b.max(1.0), "{a} vs {b}");
        }
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((es.eigenvalues()[1] - pi2).abs() / pi2 < 0.02);
        assert!((es.eigenvalues()[2] - pi2).abs() / pi2 < 0.02);
    }

    #[test]
    fn icosphere_clusters_and_orthonormality() {
        let mesh = shapes::icosphere(3);
        let s = assemble_cotangent_stiffness(&mesh).unwrap();
        let mass = assemble_lumped_mass(&mesh);
        let (es, report) = solve_smallest_eigenpairs(&s, &mass, 16, 1e-8).unwrap();
        assert!(report.converged, "{report:?}");
        assert!(report.max_residual() <= 1e-8);
        let targets = [0.0, 2.0, 2.0, 2.0, 6.0, 6.0, 6.0, 6.0, 6.0, 12.0, 12.0, 12.0, 12.0, 12.0, 12.0, 12.0];
        for (l, t) in es.eigenvalues().iter().zip(targets) {
            assert!((l - t).abs() <= 0.02 * t.max(1e-6) + 1e-8, "{l} vs {t}");
        }
        let f = es.eigenvectors();
        for i in 0..16 {
            for j in 0..16 {
                let g: f64 = (0..mass.len()).map(|v| mass[v] * f[(v, i)] * f[(v, j)]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-8, "gram[{i},{j}] = {g}");
            }
        }
        let c = 1.0 / es.volume().sqrt();
        assert!(f.column(0).iter().all(|x| (x - c).abs() < 1e-8));
    }

    #[test]
    fn small_systems_use_the_dense_path() {
        let mesh = shapes::icosphere(0);
        let s = assemble_cotangent_stiffness(&mesh).unwrap();
        let mass = assemble_lumped_mass(&mesh);
        let (es, report) = solve_smallest_eigenpairs(&s, &mass, 12, 1e-8).unwrap();
        assert!(report.converged);
        assert_eq!(report.krylov_dimension, 0);
        let oracle = dense_generalized(&s, &mass);
        for (a, b) in es.eigenvalues().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let mesh = shapes::icosphere(0);
        let s = assemble_cotangent_stiffness(&mesh).unwrap();
        let mass = assemble_lumped_mass(&mesh);
        assert!(solve_smallest_eigenpairs(&s, &mass, 0, 1e-8).is_err());
        assert!(solve_smallest_eigenpairs(&s, &mass, 13, 1e-8).is_err());
        assert!(solve_smallest_eigenpairs(&s, &mass[..5], 3, 1e-8).is_err());
        let mut bad = mass.clone();
        bad[0] = 0.0;
        assert!(solve_smallest_eigenpairs(&s, &bad, 3, 1e-8).is_err());
    }
}
