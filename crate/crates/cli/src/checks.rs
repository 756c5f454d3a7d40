//! Desk-scale invariant checks behind `rmgp check`.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};

use rmgp_core::gp::{sample_posterior_pathwise, PriorSampler};
use rmgp_core::mesh::shapes::icosphere;
use rmgp_core::mesh::{
    assemble_cotangent_stiffness, compute_mesh_eigensystem, decode_cache, encode_cache, mesh_eigen_to_eigensystem,
    MeshSpectrum, DEFAULT_TOLERANCE,
};
use rmgp_core::spectral::{
    circle_eigensystem, gegenbauer, real_spherical_harmonics_degree, sphere_eigensystem, torus_eigensystem,
};
use rmgp_core::{
    fit, Dataset, EigenSystem, Hyperparameters, KernelEvaluator, KernelMode, ManifoldPoint,
};

use crate::io::fmt_g17;
use crate::{CliError, Common};

type CheckResult = Result<Check, CliError>;

struct Check {
    name: &'static str,
    measured: f64,
    threshold: String,
    pass: bool,
}

impl Check {
    fn at_most(name: &'static str, measured: f64, limit: f64) -> Self {
        Check {
            name,
            measured,
            threshold: format!("<= {limit:e}"),
            pass: measured <= limit,
        }
    }
}

/// Fractional part of `i·a`: a Weyl sequence, deterministic and well spread.
fn weyl(i: usize, a: f64) -> f64 {
    (i as f64 * a).fract()
}

const IRRATIONALS: [f64; 4] = [0.618_033_988_749_895, 0.414_213_562_373_095, 0.732_050_807_568_877, 0.236_067_977_499_79];

fn sphere_point(i: usize, offset: usize) -> ManifoldPoint {
    let z = 2.0 * weyl(i + 1, IRRATIONALS[offset % 4]) - 1.0;
    let t = 2.0 * PI * weyl(i + 1, IRRATIONALS[(offset + 1) % 4]);
    let r = (1.0 - z * z).max(0.0).sqrt();
    ManifoldPoint::sphere(&[r * t.cos(), r * t.sin(), z]).expect("unit vector")
}

fn torus_point(i: usize, offset: usize) -> ManifoldPoint {
    ManifoldPoint::torus(&[weyl(i + 1, IRRATIONALS[offset % 4]), weyl(i + 1, IRRATIONALS[(offset + 1) % 4])])
        .expect("finite coordinates")
}

fn circle_point(i: usize, offset: usize) -> ManifoldPoint {
    ManifoldPoint::circle(weyl(i + 1, IRRATIONALS[offset % 4])).expect("finite coordinate")
}

fn min_max_ratio(gram: DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(gram).eigenvalues;
    let max = eig.max();
    eig.min() / max
}

fn circle_vs_closed(name: &'static str, h: Hyperparameters, levels: usize, limit: f64) -> CheckResult {
    let es: Arc<dyn EigenSystem> = Arc::new(circle_eigensystem(levels)?);
    let spectral = KernelEvaluator::spectral(h, es.clone())?;
    let closed = KernelEvaluator::new(h, es, KernelMode::CircleClosedForm)?;
    let x0 = ManifoldPoint::circle(0.0)?;
    let mut worst = 0.0f64;
    for i in 0..50 {
        let x = ManifoldPoint::circle(i as f64 / 50.0)?;
        let c = closed.eval(&x0, &x)?;
        worst = worst.max((spectral.eval(&x0, &x)? - c).abs() / c.abs());
    }
    Ok(Check::at_most(name, worst, limit))
}

fn torus_equivalence(name: &'static str, dim: usize, max_freq: usize, limit: f64) -> CheckResult {
    let h = Hyperparameters::matern(1.0, 0.25, 1.5)?;
    let es: Arc<dyn EigenSystem> = Arc::new(torus_eigensystem(dim, max_freq)?);
    let spectral = KernelEvaluator::spectral(h, es.clone())?;
    let periodic = KernelEvaluator::new(h, es, KernelMode::TorusPeriodicSum { radius: 10 })?;
    let mut worst = 0.0f64;
    for i in 0..100 {
        let (x, y) = if dim == 1 {
            (circle_point(i, 0), circle_point(i, 2))
        } else {
            (torus_point(i, 0), torus_point(i, 2))
        };
        worst = worst.max((spectral.eval(&x, &y)? - periodic.eval(&x, &y)?).abs());
    }
    Ok(Check::at_most(name, worst, limit))
}

fn addition_formula() -> CheckResult {
    let es = sphere_eigensystem(2, 11)?;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    let mut worst = 0.0f64;
    for i in 0..200 {
        let (ManifoldPoint::Sphere(u), ManifoldPoint::Sphere(v)) = (sphere_point(i, 0), sphere_point(i, 2)) else {
            unreachable!()
        };
        let cos = u.iter().zip(&v).map(|(p, q)| p * q).sum::<f64>().clamp(-1.0, 1.0);
        for n in 0..=10 {
            real_spherical_harmonics_degree(n, &u, &mut a);
            real_spherical_harmonics_degree(n, &v, &mut b);
            let lhs: f64 = a.iter().zip(&b).map(|(p, q)| p * q).sum();
            let rhs = es.addition_constant(n) * gegenbauer(n, 0.5, cos);
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(Check::at_most("sphere addition formula", worst, 1e-8))
}

fn mesh_sphere() -> Result<(rmgp_core::TriangleMesh, Arc<MeshSpectrum>), CliError> {
    let mesh = icosphere(3);
    let (mes, _) = compute_mesh_eigensystem(&mesh, 16, DEFAULT_TOLERANCE)?;
    let spectrum = Arc::new(mesh_eigen_to_eigensystem(mes, &mesh)?);
    Ok((mesh, spectrum))
}

fn mesh_spectrum(spectrum: &MeshSpectrum) -> Check {
    let expected = [0.0, 2.0, 2.0, 2.0, 6.0, 6.0, 6.0, 6.0, 6.0, 12.0, 12.0, 12.0, 12.0, 12.0, 12.0, 12.0];
    let worst = spectrum
        .system()
        .eigenvalues()
        .iter()
        .zip(expected)
        .skip(1)
        .map(|(l, e)| (l - e).abs() / e)
        .fold(0.0, f64::max);
    Check::at_most("icosphere(3) spectrum vs n(n+1)", worst, 0.02)
}

fn psd_and_normalization(
    psd_name: &'static str,
    norm_name: &'static str,
    es: Arc<dyn EigenSystem>,
    points: &[ManifoldPoint],
    weights: &[f64],
) -> Result<[Check; 2], CliError> {
    let h = Hyperparameters::matern(1.3, 0.4, 1.5)?;
    let ke = KernelEvaluator::spectral(h, es)?;
    let ratio = min_max_ratio(ke.gram_sym(points)?);
    let diag = ke.diag(points)?;
    let total: f64 = weights.iter().sum();
    let mean = diag.iter().zip(weights).map(|(d, w)| d * w).sum::<f64>() / total;
    Ok([
        Check {
            name: psd_name,
            measured: ratio,
            threshold: ">= -1e-8".into(),
            pass: ratio >= -1e-8,
        },
        Check::at_most(norm_name, (mean - h.sigma2).abs() / h.sigma2, 1e-6),
    ])
}

/// Scans κ over a log grid for a negative eigenvalue of the naive Gram;
/// reports the first κ found (NaN when none).
fn naive_no_go() -> CheckResult {
    let es: Arc<dyn EigenSystem> = Arc::new(circle_eigensystem(8)?);
    let points: Vec<ManifoldPoint> = (0..100).map(|i| ManifoldPoint::circle(i as f64 / 100.0)).collect::<Result<_, _>>()?;
    let mut found = f64::NAN;
    for j in 0..20 {
        let kappa = 0.1 * 100f64.powf(j as f64 / 19.0);
        let h = Hyperparameters::squared_exponential(1.0, kappa)?;
        let ke = KernelEvaluator::new(h, es.clone(), KernelMode::NaiveGeodesic)?;
        if min_max_ratio(ke.gram_sym(&points)?) < -1e-8 {
            found = kappa;
            break;
        }
    }
    Ok(Check {
        name: "naive geodesic Gram indefinite at kappa",
        measured: found,
        threshold: "min eig < -1e-8 max".into(),
        pass: found.is_finite(),
    })
}

fn posterior_interpolation() -> CheckResult {
    let es: Arc<dyn EigenSystem> = Arc::new(circle_eigensystem(64)?);
    let h = Hyperparameters::matern(1.0, 0.3, 2.5)?;
    let ke = KernelEvaluator::spectral(h, es)?;
    let xs: Vec<ManifoldPoint> = (0..8).map(|i| circle_point(i, 1)).collect();
    let y: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin()).collect();
    let post = fit(&ke, &Dataset::new(xs.clone(), y.clone(), 0.0)?)?;
    let path = sample_posterior_pathwise(&post, PriorSampler::Deterministic, 3, &xs)?;
    let worst = path.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(Check::at_most("posterior path interpolates data", worst, 1e-6))
}

fn fem_checks(mesh: &rmgp_core::TriangleMesh, spectrum: &MeshSpectrum) -> Result<[Check; 2], CliError> {
    let s = assemble_cotangent_stiffness(mesh)?;
    let rows = s.row_sums().iter().fold(0.0f64, |m, r| m.max(r.abs())) / s.norm_inf();
    let bytes = encode_cache(spectrum.system())?;
    let same = decode_cache(&bytes).map(|m| &m == spectrum.system()).unwrap_or(false);
    Ok([
        Check::at_most("stiffness row sums / |S|", rows, 1e-12),
        Check {
            name: "eigen cache round trip",
            measured: if same { 0.0 } else { 1.0 },
            threshold: "== 0".into(),
            pass: same,
        },
    ])
}

fn suite() -> Result<Vec<Check>, CliError> {
    let mut out = vec![
        circle_vs_closed("circle nu=1/2 spectral vs cosh", Hyperparameters::matern(1.0, 0.5, 0.5)?, 5000, 1e-3)?,
        circle_vs_closed("circle nu=3/2 spectral vs closed", Hyperparameters::matern(1.0, 0.5, 1.5)?, 5000, 1e-6)?,
        circle_vs_closed("circle nu=inf spectral vs theta3", Hyperparameters::squared_exponential(1.0, 0.5)?, 200, 1e-10)?,
        torus_equivalence("T2 spectral vs periodic", 2, 40, 1e-4)?,
        torus_equivalence("S1 spectral vs periodic", 1, 2000, 1e-8)?,
        addition_formula()?,
    ];
    let (mesh, spectrum) = mesh_sphere()?;
    out.push(mesh_spectrum(&spectrum));
    out.extend(fem_checks(&mesh, &spectrum)?);

    let uniform = vec![1.0; 100];
    let circle: Vec<ManifoldPoint> = (0..100).map(|i| circle_point(i, 0)).collect();
    out.extend(psd_and_normalization(
        "circle Gram min/max eigenvalue",
        "circle mean variance vs sigma2",
        Arc::new(circle_eigensystem(256)?),
        &circle,
        &uniform,
    )?);
    let torus: Vec<ManifoldPoint> = (0..100).map(|i| torus_point(i, 0)).collect();
    out.extend(psd_and_normalization(
        "T2 Gram min/max eigenvalue",
        "T2 mean variance vs sigma2",
        Arc::new(torus_eigensystem(2, 20)?),
        &torus,
        &uniform,
    )?);
    let sphere: Vec<ManifoldPoint> = (0..100).map(|i| sphere_point(i, 0)).collect();
    out.extend(psd_and_normalization(
        "S2 Gram min/max eigenvalue",
        "S2 mean variance vs sigma2",
        Arc::new(sphere_eigensystem(2, 30)?),
        &sphere,
        &uniform,
    )?);
    let n = spectrum.num_vertices();
    let vertices: Vec<ManifoldPoint> = (0..n).map(|i| spectrum.vertex_point(i)).collect::<Result<_, _>>()?;
    let mass = spectrum.system().mass().to_vec();
    let subset: Vec<ManifoldPoint> = vertices.iter().step_by(n / 100).take(100).cloned().collect();
    let [psd, _] = psd_and_normalization(
        "mesh Gram min/max eigenvalue",
        "",
        spectrum.clone(),
        &subset,
        &uniform,
    )?;
    let [_, norm] = psd_and_normalization("", "mesh mass-weighted variance vs sigma2", spectrum, &vertices, &mass)?;
    out.push(psd);
    out.push(norm);
    out.push(naive_no_go()?);
    out.push(posterior_interpolation()?);
    Ok(out)
}

pub fn run(_common: &Common) -> Result<(), CliError> {
    let start = Instant::now();
    let checks = suite()?;
    let failed = checks.iter().filter(|c| !c.pass).count();
    for c in &checks {
        println!(
            "{:<40} {:>24}  {:<22} {}",
            c.name,
            fmt_g17(c.measured),
            c.threshold,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    println!("{} checks, {failed} failed, {:.1} s", checks.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        return Err(CliError::check_failed(format!("{failed} check(s) failed")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weyl_points_are_valid_and_distinct() {
        let a = sphere_point(3, 0);
        let b = sphere_point(4, 0);
        assert_ne!(a, b);
        assert!(matches!(torus_point(1, 0), ManifoldPoint::Torus(ref v) if v.len() == 2));
    }
}
