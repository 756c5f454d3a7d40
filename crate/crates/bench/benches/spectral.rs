use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use rmgp_core::gp::{sample_posterior_paths, EvidenceObjective};
use rmgp_core::mesh::shapes::icosphere;
use rmgp_core::mesh::{compute_mesh_eigensystem, mesh_eigen_to_eigensystem, DEFAULT_TOLERANCE};
use rmgp_core::spectral::{circle_eigensystem, sphere_eigensystem, torus_eigensystem};
use rmgp_core::{fit, Dataset, EigenSystem, Hyperparameters, KernelEvaluator, ManifoldPoint, PriorSampler};

fn circle_points(n: usize, offset: f64) -> Vec<ManifoldPoint> {
    (0..n).map(|i| ManifoldPoint::circle(i as f64 / n as f64 + offset).unwrap()).collect()
}

fn kernels(c: &mut Criterion) {
    let h = Hyperparameters::matern(1.0, 0.2, 1.5).unwrap();
    let circle: Arc<dyn EigenSystem> = Arc::new(circle_eigensystem(5000).unwrap());
    let ke = KernelEvaluator::spectral(h, circle).unwrap();
    let (x, y) = (ManifoldPoint::circle(0.1).unwrap(), ManifoldPoint::circle(0.37).unwrap());
    c.bench_function("circle eval, 5000 levels", |b| b.iter(|| ke.eval(black_box(&x), black_box(&y)).unwrap()));

    let torus: Arc<dyn EigenSystem> = Arc::new(torus_eigensystem(2, 20).unwrap());
    let ke = KernelEvaluator::spectral(h, torus).unwrap();
    let pts: Vec<ManifoldPoint> = (0..100)
        .map(|i| ManifoldPoint::torus(&[(i as f64 * 0.618).fract(), (i as f64 * 0.414).fract()]).unwrap())
        .collect();
    c.bench_function("T2 Gram, 100 points", |b| b.iter(|| ke.gram_sym(black_box(&pts)).unwrap()));

    let sphere: Arc<dyn EigenSystem> = Arc::new(sphere_eigensystem(2, 40).unwrap());
    let ke = KernelEvaluator::spectral(h, sphere).unwrap();
    let pts: Vec<ManifoldPoint> = (0..100)
        .map(|i| {
            let t = i as f64 * 0.1;
            ManifoldPoint::sphere(&[t.cos(), t.sin(), (i as f64 * 0.618).fract() - 0.5]).unwrap()
        })
        .collect();
    c.bench_function("S2 Gram, 100 points", |b| b.iter(|| ke.gram_sym(black_box(&pts)).unwrap()));
}

fn mesh(c: &mut Criterion) {
    let mesh = icosphere(3);
    let mut g = c.benchmark_group("mesh");
    g.sample_size(10);
    g.bench_function("icosphere(3) 32 eigenpairs", |b| {
        b.iter(|| compute_mesh_eigensystem(black_box(&mesh), 32, DEFAULT_TOLERANCE).unwrap())
    });
    g.finish();
}

fn regression(c: &mut Criterion) {
    let h = Hyperparameters::matern(1.0, 0.2, 1.5).unwrap();
    let es: Arc<dyn EigenSystem> = Arc::new(circle_eigensystem(256).unwrap());
    let ke = KernelEvaluator::spectral(h, es).unwrap();
    let x = circle_points(200, 0.003);
    let y: Vec<f64> = (0..200).map(|i| (i as f64 * 0.1).sin()).collect();
    let data = Dataset::new(x, y, 1e-4).unwrap();
    c.bench_function("fit, 200 points", |b| b.iter(|| fit(black_box(&ke), &data).unwrap()));

    let objective = EvidenceObjective::new(&ke, &data).unwrap();
    c.bench_function("evidence, 200 points", |b| b.iter(|| objective.evaluate(black_box(&h), 1e-4).unwrap()));

    let post = fit(&ke, &data).unwrap();
    let xs = circle_points(100, 0.5);
    c.bench_function("posterior paths, 10 x 100 points", |b| {
        b.iter_batched(
            || xs.clone(),
            |xs| sample_posterior_paths(&post, PriorSampler::Deterministic, 0, 10, &xs).unwrap(),
            BatchSize::SmallInput,
        )
    });

    let mesh = icosphere(2);
    let (mes, _) = compute_mesh_eigensystem(&mesh, 25, DEFAULT_TOLERANCE).unwrap();
    let spectrum: Arc<dyn EigenSystem> = Arc::new(mesh_eigen_to_eigensystem(mes, &mesh).unwrap());
    let ke = KernelEvaluator::spectral(h, spectrum).unwrap();
    let pts: Vec<ManifoldPoint> = (0..mesh.num_faces()).step_by(3).map(|f| ManifoldPoint::mesh(f, [0.2, 0.3, 0.5]).unwrap()).collect();
    c.bench_function("mesh Gram", |b| b.iter(|| ke.gram_sym(black_box(&pts)).unwrap()));
}

criterion_group!(benches, kernels, mesh, regression);
criterion_main!(benches);
