//! Matérn and squared-exponential kernels on manifolds.
//!
//! The main path is the truncated spectral series
//! `k(x, x') = Σ_n ρ(n) Σ_k f_{n,k}(x) f_{n,k}(x')` with spectral weights
//! `ρ(n) ∝ (2ν/κ² + λ_n)^{-ν-d/2}` (Matérn) or `ρ(n) ∝ exp(-κ²λ_n/2)`
//! (squared exponential), normalized so the average variance over the
//! manifold equals `σ²`. Closed forms for the circle and periodic sums on
//! the torus are provided as independent routes to the same kernels.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::point::ManifoldPoint;
use crate::spectral::{EigenSystem, ManifoldKind};

mod closed_form;
mod diagnostic;

pub use closed_form::{
    circle_closed_form, jacobi_theta3, matern_euclidean, naive_geodesic_kernel, sphere_gegenbauer_kernel,
    torus_periodic_kernel,
};
pub use diagnostic::{truncation_diagnostic, TruncationDiagnostic};

/// Smoothness parameter `ν`; `Infinite` selects the squared-exponential kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Smoothness {
    Finite(f64),
    Infinite,
}

impl Smoothness {
    pub fn is_half(&self, twice: u32) -> bool {
        matches!(self, Smoothness::Finite(v) if *v == twice as f64 / 2.0)
    }
}

impl fmt::Display for Smoothness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Smoothness::Finite(v) => write!(f, "{v}"),
            Smoothness::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyperparameters {
    pub sigma2: f64,
    pub kappa: f64,
    pub nu: Smoothness,
}

impl Hyperparameters {
    pub fn new(sigma2: f64, kappa: f64, nu: Smoothness) -> Result<Self> {
        let h = Hyperparameters { sigma2, kappa, nu };
        h.validate()?;
        Ok(h)
    }

    pub fn matern(sigma2: f64, kappa: f64, nu: f64) -> Result<Self> {
        Self::new(sigma2, kappa, Smoothness::Finite(nu))
    }

    pub fn squared_exponential(sigma2: f64, kappa: f64) -> Result<Self> {
        Self::new(sigma2, kappa, Smoothness::Infinite)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.sigma2) || !pos(self.kappa) {
            return Err(Error::InvalidArgument(format!(
                "σ² and κ must be positive and finite (σ²={}, κ={})",
                self.sigma2, self.kappa
            )));
        }
        if let Smoothness::Finite(nu) = self.nu {
            if !pos(nu) {
                return Err(Error::InvalidArgument(format!("ν must be positive, got {nu}")));
            }
        }
        Ok(())
    }

    /// `ln a(λ)` for the unnormalized spectral weight at eigenvalue `λ` in
    /// intrinsic dimension `dim`.
    pub fn log_weight(&self, lambda: f64, dim: usize) -> f64 {
        match self.nu {
            Smoothness::Finite(nu) => {
                -(nu + dim as f64 / 2.0) * (2.0 * nu / (self.kappa * self.kappa) + lambda).ln()
            }
            Smoothness::Infinite => -self.kappa * self.kappa * lambda / 2.0,
        }
    }
}

/// Per-level spectral weights and their normalization.
///
/// `density[n] = σ² a_n / C` with `C = vol⁻¹ Σ_n d_n a_n`, so that
/// `Σ_n d_n ρ(n) = σ² vol`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralWeights {
    /// `ln a_n`; kept in log form since `a_n` itself can leave the `f64` range.
    pub log_unnormalized: Vec<f64>,
    /// `ln C`.
    pub log_normalization: f64,
    /// `ρ(n)`.
    pub density: Vec<f64>,
}

impl SpectralWeights {
    pub fn unnormalized(&self) -> Vec<f64> {
        self.log_unnormalized.iter().map(|v| v.exp()).collect()
    }

    pub fn normalization(&self) -> f64 {
        self.log_normalization.exp()
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }
}

/// Spectral weights over every level of `es`.
pub fn spectral_weights(h: &Hyperparameters, es: &dyn EigenSystem) -> Result<SpectralWeights> {
    spectral_weights_truncated(h, es, es.num_levels())
}

/// Spectral weights over the first `truncation` levels of `es`.
pub fn spectral_weights_truncated(
    h: &Hyperparameters,
    es: &dyn EigenSystem,
    truncation: usize,
) -> Result<SpectralWeights> {
    h.validate()?;
    if truncation == 0 || truncation > es.num_levels() {
        return Err(Error::InvalidArgument(format!(
            "truncation {truncation} must be in 1..={}",
            es.num_levels()
        )));
    }
    let levels = &es.levels()[..truncation];
    let dim = es.dim();
    let log_a: Vec<f64> = levels.iter().map(|l| h.log_weight(l.eigenvalue.max(0.0), dim)).collect();
    if log_a.iter().all(|v| *v == f64::NEG_INFINITY) || log_a.iter().any(|v| v.is_nan()) {
        return Err(Error::DegenerateWeights);
    }

    // log Σ d_n a_n by log-sum-exp
    let peak = log_a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: f64 = levels
        .iter()
        .zip(&log_a)
        .map(|(l, la)| l.multiplicity as f64 * (la - peak).exp())
        .sum();
    let log_c = peak + scaled.ln() - es.volume().ln();
    if !log_c.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let density = log_a.iter().map(|la| h.sigma2 * (la - log_c).exp()).collect();
    Ok(SpectralWeights {
        log_unnormalized: log_a,
        log_normalization: log_c,
        density,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelMode {
    /// Truncated spectral series over the eigensystem.
    SpectralSeries,
    /// Exact circle formulas for ν ∈ {1/2, 3/2, 5/2, ∞}.
    CircleClosedForm,
    /// Periodic summation of the Euclidean kernel over `‖n‖_∞ ≤ radius`.
    TorusPeriodicSum { radius: usize },
    /// Gegenbauer form of the series on `S^d`.
    SphereGegenbauer,
    /// Squared exponential of the geodesic distance. Not PSD in general.
    NaiveGeodesic,
}

/// A kernel bound to hyperparameters and an eigensystem.
///
/// The spectral weights are computed on construction; changing
/// hyperparameters means building a new evaluator.
#[derive(Clone)]
pub struct KernelEvaluator {
    hypers: Hyperparameters,
    eigensystem: Arc<dyn EigenSystem>,
    truncation: usize,
    mode: KernelMode,
    weights: SpectralWeights,
}

impl fmt::Debug for KernelEvaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelEvaluator")
            .field("hypers", &self.hypers)
            .field("manifold", &self.eigensystem.kind())
            .field("truncation", &self.truncation)
            .field("mode", &self.mode)
            .finish()
    }
}

impl KernelEvaluator {
    pub fn new(h: Hyperparameters, es: Arc<dyn EigenSystem>, mode: KernelMode) -> Result<Self> {
        let n = es.num_levels();
        Self::with_truncation(h, es, mode, n)
    }

    pub fn spectral(h: Hyperparameters, es: Arc<dyn EigenSystem>) -> Result<Self> {
        Self::new(h, es, KernelMode::SpectralSeries)
    }

    pub fn with_truncation(
        h: Hyperparameters,
        es: Arc<dyn EigenSystem>,
        mode: KernelMode,
        truncation: usize,
    ) -> Result<Self> {
        check_mode(&h, es.kind(), mode)?;
        let weights = spectral_weights_truncated(&h, es.as_ref(), truncation)?;
        Ok(KernelEvaluator {
            hypers: h,
            eigensystem: es,
            truncation,
            mode,
            weights,
        })
    }

    /// Same eigensystem, mode and truncation with new hyperparameters.
    pub fn with_hyperparameters(&self, h: Hyperparameters) -> Result<Self> {
        Self::with_truncation(h, self.eigensystem.clone(), self.mode, self.truncation)
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hypers
    }

    pub fn eigensystem(&self) -> &Arc<dyn EigenSystem> {
        &self.eigensystem
    }

    pub fn weights(&self) -> &SpectralWeights {
        &self.weights
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn mode(&self) -> KernelMode {
        self.mode
    }

    pub fn check_point(&self, x: &ManifoldPoint) -> Result<()> {
        self.eigensystem.check_point(x)
    }

    pub fn eval(&self, x: &ManifoldPoint, x2: &ManifoldPoint) -> Result<f64> {
        let mut buf = vec![0.0; self.truncation];
        self.eval_with(x, x2, &mut buf)
    }

    fn eval_with(&self, x: &ManifoldPoint, x2: &ManifoldPoint, buf: &mut [f64]) -> Result<f64> {
        let h = &self.hypers;
        match self.mode {
            KernelMode::SpectralSeries => {
                self.eigensystem.pair_sums(x, x2, buf)?;
                Ok(buf.iter().zip(&self.weights.density).map(|(p, r)| p * r).sum())
            }
            KernelMode::SphereGegenbauer => {
                self.check_point(x)?;
                self.check_point(x2)?;
                closed_form::sphere_gegenbauer_series(&self.weights.density, self.eigensystem.dim(), x, x2)
            }
            KernelMode::CircleClosedForm => {
                let (a, b) = (circle_coord(self, x)?, circle_coord(self, x2)?);
                circle_closed_form(h, a, b)
            }
            KernelMode::TorusPeriodicSum { radius } => {
                self.check_point(x)?;
                self.check_point(x2)?;
                torus_periodic_kernel(h.nu, h.kappa, h.sigma2, torus_coords(x), torus_coords(x2), radius)
            }
            KernelMode::NaiveGeodesic => {
                naive_geodesic_kernel(h.kappa, h.sigma2, self.eigensystem.kind(), x, x2)
            }
        }
    }

    /// Gram matrix `K[i][j] = k(xs[i], ys[j])`.
    pub fn gram(&self, xs: &[ManifoldPoint], ys: &[ManifoldPoint]) -> Result<DMatrix<f64>> {
        let mut buf = vec![0.0; self.truncation];
        let mut k = DMatrix::zeros(xs.len(), ys.len());
        for (i, x) in xs.iter().enumerate() {
            for (j, y) in ys.iter().enumerate() {
                k[(i, j)] = self.eval_with(x, y, &mut buf)?;
            }
        }
        Ok(k)
    }

    /// Symmetric Gram matrix over one point set; exactly symmetric.
    pub fn gram_sym(&self, xs: &[ManifoldPoint]) -> Result<DMatrix<f64>> {
        let mut buf = vec![0.0; self.truncation];
        let n = xs.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.eval_with(&xs[i], &xs[j], &mut buf)?;
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        Ok(k)
    }

    /// `k(x, x)` at each point.
    pub fn diag(&self, xs: &[ManifoldPoint]) -> Result<Vec<f64>> {
        let mut buf = vec![0.0; self.truncation];
        xs.iter().map(|x| self.eval_with(x, x, &mut buf)).collect()
    }
}

fn check_mode(h: &Hyperparameters, kind: ManifoldKind, mode: KernelMode) -> Result<()> {
    let closed_nu = h.nu.is_half(1) || h.nu.is_half(3) || h.nu.is_half(5) || h.nu == Smoothness::Infinite;
    let unsupported = |what: &str| Err(Error::Unsupported(format!("{what} on {kind}")));
    match mode {
        KernelMode::SpectralSeries => Ok(()),
        KernelMode::CircleClosedForm => match kind {
            ManifoldKind::Circle | ManifoldKind::Torus { dim: 1 } if closed_nu => Ok(()),
            ManifoldKind::Circle | ManifoldKind::Torus { dim: 1 } => {
                Err(Error::Unsupported(format!("closed form for ν = {}", h.nu)))
            }
            _ => unsupported("circle closed form"),
        },
        KernelMode::TorusPeriodicSum { radius } => match kind {
            _ if radius == 0 => Err(Error::InvalidArgument("periodic radius must be ≥ 1".into())),
            ManifoldKind::Circle | ManifoldKind::Torus { .. } if closed_nu => Ok(()),
            ManifoldKind::Circle | ManifoldKind::Torus { .. } => {
                Err(Error::Unsupported(format!("periodic summation for ν = {}", h.nu)))
            }
            _ => unsupported("periodic summation"),
        },
        KernelMode::SphereGegenbauer => match kind {
            ManifoldKind::Sphere { .. } => Ok(()),
            _ => unsupported("Gegenbauer kernel"),
        },
        KernelMode::NaiveGeodesic => match kind {
            ManifoldKind::Mesh { .. } => unsupported("naive geodesic kernel (mesh geodesics)"),
            _ => Ok(()),
        },
    }
}

fn circle_coord(ke: &KernelEvaluator, x: &ManifoldPoint) -> Result<f64> {
    ke.check_point(x)?;
    Ok(torus_coords(x)[0])
}

fn torus_coords(x: &ManifoldPoint) -> &[f64] {
    match x {
        ManifoldPoint::Circle(v) => std::slice::from_ref(v),
        ManifoldPoint::Torus(v) => v,
        _ => &[],
    }
}
