//! Exact Gaussian-process regression on a manifold.
//!
//! [`fit`] factors the training covariance once; prediction, the log
//! evidence and pathwise posterior samples all reuse that factorization.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::kernels::KernelEvaluator;
use crate::point::ManifoldPoint;

mod optimize;
mod sampling;
#[cfg(test)]
mod tests;

pub use optimize::{
    log_marginal_likelihood, optimize_hyperparameters, optimize_with_evaluator, EvidenceObjective, FixedParameters,
    OptimizationResult,
};
pub use sampling::{
    rng_for, sample_posterior_paths, sample_posterior_pathwise, sample_prior_deterministic,
    sample_prior_random_features, FeatureSample, PriorSampler,
};

/// Multiples of the mean diagonal tried, in order, until the Cholesky
/// factorization succeeds.
pub const JITTER_LADDER: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Noisy observations `y_i = f(x_i) + ε_i`, `ε_i ~ N(0, σ_ε²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    points: Vec<ManifoldPoint>,
    y: Vec<f64>,
    noise_variance: f64,
}

impl Dataset {
    pub fn new(points: Vec<ManifoldPoint>, y: Vec<f64>, noise_variance: f64) -> Result<Self> {
        if points.len() != y.len() {
            return Err(Error::InvalidArgument(format!(
                "{} points but {} observations",
                points.len(),
                y.len()
            )));
        }
        if !(noise_variance >= 0.0) || !noise_variance.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be finite and nonnegative, got {noise_variance}"
            )));
        }
        if let Some(v) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite observation {v}")));
        }
        if let Some(first) = points.first() {
            let kind = std::mem::discriminant(first);
            if let Some(p) = points.iter().find(|p| std::mem::discriminant(*p) != kind) {
                return Err(Error::ManifoldMismatch {
                    expected: first.kind_name(),
                    found: p.kind_name(),
                });
            }
        }
        Ok(Dataset {
            points,
            y,
            noise_variance,
        })
    }

    pub fn points(&self) -> &[ManifoldPoint] {
        &self.points
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn with_noise_variance(&self, noise_variance: f64) -> Result<Self> {
        Dataset::new(self.points.clone(), self.y.clone(), noise_variance)
    }
}

/// Cholesky factor of `K + (σ_ε² + jitter) I`, escalating jitter along
/// [`JITTER_LADDER`]. Returns the factor and the jitter applied.
pub(crate) fn factor_with_jitter(mut k: DMatrix<f64>, noise_variance: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = k.nrows();
    for i in 0..n {
        k[(i, i)] += noise_variance;
    }
    let mean_diag = k.diagonal().mean();
    if !mean_diag.is_finite() || k.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("kernel matrix has non-finite entries".into()));
    }
    for f in JITTER_LADDER {
        let jitter = f * mean_diag;
        let mut m = k.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(m) {
            if c.l_dirty().diagonal().iter().all(|d| *d > 0.0 && d.is_finite()) {
                if jitter > 0.0 {
                    log::debug!("Cholesky needed jitter {jitter:e}");
                }
                return Ok((c, jitter));
            }
        }
    }
    Err(Error::Indefinite(format!(
        "Cholesky failed even with jitter {:e}",
        JITTER_LADDER[JITTER_LADDER.len() - 1] * mean_diag
    )))
}

/// `−½ yᵀα − Σ ln L_ii − (n/2) ln 2π`.
pub(crate) fn evidence_from_factor(chol: &Cholesky<f64, Dyn>, y: &DVector<f64>) -> f64 {
    let alpha = chol.solve(y);
    let logdet_half: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
    -0.5 * y.dot(&alpha) - logdet_half - 0.5 * y.len() as f64 * LN_2PI
}

/// Posterior moments of a GP conditioned on a [`Dataset`].
#[derive(Clone, Debug)]
pub struct Prediction {
    pub mean: Vec<f64>,
    /// Marginal variances, clipped at zero.
    pub variance: Vec<f64>,
    /// Full covariance, symmetrized, diagonal clipped at zero.
    pub covariance: Option<DMatrix<f64>>,
    /// Largest negative variance set to zero by clipping (0 when none).
    pub clipped: f64,
}

/// A fitted GP: holds the factorization of `K_xx + (σ_ε² + jitter) I`.
#[derive(Clone, Debug)]
pub struct ExactPosterior {
    kernel: KernelEvaluator,
    data: Dataset,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
}

/// Conditions the GP defined by `ke` on `data`.
pub fn fit(ke: &KernelEvaluator, data: &Dataset) -> Result<ExactPosterior> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("fit needs at least one observation".into()));
    }
    for p in data.points() {
        ke.check_point(p)?;
    }
    if data.noise_variance() == 0.0 {
        // jitter would mask an exactly singular Gram matrix
        let pts = data.points();
        for i in 0..pts.len() {
            if let Some(j) = (0..i).find(|&j| pts[j] == pts[i]) {
                return Err(Error::Indefinite(format!(
                    "training points {j} and {i} coincide and the noise variance is zero"
                )));
            }
        }
    }
    let k = ke.gram_sym(data.points())?;
    let (chol, jitter) = factor_with_jitter(k, data.noise_variance())?;
    let alpha = chol.solve(&DVector::from_column_slice(data.y()));
    Ok(ExactPosterior {
        kernel: ke.clone(),
        data: data.clone(),
        chol,
        alpha,
        jitter,
    })
}

impl ExactPosterior {
    pub fn kernel(&self) -> &KernelEvaluator {
        &self.kernel
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    /// Jitter added to the diagonal on top of the noise variance.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Lower-triangular factor `L`.
    pub fn factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// Solves `(K_xx + σ_ε² I) x = b` with the stored factorization.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        evidence_from_factor(&self.chol, &DVector::from_column_slice(self.data.y()))
    }

    /// Posterior mean and variances at `xs`, plus the full covariance when
    /// `want_cov` is set.
    pub fn predict(&self, xs: &[ManifoldPoint], want_cov: bool) -> Result<Prediction> {
        let kxs = self.kernel.gram(self.data.points(), xs)?;
        let mean: Vec<f64> = (kxs.tr_mul(&self.alpha)).iter().copied().collect();
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&kxs)
            .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
        let mut clipped = 0.0f64;
        let mut clip = |x: f64| {
            if x < 0.0 {
                clipped = clipped.max(-x);
                0.0
            } else {
                x
            }
        };
        let covariance = if want_cov {
            let mut c = self.kernel.gram_sym(xs)? - v.tr_mul(&v);
            let n = c.nrows();
            for i in 0..n {
                for j in 0..i {
                    let s = 0.5 * (c[(i, j)] + c[(j, i)]);
                    c[(i, j)] = s;
                    c[(j, i)] = s;
                }
                c[(i, i)] = clip(c[(i, i)]);
            }
            Some(c)
        } else {
            None
        };
        let variance = match &covariance {
            Some(c) => c.diagonal().iter().copied().collect(),
            None => {
                let prior = self.kernel.diag(xs)?;
                prior
                    .iter()
                    .enumerate()
                    .map(|(j, p)| clip(p - v.column(j).norm_squared()))
                    .collect()
            }
        };
        Ok(Prediction {
            mean,
            variance,
            covariance,
            clipped,
        })
    }
}

#[cfg(test)]
pub(crate) fn sampling_normal(rng: &mut rand_chacha::ChaCha20Rng) -> f64 {
    rand::Rng::sample(rng, rand_distr::StandardNormal)
}
