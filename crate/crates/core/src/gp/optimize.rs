use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{evidence_from_factor, factor_with_jitter, Dataset};
use crate::error::{Error, Result};
use crate::kernels::{spectral_weights_truncated, Hyperparameters, KernelEvaluator, KernelMode};
use crate::spectral::EigenSystem;

/// Pair-sum tables above this many entries are not cached.
const PSUM_CACHE_LIMIT: usize = 50_000_000;
const GRAD_TOL: f64 = 1e-6;
const FD_STEP: f64 = 1e-5;
const INITIAL_STEP: f64 = 0.1;
const MAX_HALVINGS: usize = 60;
/// Largest change of any log parameter in one step.
const MAX_LOG_STEP: f64 = 1.0;

/// Parameters held at their initial value during optimization. ν is
/// always fixed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FixedParameters {
    pub sigma2: bool,
    pub kappa: bool,
    pub noise: bool,
}

impl FixedParameters {
    fn mask(&self) -> [bool; 3] {
        [!self.sigma2, !self.kappa, !self.noise]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationResult {
    pub hypers: Hyperparameters,
    pub noise_variance: f64,
    pub log_evidence: f64,
    pub initial_log_evidence: f64,
    /// Accepted or attempted ascent steps.
    pub iterations: usize,
    pub gradient_evaluations: usize,
    /// Stopped on the gradient criterion (or found no ascent at any step
    /// size) rather than the step budget.
    pub converged: bool,
}

/// Log evidence as a function of `(σ², κ, σ_ε²)` for fixed data, ν,
/// eigensystem and kernel mode.
///
/// For the spectral series the per-level pair sums of every training pair
/// are tabulated once, so each evaluation only reweights them.
#[derive(Clone, Debug)]
pub struct EvidenceObjective {
    template: KernelEvaluator,
    data: Dataset,
    psums: Option<Vec<f64>>,
}

impl EvidenceObjective {
    pub fn new(template: &KernelEvaluator, data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidArgument("evidence needs at least one observation".into()));
        }
        let n = data.len();
        let levels = template.truncation();
        let pairs = n * (n + 1) / 2;
        let psums = if template.mode() == KernelMode::SpectralSeries && pairs.saturating_mul(levels) <= PSUM_CACHE_LIMIT {
            let es = template.eigensystem();
            let pts = data.points();
            let mut table = vec![0.0; pairs * levels];
            let mut p = 0;
            for i in 0..n {
                for j in 0..=i {
                    es.pair_sums(&pts[i], &pts[j], &mut table[p * levels..(p + 1) * levels])?;
                    p += 1;
                }
            }
            Some(table)
        } else {
            None
        };
        Ok(EvidenceObjective {
            template: template.clone(),
            data: data.clone(),
            psums,
        })
    }

    fn gram(&self, h: &Hyperparameters) -> Result<DMatrix<f64>> {
        match &self.psums {
            Some(table) => {
                let es = self.template.eigensystem();
                let levels = self.template.truncation();
                let w = spectral_weights_truncated(h, es.as_ref(), levels)?;
                let n = self.data.len();
                let mut k = DMatrix::zeros(n, n);
                let mut p = 0;
                for i in 0..n {
                    for j in 0..=i {
                        let row = &table[p * levels..(p + 1) * levels];
                        let v: f64 = row.iter().zip(&w.density).map(|(a, b)| a * b).sum();
                        k[(i, j)] = v;
                        k[(j, i)] = v;
                        p += 1;
                    }
                }
                Ok(k)
            }
            None => self.template.with_hyperparameters(*h)?.gram_sym(self.data.points()),
        }
    }

    pub fn evaluate(&self, h: &Hyperparameters, noise_variance: f64) -> Result<f64> {
        let k = self.gram(h)?;
        let (chol, _) = factor_with_jitter(k, noise_variance)?;
        Ok(evidence_from_factor(&chol, &DVector::from_column_slice(self.data.y())))
    }

    /// Evidence at log parameters `(ln σ², ln κ, ln σ_ε²)`.
    pub fn evaluate_log(&self, theta: &[f64; 3], noise_free: bool) -> Result<f64> {
        let (h, noise) = self.unpack(theta, noise_free)?;
        self.evaluate(&h, noise)
    }

    fn unpack(&self, theta: &[f64; 3], noise_free: bool) -> Result<(Hyperparameters, f64)> {
        let nu = self.template.hyperparameters().nu;
        let h = Hyperparameters::new(theta[0].exp(), theta[1].exp(), nu)?;
        let noise = if noise_free { 0.0 } else { theta[2].exp() };
        Ok((h, noise))
    }

    /// Central finite-difference gradient in log coordinates; entries of
    /// `fixed` parameters are zero. The step is `rel_step · max(1, |θ_i|)`.
    pub fn gradient(&self, theta: &[f64; 3], fixed: FixedParameters, rel_step: f64) -> Result<[f64; 3]> {
        let noise_free = self.data.noise_variance() == 0.0;
        let mask = effective_mask(fixed, noise_free);
        let mut g = [0.0; 3];
        for i in 0..3 {
            if !mask[i] {
                continue;
            }
            let step = rel_step * theta[i].abs().max(1.0);
            let mut up = *theta;
            let mut down = *theta;
            up[i] += step;
            down[i] -= step;
            let fu = self.evaluate_log(&up, noise_free)?;
            let fd = self.evaluate_log(&down, noise_free)?;
            g[i] = (fu - fd) / (2.0 * step);
        }
        Ok(g)
    }

    pub fn log_parameters(&self, h: &Hyperparameters) -> [f64; 3] {
        let noise = self.data.noise_variance();
        [h.sigma2.ln(), h.kappa.ln(), if noise > 0.0 { noise.ln() } else { 0.0 }]
    }
}

fn effective_mask(fixed: FixedParameters, noise_free: bool) -> [bool; 3] {
    let mut m = fixed.mask();
    // ln σ_ε² is undefined at zero noise
    if noise_free {
        m[2] = false;
    }
    m
}

/// Log evidence of `data` under the spectral kernel of `(h, es)`.
pub fn log_marginal_likelihood(h: &Hyperparameters, es: Arc<dyn EigenSystem>, data: &Dataset) -> Result<f64> {
    let ke = KernelEvaluator::spectral(*h, es)?;
    EvidenceObjective::new(&ke, data)?.evaluate(h, data.noise_variance())
}

/// Maximizes the evidence of the spectral kernel over the free parameters.
pub fn optimize_hyperparameters(
    es: Arc<dyn EigenSystem>,
    data: &Dataset,
    init: Hyperparameters,
    fixed: FixedParameters,
    steps: usize,
) -> Result<OptimizationResult> {
    let ke = KernelEvaluator::spectral(init, es)?;
    optimize_with_evaluator(&ke, data, fixed, steps)
}

/// Gradient ascent on the log evidence in `(ln σ², ln κ, ln σ_ε²)`.
///
/// Starts from the evaluator's hyperparameters and the dataset's noise
/// variance. Each step moves by `η g`, limited to one unit per log parameter.
/// A step that lowers the evidence (or fails to evaluate) is halved and
/// retried; an accepted step grows the next one by 1.25.
/// Stops once the free gradient entries fall below `1e-6` in absolute value
/// or after `steps` iterations, returning the best point seen. With zero noise
/// variance the noise stays fixed at zero.
pub fn optimize_with_evaluator(
    template: &KernelEvaluator,
    data: &Dataset,
    fixed: FixedParameters,
    steps: usize,
) -> Result<OptimizationResult> {
    let objective = EvidenceObjective::new(template, data)?;
    let init = *template.hyperparameters();
    let noise_free = data.noise_variance() == 0.0;
    if noise_free && !fixed.noise {
        log::warn!("noise variance is zero; keeping it fixed");
    }
    let mask = effective_mask(fixed, noise_free);
    let mut theta = objective.log_parameters(&init);
    let f0 = objective.evaluate_log(&theta, noise_free)?;
    let mut result = OptimizationResult {
        hypers: init,
        noise_variance: data.noise_variance(),
        log_evidence: f0,
        initial_log_evidence: f0,
        iterations: 0,
        gradient_evaluations: 0,
        converged: true,
    };
    if !mask.iter().any(|&m| m) {
        return Ok(result);
    }

    let mut f = f0;
    let mut eta = INITIAL_STEP;
    result.converged = false;
    for _ in 0..steps {
        let g = objective
            .gradient(&theta, fixed, FD_STEP)
            .map_err(|e| Error::OptimizerAborted(format!("gradient evaluation failed at θ = {theta:?}: {e}")))?;
        result.gradient_evaluations += 1;
        if g.iter().all(|x| x.abs() < GRAD_TOL) {
            result.converged = true;
            break;
        }
        result.iterations += 1;
        let mut accepted = false;
        let mut any_finite = false;
        let mut last_err = None;
        for _ in 0..MAX_HALVINGS {
            let gmax = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let scale = eta.min(MAX_LOG_STEP / gmax);
            let mut trial = theta;
            for i in 0..3 {
                if mask[i] {
                    trial[i] += scale * g[i];
                }
            }
            match objective.evaluate_log(&trial, noise_free) {
                Ok(v) if v.is_finite() => {
                    any_finite = true;
                    if v > f {
                        theta = trial;
                        f = v;
                        accepted = true;
                        eta *= 1.25;
                        break;
                    }
                }
                Ok(v) => last_err = Some(format!("evidence {v}")),
                Err(e) => last_err = Some(e.to_string()),
            }
            eta *= 0.5;
        }
        if !accepted {
            if !any_finite {
                return Err(Error::OptimizerAborted(format!(
                    "evidence failed at every step size from θ = {theta:?}, gradient {g:?}: {}",
                    last_err.unwrap_or_default()
                )));
            }
            // no ascent at any step size: numerically stationary
            result.converged = true;
            break;
        }
    }
    let (h, noise) = objective.unpack(&theta, noise_free)?;
    // fixed entries keep their exact input values
    result.hypers = Hyperparameters::new(
        if mask[0] { h.sigma2 } else { init.sigma2 },
        if mask[1] { h.kappa } else { init.kappa },
        init.nu,
    )?;
    result.noise_variance = if mask[2] { noise } else { data.noise_variance() };
    result.log_evidence = f;
    Ok(result)
}
