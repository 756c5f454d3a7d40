use std::sync::Arc;

use nalgebra::DVector;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::ExactPosterior;
use crate::error::{Error, Result};
use crate::kernels::{Hyperparameters, KernelEvaluator};
use crate::point::ManifoldPoint;
use crate::spectral::EigenSystem;

/// The generator behind every sampling routine: ChaCha20 keyed by `seed`,
/// with independent streams selected by `stream`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// How a prior path is represented.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriorSampler {
    /// Every eigenfunction up to the truncation, one weight each.
    Deterministic,
    /// Levels drawn at random in proportion to their share of the variance.
    RandomFeatures { num_features: usize },
}

/// A prior sample path `f(x) = Σ_n Σ_k c_{n,k} f_{n,k}(x)`.
///
/// The coefficients are linear in the underlying standard normal draws.
/// Deterministic features draw `w_{n,k}` level-major, member-minor and set
/// `c_{n,k} = √ρ(n) w_{n,k}`. Random features draw, for each feature in turn,
/// a level `n` with probability `d_n ρ(n) / Z` (`Z = Σ d_n ρ(n)`) followed by
/// `d_n` weights, adding `√(Z / (N d_n)) w_k` to `c_{n,k}`.
#[derive(Clone, Debug)]
pub struct FeatureSample {
    eigensystem: Arc<dyn EigenSystem>,
    coefficients: Vec<Vec<f64>>,
    draws: usize,
}

impl FeatureSample {
    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coefficients
    }

    /// Standard normal draws consumed.
    pub fn draws(&self) -> usize {
        self.draws
    }

    pub fn value(&self, x: &ManifoldPoint) -> Result<f64> {
        let mut buf = Vec::new();
        self.value_with(x, &mut buf)
    }

    fn value_with(&self, x: &ManifoldPoint, buf: &mut Vec<f64>) -> Result<f64> {
        self.eigensystem.check_point(x)?;
        let mut total = 0.0;
        for (n, c) in self.coefficients.iter().enumerate() {
            if c.iter().all(|v| *v == 0.0) {
                continue;
            }
            self.eigensystem.level_members(n, x, buf)?;
            total += c.iter().zip(buf.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(total)
    }

    pub fn values(&self, xs: &[ManifoldPoint]) -> Result<Vec<f64>> {
        let mut buf = Vec::new();
        xs.iter().map(|x| self.value_with(x, &mut buf)).collect()
    }
}

impl PriorSampler {
    /// Draws a prior path for the kernel of `ke` (its spectral truncation).
    pub fn draw(&self, ke: &KernelEvaluator, rng: &mut ChaCha20Rng) -> Result<FeatureSample> {
        let es = ke.eigensystem().clone();
        if !es.has_members() {
            return Err(Error::Unsupported(format!(
                "sampling needs per-member eigenfunctions, unavailable on {}",
                es.kind()
            )));
        }
        let density = &ke.weights().density;
        let levels = &es.levels()[..density.len()];
        match *self {
            PriorSampler::Deterministic => {
                let mut draws = 0;
                let coefficients = levels
                    .iter()
                    .zip(density)
                    .map(|(l, rho)| {
                        let s = rho.sqrt();
                        draws += l.multiplicity;
                        (0..l.multiplicity)
                            .map(|_| s * normal(rng))
                            .collect::<Vec<f64>>()
                    })
                    .collect();
                Ok(FeatureSample {
                    eigensystem: es,
                    coefficients,
                    draws,
                })
            }
            PriorSampler::RandomFeatures { num_features } => {
                if num_features == 0 {
                    return Err(Error::InvalidArgument("need at least one random feature".into()));
                }
                let mass: Vec<f64> = levels.iter().zip(density).map(|(l, r)| l.multiplicity as f64 * r).collect();
                let z: f64 = mass.iter().sum();
                let pick = WeightedIndex::new(&mass)
                    .map_err(|e| Error::Numerical(format!("cannot sample levels: {e}")))?;
                let mut coefficients: Vec<Vec<f64>> = levels.iter().map(|l| vec![0.0; l.multiplicity]).collect();
                let mut draws = 0;
                for _ in 0..num_features {
                    let n = pick.sample(rng);
                    let d = levels[n].multiplicity;
                    let s = (z / (num_features as f64 * d as f64)).sqrt();
                    for c in coefficients[n].iter_mut() {
                        let w = normal(rng);
                        *c += s * w;
                    }
                    draws += d;
                }
                Ok(FeatureSample {
                    eigensystem: es,
                    coefficients,
                    draws,
                })
            }
        }
    }
}

/// One prior path from all levels of `es`, evaluated at `xs`.
pub fn sample_prior_deterministic(
    h: &Hyperparameters,
    es: Arc<dyn EigenSystem>,
    seed: u64,
    xs: &[ManifoldPoint],
) -> Result<Vec<f64>> {
    let ke = KernelEvaluator::spectral(*h, es)?;
    PriorSampler::Deterministic.draw(&ke, &mut rng_for(seed, 0))?.values(xs)
}

/// One random-feature prior path, evaluated at `xs`.
pub fn sample_prior_random_features(
    h: &Hyperparameters,
    es: Arc<dyn EigenSystem>,
    num_features: usize,
    seed: u64,
    xs: &[ManifoldPoint],
) -> Result<Vec<f64>> {
    let ke = KernelEvaluator::spectral(*h, es)?;
    PriorSampler::RandomFeatures { num_features }.draw(&ke, &mut rng_for(seed, 0))?.values(xs)
}

/// One posterior path at `xs` by pathwise conditioning:
/// `f(xs) + K_{*x} (K_xx + σ_ε² I)^{-1} (y − f(x) − ε)`, with the prior path
/// `f` evaluated jointly at test and training points and `ε` drawn after the
/// path weights.
pub fn sample_posterior_pathwise(
    post: &ExactPosterior,
    sampler: PriorSampler,
    seed: u64,
    xs: &[ManifoldPoint],
) -> Result<Vec<f64>> {
    Ok(sample_posterior_paths(post, sampler, seed, 1, xs)?.remove(0))
}

/// `count` posterior paths; path `i` uses stream `i` of the seed.
pub fn sample_posterior_paths(
    post: &ExactPosterior,
    sampler: PriorSampler,
    seed: u64,
    count: usize,
    xs: &[ManifoldPoint],
) -> Result<Vec<Vec<f64>>> {
    let ke = post.kernel();
    for x in xs {
        ke.check_point(x)?;
    }
    let data = post.dataset();
    let kxs = ke.gram(data.points(), xs)?;
    let noise_sd = data.noise_variance().sqrt();
    let y = DVector::from_column_slice(data.y());
    (0..count as u64)
        .map(|i| {
            let mut rng = rng_for(seed, i);
            let path = sampler.draw(ke, &mut rng)?;
            let f_train = DVector::from_vec(path.values(data.points())?);
            let f_star = DVector::from_vec(path.values(xs)?);
            let eps = DVector::from_fn(data.len(), |_, _| noise_sd * normal(&mut rng));
            let update = post.solve(&(&y - f_train - eps));
            Ok((f_star + kxs.tr_mul(&update)).iter().copied().collect())
        })
        .collect()
}

fn normal(rng: &mut ChaCha20Rng) -> f64 {
    StandardNormal.sample(rng)
}
