use super::{Hyperparameters, Smoothness};
use crate::error::{Error, Result};
use crate::spectral::EigenSystem;

/// Estimate of the spectral weight lost by truncating the series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationDiagnostic {
    /// Neglected weight over total weight, in `[0, 1]`.
    pub tail_fraction: f64,
    /// For ν = ∞ only: `exp(-κ² λ_{N-1} / 2) / a_0`.
    pub crude_bound: Option<f64>,
    /// Fitted Weyl constant `c` in `λ_j ≈ c j^{2/d}`.
    pub weyl_constant: f64,
}

// 8-point Gauss–Legendre on [-1, 1]
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];
const PANELS: usize = 96;

/// Extrapolates the spectrum past the last level with Weyl's law
/// `λ_j ≈ c j^{2/d}` (fitted on the top decile of eigenfunctions) and
/// integrates the weight over the extrapolated tail.
pub fn truncation_diagnostic(h: &Hyperparameters, es: &dyn EigenSystem) -> Result<TruncationDiagnostic> {
    h.validate()?;
    let levels = es.levels();
    if levels.len() < 2 {
        return Err(Error::InvalidArgument("truncation diagnostic needs at least 2 levels".into()));
    }
    let dim = es.dim();
    let exponent = 2.0 / dim as f64;

    // eigenfunction-indexed spectrum, j = 1, 2, ...
    let mut spectrum = Vec::new();
    for l in levels {
        for _ in 0..l.multiplicity {
            spectrum.push(l.eigenvalue);
        }
    }
    let total = spectrum.len();
    let start = ((total as f64 * 0.9).floor() as usize).min(total - 1);
    let fit: Vec<(f64, f64)> = spectrum[start..]
        .iter()
        .enumerate()
        .filter(|(_, &lam)| lam > 0.0)
        .map(|(i, &lam)| ((start + i + 1) as f64, lam))
        .collect();
    if fit.is_empty() {
        return Err(Error::InvalidArgument("no positive eigenvalues to fit".into()));
    }
    let log_c = fit.iter().map(|(j, lam)| lam.ln() - exponent * j.ln()).sum::<f64>() / fit.len() as f64;
    let weyl = log_c.exp();

    let log_a0 = h.log_weight(levels[0].eigenvalue.max(0.0), dim);
    let rel = |lam: f64| (h.log_weight(lam, dim) - log_a0).exp();
    let computed: f64 = levels.iter().map(|l| l.multiplicity as f64 * rel(l.eigenvalue.max(0.0))).sum();

    // Σ_{j > J} a(c j^{2/d}) ≈ ∫_{J+1/2}^∞, mapped to u ∈ (0, 1] by t = T/u
    let t0 = total as f64 + 0.5;
    let integrand = |u: f64| {
        let t = t0 / u;
        rel(weyl * t.powf(exponent)) * t0 / (u * u)
    };
    let mut tail = 0.0;
    for p in 0..PANELS {
        // panels graded toward u = 0
        let lo = (p as f64 / PANELS as f64).powi(3);
        let hi = ((p + 1) as f64 / PANELS as f64).powi(3);
        let (mid, half) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let v = integrand(mid + half * x);
            if v.is_finite() {
                tail += w * half * v;
            }
        }
    }

    let tail_fraction = (tail / (tail + computed)).clamp(0.0, 1.0);
    let crude_bound = match h.nu {
        Smoothness::Infinite => Some(rel(levels[levels.len() - 1].eigenvalue)),
        Smoothness::Finite(_) => None,
    };
    Ok(TruncationDiagnostic {
        tail_fraction,
        crude_bound,
        weyl_constant: weyl,
    })
}
