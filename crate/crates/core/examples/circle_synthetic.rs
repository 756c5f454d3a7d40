//! Writes the synthetic circle regression dataset (`point,y`) to stdout.
//!
//! 60 uniform points, a deterministic-feature prior path of the Matérn-3/2
//! kernel with σ² = 1, κ = 0.2 over 256 levels, plus noise of variance 1e-4.
//! Everything derives from seed 0.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rmgp_core::gp::{rng_for, sample_prior_deterministic};
use rmgp_core::spectral::circle_eigensystem;
use rmgp_core::{Hyperparameters, ManifoldPoint};

fn main() -> rmgp_core::Result<()> {
    let es = Arc::new(circle_eigensystem(256)?);
    let truth = Hyperparameters::matern(1.0, 0.2, 1.5)?;
    let mut rng = rng_for(0, 0);
    let x: Vec<f64> = (0..60).map(|_| rng.random::<f64>()).collect();
    let points = x.iter().map(|&v| ManifoldPoint::circle(v)).collect::<rmgp_core::Result<Vec<_>>>()?;
    let f = sample_prior_deterministic(&truth, es, 0, &points)?;
    let noise: f64 = 1e-4;
    let mut rng = rng_for(0, 1);
    println!("point,y");
    for (xi, fi) in x.iter().zip(&f) {
        let e: f64 = rng.sample(StandardNormal);
        println!("{xi:.16e},{:.16e}", fi + noise.sqrt() * e);
    }
    Ok(())
}
