use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::LN_SQRT_2PI;
use crate::error::{Error, Result};

/// Smallest log-scale standard deviation a fit may return.
pub const SIGMA_MIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalDist {
    pub mu: f64,
    pub sigma: f64,
}

impl LogNormalDist {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !mu.is_finite() || !sigma.is_finite() {
            return Err(Error::fit("log-normal", format!("invalid parameters mu={mu}, sigma={sigma}")));
        }
        Ok(Self { mu, sigma })
    }

    /// MLE: mean and population standard deviation of the logs.
    pub fn fit(samples: &[f64]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::fit("log-normal", format!("{} samples, need at least 2", samples.len())));
        }
        if let Some(bad) = samples.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::fit("log-normal", format!("non-positive sample {bad}")));
        }
        let logs: Vec<f64> = samples.iter().map(|x| x.ln()).collect();
        let n = logs.len() as f64;
        let mu = logs.iter().sum::<f64>() / n;
        let var = logs.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / n;
        Ok(Self {
            mu,
            sigma: var.sqrt().max(SIGMA_MIN),
        })
    }

    /// Log-density; `-inf` for `x <= 0`.
    pub fn logpdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        let z = (x.ln() - self.mu) / self.sigma;
        -x.ln() - self.sigma.ln() - LN_SQRT_2PI - 0.5 * z * z
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        (self.mu + self.sigma * z).exp()
    }
}
