use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{log_sum_exp, LN_SQRT_2PI};
use crate::error::{Error, Result};

/// Smallest per-dimension bandwidth (meters).
pub const BANDWIDTH_MIN: f64 = 1e-3;

/// Gaussian product-kernel density estimate with a diagonal bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeDist {
    pub samples: Vec<Vec<f64>>,
    pub bandwidths: Vec<f64>,
}

impl KdeDist {
    /// Stores the samples (sorted, so the result does not depend on input
    /// order) with Silverman bandwidths `1.06 σ̂ n^(-1/5)` per dimension.
    pub fn fit(samples: &[Vec<f64>]) -> Result<Self> {
        let dim = match samples.first() {
            Some(s) if !s.is_empty() => s.len(),
            _ => return Err(Error::fit("kde", "no samples")),
        };
        if samples.iter().any(|s| s.len() != dim) {
            return Err(Error::fit("kde", "samples have mixed dimensions"));
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::fit("kde", "non-finite sample"));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let n = sorted.len() as f64;
        let bandwidths = (0..dim)
            .map(|d| {
                let mean = sorted.iter().map(|s| s[d]).sum::<f64>() / n;
                let var = if sorted.len() > 1 {
                    sorted.iter().map(|s| (s[d] - mean).powi(2)).sum::<f64>() / (n - 1.0)
                } else {
                    0.0
                };
                (1.06 * var.sqrt() * n.powf(-0.2)).max(BANDWIDTH_MIN)
            })
            .collect();
        Ok(Self {
            samples: sorted,
            bandwidths,
        })
    }

    pub fn with_bandwidths(samples: Vec<Vec<f64>>, bandwidths: Vec<f64>) -> Result<Self> {
        if samples.is_empty() || samples.iter().any(|s| s.len() != bandwidths.len()) {
            return Err(Error::fit("kde", "sample/bandwidth dimensions disagree"));
        }
        if bandwidths.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::fit("kde", "bandwidths must be positive"));
        }
        Ok(Self { samples, bandwidths })
    }

    pub fn dim(&self) -> usize {
        self.bandwidths.len()
    }

    pub fn logpdf(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::fit(
                "kde",
                format!("query has {} dimensions, model has {}", x.len(), self.dim()),
            ));
        }
        let norm: f64 = self
            .bandwidths
            .iter()
            .map(|h| h.ln() + LN_SQRT_2PI)
            .sum();
        let lse = log_sum_exp(self.samples.iter().map(|s| {
            -0.5 * s
                .iter()
                .zip(x)
                .zip(&self.bandwidths)
                .map(|((si, xi), h)| ((xi - si) / h).powi(2))
                .sum::<f64>()
        }));
        Ok(lse - (self.samples.len() as f64).ln() - norm)
    }

    /// A stored sample chosen uniformly, jittered by the kernel.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let base = &self.samples[rng.random_range(0..self.samples.len())];
        base.iter()
            .zip(&self.bandwidths)
            .map(|(b, h)| {
                let z: f64 = rng.sample(StandardNormal);
                b + h * z
            })
            .collect()
    }
}
