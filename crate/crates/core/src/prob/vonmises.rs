use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{log_bessel_i0, log_sum_exp};
use crate::error::{Error, Result};
use crate::geometry::wrap_yaw;

/// Concentration cap applied by every fit.
pub const KAPPA_MAX: f64 = 500.0;

const EM_MAX_ITERS: usize = 500;
const EM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VonMises {
    pub weight: f64,
    pub mu: f64,
    pub kappa: f64,
}

impl VonMises {
    fn log_density(&self, theta: f64) -> f64 {
        self.kappa * (theta - self.mu).cos() - TAU.ln() - log_bessel_i0(self.kappa)
    }

    /// Best–Fisher rejection sampler.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.kappa < 1e-6 {
            return rng.random::<f64>() * TAU;
        }
        let k = self.kappa;
        let tau = 1.0 + (1.0 + 4.0 * k * k).sqrt();
        let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * k);
        let r = (1.0 + rho * rho) / (2.0 * rho);
        loop {
            let u1: f64 = rng.random();
            let u2: f64 = rng.random();
            let u3: f64 = rng.random();
            let z = (PI * u1).cos();
            let f = (1.0 + r * z) / (r + z);
            let c = k * (r - f);
            if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
                let dev = f.clamp(-1.0, 1.0).acos();
                let theta = if u3 > 0.5 { self.mu + dev } else { self.mu - dev };
                return wrap_yaw(theta);
            }
        }
    }
}

/// Inverse of the mean resultant length `A(κ) = I₁(κ)/I₀(κ)`, Best–Fisher
/// piecewise approximation, capped at [`KAPPA_MAX`].
pub(crate) fn kappa_from_resultant(r: f64) -> f64 {
    let r = r.clamp(0.0, 1.0);
    let k = if r < 0.53 {
        2.0 * r + r.powi(3) + 5.0 * r.powi(5) / 6.0
    } else if r < 0.85 {
        -0.4 + 1.39 * r + 0.43 / (1.0 - r)
    } else {
        let d = r.powi(3) - 4.0 * r * r + 3.0 * r;
        if d <= 0.0 {
            KAPPA_MAX
        } else {
            1.0 / d
        }
    };
    k.clamp(0.0, KAPPA_MAX)
}

/// Weighted circular mean and mean resultant length.
fn circular_moments(angles: &[f64], weights: Option<&[f64]>) -> (f64, f64) {
    let (mut c, mut s, mut total) = (0.0, 0.0, 0.0);
    for (i, &a) in angles.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        c += w * a.cos();
        s += w * a.sin();
        total += w;
    }
    if total <= 0.0 {
        return (0.0, 0.0);
    }
    let (c, s) = (c / total, s / total);
    (wrap_yaw(s.atan2(c)), (c * c + s * s).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VonMisesMixture {
    pub components: Vec<VonMises>,
}

impl VonMisesMixture {
    pub fn single(mu: f64, kappa: f64) -> Self {
        Self {
            components: vec![VonMises {
                weight: 1.0,
                mu: wrap_yaw(mu),
                kappa,
            }],
        }
    }

    /// Fits `k_components` components by EM. The component count is reduced
    /// so that each has at least five angles; a single component is the
    /// closed-form circular-mean fit.
    pub fn fit(angles: &[f64], k_components: usize) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::fit("von Mises", "no angles"));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::fit("von Mises", "non-finite angle"));
        }
        let mut sorted: Vec<f64> = angles.iter().map(|&a| wrap_yaw(a)).collect();
        sorted.sort_by(f64::total_cmp);
        let k = k_components.clamp(1, (sorted.len() / 5).max(1));
        let (mu, r) = circular_moments(&sorted, None);
        if k == 1 {
            return Ok(Self::single(mu, kappa_from_resultant(r)));
        }
        Ok(Self::em(&sorted, k, mu))
    }

    fn em(angles: &[f64], k: usize, mean: f64) -> Self {
        let n = angles.len();
        let mut comps: Vec<VonMises> = (0..k)
            .map(|j| VonMises {
                weight: 1.0 / k as f64,
                mu: wrap_yaw(mean + TAU * j as f64 / k as f64),
                kappa: 2.0,
            })
            .collect();
        let mut resp = vec![vec![0.0; n]; k];
        let mut prev_ll = f64::NEG_INFINITY;
        for _ in 0..EM_MAX_ITERS {
            let mut ll = 0.0;
            for (i, &a) in angles.iter().enumerate() {
                let logs: Vec<f64> = comps
                    .iter()
                    .map(|c| c.weight.max(1e-300).ln() + c.log_density(a))
                    .collect();
                let norm = log_sum_exp(logs.iter().copied());
                ll += norm;
                for j in 0..k {
                    resp[j][i] = (logs[j] - norm).exp();
                }
            }
            for (j, comp) in comps.iter_mut().enumerate() {
                let mass: f64 = resp[j].iter().sum();
                if mass < 1e-9 {
                    comp.weight = 0.0;
                    continue;
                }
                let (mu, r) = circular_moments(angles, Some(&resp[j]));
                comp.weight = mass / n as f64;
                comp.mu = mu;
                comp.kappa = kappa_from_resultant(r);
            }
            if (ll - prev_ll).abs() <= EM_TOL * ll.abs().max(1.0) {
                break;
            }
            prev_ll = ll;
        }
        comps.retain(|c| c.weight > 0.0);
        let total: f64 = comps.iter().map(|c| c.weight).sum();
        for c in &mut comps {
            c.weight /= total;
        }
        Self { components: comps }
    }

    pub fn logpdf(&self, theta: f64) -> f64 {
        let theta = wrap_yaw(theta);
        log_sum_exp(
            self.components
                .iter()
                .map(|c| c.weight.ln() + c.log_density(theta)),
        )
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for c in &self.components {
            acc += c.weight;
            if u < acc {
                return c.sample(rng);
            }
        }
        self.components[self.components.len() - 1].sample(rng)
    }
}
