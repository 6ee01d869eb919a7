//! Categorical, log-normal, von Mises mixture and Gaussian KDE distributions:
//! fitting, log-densities and sampling.

mod bessel;
mod categorical;
mod kde;
mod lognormal;
mod vonmises;

pub use bessel::{bessel_i0, log_bessel_i0};
pub use categorical::Categorical;
pub use kde::KdeDist;
pub use lognormal::{LogNormalDist, SIGMA_MIN};
pub use vonmises::{VonMises, VonMisesMixture, KAPPA_MAX};

/// Floor applied to probabilities of unseen outcomes.
pub const PROB_FLOOR: f64 = 1e-6;

pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// `log Σ exp(x_i)`, stable for large magnitudes.
pub(crate) fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
