use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::PROB_FLOOR;
use crate::error::{Error, Result};

/// A distribution over string labels. Outcomes are kept in sorted order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Categorical {
    pub outcomes: Vec<String>,
    pub probs: Vec<f64>,
}

impl Categorical {
    /// Maximum-likelihood fit: each outcome's relative frequency.
    pub fn fit(counts: &BTreeMap<String, u64>) -> Result<Self> {
        let total: u64 = counts.values().sum();
        if total == 0 {
            return Err(Error::fit("categorical", "all counts are zero"));
        }
        let outcomes: Vec<String> = counts.keys().cloned().collect();
        let probs = counts.values().map(|&c| c as f64 / total as f64).collect();
        Ok(Self { outcomes, probs })
    }

    /// A point mass on one label.
    pub fn certain(label: &str) -> Self {
        Self {
            outcomes: vec![label.to_string()],
            probs: vec![1.0],
        }
    }

    pub fn from_pairs(pairs: &[(&str, f64)]) -> Self {
        let mut map: BTreeMap<String, f64> = BTreeMap::new();
        for (k, p) in pairs {
            *map.entry(k.to_string()).or_default() += p;
        }
        Self {
            outcomes: map.keys().cloned().collect(),
            probs: map.values().copied().collect(),
        }
    }

    pub fn prob(&self, label: &str) -> f64 {
        self.outcomes
            .iter()
            .position(|o| o == label)
            .map_or(0.0, |i| self.probs[i])
    }

    /// Log-probability with unseen or zero-probability outcomes floored.
    pub fn log_prob(&self, label: &str) -> f64 {
        self.prob(label).max(PROB_FLOOR).ln()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &str {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (o, p) in self.outcomes.iter().zip(&self.probs) {
            acc += p;
            if u < acc {
                return o;
            }
        }
        // rounding: fall back to the last outcome with positive mass
        let i = self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        &self.outcomes[i]
    }

    pub fn total_variation(&self, other: &Categorical) -> f64 {
        let mut labels: Vec<&String> = self.outcomes.iter().chain(&other.outcomes).collect();
        labels.sort();
        labels.dedup();
        0.5 * labels
            .into_iter()
            .map(|l| (self.prob(l) - other.prob(l)).abs())
            .sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn counts(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn frequencies() {
        let c = Categorical::fit(&counts(&[("u1", 3), ("u2", 1)])).unwrap();
        assert_eq!(c.probs, vec![0.75, 0.25]);
        let c = Categorical::fit(&counts(&[("u1", 5)])).unwrap();
        assert_eq!(c.probs, vec![1.0]);
        let c = Categorical::fit(&counts(&[("a", 2), ("b", 2), ("c", 4)])).unwrap();
        assert_eq!(c.probs, vec![0.25, 0.25, 0.5]);
    }

    #[test]
    fn zero_counts_rejected() {
        assert!(Categorical::fit(&counts(&[("a", 0)])).is_err());
        assert!(Categorical::fit(&BTreeMap::new()).is_err());
    }

    #[test]
    fn floor_for_unseen() {
        let c = Categorical::certain("a");
        assert_eq!(c.log_prob("a"), 0.0);
        assert_eq!(c.log_prob("b"), PROB_FLOOR.ln());
    }

    #[test]
    fn sampling_never_picks_zero_mass() {
        let c = Categorical::fit(&counts(&[("a", 0), ("b", 3)])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(c.sample(&mut rng), "b");
        }
    }

    proptest::proptest! {
        #[test]
        fn fit_sums_to_one(raw in proptest::collection::vec(0u64..1000, 1..20)) {
            proptest::prop_assume!(raw.iter().any(|&c| c > 0));
            let map: BTreeMap<String, u64> =
                raw.iter().enumerate().map(|(i, &c)| (format!("k{i:02}"), c)).collect();
            let c = Categorical::fit(&map).unwrap();
            let s: f64 = c.probs.iter().sum();
            proptest::prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
