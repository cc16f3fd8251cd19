//! Nadaraya-Watson conditional weights with an exponential kernel.
//!
//! Given the stage-`t` features of the N observed paths as anchors, the
//! probability of moving to path `i`'s stage-`t+1` realization from a
//! current feature `q` is proportional to `exp(-|q - a_i|_2 / h)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BandwidthRule {
    /// Use `KernelConfig::bandwidth_h` as given.
    Manual,
    /// `h = c_h * N^(-1/(p+4))`, evaluated once N and p are known.
    AutoRate { c_h: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub bandwidth_h: f64,
    pub rule: BandwidthRule,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            bandwidth_h: 1.0,
            rule: BandwidthRule::Manual,
        }
    }
}

impl KernelConfig {
    pub fn manual(h: f64) -> Self {
        Self {
            bandwidth_h: h,
            rule: BandwidthRule::Manual,
        }
    }

    pub fn auto(c_h: f64) -> Self {
        Self {
            bandwidth_h: c_h,
            rule: BandwidthRule::AutoRate { c_h },
        }
    }

    /// The bandwidth to use for `n` samples of dimension `p`.
    pub fn resolve(&self, n: usize, p: usize) -> Result<f64> {
        let h = match self.rule {
            BandwidthRule::Manual => self.bandwidth_h,
            BandwidthRule::AutoRate { c_h } => {
                if !(c_h > 0.0) || n == 0 || p == 0 {
                    return Err(Error::InvalidParameter(format!(
                        "auto bandwidth needs c_h > 0, N >= 1, p >= 1 (got {c_h}, {n}, {p})"
                    )));
                }
                auto_bandwidth(n, p, c_h)
            }
        };
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")));
        }
        Ok(h)
    }
}

/// `c_h * N^(-1/(p+4))`
pub fn auto_bandwidth(n: usize, p: usize, c_h: f64) -> f64 {
    c_h * (n as f64).powf(-1.0 / (p as f64 + 4.0))
}

/// A probability vector over the N observed paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalWeights(Vec<f64>);

impl ConditionalWeights {
    /// Validates nonnegativity and unit mass (to 1e-12).
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyAnchors);
        }
        if let Some(i) = weights.iter().position(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter(format!("weight {i} is {}", weights[i])));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("weights sum to {total}")));
        }
        Ok(Self(weights))
    }

    /// Normalizes a nonnegative vector with positive mass.
    pub fn from_unnormalized(mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter("weights must be nonnegative with positive mass".into()));
        }
        for w in &mut weights {
            *w /= total;
        }
        Ok(Self(weights))
    }

    /// `1/N` on every path, used at the root.
    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform weights need at least one path");
        Self(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `sum_i w_i z_i`
    pub fn expect(&self, z: &[f64]) -> f64 {
        self.0.iter().zip(z).map(|(w, v)| w * v).sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for ConditionalWeights {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Kernel weights of `query` against `anchors` with bandwidth `h`.
pub fn nw_weights_h(query: &[f64], anchors: &[Vec<f64>], h: f64) -> Result<ConditionalWeights> {
    if anchors.is_empty() {
        return Err(Error::EmptyAnchors);
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")));
    }
    let p = query.len();
    let mut dist = Vec::with_capacity(anchors.len());
    for (i, a) in anchors.iter().enumerate() {
        if a.len() != p {
            return Err(Error::Dimension(format!(
                "anchor {i} has dimension {}, query has {p}",
                a.len()
            )));
        }
        let d2: f64 = a.iter().zip(query).map(|(x, y)| (x - y) * (x - y)).sum();
        dist.push(d2.sqrt());
    }
    // Shifting by the nearest anchor keeps the largest term at exp(0) = 1.
    let nearest = dist.iter().copied().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = dist.iter().map(|d| (-(d - nearest) / h).exp()).collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    Ok(ConditionalWeights(w))
}

/// Kernel weights with the bandwidth resolved from `config`.
pub fn nw_weights(query: &[f64], anchors: &[Vec<f64>], config: &KernelConfig) -> Result<ConditionalWeights> {
    if anchors.is_empty() {
        return Err(Error::EmptyAnchors);
    }
    let h = config.resolve(anchors.len(), query.len().max(1))?;
    nw_weights_h(query, anchors, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_anchor() {
        let w = nw_weights(&[3.0], &[vec![-7.0]], &KernelConfig::manual(0.1)).unwrap();
        assert_eq!(w.as_slice(), &[1.0]);
    }

    #[test]
    fn two_anchor_hand_value() {
        let w = nw_weights(&[0.0], &[vec![0.0], vec![1.0]], &KernelConfig::manual(1.0)).unwrap();
        let e = (-1.0f64).exp();
        assert!((w[0] - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((w[1] - e / (1.0 + e)).abs() < 1e-15);
        assert!((w[0] - 0.7310585786300049).abs() < 1e-15);
    }

    #[test]
    fn huge_bandwidth_is_uniform() {
        let anchors = vec![vec![0.0, 1.0], vec![5.0, -2.0], vec![100.0, 3.0]];
        let w = nw_weights(&[1.0, 1.0], &anchors, &KernelConfig::manual(1e12)).unwrap();
        for x in w.as_slice() {
            assert!((x - 1.0 / 3.0).abs() < 1e-6);
        }
    }

    #[test]
    fn far_anchors_do_not_underflow_to_nan() {
        let w = nw_weights_h(&[0.0], &[vec![1e6], vec![1e6 + 1.0]], 1e-3).unwrap();
        assert_eq!(w[0], 1.0);
        assert_eq!(w[1], 0.0);
    }

    #[test]
    fn bandwidth_rates() {
        assert_eq!(auto_bandwidth(1, 1, 1.0), 1.0);
        assert!((auto_bandwidth(32, 1, 1.0) - 0.5).abs() < 1e-15);
        assert!((auto_bandwidth(16, 4, 2.0) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(nw_weights_h(&[0.0], &[], 1.0), Err(Error::EmptyAnchors)));
        assert!(matches!(nw_weights_h(&[0.0], &[vec![0.0, 1.0]], 1.0), Err(Error::Dimension(_))));
        assert!(nw_weights_h(&[0.0], &[vec![0.0]], 0.0).is_err());
    }

    #[test]
    fn weight_validation() {
        assert!(ConditionalWeights::new(vec![0.5, 0.5]).is_ok());
        assert!(ConditionalWeights::new(vec![0.5, 0.6]).is_err());
        assert!(ConditionalWeights::new(vec![1.5, -0.5]).is_err());
    }

    fn anchors_and_query() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, f64)> {
        (1usize..=20, 1usize..=4).prop_flat_map(|(n, p)| {
            (
                prop::collection::vec(prop::collection::vec(-5.0..5.0f64, p), n),
                prop::collection::vec(-5.0..5.0f64, p),
                0.05..10.0f64,
            )
        })
    }

    proptest! {
        #[test]
        fn permutation_equivariant((anchors, q, h) in anchors_and_query(), rot in 0usize..20) {
            let w = nw_weights_h(&q, &anchors, h).unwrap();
            let n = anchors.len();
            let r = rot % n;
            let mut rotated = anchors.clone();
            rotated.rotate_left(r);
            let wr = nw_weights_h(&q, &rotated, h).unwrap();
            for i in 0..n {
                prop_assert!((wr[i] - w[(i + r) % n]).abs() < 1e-14);
            }
        }

        #[test]
        fn moving_closer_never_lowers_weight((anchors, q, h) in anchors_and_query(), t in 0.0..1.0f64) {
            let w = nw_weights_h(&q, &anchors, h).unwrap();
            let mut moved = anchors.clone();
            for (a, x) in moved[0].iter_mut().zip(&q) {
                *a += t * (x - *a);
            }
            let w2 = nw_weights_h(&q, &moved, h).unwrap();
            prop_assert!(w2[0] >= w[0] - 1e-15);
        }

        #[test]
        fn matches_naive_when_representable((anchors, q, h) in anchors_and_query()) {
            let naive: Vec<f64> = anchors
                .iter()
                .map(|a| (-a.iter().zip(&q).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt() / h).exp())
                .collect();
            let total: f64 = naive.iter().sum();
            prop_assume!(total > 1e-200);
            let w = nw_weights_h(&q, &anchors, h).unwrap();
            for (a, b) in w.as_slice().iter().zip(&naive) {
                prop_assert!((a - b / total).abs() < 1e-12);
            }
        }
    }
}
