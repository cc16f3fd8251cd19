//! A small multi-product inventory model for tests and examples.
//!
//! Each stage orders `u >= 0` under a shared capacity, meets the demand
//! given by the stage feature, carries leftover stock `y+` as the state and
//! pays a penalty on unmet demand `y-`:
//!
//! ```text
//! min  order u + hold y+ + short y-
//! s.t. y+_k - u_k - y-_k - z_k = -demand_k,   sum u + slack = capacity
//! ```

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scenario::{simulate_markov_features, trajectories_from_features, DatumTemplate, MarkovSpec, StageDatum, StageShape, TrajectorySet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryToy {
    pub products: usize,
    pub horizon: usize,
    pub order_cost: f64,
    pub hold_cost: f64,
    pub short_cost: f64,
    pub capacity: f64,
}

impl InventoryToy {
    pub fn new(products: usize, horizon: usize) -> Self {
        Self {
            products,
            horizon,
            order_cost: 1.0,
            hold_cost: 0.2,
            short_cost: 4.0,
            capacity: 2.5 * products as f64,
        }
    }

    /// AR(1) demand around 2 with uniform-scale Gaussian shocks, kept in `[0, 6]`.
    pub fn demand_process(&self, persistence: f64, noise: f64) -> MarkovSpec {
        let d = self.products;
        let mut phi = vec![vec![0.0; d]; d];
        let mut cov = vec![vec![0.0; d]; d];
        for k in 0..d {
            phi[k][k] = persistence;
            cov[k][k] = noise * noise;
        }
        MarkovSpec {
            mu: vec![2.0 * (1.0 - persistence); d],
            phi,
            noise_cov: cov,
            initial: vec![2.0; d],
            box_lower: vec![0.0; d],
            box_upper: vec![6.0; d],
        }
    }

    /// `n` simulated demand paths mapped to trajectories.
    pub fn sample(&self, n: usize, persistence: f64, noise: f64, seed: u64) -> Result<TrajectorySet> {
        let paths = simulate_markov_features(&self.demand_process(persistence, noise), self.horizon, n, seed)?;
        trajectories_from_features(self, &paths)
    }
}

impl DatumTemplate for InventoryToy {
    fn horizon(&self) -> usize {
        self.horizon
    }

    fn feature_dim(&self) -> usize {
        self.products
    }

    fn shape(&self, t: usize) -> StageShape {
        let d = self.products;
        StageShape {
            rows: d + 1,
            cols: 3 * d + 1,
            state_dim: if t < self.horizon { d } else { 0 },
        }
    }

    fn datum(&self, t: usize, feature: &[f64]) -> StageDatum {
        let d = self.products;
        let sh = self.shape(t);
        let din = if t == 1 { 0 } else { d };
        let mut a = vec![vec![0.0; sh.cols]; sh.rows];
        let mut b_mat = vec![vec![0.0; din]; sh.rows];
        let mut rhs = vec![0.0; sh.rows];
        let mut c = vec![0.0; sh.cols];
        for k in 0..d {
            a[k][k] = 1.0;
            a[k][d + k] = -1.0;
            a[k][2 * d + k] = -1.0;
            if t > 1 {
                b_mat[k][k] = -1.0;
            }
            rhs[k] = -feature[k];
            a[d][d + k] = 1.0;
            c[k] = self.hold_cost;
            c[d + k] = self.order_cost;
            c[2 * d + k] = self.short_cost;
        }
        a[d][3 * d] = 1.0;
        rhs[d] = self.capacity;
        StageDatum {
            c,
            a,
            b_mat,
            rhs,
            feature: feature.to_vec(),
        }
    }
}
