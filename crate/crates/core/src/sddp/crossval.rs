//! Radius selection by k-fold validation on the training paths.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dro::RhoRule;
use crate::error::{Error, Result};
use crate::scenario::TrajectorySet;

use super::{evaluate_policy_out_of_sample, run, ReportSpec, SolveConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossvalReport {
    pub grid: Vec<f64>,
    /// Mean validation cost per grid point, averaged over folds.
    pub scores: Vec<f64>,
    pub best_rho: f64,
}

/// Contiguous fold `f` of `n` paths split into `folds` parts.
fn fold_range(n: usize, folds: usize, f: usize) -> std::ops::Range<usize> {
    (f * n / folds)..((f + 1) * n / folds)
}

/// Trains with each radius in `grid` on all but one fold and scores the
/// held-out fold by its mean out-of-sample cost. The lowest score wins;
/// ties go to the earlier grid point.
pub fn cross_validate_rho(traj: &TrajectorySet, cfg: &SolveConfig, grid: &[f64], folds: usize) -> Result<CrossvalReport> {
    let n = traj.n_paths();
    if grid.is_empty() {
        return Err(Error::Config("empty radius grid".into()));
    }
    if folds < 2 || folds > n {
        return Err(Error::Config(format!("need 2 <= folds <= {n}, got {folds}")));
    }
    if let Some(r) = grid.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
        return Err(Error::Config(format!("radius {r} is not a nonnegative number")));
    }
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..folds).map(move |f| (g, f))).collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(g, f)| {
            let held = fold_range(n, folds, f);
            let train: Vec<usize> = (0..n).filter(|i| !held.contains(i)).collect();
            let valid: Vec<usize> = held.collect();
            let c = SolveConfig {
                rho: RhoRule::Manual { rho: grid[g] },
                ..cfg.clone()
            };
            let out = run(&traj.subset(&train)?, &c)?;
            let rep = evaluate_policy_out_of_sample(&out.policy, &traj.subset(&valid)?, &ReportSpec::default())?;
            // Failed validation paths count at the worst observed cost.
            let worst = rep.costs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = rep.costs.iter().sum::<f64>() + worst * rep.failures.len() as f64;
            if rep.costs.is_empty() {
                return Ok(f64::INFINITY);
            }
            Ok(total / rep.n_paths as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    let per_point: Vec<f64> = (0..grid.len())
        .map(|g| scores[g * folds..(g + 1) * folds].iter().sum::<f64>() / folds as f64)
        .collect();
    let mut best = 0;
    for g in 1..grid.len() {
        if per_point[g] < per_point[best] {
            best = g;
        }
    }
    Ok(CrossvalReport {
        grid: grid.to_vec(),
        scores: per_point,
        best_rho: grid[best],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_partition() {
        for n in 2..20 {
            for k in 2..=n {
                let mut all: Vec<usize> = (0..k).flat_map(|f| fold_range(n, k, f)).collect();
                all.dedup();
                assert_eq!(all, (0..n).collect::<Vec<_>>());
                assert!((0..k).all(|f| !fold_range(n, k, f).is_empty()));
            }
        }
    }
}
