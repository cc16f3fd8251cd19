//! Greedy out-of-sample simulation of a trained lower policy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::dot;
use crate::scenario::TrajectorySet;

use super::{Future, Side, Solver};

/// Optional extra statistics for the report.
#[derive(Clone, Copy, Default)]
pub struct ReportSpec<'a> {
    /// Maps the terminal-stage decision vector to a wealth figure.
    pub terminal_wealth: Option<&'a (dyn Fn(&[f64]) -> f64 + Sync)>,
    /// Wealth of the riskless alternative, used for the Sharpe ratio.
    pub benchmark_wealth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WealthStats {
    pub mean: f64,
    pub std: f64,
    /// `(mean - benchmark) / std`; zero when the spread is zero.
    pub sharpe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFailure {
    /// 1-based test path.
    pub path: usize,
    pub stage: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n_paths: usize,
    /// Total cost of each successful path, in test-set order.
    pub costs: Vec<f64>,
    pub wealth: Vec<f64>,
    pub mean: f64,
    /// Sample variance (divisor `n - 1`; zero for a single path).
    pub variance: f64,
    pub std: f64,
    /// Negated mean cost.
    pub utility: f64,
    pub wealth_stats: Option<WealthStats>,
    pub failures: Vec<PathFailure>,
}

struct PathOutcome {
    cost: f64,
    terminal: Vec<f64>,
}

/// Runs the policy along every test path. At each stage the conditional
/// weights are recomputed from the realized feature against the training
/// anchors and the stage LP is solved with the final approximations.
pub fn evaluate_policy_out_of_sample(
    policy: &Solver,
    test: &TrajectorySet,
    spec: &ReportSpec<'_>,
) -> Result<EvaluationReport> {
    let train = &policy.tree.traj.schema;
    if test.horizon() != train.horizon
        || test.feature_dim() != train.feature_dim
        || test.schema.stages != train.stages
    {
        return Err(Error::Dimension("test trajectories differ in shape from training".into()));
    }
    if policy.iterations() == 0 {
        return Err(Error::InvalidParameter("policy has not been trained".into()));
    }
    let outcomes: Vec<std::result::Result<PathOutcome, PathFailure>> =
        (0..test.n_paths()).into_par_iter().map(|p| simulate(policy, test, p)).collect();

    let mut costs = Vec::new();
    let mut wealth = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(out) => {
                if let Some(f) = spec.terminal_wealth {
                    wealth.push(f(&out.terminal));
                }
                costs.push(out.cost);
            }
            Err(f) => failures.push(f),
        }
    }
    let (mean, variance) = mean_var(&costs);
    let wealth_stats = spec.terminal_wealth.map(|_| {
        let (m, v) = mean_var(&wealth);
        let std = v.sqrt();
        WealthStats {
            mean: m,
            std,
            sharpe: if std > 0.0 { (m - spec.benchmark_wealth) / std } else { 0.0 },
        }
    });
    Ok(EvaluationReport {
        n_paths: test.n_paths(),
        costs,
        wealth,
        mean,
        variance,
        std: variance.sqrt(),
        utility: -mean,
        wealth_stats,
        failures,
    })
}

fn simulate(policy: &Solver, test: &TrajectorySet, p: usize) -> std::result::Result<PathOutcome, PathFailure> {
    let fail = |stage: usize, e: Error| PathFailure {
        path: p + 1,
        stage,
        message: e.to_string(),
    };
    let horizon = test.horizon();
    let model = policy.cfg.transition;
    let mut incoming: Vec<f64> = Vec::new();
    let mut cost = 0.0;
    let mut terminal = Vec::new();
    for t in 1..=horizon {
        let datum = test.datum(t, p);
        let step = (|| -> Result<Vec<f64>> {
            let w;
            let future = if t == 1 {
                super::Future::Node(crate::cuts::Node::Root)
            } else {
                w = policy.tree.weights_at(t, &datum.feature, model)?;
                Future::Weights(&w)
            };
            let built = policy.build_stage(t, datum, &incoming, Side::Lower, future)?;
            Ok(policy.solve_built(&built, t, p + 1)?.x)
        })();
        let x = step.map_err(|e| fail(t, e))?;
        cost += dot(&datum.c, &x);
        let width = test.schema.stage(t).state_dim;
        incoming = x[..width].to_vec();
        if t == horizon {
            terminal = x;
        }
    }
    Ok(PathOutcome { cost, terminal })
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
