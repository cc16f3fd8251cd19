//! Extensive-form reference values on small trees.
//!
//! Every node of the scenario tree gets its own copy of the stage columns
//! and a value column `V >= c'x + (future)`, where the future is the
//! nominal expectation of the children's `V` (DD) or its worst case over the
//! ambiguity set written through the dual (RDD). One LP then gives the
//! exact root value without any cutting planes.

use crate::cuts::Node;
use crate::dro::{splice_dro, AmbiguityParams};
use crate::error::{Error, Result};
use crate::lp::{solve, LpBuilder, LpStatus};
use crate::scenario::TrajectorySet;

use super::{Algorithm, SolveConfig, Tree};

/// Largest number of leaves the oracle will build.
pub const MAX_ORACLE_LEAVES: usize = 256;

/// Value of the root problem on the full tree.
pub fn extensive_form_oracle(traj: &TrajectorySet, cfg: &SolveConfig) -> Result<f64> {
    extensive_form_subtree(traj, cfg, 1, 0, &[])
}

/// Value of the stage-`t` problem at training node `i` (ignored at `t = 1`)
/// with incoming state `incoming`, including all later stages.
pub fn extensive_form_subtree(
    traj: &TrajectorySet,
    cfg: &SolveConfig,
    t: usize,
    i: usize,
    incoming: &[f64],
) -> Result<f64> {
    let tree = Tree::new(traj, cfg)?;
    let horizon = tree.horizon();
    if t < 1 || t > horizon || (t > 1 && i >= tree.n()) {
        return Err(Error::InvalidParameter(format!("no node {i} at stage {t}")));
    }
    if incoming.len() != traj.schema.state_in(t) {
        return Err(Error::Dimension(format!(
            "stage {t} expects an incoming state of width {}",
            traj.schema.state_in(t)
        )));
    }
    let leaves = (tree.n() as f64).powi((horizon - t) as i32);
    if leaves > MAX_ORACLE_LEAVES as f64 {
        return Err(Error::ScaleExceeded(format!(
            "{leaves} leaves exceed the oracle limit of {MAX_ORACLE_LEAVES}"
        )));
    }
    let mut b = LpBuilder::new();
    let oracle = Oracle {
        tree: &tree,
        robust: cfg.algorithm == Algorithm::Rdd,
    };
    let root = oracle.add_node(&mut b, t, i, Incoming::Fixed(incoming))?;
    b.set_cost(root, 1.0);
    let sol = solve(&b.build())?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective_value),
        LpStatus::Infeasible => Ok(f64::INFINITY),
        LpStatus::Unbounded => Ok(f64::NEG_INFINITY),
    }
}

enum Incoming<'a> {
    Fixed(&'a [f64]),
    Columns(&'a [usize]),
}

struct Oracle<'a> {
    tree: &'a Tree,
    robust: bool,
}

impl Oracle<'_> {
    /// Adds node `(t, i)` and its subtree; returns the node's value column.
    fn add_node(&self, b: &mut LpBuilder, t: usize, i: usize, incoming: Incoming<'_>) -> Result<usize> {
        let d = self.tree.traj.datum(t, i);
        let x0 = b.add_nonneg_block(d.c.len());
        for (r, row) in d.a.iter().enumerate() {
            let mut entries: Vec<(usize, f64)> = row
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, v)| (x0 + j, *v))
                .collect();
            let mut rhs = d.rhs[r];
            for (k, &v) in d.b_mat[r].iter().enumerate() {
                match &incoming {
                    Incoming::Fixed(x) => rhs -= v * x[k],
                    Incoming::Columns(cols) => {
                        if v != 0.0 {
                            entries.push((cols[k], v));
                        }
                    }
                }
            }
            b.add_eq_row(entries, rhs);
        }

        let value = b.add_free(0.0);
        let mut def: Vec<(usize, f64)> = vec![(value, 1.0)];
        def.extend(d.c.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(j, c)| (x0 + j, -c)));

        if t < self.tree.horizon() {
            let width = self.tree.traj.schema.stage(t).state_dim;
            let state: Vec<usize> = (x0..x0 + width).collect();
            let node = if t == 1 { Node::Root } else { Node::Index(i) };
            let weights = self.tree.weights(t, node);
            let children = (0..self.tree.n())
                .map(|c| self.add_node(b, t + 1, c, Incoming::Columns(&state)))
                .collect::<Result<Vec<_>>>()?;
            if self.robust {
                let params = AmbiguityParams::floored(self.tree.rho, weights)?;
                let s = splice_dro(b, &children, &params, 0.0)?;
                def.push((s.gamma, -1.0));
                def.push((s.beta, -params.rho));
                for (k, &w) in params.nominal.as_slice().iter().enumerate() {
                    def.push((s.mu + k, -w));
                    def.push((s.zeta + k, w));
                    def.push((s.psi + k, -params.rho));
                }
            } else {
                for (&col, &w) in children.iter().zip(weights.as_slice()) {
                    if w != 0.0 {
                        def.push((col, -w));
                    }
                }
            }
        }
        b.add_ge_row(def, 0.0);
        Ok(value)
    }
}
