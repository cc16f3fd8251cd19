//! Data-driven SDDP over the recombining tree of observed trajectories,
//! with deterministic lower and upper bounds, and its robust variant.
//!
//! The tree has one root and `N` nodes per stage `t >= 2`. Moving out of
//! node `j` at stage `t` reaches node `i` at `t+1` with the kernel weight of
//! path `i`'s stage-`t` feature seen from path `j`'s stage-`t` feature; the
//! root moves uniformly. Each iteration samples a forward path with the
//! current lower policy, then refines cuts (lower bound) and envelope points
//! (upper bound) backward over every node of every stage.

mod bound;
mod crossval;
mod evaluate;
mod oracle;

pub use bound::{generalization_bound, BoundInputs};
pub use crossval::{cross_validate_rho, CrossvalReport};
pub use evaluate::{evaluate_policy_out_of_sample, EvaluationReport, PathFailure, ReportSpec, WealthStats};
pub use oracle::{extensive_form_oracle, extensive_form_subtree, MAX_ORACLE_LEAVES};

use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cuts::{aggregate_backward, splice_lower, splice_upper, Cut, CutPool, EnvelopeStore, Node};
use crate::dro::{inner_max_primal, splice_dro, AmbiguityParams, RhoRule};
use crate::error::{Error, Result};
use crate::kernel::{nw_weights_h, ConditionalWeights, KernelConfig};
use crate::lp::{solve, LinearProgram, LpSolution, LpStatus};
use crate::scenario::{sample_index, ForwardScenario, StageDatum, TrajectorySet};
use crate::stage::{assemble_stage_lp, CopyMode, StageLp, StageProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Expectation under the kernel weights.
    Dd,
    /// Worst case over the ambiguity set around the kernel weights.
    Rdd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapMode {
    /// `UB - LB <= epsilon`
    Absolute,
    /// `UB - LB <= max(epsilon * min(|UB|, |LB|), 1e-9)`
    Relative,
}

/// How cost-to-go approximations are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutMode {
    /// One aggregated cut pool and envelope per node.
    Single,
    /// One pool and envelope per successor realization, combined inside
    /// each stage LP.
    Multi,
}

/// Source of the transition weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitionModel {
    /// Kernel weights against the previous stage's features.
    Kernel,
    /// Uniform weights at every node (stagewise independence).
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub gap_mode: GapMode,
    pub max_iterations: usize,
    pub forward_paths_per_iter: usize,
    pub seed: u64,
    pub kernel: KernelConfig,
    pub rho: RhoRule,
    /// Fixed envelope penalties; entry `t-2` is used for stage `t`.
    pub penalty_override: Option<Vec<f64>>,
    pub penalty_safety: f64,
    pub min_penalty: f64,
    pub cut_mode: CutMode,
    pub transition: TransitionModel,
    pub lower_box: f64,
    pub upper_box: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Dd,
            epsilon: 1e-6,
            gap_mode: GapMode::Relative,
            max_iterations: 100,
            forward_paths_per_iter: 1,
            seed: 0,
            kernel: KernelConfig::default(),
            rho: RhoRule::Manual { rho: 0.0 },
            penalty_override: None,
            penalty_safety: 10.0,
            min_penalty: 1.0,
            cut_mode: CutMode::Single,
            transition: TransitionModel::Kernel,
            lower_box: -1e9,
            upper_box: 1e9,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if self.max_iterations < 1 || self.forward_paths_per_iter < 1 {
            return Err(Error::Config("max_iterations and forward_paths_per_iter must be >= 1".into()));
        }
        if !(self.lower_box < self.upper_box) || !self.lower_box.is_finite() || !self.upper_box.is_finite() {
            return Err(Error::Config("need finite lower_box < upper_box".into()));
        }
        if !(self.penalty_safety > 0.0) || !(self.min_penalty >= 0.0) {
            return Err(Error::Config("penalty safety must be positive".into()));
        }
        if let Some(m) = &self.penalty_override {
            if m.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::Config("penalties must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// Best lower bound so far.
    pub lb: f64,
    /// Best upper bound so far.
    pub ub: f64,
    /// Root values from this iteration alone.
    pub raw_lb: f64,
    pub raw_ub: f64,
    pub gap: f64,
    pub wall_time: f64,
    pub cuts_added: usize,
    pub envelope_points_added: usize,
    pub forward_scenarios: Vec<ForwardScenario>,
}

/// Per-successor backward results at one anchor; lets the policy form
/// cuts for conditioning features outside the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutBatch {
    pub anchor: Vec<f64>,
    pub values: Vec<f64>,
    pub duals: Vec<Vec<f64>>,
    pub iteration: usize,
}

/// Transition weights and ambiguity sets of the training tree.
#[derive(Debug, Clone)]
pub(crate) struct Tree {
    pub traj: TrajectorySet,
    pub bandwidth: f64,
    pub rho: f64,
    /// `trans[t-2][j]`: weights over stage-`t+1` nodes from node `j` at stage `t`.
    trans: Vec<Vec<ConditionalWeights>>,
    root: ConditionalWeights,
}

impl Tree {
    pub fn new(traj: &TrajectorySet, cfg: &SolveConfig) -> Result<Self> {
        let n = traj.n_paths();
        let p = traj.feature_dim();
        let bandwidth = cfg.kernel.resolve(n, p.max(1))?;
        let rho = cfg.rho.resolve(n, bandwidth, p);
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(Error::Config(format!("ambiguity radius resolved to {rho}")));
        }
        let mut trans = Vec::new();
        for t in 2..traj.horizon() {
            let anchors = traj.features(t);
            let row = (0..n)
                .map(|j| match cfg.transition {
                    TransitionModel::Independent => Ok(ConditionalWeights::uniform(n)),
                    TransitionModel::Kernel => nw_weights_h(&anchors[j], &anchors, bandwidth),
                })
                .collect::<Result<Vec<_>>>()?;
            trans.push(row);
        }
        Ok(Self {
            traj: traj.clone(),
            bandwidth,
            rho,
            trans,
            root: ConditionalWeights::uniform(n),
        })
    }

    pub fn n(&self) -> usize {
        self.traj.n_paths()
    }

    pub fn horizon(&self) -> usize {
        self.traj.horizon()
    }

    /// Weights over stage-`t+1` nodes seen from `node` at stage `t`.
    pub fn weights(&self, t: usize, node: Node) -> &ConditionalWeights {
        match node {
            Node::Root => &self.root,
            Node::Index(j) => &self.trans[t - 2][j],
        }
    }

    /// Kernel weights for an arbitrary stage-`t` feature.
    pub fn weights_at(&self, t: usize, feature: &[f64], model: TransitionModel) -> Result<ConditionalWeights> {
        match model {
            TransitionModel::Independent => Ok(ConditionalWeights::uniform(self.n())),
            TransitionModel::Kernel if t == 1 => Ok(self.root.clone()),
            TransitionModel::Kernel => nw_weights_h(feature, &self.traj.features(t), self.bandwidth),
        }
    }
}

/// Which bound a stage LP approximates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    Lower,
    Upper,
}

/// Where the cost-to-go of the next stage comes from.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Future<'a> {
    /// A training node (or the root).
    Node(Node),
    /// Explicit transition weights from an out-of-sample feature.
    Weights(&'a ConditionalWeights),
}

/// An assembled stage LP with the bookkeeping needed to read it back.
pub(crate) struct BuiltStage {
    pub lp: LinearProgram,
    pub stage: StageLp,
}

/// Solution of one stage LP.
#[derive(Debug, Clone)]
pub(crate) struct StageSolve {
    pub value: f64,
    pub x: Vec<f64>,
    pub state: Vec<f64>,
    pub copy_duals: Vec<f64>,
}

/// The SDDP state: cut pools, envelopes and iteration history.
#[derive(Debug, Clone)]
pub struct Solver {
    cfg: SolveConfig,
    tree: Tree,
    pool: CutPool,
    store: EnvelopeStore,
    /// `batches[t]` for stages `t = 2..=T`.
    batches: Vec<Vec<CutBatch>>,
    rng: ChaCha8Rng,
    records: Vec<IterationRecord>,
    best_lb: f64,
    best_ub: f64,
    first_stage: Vec<f64>,
    started: Instant,
}

/// Output of [`run`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub policy: Solver,
    pub records: Vec<IterationRecord>,
    pub first_stage: Vec<f64>,
    pub converged: bool,
}

/// Iterates until the gap criterion holds or the iteration budget is spent.
pub fn run(traj: &TrajectorySet, cfg: &SolveConfig) -> Result<RunOutcome> {
    let mut solver = Solver::new(traj, cfg)?;
    while solver.iterations() < cfg.max_iterations {
        solver.iterate()?;
        if solver.converged() {
            break;
        }
    }
    Ok(RunOutcome {
        records: solver.records.clone(),
        first_stage: solver.first_stage.clone(),
        converged: solver.converged(),
        policy: solver,
    })
}

impl Solver {
    pub fn new(traj: &TrajectorySet, cfg: &SolveConfig) -> Result<Self> {
        cfg.validate()?;
        traj.validate()?;
        if traj.horizon() < 2 {
            return Err(Error::InvalidParameter("horizon must be at least 2".into()));
        }
        let tree = Tree::new(traj, cfg)?;
        let mut store = EnvelopeStore::new();
        for t in 2..=traj.horizon() {
            store.set_penalty(t, penalty_for(cfg, t, 0.0));
        }
        Ok(Self {
            cfg: cfg.clone(),
            batches: vec![Vec::new(); traj.horizon() + 1],
            tree,
            pool: CutPool::new(),
            store,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            records: Vec::new(),
            best_lb: f64::NEG_INFINITY,
            best_ub: f64::INFINITY,
            first_stage: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn config(&self) -> &SolveConfig {
        &self.cfg
    }

    pub fn trajectories(&self) -> &TrajectorySet {
        &self.tree.traj
    }

    pub fn bandwidth(&self) -> f64 {
        self.tree.bandwidth
    }

    pub fn rho(&self) -> f64 {
        self.tree.rho
    }

    pub fn cut_pool(&self) -> &CutPool {
        &self.pool
    }

    pub fn envelopes(&self) -> &EnvelopeStore {
        &self.store
    }

    pub fn batches(&self, t: usize) -> &[CutBatch] {
        &self.batches[t]
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn first_stage(&self) -> &[f64] {
        &self.first_stage
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.best_lb, self.best_ub)
    }

    /// Transition weights out of `node` at stage `t`.
    pub fn transition_weights(&self, t: usize, node: Node) -> &ConditionalWeights {
        self.tree.weights(t, node)
    }

    pub fn converged(&self) -> bool {
        gap_met(self.cfg.gap_mode, self.cfg.epsilon, self.best_lb, self.best_ub)
    }

    fn robust(&self) -> bool {
        self.cfg.algorithm == Algorithm::Rdd
    }

    fn ambiguity(&self, nominal: &ConditionalWeights) -> Result<AmbiguityParams> {
        AmbiguityParams::floored(self.tree.rho, nominal)
    }

    /// Assembles the stage-`t` LP for `datum` with the next stage's
    /// cost-to-go approximation attached.
    pub(crate) fn build_stage(
        &self,
        t: usize,
        datum: &StageDatum,
        incoming: &[f64],
        side: Side,
        future: Future<'_>,
    ) -> Result<BuiltStage> {
        let schema = &self.tree.traj.schema;
        let problem = StageProblem {
            stage: t,
            datum,
            state_in: schema.state_in(t),
            state_out: schema.stage(t).state_dim,
        };
        let mode = match side {
            Side::Lower => CopyMode::Copy,
            Side::Upper => CopyMode::Pinned,
        };
        let mut stage = assemble_stage_lp(&problem, incoming, mode)?;
        if t < self.tree.horizon() {
            self.attach_future(&mut stage, t, side, future)?;
        }
        Ok(BuiltStage {
            lp: stage.builder.build(),
            stage,
        })
    }

    fn attach_future(&self, stage: &mut StageLp, t: usize, side: Side, future: Future<'_>) -> Result<()> {
        let next = t + 1;
        let state: Vec<usize> = stage.state_cols().collect();
        let b = &mut stage.builder;
        let m = self.store.penalty(next);
        let (lo, hi) = (self.cfg.lower_box, self.cfg.upper_box);

        // Per-successor value columns with their nominal weights.
        let per_successor = |b: &mut crate::lp::LpBuilder, weights: &ConditionalWeights| -> Result<()> {
            let robust = self.robust();
            let mut cols = Vec::with_capacity(weights.len());
            for (i, &w) in weights.as_slice().iter().enumerate() {
                let cost = if robust { 0.0 } else { w };
                if !robust && w == 0.0 {
                    continue;
                }
                let col = match side {
                    Side::Lower => splice_lower(b, &state, self.pool.cuts(next, Node::Index(i)), cost, lo)?.col,
                    Side::Upper => {
                        splice_upper(b, &state, self.store.points(next, Node::Index(i)), m, cost, hi)?.value_col
                    }
                };
                cols.push(col);
            }
            if robust {
                splice_dro(b, &cols, &self.ambiguity(weights)?, 1.0)?;
            }
            Ok(())
        };

        match (self.cfg.cut_mode, future) {
            (CutMode::Single, Future::Node(node)) => match side {
                Side::Lower => {
                    splice_lower(b, &state, self.pool.cuts(next, node), 1.0, lo)?;
                }
                Side::Upper => {
                    splice_upper(b, &state, self.store.points(next, node), m, 1.0, hi)?;
                }
            },
            (CutMode::Multi, Future::Node(node)) => {
                let w = self.tree.weights(t, node).clone();
                per_successor(b, &w)?;
            }
            (CutMode::Single, Future::Weights(w)) => {
                if side == Side::Upper {
                    return Err(Error::InvalidParameter(
                        "upper approximations exist only at training nodes in single-cut mode".into(),
                    ));
                }
                let cuts = self.batch_cuts(next, w)?;
                splice_lower(b, &state, &cuts, 1.0, lo)?;
            }
            (CutMode::Multi, Future::Weights(w)) => per_successor(b, w)?,
        }
        Ok(())
    }

    /// Aggregates the stored batches for stage `t` under `weights`
    /// (worst-case weights per batch when robust).
    fn batch_cuts(&self, t: usize, weights: &ConditionalWeights) -> Result<Vec<Cut>> {
        let params = if self.robust() { Some(self.ambiguity(weights)?) } else { None };
        self.batches[t]
            .iter()
            .map(|bt| {
                let w = match &params {
                    Some(p) => inner_max_primal(&bt.values, p)?.1,
                    None => weights.clone(),
                };
                aggregate_backward(&bt.values, &bt.duals, &w, &bt.anchor, bt.iteration)
            })
            .collect()
    }

    pub(crate) fn solve_built(&self, built: &BuiltStage, t: usize, node: usize) -> Result<StageSolve> {
        let sol: LpSolution = solve(&built.lp)?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Model {
                iteration: self.iterations() + 1,
                stage: t,
                node,
                message: format!("stage LP is {:?}", sol.status),
            });
        }
        let st = &built.stage;
        Ok(StageSolve {
            value: sol.objective_value,
            x: sol.primal[st.x_cols.clone()].to_vec(),
            state: st.state_cols().map(|j| sol.primal[j]).collect(),
            copy_duals: sol.duals[st.copy_rows.clone()].to_vec(),
        })
    }

    /// Solves the lower-approximation LP at training node `i` of stage `t`
    /// (ignored at the root) and returns its value and copy-row duals.
    pub fn stage_value_and_gradient(&self, t: usize, i: usize, incoming: &[f64]) -> Result<(f64, Vec<f64>)> {
        let s = self.solve_node(t, i, incoming, Side::Lower)?;
        Ok((s.value, s.copy_duals))
    }

    /// Pinned upper-approximation value at training node `i` of stage `t`.
    pub fn stage_upper_value(&self, t: usize, i: usize, incoming: &[f64]) -> Result<f64> {
        Ok(self.solve_node(t, i, incoming, Side::Upper)?.value)
    }

    fn solve_node(&self, t: usize, i: usize, incoming: &[f64], side: Side) -> Result<StageSolve> {
        let node = if t == 1 { Node::Root } else { Node::Index(i) };
        let built = self.build_stage(t, self.tree.traj.datum(t, i), incoming, side, Future::Node(node))?;
        self.solve_built(&built, t, i + usize::from(t > 1))
    }

    /// Current `(lower, upper)` approximations of the stage-`t` cost-to-go
    /// seen from `node` at stage `t-1`, evaluated at state `x`.
    pub fn cost_to_go_bounds(&self, t: usize, node: Node, x: &[f64]) -> Result<(f64, f64)> {
        match self.cfg.cut_mode {
            CutMode::Single => Ok((self.pool.evaluate(t, node, x), self.store.evaluate(t, node, x)?)),
            CutMode::Multi => {
                let w = self.tree.weights(t - 1, node);
                let n = self.tree.n();
                let lows: Vec<f64> = (0..n).map(|i| self.pool.evaluate(t, Node::Index(i), x)).collect();
                let highs = (0..n)
                    .map(|i| self.store.evaluate(t, Node::Index(i), x))
                    .collect::<Result<Vec<f64>>>()?;
                let combine = |z: &[f64]| -> Result<f64> {
                    if z.iter().any(|v| v.is_infinite()) {
                        let s = z.iter().zip(w.as_slice()).find(|(v, _)| v.is_infinite()).map(|(v, _)| *v);
                        return Ok(s.unwrap_or(0.0));
                    }
                    if self.robust() {
                        Ok(inner_max_primal(z, &self.ambiguity(w)?)?.0)
                    } else {
                        Ok(w.expect(z))
                    }
                };
                Ok((combine(&lows)?, combine(&highs)?))
            }
        }
    }

    /// One forward pass, one backward pass and the root bounds.
    pub fn iterate(&mut self) -> Result<&IterationRecord> {
        let k = self.iterations() + 1;
        let horizon = self.tree.horizon();

        let mut scenarios = Vec::with_capacity(self.cfg.forward_paths_per_iter);
        let mut trajectories: Vec<Vec<Vec<f64>>> = Vec::new();
        for _ in 0..self.cfg.forward_paths_per_iter {
            let seed = self.rng.next_u64();
            let (sc, states) = self.forward_pass(seed)?;
            scenarios.push(sc);
            trajectories.push(states);
        }

        let mut cuts_added = 0;
        let mut points_added = 0;
        for t in (2..=horizon).rev() {
            for states in &trajectories {
                let (c, p) = self.backward_stage(t, &states[t - 2], k)?;
                cuts_added += c;
                points_added += p;
            }
            if self.cfg.penalty_override.is_none() {
                let m = penalty_for(&self.cfg, t, self.pool.max_gradient_norm(t));
                if m > self.store.penalty(t) {
                    self.store.set_penalty(t, m);
                }
            }
        }

        let lower = self.solve_node(1, 0, &[], Side::Lower)?;
        let upper = self.solve_node(1, 0, &[], Side::Upper)?;
        self.first_stage = lower.x.clone();
        self.best_lb = self.best_lb.max(lower.value);
        self.best_ub = self.best_ub.min(upper.value);
        let record = IterationRecord {
            k,
            lb: self.best_lb,
            ub: self.best_ub,
            raw_lb: lower.value,
            raw_ub: upper.value,
            gap: self.best_ub - self.best_lb,
            wall_time: self.started.elapsed().as_secs_f64(),
            cuts_added,
            envelope_points_added: points_added,
            forward_scenarios: scenarios,
        };
        self.records.push(record);
        Ok(self.records.last().expect("just pushed"))
    }

    /// Samples a path with nominal weights and records the lower-policy
    /// states `x_1 .. x_{T-1}`.
    fn forward_pass(&self, seed: u64) -> Result<(ForwardScenario, Vec<Vec<f64>>)> {
        let horizon = self.tree.horizon();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let root = self.solve_node(1, 0, &[], Side::Lower)?;
        let mut states = vec![root.state];
        let mut indices = Vec::with_capacity(horizon - 1);
        let mut node = Node::Root;
        for t in 2..horizon {
            let i = sample_index(self.tree.weights(t - 1, node), &mut rng);
            let s = self.solve_node(t, i, states.last().expect("root state"), Side::Lower)?;
            indices.push(i);
            states.push(s.state);
            node = Node::Index(i);
        }
        indices.push(sample_index(self.tree.weights(horizon - 1, node), &mut rng));
        Ok((ForwardScenario { indices, rng_seed: seed }, states))
    }

    /// Solves all `N` stage-`t` subproblems at `anchor` and updates the
    /// stage-`t` approximations of every stage-`t-1` node.
    fn backward_stage(&mut self, t: usize, anchor: &[f64], k: usize) -> Result<(usize, usize)> {
        let n = self.tree.n();
        let results: Vec<(StageSolve, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let lo = self.solve_node(t, i, anchor, Side::Lower)?;
                let hi = self.solve_node(t, i, anchor, Side::Upper)?;
                Ok((lo, hi.value))
            })
            .collect::<Result<Vec<_>>>()?;
        let values: Vec<f64> = results.iter().map(|r| r.0.value).collect();
        let duals: Vec<Vec<f64>> = results.iter().map(|r| r.0.copy_duals.clone()).collect();
        let uppers: Vec<f64> = results.iter().map(|r| r.1).collect();

        let mut cuts = 0;
        let mut points = 0;
        match self.cfg.cut_mode {
            CutMode::Single => {
                let nodes: Vec<Node> = if t == 2 { vec![Node::Root] } else { (0..n).map(Node::Index).collect() };
                let updates = nodes
                    .par_iter()
                    .map(|&node| {
                        let nominal = self.tree.weights(t - 1, node);
                        if self.robust() {
                            let params = self.ambiguity(nominal)?;
                            let (_, worst) = inner_max_primal(&values, &params)?;
                            let cut = aggregate_backward(&values, &duals, &worst, anchor, k)?;
                            let (ub, _) = inner_max_primal(&uppers, &params)?;
                            Ok((node, cut, ub))
                        } else {
                            let cut = aggregate_backward(&values, &duals, nominal, anchor, k)?;
                            Ok((node, cut, nominal.expect(&uppers)))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                for (node, cut, ub) in updates {
                    self.pool.add_cut(t, node, cut)?;
                    self.store.envelope_update(t, node, anchor.to_vec(), ub)?;
                    cuts += 1;
                    points += 1;
                }
            }
            CutMode::Multi => {
                for i in 0..n {
                    let cut = Cut {
                        gradient: duals[i].clone(),
                        intercept: values[i],
                        anchor: anchor.to_vec(),
                        iteration: k,
                    };
                    self.pool.add_cut(t, Node::Index(i), cut)?;
                    self.store.envelope_update(t, Node::Index(i), anchor.to_vec(), uppers[i])?;
                    cuts += 1;
                    points += 1;
                }
            }
        }
        self.batches[t].push(CutBatch {
            anchor: anchor.to_vec(),
            values,
            duals,
            iteration: k,
        });
        Ok((cuts, points))
    }
}

fn penalty_for(cfg: &SolveConfig, t: usize, max_gradient: f64) -> f64 {
    if let Some(m) = &cfg.penalty_override {
        if let Some(v) = m.get(t - 2) {
            return *v;
        }
    }
    (cfg.penalty_safety * max_gradient).max(cfg.min_penalty)
}

pub fn gap_met(mode: GapMode, epsilon: f64, lb: f64, ub: f64) -> bool {
    if !lb.is_finite() || !ub.is_finite() {
        return false;
    }
    let gap = ub - lb;
    match mode {
        GapMode::Absolute => gap <= epsilon,
        GapMode::Relative => gap <= (epsilon * ub.abs().min(lb.abs())).max(1e-9),
    }
}
