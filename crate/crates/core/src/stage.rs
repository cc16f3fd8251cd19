//! Stage subproblem assembly and the multi-period portfolio model.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::LpBuilder;
use crate::scenario::{DatumTemplate, MarkovSpec, StageDatum, StageShape};

/// How the incoming state enters the stage LP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CopyMode {
    /// Free copy columns `z` with rows `z = x_in`; their duals are the
    /// derivative of the stage value in `x_in`.
    Copy,
    /// `B x_in` moved to the right-hand side.
    Pinned,
}

/// A stage datum together with the state widths around it.
#[derive(Debug, Clone, Copy)]
pub struct StageProblem<'a> {
    pub stage: usize,
    pub datum: &'a StageDatum,
    pub state_in: usize,
    pub state_out: usize,
}

/// An assembled stage LP awaiting cost-to-go terms.
#[derive(Debug, Clone)]
pub struct StageLp {
    pub builder: LpBuilder,
    pub x_cols: Range<usize>,
    pub z_cols: Range<usize>,
    pub copy_rows: Range<usize>,
    pub state_out: usize,
}

impl StageLp {
    /// Column of the `k`-th outgoing state component.
    pub fn state_col(&self, k: usize) -> usize {
        self.x_cols.start + k
    }

    pub fn state_cols(&self) -> Range<usize> {
        self.x_cols.start..self.x_cols.start + self.state_out
    }
}

/// `min c'x  s.t.  A x + B z = b,  z = x_in,  x >= 0`, or the pinned form
/// `A x = b - B x_in`.
pub fn assemble_stage_lp(problem: &StageProblem<'_>, incoming: &[f64], mode: CopyMode) -> Result<StageLp> {
    let d = problem.datum;
    if incoming.len() != problem.state_in {
        return Err(Error::Dimension(format!(
            "stage {} expects an incoming state of width {}, got {}",
            problem.stage,
            problem.state_in,
            incoming.len()
        )));
    }
    if d.b_mat.iter().any(|r| r.len() != problem.state_in) || d.a.len() != d.rhs.len() {
        return Err(Error::Dimension(format!("stage {} datum shape", problem.stage)));
    }
    let cols = d.c.len();
    if problem.state_out > cols {
        return Err(Error::Dimension(format!(
            "stage {} state width {} exceeds {cols} columns",
            problem.stage, problem.state_out
        )));
    }
    let mut b = LpBuilder::new();
    let x0 = b.num_vars();
    for &c in &d.c {
        b.add_nonneg(c);
    }
    let x_cols = x0..x0 + cols;
    let z_cols = match mode {
        CopyMode::Copy => {
            let z0 = b.add_free_block(problem.state_in);
            z0..z0 + problem.state_in
        }
        CopyMode::Pinned => x_cols.end..x_cols.end,
    };
    for (r, row) in d.a.iter().enumerate() {
        let mut entries: Vec<(usize, f64)> = row
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (x_cols.start + j, *v))
            .collect();
        let mut rhs = d.rhs[r];
        for (k, &v) in d.b_mat[r].iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            match mode {
                CopyMode::Copy => entries.push((z_cols.start + k, v)),
                CopyMode::Pinned => rhs -= v * incoming[k],
            }
        }
        b.add_eq_row(entries, rhs);
    }
    let first_copy = b.num_rows();
    if mode == CopyMode::Copy {
        for (k, &v) in incoming.iter().enumerate() {
            b.add_eq_row(vec![(z_cols.start + k, 1.0)], v);
        }
    }
    let copy_rows = first_copy..b.num_rows();
    Ok(StageLp {
        builder: b,
        x_cols,
        z_cols,
        copy_rows,
        state_out: problem.state_out,
    })
}

/// Concave piecewise-linear utility `u(w) = min_s (intercept_s + slope_s w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseUtility {
    pub intercepts: Vec<f64>,
    pub slopes: Vec<f64>,
}

impl PiecewiseUtility {
    /// Chords through consecutive `(wealth, utility)` breakpoints.
    pub fn from_breakpoints(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidUtility("need at least two breakpoints".into()));
        }
        let mut intercepts = Vec::new();
        let mut slopes = Vec::new();
        for w in points.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if !(x1 > x0) {
                return Err(Error::InvalidUtility("breakpoints must increase in wealth".into()));
            }
            let s = (y1 - y0) / (x1 - x0);
            slopes.push(s);
            intercepts.push(y0 - s * x0);
        }
        let u = Self { intercepts, slopes };
        u.validate()?;
        Ok(u)
    }

    /// Linear `u(w) = w`.
    pub fn linear() -> Self {
        Self {
            intercepts: vec![0.0],
            slopes: vec![1.0],
        }
    }

    /// Five chords of `1 - exp(-w)` on `[0, 3]`.
    pub fn default_exponential() -> Self {
        let points: Vec<(f64, f64)> = (0..=5)
            .map(|k| {
                let w = 0.6 * k as f64;
                (w, 1.0 - (-w).exp())
            })
            .collect();
        Self::from_breakpoints(&points).expect("exponential chords are concave")
    }

    pub fn validate(&self) -> Result<()> {
        if self.slopes.is_empty() || self.slopes.len() != self.intercepts.len() {
            return Err(Error::InvalidUtility("need matching, nonempty slopes and intercepts".into()));
        }
        if self.slopes.iter().chain(&self.intercepts).any(|v| !v.is_finite()) {
            return Err(Error::InvalidUtility("non-finite coefficient".into()));
        }
        if self.slopes.iter().any(|&s| s < 0.0) {
            return Err(Error::InvalidUtility("utility must be nondecreasing".into()));
        }
        if self.slopes.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidUtility("slopes must be nonincreasing (concave utility)".into()));
        }
        Ok(())
    }

    pub fn eval(&self, w: f64) -> f64 {
        self.intercepts
            .iter()
            .zip(&self.slopes)
            .map(|(a, s)| a + s * w)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Portfolio model with `K` risky assets and cash over `T` stages.
///
/// Stage 1 allocates the initial cash. Stages `2..T-1` apply gross returns
/// (the stage feature) to the carried positions and rebalance with
/// proportional fees. Stage `T` applies the last returns and scores the
/// final wealth with `-u`. The state is `(positions, cash)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioInstance {
    pub assets: usize,
    pub horizon: usize,
    pub buy_fee: f64,
    pub sell_fee: f64,
    /// Gross risk-free return per stage.
    pub risk_free: f64,
    pub initial_wealth: f64,
    pub utility: PiecewiseUtility,
}

impl PortfolioInstance {
    pub fn new(
        assets: usize,
        horizon: usize,
        fees: (f64, f64),
        risk_free: f64,
        utility: PiecewiseUtility,
    ) -> Result<Self> {
        let inst = Self {
            assets,
            horizon,
            buy_fee: fees.0,
            sell_fee: fees.1,
            risk_free,
            initial_wealth: 1.0,
            utility,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.assets < 1 || self.horizon < 2 {
            return Err(Error::InvalidParameter("portfolio needs K >= 1 and T >= 2".into()));
        }
        if !(self.buy_fee >= 0.0) || !(self.sell_fee >= 0.0) || self.sell_fee > 1.0 {
            return Err(Error::InvalidParameter("fees must lie in [0, 1] (buy fee >= 0)".into()));
        }
        if !(self.risk_free > 0.0) || !(self.initial_wealth >= 0.0) {
            return Err(Error::InvalidParameter("risk-free return must be positive".into()));
        }
        self.utility.validate()
    }

    fn state_width(&self) -> usize {
        self.assets + 1
    }

    /// Wealth held in a stage's state vector.
    pub fn wealth(&self, state: &[f64]) -> f64 {
        state[..self.state_width()].iter().sum()
    }

    /// Gross returns following `r' = mean + persistence (r - mean) + noise`
    /// with independent shocks of scale `vol`, clamped to `[0.5, 1.5]`.
    pub fn return_process(&self, mean: &[f64], persistence: f64, vol: &[f64]) -> Result<MarkovSpec> {
        let k = self.assets;
        if mean.len() != k || vol.len() != k {
            return Err(Error::Dimension(format!("return process needs {k} means and volatilities")));
        }
        let mut phi = vec![vec![0.0; k]; k];
        let mut cov = vec![vec![0.0; k]; k];
        for i in 0..k {
            phi[i][i] = persistence;
            cov[i][i] = vol[i] * vol[i];
        }
        Ok(MarkovSpec {
            mu: mean.iter().map(|m| m * (1.0 - persistence)).collect(),
            phi,
            noise_cov: cov,
            initial: mean.to_vec(),
            box_lower: vec![0.5; k],
            box_upper: vec![1.5; k],
        })
    }

    /// Terminal wealth of a terminal-stage primal vector.
    pub fn terminal_wealth(&self, x: &[f64]) -> f64 {
        self.wealth(x)
    }
}

impl DatumTemplate for PortfolioInstance {
    fn horizon(&self) -> usize {
        self.horizon
    }

    fn feature_dim(&self) -> usize {
        self.assets
    }

    fn shape(&self, t: usize) -> StageShape {
        let k = self.assets;
        let s = self.state_width();
        if t == 1 {
            StageShape {
                rows: s,
                cols: s + k,
                state_dim: s,
            }
        } else if t < self.horizon {
            StageShape {
                rows: s,
                cols: s + 2 * k,
                state_dim: s,
            }
        } else {
            let segs = self.utility.slopes.len();
            StageShape {
                rows: s + segs,
                cols: s + 2 + segs,
                state_dim: 0,
            }
        }
    }

    fn datum(&self, t: usize, feature: &[f64]) -> StageDatum {
        let k = self.assets;
        let s = self.state_width();
        let shape = self.shape(t);
        let mut a = vec![vec![0.0; shape.cols]; shape.rows];
        let din = if t == 1 { 0 } else { s };
        let mut b_mat = vec![vec![0.0; din]; shape.rows];
        let mut rhs = vec![0.0; shape.rows];
        let mut c = vec![0.0; shape.cols];

        if t < self.horizon {
            // Columns: positions 0..K, cash K, buys s..s+K, sells s+K..s+2K.
            for i in 0..k {
                a[i][i] = 1.0;
                a[i][s + i] = -1.0;
                a[k][s + i] = 1.0 + self.buy_fee;
                if t > 1 {
                    a[i][s + k + i] = 1.0;
                    a[k][s + k + i] = -(1.0 - self.sell_fee);
                    b_mat[i][i] = -feature[i];
                }
            }
            a[k][k] = 1.0;
            if t == 1 {
                rhs[k] = self.initial_wealth;
            } else {
                b_mat[k][k] = -self.risk_free;
            }
        } else {
            // Columns: positions 0..K, cash K, v+ s, v- s+1, segment slacks s+2...
            for i in 0..k {
                a[i][i] = 1.0;
                b_mat[i][i] = -feature[i];
            }
            a[k][k] = 1.0;
            b_mat[k][k] = -self.risk_free;
            for (g, (&icpt, &slope)) in self.utility.intercepts.iter().zip(&self.utility.slopes).enumerate() {
                let r = s + g;
                a[r][s] = 1.0;
                a[r][s + 1] = -1.0;
                for j in 0..s {
                    a[r][j] = -slope;
                }
                a[r][s + 2 + g] = 1.0;
                rhs[r] = icpt;
            }
            c[s] = -1.0;
            c[s + 1] = 1.0;
        }
        StageDatum {
            c,
            a,
            b_mat,
            rhs,
            feature: feature.to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{solve, LpStatus};

    fn one_var(b: f64) -> StageDatum {
        StageDatum {
            c: vec![1.0],
            a: vec![vec![1.0]],
            b_mat: vec![vec![1.0]],
            rhs: vec![b],
            feature: vec![],
        }
    }

    #[test]
    fn copy_dual_is_state_derivative() {
        let d = one_var(2.0);
        let p = StageProblem {
            stage: 2,
            datum: &d,
            state_in: 1,
            state_out: 1,
        };
        let lp = assemble_stage_lp(&p, &[1.0], CopyMode::Copy).unwrap();
        let sol = solve(&lp.builder.build()).unwrap();
        assert!((sol.primal[0] - 1.0).abs() < 1e-12);
        assert!((sol.objective_value - 1.0).abs() < 1e-12);
        assert!((sol.duals[lp.copy_rows.start] + 1.0).abs() < 1e-12);

        let pinned = assemble_stage_lp(&p, &[1.0], CopyMode::Pinned).unwrap();
        let sol2 = solve(&pinned.builder.build()).unwrap();
        assert!((sol2.objective_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recourse_violation_is_infeasible() {
        let d = one_var(2.0);
        let p = StageProblem {
            stage: 2,
            datum: &d,
            state_in: 1,
            state_out: 0,
        };
        let lp = assemble_stage_lp(&p, &[3.0], CopyMode::Copy).unwrap();
        assert_eq!(solve(&lp.builder.build()).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn inactive_cut_keeps_value() {
        let d = one_var(2.0);
        let p = StageProblem {
            stage: 2,
            datum: &d,
            state_in: 1,
            state_out: 1,
        };
        let mut lp = assemble_stage_lp(&p, &[1.0], CopyMode::Copy).unwrap();
        let l = lp.builder.add_nonneg(1.0);
        lp.builder.add_ge_row(vec![(l, 1.0)], 0.0);
        let sol = solve(&lp.builder.build()).unwrap();
        assert!((sol.objective_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_state_width() {
        let d = one_var(2.0);
        let p = StageProblem {
            stage: 2,
            datum: &d,
            state_in: 1,
            state_out: 1,
        };
        assert!(matches!(assemble_stage_lp(&p, &[], CopyMode::Copy), Err(Error::Dimension(_))));
    }

    #[test]
    fn utility_validation() {
        assert!(PiecewiseUtility::from_breakpoints(&[(0.0, 0.0), (1.0, 1.0), (2.0, 3.0)]).is_err());
        assert!(PiecewiseUtility::from_breakpoints(&[(0.0, 0.0), (1.0, -1.0)]).is_err());
        let u = PiecewiseUtility::default_exponential();
        assert_eq!(u.slopes.len(), 5);
        assert!(u.eval(0.0).abs() < 1e-15);
        assert!((u.eval(3.0) - (1.0 - (-3.0f64).exp())).abs() < 1e-12);
        let bad = PiecewiseUtility {
            intercepts: vec![0.0, 0.0],
            slopes: vec![0.5, 1.0],
        };
        assert!(matches!(
            PortfolioInstance::new(1, 2, (0.0, 0.0), 1.0, bad),
            Err(Error::InvalidUtility(_))
        ));
    }

    #[test]
    fn portfolio_shapes_match_data() {
        let inst = PortfolioInstance::new(3, 4, (0.001, 0.001), 1.001, PiecewiseUtility::default_exponential()).unwrap();
        for t in 1..=4 {
            let sh = inst.shape(t);
            let d = inst.datum(t, &[1.0, 1.1, 0.9]);
            assert_eq!(d.c.len(), sh.cols);
            assert_eq!(d.a.len(), sh.rows);
            assert_eq!(d.rhs.len(), sh.rows);
            let din = if t == 1 { 0 } else { inst.shape(t - 1).state_dim };
            assert!(d.b_mat.iter().all(|r| r.len() == din));
        }
    }
}
