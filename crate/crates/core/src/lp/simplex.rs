use super::{LinearProgram, LpSolution, LpStatus};
use crate::error::{Error, Result};

/// Entering-variable rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PivotRule {
    /// Smallest-index entering and leaving variable. Never cycles.
    #[default]
    Bland,
    /// Most negative reduced cost, switching to Bland after a long run of
    /// degenerate pivots.
    Dantzig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub dual_gap_tol: f64,
    pub pivot_tol: f64,
    pub opt_tol: f64,
    pub max_iterations: usize,
    /// Pivots between explicit re-inversions of the basis.
    pub refactor_every: usize,
    pub pivot_rule: PivotRule,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            dual_gap_tol: 1e-8,
            pivot_tol: 1e-10,
            opt_tol: 1e-9,
            max_iterations: 200_000,
            refactor_every: 50,
            pivot_rule: PivotRule::Bland,
        }
    }
}

/// Solves `lp` with default options.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    solve_with(lp, &SolverOptions::default())
}

pub fn solve_with(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution> {
    lp.validate()?;
    let sf = StandardForm::from_lp(lp);
    let mut engine = Engine::new(&sf, opts)?;

    if engine.has_basic_artificial() {
        let phase1: Vec<f64> = (0..sf.n + sf.m).map(|j| if j < sf.n { 0.0 } else { 1.0 }).collect();
        match engine.run(&phase1)? {
            Outcome::Optimal => {}
            // The phase-one objective is bounded below by zero.
            Outcome::Unbounded => return Err(Error::SingularBasis),
        }
        let infeasibility: f64 = (0..sf.m)
            .filter(|&r| engine.basis[r] >= sf.n)
            .map(|r| engine.xb[r].max(0.0))
            .sum();
        let scale = 1.0 + sf.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if infeasibility > opts.feas_tol * scale {
            return Ok(LpSolution::failed(LpStatus::Infeasible, engine.iterations));
        }
        engine.drive_out_artificials()?;
    }

    let mut phase2 = sf.cost.clone();
    phase2.resize(sf.n + sf.m, 0.0);
    match engine.run(&phase2)? {
        Outcome::Unbounded => Ok(LpSolution::failed(LpStatus::Unbounded, engine.iterations)),
        Outcome::Optimal => Ok(engine.extract(lp, &phase2)),
    }
}

enum VarMap {
    /// `x = base + x'`
    Shift { col: usize, base: f64 },
    /// `x = base - x'`
    Mirror { col: usize, base: f64 },
    /// `x = pos - neg`
    Split { pos: usize, neg: usize },
}

/// `min c'x  s.t.  Ax = b >= 0,  x >= 0` with sparse columns.
struct StandardForm {
    m: usize,
    n: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    row_sign: Vec<f64>,
    m_orig: usize,
    map: Vec<VarMap>,
}

impl StandardForm {
    fn from_lp(lp: &LinearProgram) -> Self {
        let m_orig = lp.num_rows();
        let mut rhs = lp.eq_rhs.clone();
        let mut cols: Vec<Vec<(usize, f64)>> = Vec::new();
        let mut cost = Vec::new();
        let mut map = Vec::with_capacity(lp.num_vars());
        let mut bound_rows: Vec<(usize, f64)> = Vec::new();

        for j in 0..lp.num_vars() {
            let column: Vec<(usize, f64)> = (0..m_orig)
                .filter_map(|i| {
                    let v = lp.eq_matrix[i][j];
                    (v != 0.0).then_some((i, v))
                })
                .collect();
            let c = lp.objective[j];
            let (l, u) = (lp.var_lower[j], lp.var_upper[j]);
            if lp.free_mask[j] || (l == f64::NEG_INFINITY && u == f64::INFINITY) {
                let pos = cols.len();
                cols.push(column.clone());
                cost.push(c);
                cols.push(column.iter().map(|&(i, v)| (i, -v)).collect());
                cost.push(-c);
                map.push(VarMap::Split { pos, neg: pos + 1 });
            } else if l.is_finite() {
                let col = cols.len();
                for &(i, v) in &column {
                    rhs[i] -= v * l;
                }
                cols.push(column);
                cost.push(c);
                if u.is_finite() {
                    bound_rows.push((col, u - l));
                }
                map.push(VarMap::Shift { col, base: l });
            } else {
                let col = cols.len();
                for &(i, v) in &column {
                    rhs[i] -= v * u;
                }
                cols.push(column.iter().map(|&(i, v)| (i, -v)).collect());
                cost.push(-c);
                map.push(VarMap::Mirror { col, base: u });
            }
        }

        for &(col, width) in &bound_rows {
            let row = rhs.len();
            cols[col].push((row, 1.0));
            cols.push(vec![(row, 1.0)]);
            cost.push(0.0);
            rhs.push(width);
        }

        let m = rhs.len();
        let mut row_sign = vec![1.0; m];
        for (r, b) in rhs.iter_mut().enumerate() {
            if *b < 0.0 {
                *b = -*b;
                row_sign[r] = -1.0;
            }
        }
        if row_sign.iter().any(|&s| s < 0.0) {
            for col in &mut cols {
                for (i, v) in col.iter_mut() {
                    *v *= row_sign[*i];
                }
            }
        }
        let n = cols.len();
        Self {
            m,
            n,
            cols,
            cost,
            rhs,
            row_sign,
            m_orig,
            map,
        }
    }
}

enum Outcome {
    Optimal,
    Unbounded,
}

const NONBASIC: usize = usize::MAX;
const DEGENERATE_STREAK_LIMIT: usize = 50;
/// Pivots below this magnitude trigger an immediate re-inversion.
const SMALL_PIVOT: f64 = 1e-6;

/// Revised simplex state with an explicit dense basis inverse.
/// Column `n + r` is the artificial unit column of row `r`.
struct Engine<'a> {
    sf: &'a StandardForm,
    opts: &'a SolverOptions,
    m: usize,
    basis: Vec<usize>,
    position: Vec<usize>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
}

impl<'a> Engine<'a> {
    fn new(sf: &'a StandardForm, opts: &'a SolverOptions) -> Result<Self> {
        let m = sf.m;
        let mut basis: Vec<usize> = (0..m).map(|r| sf.n + r).collect();
        let mut diag = vec![1.0; m];
        let mut claimed = vec![false; m];
        for (j, col) in sf.cols.iter().enumerate() {
            if let [(r, v)] = col.as_slice() {
                if *v > 0.0 && !claimed[*r] {
                    claimed[*r] = true;
                    basis[*r] = j;
                    diag[*r] = *v;
                }
            }
        }
        let mut position = vec![NONBASIC; sf.n + m];
        for (r, &j) in basis.iter().enumerate() {
            position[j] = r;
        }
        let mut binv = vec![0.0; m * m];
        for r in 0..m {
            binv[r * m + r] = 1.0 / diag[r];
        }
        let xb = (0..m).map(|r| sf.rhs[r] / diag[r]).collect();
        Ok(Self {
            sf,
            opts,
            m,
            basis,
            position,
            binv,
            xb,
            iterations: 0,
            since_refactor: 0,
        })
    }

    fn has_basic_artificial(&self) -> bool {
        self.basis.iter().any(|&j| j >= self.sf.n)
    }

    fn column_dot(&self, y: &[f64], j: usize) -> f64 {
        if j < self.sf.n {
            self.sf.cols[j].iter().map(|&(i, v)| y[i] * v).sum()
        } else {
            y[j - self.sf.n]
        }
    }

    /// `B^-1 a_j`
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        if j < self.sf.n {
            for &(k, v) in &self.sf.cols[j] {
                for (r, a) in alpha.iter_mut().enumerate() {
                    *a += self.binv[r * m + k] * v;
                }
            }
        } else {
            let k = j - self.sf.n;
            for (r, a) in alpha.iter_mut().enumerate() {
                *a = self.binv[r * m + k];
            }
        }
        alpha
    }

    /// `c_B' B^-1`
    fn prices(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for r in 0..m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (yi, b) in y.iter_mut().zip(row) {
                    *yi += cb * b;
                }
            }
        }
        y
    }

    fn pivot(&mut self, row: usize, entering: usize, alpha: &[f64]) {
        let m = self.m;
        let piv = alpha[row];
        let theta = self.xb[row].max(0.0) / piv;
        for k in 0..m {
            self.binv[row * m + k] /= piv;
        }
        for r in 0..m {
            if r == row || alpha[r] == 0.0 {
                continue;
            }
            let f = alpha[r];
            for k in 0..m {
                self.binv[r * m + k] -= f * self.binv[row * m + k];
            }
            self.xb[r] -= theta * f;
        }
        self.xb[row] = theta;
        let leaving = self.basis[row];
        self.position[leaving] = NONBASIC;
        self.position[entering] = row;
        self.basis[row] = entering;
        self.iterations += 1;
        self.since_refactor += 1;
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut mat = vec![0.0; m * m];
        for (c, &j) in self.basis.iter().enumerate() {
            if j < self.sf.n {
                for &(i, v) in &self.sf.cols[j] {
                    mat[i * m + c] = v;
                }
            } else {
                mat[(j - self.sf.n) * m + c] = 1.0;
            }
        }
        self.binv = invert(mat, m).ok_or(Error::SingularBasis)?;
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            self.xb[r] = row.iter().zip(&self.sf.rhs).map(|(a, b)| a * b).sum();
        }
        self.since_refactor = 0;
        Ok(())
    }

    fn run(&mut self, cost: &[f64]) -> Result<Outcome> {
        let mut rule = self.opts.pivot_rule;
        let mut degenerate_streak = 0;
        loop {
            if self.since_refactor >= self.opts.refactor_every {
                self.refactor()?;
            }
            if self.iterations >= self.opts.max_iterations {
                return Err(Error::IterationLimit(self.opts.max_iterations));
            }
            let Some(q) = self.entering(cost, rule) else {
                // Confirm on a fresh inverse before stopping.
                if self.since_refactor > 0 {
                    self.refactor()?;
                    if self.entering(cost, rule).is_some() {
                        continue;
                    }
                }
                return Ok(Outcome::Optimal);
            };
            let alpha = self.ftran(q);
            let Some(row) = self.leaving(&alpha, rule) else {
                if self.since_refactor > 0 {
                    self.refactor()?;
                    continue;
                }
                return Ok(Outcome::Unbounded);
            };
            if self.xb[row] <= 0.0 {
                degenerate_streak += 1;
                if degenerate_streak > DEGENERATE_STREAK_LIMIT {
                    rule = PivotRule::Bland;
                }
            } else {
                degenerate_streak = 0;
            }
            let small = alpha[row].abs() < SMALL_PIVOT;
            self.pivot(row, q, &alpha);
            if small {
                self.refactor()?;
            }
        }
    }

    /// Improving nonbasic column: the first one under Bland's rule, the most
    /// negative reduced cost otherwise.
    fn entering(&self, cost: &[f64], rule: PivotRule) -> Option<usize> {
        let y = self.prices(cost);
        let mut entering = None;
        let mut best = -self.opts.opt_tol;
        for j in 0..self.sf.n {
            if self.position[j] != NONBASIC {
                continue;
            }
            let d = cost[j] - self.column_dot(&y, j);
            if d < best {
                entering = Some(j);
                if rule == PivotRule::Bland {
                    break;
                }
                best = d;
            }
        }
        entering
    }

    /// Two-pass ratio test. The first pass bounds the step with every basic
    /// value relaxed by the feasibility tolerance; the second picks, among
    /// rows within that bound, the largest pivot (Dantzig) or the smallest
    /// basis index among pivots within a factor of ten of the largest
    /// (Bland).
    fn leaving(&self, alpha: &[f64], rule: PivotRule) -> Option<usize> {
        let tol = self.opts.feas_tol;
        let mut bound = f64::INFINITY;
        for r in 0..self.m {
            if alpha[r] > self.opts.pivot_tol {
                bound = bound.min((self.xb[r].max(0.0) + tol) / alpha[r]);
            }
        }
        if bound == f64::INFINITY {
            return None;
        }
        let eligible: Vec<usize> = (0..self.m)
            .filter(|&r| alpha[r] > self.opts.pivot_tol && self.xb[r].max(0.0) / alpha[r] <= bound)
            .collect();
        let largest = eligible.iter().map(|&r| alpha[r]).fold(0.0f64, f64::max);
        match rule {
            PivotRule::Dantzig => eligible
                .into_iter()
                .max_by(|&a, &b| alpha[a].total_cmp(&alpha[b]).then(self.basis[b].cmp(&self.basis[a]))),
            PivotRule::Bland => eligible
                .into_iter()
                .filter(|&r| alpha[r] >= 0.1 * largest)
                .min_by_key(|&r| self.basis[r]),
        }
    }

    /// Pivots zero-level artificials out of the basis where a structural
    /// column can replace them. Those that remain sit on redundant rows.
    fn drive_out_artificials(&mut self) -> Result<()> {
        let n = self.sf.n;
        let m = self.m;
        for r in 0..m {
            if self.basis[r] < n {
                continue;
            }
            let row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..n {
                if self.position[j] != NONBASIC {
                    continue;
                }
                let v = self.column_dot(&row, j).abs();
                if v > 1e-9 && best.map_or(true, |(_, b)| v > b) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                self.xb[r] = 0.0;
                let alpha = self.ftran(j);
                self.pivot(r, j, &alpha);
            }
        }
        self.refactor()?;
        for x in &mut self.xb {
            if *x < 0.0 && *x > -self.opts.feas_tol {
                *x = 0.0;
            }
        }
        Ok(())
    }

    fn extract(&self, lp: &LinearProgram, cost: &[f64]) -> LpSolution {
        let sf = self.sf;
        let mut xs = vec![0.0; sf.n];
        for (r, &j) in self.basis.iter().enumerate() {
            if j < sf.n {
                xs[j] = self.xb[r].max(0.0);
            }
        }
        let primal: Vec<f64> = sf
            .map
            .iter()
            .map(|vm| match *vm {
                VarMap::Shift { col, base } => base + xs[col],
                VarMap::Mirror { col, base } => base - xs[col],
                VarMap::Split { pos, neg } => xs[pos] - xs[neg],
            })
            .collect();
        let y = self.prices(cost);
        let duals = (0..sf.m_orig).map(|i| sf.row_sign[i] * y[i]).collect();
        let mut basis = self.basis.clone();
        basis.sort_unstable();
        LpSolution {
            status: LpStatus::Optimal,
            objective_value: lp.evaluate(&primal),
            primal,
            duals,
            basis,
            iterations: self.iterations,
        }
    }
}

/// Gauss-Jordan inverse with partial pivoting of a row-major `m x m` matrix.
fn invert(mut a: Vec<f64>, m: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; m * m];
    for i in 0..m {
        inv[i * m + i] = 1.0;
    }
    for c in 0..m {
        let p = (c..m).max_by(|&x, &y| a[x * m + c].abs().total_cmp(&a[y * m + c].abs()))?;
        if a[p * m + c].abs() < 1e-13 {
            return None;
        }
        if p != c {
            for k in 0..m {
                a.swap(p * m + k, c * m + k);
                inv.swap(p * m + k, c * m + k);
            }
        }
        let piv = a[c * m + c];
        for k in 0..m {
            a[c * m + k] /= piv;
            inv[c * m + k] /= piv;
        }
        for r in 0..m {
            if r == c {
                continue;
            }
            let f = a[r * m + c];
            if f == 0.0 {
                continue;
            }
            for k in 0..m {
                a[r * m + k] -= f * a[c * m + k];
                inv[r * m + k] -= f * inv[c * m + k];
            }
        }
    }
    Some(inv)
}
