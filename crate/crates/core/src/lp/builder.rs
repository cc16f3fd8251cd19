use super::LinearProgram;

/// Incremental construction of a [`LinearProgram`] from sparse rows.
///
/// Inequality rows are turned into equalities by appending a nonnegative
/// slack column, so row indices returned here are also dual indices in the
/// solved program.
#[derive(Debug, Clone, Default)]
pub struct LpBuilder {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    free: Vec<bool>,
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    offset: f64,
}

impl LpBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.free.push(false);
        self.objective.len() - 1
    }

    pub fn add_nonneg(&mut self, cost: f64) -> usize {
        self.add_var(cost, 0.0, f64::INFINITY)
    }

    pub fn add_free(&mut self, cost: f64) -> usize {
        let j = self.add_var(cost, f64::NEG_INFINITY, f64::INFINITY);
        self.free[j] = true;
        j
    }

    /// Adds `count` nonnegative columns with zero cost; returns the first index.
    pub fn add_nonneg_block(&mut self, count: usize) -> usize {
        let first = self.num_vars();
        for _ in 0..count {
            self.add_nonneg(0.0);
        }
        first
    }

    pub fn add_free_block(&mut self, count: usize) -> usize {
        let first = self.num_vars();
        for _ in 0..count {
            self.add_free(0.0);
        }
        first
    }

    pub fn set_cost(&mut self, col: usize, cost: f64) {
        self.objective[col] = cost;
    }

    pub fn add_cost(&mut self, col: usize, delta: f64) {
        self.objective[col] += delta;
    }

    pub fn cost(&self, col: usize) -> f64 {
        self.objective[col]
    }

    pub fn set_bounds(&mut self, col: usize, lower: f64, upper: f64) {
        self.lower[col] = lower;
        self.upper[col] = upper;
        self.free[col] = false;
    }

    pub fn add_offset(&mut self, value: f64) {
        self.offset += value;
    }

    pub fn add_eq_row(&mut self, entries: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.rows.push(entries);
        self.rhs.push(rhs);
        self.rhs.len() - 1
    }

    /// `entries >= rhs`, via a surplus column.
    pub fn add_ge_row(&mut self, mut entries: Vec<(usize, f64)>, rhs: f64) -> usize {
        let s = self.add_nonneg(0.0);
        entries.push((s, -1.0));
        self.add_eq_row(entries, rhs)
    }

    /// `entries <= rhs`, via a slack column.
    pub fn add_le_row(&mut self, mut entries: Vec<(usize, f64)>, rhs: f64) -> usize {
        let s = self.add_nonneg(0.0);
        entries.push((s, 1.0));
        self.add_eq_row(entries, rhs)
    }

    pub fn build(&self) -> LinearProgram {
        let n = self.num_vars();
        let eq_matrix = self
            .rows
            .iter()
            .map(|entries| {
                let mut row = vec![0.0; n];
                for &(j, v) in entries {
                    row[j] += v;
                }
                row
            })
            .collect();
        LinearProgram {
            objective: self.objective.clone(),
            eq_matrix,
            eq_rhs: self.rhs.clone(),
            var_lower: self.lower.clone(),
            var_upper: self.upper.clone(),
            free_mask: self.free.clone(),
            objective_offset: self.offset,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::solve;

    #[test]
    fn inequality_rows_get_slacks() {
        // min -x  s.t. x <= 3, x >= 1
        let mut b = LpBuilder::new();
        let x = b.add_nonneg(-1.0);
        b.add_le_row(vec![(x, 1.0)], 3.0);
        b.add_ge_row(vec![(x, 1.0)], 1.0);
        let lp = b.build();
        assert_eq!(lp.num_vars(), 3);
        let sol = solve(&lp).unwrap();
        assert!((sol.primal[x] - 3.0).abs() < 1e-12);
        assert!((sol.objective_value + 3.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_entries_accumulate() {
        let mut b = LpBuilder::new();
        let x = b.add_nonneg(1.0);
        b.add_eq_row(vec![(x, 1.0), (x, 1.0)], 4.0);
        let lp = b.build();
        assert_eq!(lp.eq_matrix[0][x], 2.0);
    }
}
