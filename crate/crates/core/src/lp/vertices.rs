use super::LinearProgram;
use crate::error::{Error, Result};

pub const MAX_ORACLE_VARS: usize = 12;
pub const MAX_ORACLE_ROWS: usize = 8;
const MAX_BASES: u128 = 5_000_000;
const SINGULAR_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;

/// Lists every basic feasible solution of `lp` as `(x, objective)`.
///
/// Works by brute force over all column subsets of a standard-form copy of
/// the program and shares no code with the simplex solver. Duplicate points
/// (degenerate bases) are reported once. An empty result means the program
/// is infeasible. Unboundedness is not detected, so callers that compare
/// against [`solve`](super::solve) should box the variables.
pub fn enumerate_vertices(lp: &LinearProgram) -> Result<Vec<(Vec<f64>, f64)>> {
    lp.validate()?;
    if lp.num_vars() > MAX_ORACLE_VARS || lp.num_rows() > MAX_ORACLE_ROWS {
        return Err(Error::ScaleExceeded(format!(
            "{} variables x {} rows exceeds {MAX_ORACLE_VARS} x {MAX_ORACLE_ROWS}",
            lp.num_vars(),
            lp.num_rows()
        )));
    }

    // Standard-form copy. recover[j] = (constant, [(std col, coefficient)]).
    let n0 = lp.num_vars();
    let mut rows: Vec<Vec<f64>> = lp.eq_matrix.clone();
    let mut rhs = lp.eq_rhs.clone();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut recover: Vec<(f64, Vec<(usize, f64)>)> = Vec::new();
    let mut extra: Vec<(usize, f64)> = Vec::new();
    for j in 0..n0 {
        let a: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let (l, u) = (lp.var_lower[j], lp.var_upper[j]);
        if lp.free_mask[j] || (l.is_infinite() && u.is_infinite()) {
            let k = columns.len();
            columns.push(a.clone());
            columns.push(a.iter().map(|v| -v).collect());
            recover.push((0.0, vec![(k, 1.0), (k + 1, -1.0)]));
        } else if l.is_finite() {
            for (b, v) in rhs.iter_mut().zip(&a) {
                *b -= v * l;
            }
            let k = columns.len();
            columns.push(a);
            recover.push((l, vec![(k, 1.0)]));
            if u.is_finite() {
                extra.push((k, u - l));
            }
        } else {
            for (b, v) in rhs.iter_mut().zip(&a) {
                *b -= v * u;
            }
            let k = columns.len();
            columns.push(a.iter().map(|v| -v).collect());
            recover.push((u, vec![(k, -1.0)]));
        }
    }
    for (k, width) in extra {
        for col in columns.iter_mut() {
            col.push(0.0);
        }
        let mut slack = vec![0.0; rhs.len() + 1];
        *slack.last_mut().unwrap() = 1.0;
        columns[k][rhs.len()] = 1.0;
        columns.push(slack);
        rhs.push(width);
    }
    rows.clear();
    let n = columns.len();
    let m = rhs.len();
    let mut a: Vec<Vec<f64>> = (0..m).map(|i| (0..n).map(|j| columns[j][i]).collect()).collect();

    let Some(rank) = reduce_rows(&mut a, &mut rhs) else {
        return Ok(Vec::new());
    };
    a.truncate(rank);
    rhs.truncate(rank);

    if binomial(n, rank) > MAX_BASES {
        return Err(Error::ScaleExceeded(format!("C({n}, {rank}) candidate bases")));
    }

    let mut out: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut subset: Vec<usize> = (0..rank).collect();
    loop {
        if let Some(xb) = solve_square(&a, &rhs, &subset) {
            if xb.iter().all(|&v| v >= -FEAS_TOL) {
                let mut xs = vec![0.0; n];
                for (&j, &v) in subset.iter().zip(&xb) {
                    xs[j] = v.max(0.0);
                }
                let x: Vec<f64> = recover
                    .iter()
                    .map(|(c, terms)| c + terms.iter().map(|&(k, s)| s * xs[k]).sum::<f64>())
                    .collect();
                let duplicate = out.iter().any(|(y, _)| {
                    y.iter().zip(&x).all(|(p, q)| (p - q).abs() <= 1e-9 * (1.0 + p.abs()))
                });
                if !duplicate {
                    let value = lp.evaluate(&x);
                    out.push((x, value));
                }
            }
        }
        if !next_subset(&mut subset, n) {
            break;
        }
    }
    Ok(out)
}

/// Row-reduces `[a | b]` in place, leaving the independent rows on top.
/// Returns the rank, or `None` if the system is inconsistent.
fn reduce_rows(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<usize> {
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    let scale = 1.0 + a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    let mut rank = 0;
    for c in 0..n {
        if rank == m {
            break;
        }
        let p = (rank..m).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
        if a[p][c].abs() <= SINGULAR_TOL * scale {
            continue;
        }
        a.swap(rank, p);
        b.swap(rank, p);
        for r in 0..m {
            if r != rank {
                let f = a[r][c] / a[rank][c];
                if f != 0.0 {
                    for k in 0..n {
                        a[r][k] -= f * a[rank][k];
                    }
                    b[r] -= f * b[rank];
                }
            }
        }
        rank += 1;
    }
    let bscale = 1.0 + b.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if b[rank..].iter().any(|v| v.abs() > 1e-9 * bscale) {
        return None;
    }
    Some(rank)
}

/// Solves `a[:, cols] x = b` with full pivoting; `None` when singular.
fn solve_square(a: &[Vec<f64>], b: &[f64], cols: &[usize]) -> Option<Vec<f64>> {
    let k = cols.len();
    let mut mat: Vec<Vec<f64>> = a.iter().map(|row| cols.iter().map(|&j| row[j]).collect()).collect();
    let mut rhs = b.to_vec();
    let mut perm: Vec<usize> = (0..k).collect();
    for d in 0..k {
        let (mut pr, mut pc, mut best) = (d, d, 0.0);
        for (r, row) in mat.iter().enumerate().skip(d) {
            for (c, v) in row.iter().enumerate().skip(d) {
                if v.abs() > best {
                    (pr, pc, best) = (r, c, v.abs());
                }
            }
        }
        if best < SINGULAR_TOL {
            return None;
        }
        mat.swap(d, pr);
        rhs.swap(d, pr);
        for row in mat.iter_mut() {
            row.swap(d, pc);
        }
        perm.swap(d, pc);
        for r in d + 1..k {
            let f = mat[r][d] / mat[d][d];
            for c in d..k {
                mat[r][c] -= f * mat[d][c];
            }
            rhs[r] -= f * rhs[d];
        }
    }
    let mut y = vec![0.0; k];
    for d in (0..k).rev() {
        let s: f64 = (d + 1..k).map(|c| mat[d][c] * y[c]).sum();
        y[d] = (rhs[d] - s) / mat[d][d];
    }
    let mut x = vec![0.0; k];
    for (d, &p) in perm.iter().enumerate() {
        x[p] = y[d];
    }
    Some(x)
}

fn next_subset(s: &mut [usize], n: usize) -> bool {
    let k = s.len();
    for i in (0..k).rev() {
        if s[i] < n - k + i {
            s[i] += 1;
            for j in i + 1..k {
                s[j] = s[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k as u128).fold(1u128, |acc, i| acc * (n as u128 - i) / (i + 1))
}
