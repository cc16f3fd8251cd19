//! Outer (cut) and inner (envelope) approximations of cost-to-go functions.
//!
//! Both stores are keyed by `(t, node)`: the approximated function is the
//! cost-to-go of stage `t` as a function of the stage-`t-1` state, seen
//! from `node` (a stage-`t-1` realization, or the root).

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::ConditionalWeights;
use crate::lp::{solve, LpBuilder, LpStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Node {
    Root,
    Index(usize),
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Root => write!(f, "root"),
            Node::Index(j) => write!(f, "{}", j + 1),
        }
    }
}

/// `l >= intercept + gradient' (x - anchor)`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub gradient: Vec<f64>,
    pub intercept: f64,
    pub anchor: Vec<f64>,
    pub iteration: usize,
}

impl Cut {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .gradient
                .iter()
                .zip(x.iter().zip(&self.anchor))
                .map(|(g, (x, a))| g * (x - a))
                .sum::<f64>()
    }

    /// Constant term of the cut written as `alpha + gradient' x`.
    pub fn offset(&self) -> f64 {
        self.intercept - self.gradient.iter().zip(&self.anchor).map(|(g, a)| g * a).sum::<f64>()
    }
}

/// Weighted combination of per-scenario values and state derivatives.
pub fn aggregate_backward(
    values: &[f64],
    duals: &[Vec<f64>],
    weights: &ConditionalWeights,
    anchor: &[f64],
    iteration: usize,
) -> Result<Cut> {
    let n = weights.len();
    if values.len() != n || duals.len() != n {
        return Err(Error::Dimension(format!(
            "{} values and {} duals for {n} weights",
            values.len(),
            duals.len()
        )));
    }
    let d = anchor.len();
    if let Some(i) = duals.iter().position(|g| g.len() != d) {
        return Err(Error::Dimension(format!("dual {i} has width {}, anchor {d}", duals[i].len())));
    }
    let mut gradient = vec![0.0; d];
    let mut intercept = 0.0;
    for (i, w) in weights.as_slice().iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        intercept += w * values[i];
        for (g, p) in gradient.iter_mut().zip(&duals[i]) {
            *g += w * p;
        }
    }
    Ok(Cut {
        gradient,
        intercept,
        anchor: anchor.to_vec(),
        iteration,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CutPool {
    pools: BTreeMap<(usize, Node), Vec<Cut>>,
}

impl CutPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_cut(&mut self, t: usize, node: Node, cut: Cut) -> Result<()> {
        if cut.gradient.len() != cut.anchor.len() {
            return Err(Error::Dimension("cut gradient and anchor widths differ".into()));
        }
        let pool = self.pools.entry((t, node)).or_default();
        if let Some(first) = pool.first() {
            if first.gradient.len() != cut.gradient.len() {
                return Err(Error::Dimension(format!(
                    "cut width {} at stage {t}, pool width {}",
                    cut.gradient.len(),
                    first.gradient.len()
                )));
            }
        }
        pool.push(cut);
        Ok(())
    }

    pub fn cuts(&self, t: usize, node: Node) -> &[Cut] {
        self.pools.get(&(t, node)).map_or(&[], Vec::as_slice)
    }

    /// Max over the cuts; `-inf` for an empty pool.
    pub fn evaluate(&self, t: usize, node: Node, x: &[f64]) -> f64 {
        self.cuts(t, node)
            .iter()
            .map(|c| c.eval(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest gradient entry in absolute value among stage-`t` cuts.
    pub fn max_gradient_norm(&self, t: usize) -> f64 {
        self.pools
            .range((t, Node::Root)..=(t, Node::Index(usize::MAX)))
            .flat_map(|(_, v)| v.iter())
            .flat_map(|c| c.gradient.iter())
            .fold(0.0f64, |m, g| m.max(g.abs()))
    }

    pub fn len(&self) -> usize {
        self.pools.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One line per cut: `t,j,k,intercept,gradient...`.
    pub fn dump<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "t,j,k,intercept,gradient")?;
        for ((t, node), cuts) in &self.pools {
            for c in cuts {
                write!(out, "{t},{node},{},{:?}", c.iteration, c.intercept)?;
                for g in &c.gradient {
                    write!(out, ",{g:?}")?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub anchor: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeStore {
    points: BTreeMap<(usize, Node), Vec<EnvelopePoint>>,
    penalty: BTreeMap<usize, f64>,
}

impl EnvelopeStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn envelope_update(&mut self, t: usize, node: Node, anchor: Vec<f64>, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::InvalidParameter(format!("envelope value {value} at stage {t}")));
        }
        let pts = self.points.entry((t, node)).or_default();
        if let Some(first) = pts.first() {
            if first.anchor.len() != anchor.len() {
                return Err(Error::Dimension(format!(
                    "anchor width {} at stage {t}, store width {}",
                    anchor.len(),
                    first.anchor.len()
                )));
            }
        }
        pts.push(EnvelopePoint { anchor, value });
        Ok(())
    }

    pub fn points(&self, t: usize, node: Node) -> &[EnvelopePoint] {
        self.points.get(&(t, node)).map_or(&[], Vec::as_slice)
    }

    pub fn set_penalty(&mut self, t: usize, m: f64) {
        self.penalty.insert(t, m);
    }

    pub fn penalty(&self, t: usize) -> f64 {
        self.penalty.get(&t).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.points.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Value of the penalized convex envelope at `x`; `+inf` when empty.
    pub fn evaluate(&self, t: usize, node: Node, x: &[f64]) -> Result<f64> {
        let pts = self.points(t, node);
        if pts.is_empty() {
            return Ok(f64::INFINITY);
        }
        let mut b = LpBuilder::new();
        let xs: Vec<usize> = x.iter().map(|&v| b.add_var(0.0, v, v)).collect();
        let sp = splice_upper(&mut b, &xs, pts, self.penalty(t), 1.0, f64::INFINITY)?;
        let sol = solve(&b.build())?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::InvalidParameter("envelope LP failed".into()));
        }
        Ok(sol.primal[sp.value_col])
    }
}

/// Epigraph column added by [`splice_lower`].
#[derive(Debug, Clone, Copy)]
pub struct LowerSplice {
    pub col: usize,
    pub cut_rows: usize,
}

impl LowerSplice {
    pub fn value(&self, primal: &[f64]) -> f64 {
        primal[self.col]
    }
}

/// Adds an epigraph variable `l` with objective weight `cost` and one row
/// `l >= cut(x)` per cut, where `x` are the columns `state`. Without cuts,
/// `l` is bounded below by `lower_box`.
pub fn splice_lower(b: &mut LpBuilder, state: &[usize], cuts: &[Cut], cost: f64, lower_box: f64) -> Result<LowerSplice> {
    if cuts.is_empty() {
        let col = b.add_var(cost, lower_box, f64::INFINITY);
        return Ok(LowerSplice { col, cut_rows: 0 });
    }
    let col = b.add_free(cost);
    for c in cuts {
        if c.gradient.len() != state.len() {
            return Err(Error::Dimension(format!(
                "cut width {} for {} state columns",
                c.gradient.len(),
                state.len()
            )));
        }
        let mut row = vec![(col, 1.0)];
        row.extend(state.iter().zip(&c.gradient).filter(|(_, g)| **g != 0.0).map(|(&j, g)| (j, -g)));
        b.add_ge_row(row, c.offset());
    }
    Ok(LowerSplice {
        col,
        cut_rows: cuts.len(),
    })
}

/// Columns added by [`splice_upper`].
#[derive(Debug, Clone)]
pub struct UpperSplice {
    /// Free column equal to the envelope value at the current state.
    pub value_col: usize,
    pub theta_cols: Range<usize>,
}

/// Adds the penalized convex-combination envelope over `points`:
/// `v = sum theta_k V_k + m |y|_1`, `sum theta_k anchor_k + y = x`,
/// `sum theta = 1`, with objective weight `cost` on `v`. Without points,
/// `v` is fixed at `upper_box`.
pub fn splice_upper(
    b: &mut LpBuilder,
    state: &[usize],
    points: &[EnvelopePoint],
    m: f64,
    cost: f64,
    upper_box: f64,
) -> Result<UpperSplice> {
    if points.is_empty() {
        if !upper_box.is_finite() {
            return Err(Error::InvalidParameter("empty envelope with an infinite box".into()));
        }
        let v = b.add_var(cost, upper_box, upper_box);
        return Ok(UpperSplice {
            value_col: v,
            theta_cols: v..v,
        });
    }
    if let Some(p) = points.iter().find(|p| p.anchor.len() != state.len()) {
        return Err(Error::Dimension(format!(
            "envelope anchor width {} for {} state columns",
            p.anchor.len(),
            state.len()
        )));
    }
    let v = b.add_free(cost);
    let t0 = b.add_nonneg_block(points.len());
    let d = state.len();
    let yp = b.add_nonneg_block(d);
    let yn = b.add_nonneg_block(d);
    let mut def = vec![(v, 1.0)];
    def.extend(points.iter().enumerate().map(|(k, p)| (t0 + k, -p.value)));
    for k in 0..d {
        def.push((yp + k, -m));
        def.push((yn + k, -m));
    }
    b.add_eq_row(def, 0.0);
    for (k, &xk) in state.iter().enumerate() {
        let mut row: Vec<(usize, f64)> = points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.anchor[k] != 0.0)
            .map(|(q, p)| (t0 + q, p.anchor[k]))
            .collect();
        row.push((yp + k, 1.0));
        row.push((yn + k, -1.0));
        row.push((xk, -1.0));
        b.add_eq_row(row, 0.0);
    }
    b.add_eq_row((0..points.len()).map(|k| (t0 + k, 1.0)).collect(), 1.0);
    Ok(UpperSplice {
        value_col: v,
        theta_cols: t0..t0 + points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cut(g: f64, v: f64, a: f64) -> Cut {
        Cut {
            gradient: vec![g],
            intercept: v,
            anchor: vec![a],
            iteration: 0,
        }
    }

    #[test]
    fn constant_cut() {
        let mut p = CutPool::new();
        p.add_cut(2, Node::Root, cut(0.0, 5.0, 0.0)).unwrap();
        for x in [-3.0, 0.0, 7.0] {
            assert_eq!(p.evaluate(2, Node::Root, &[x]), 5.0);
        }
    }

    #[test]
    fn absolute_value_from_two_cuts() {
        let mut p = CutPool::new();
        p.add_cut(2, Node::Index(0), cut(1.0, 0.0, 0.0)).unwrap();
        p.add_cut(2, Node::Index(0), cut(-1.0, 0.0, 0.0)).unwrap();
        for x in [-2.5, 0.0, 1.5] {
            assert_eq!(p.evaluate(2, Node::Index(0), &[x]), f64::abs(x));
        }
        let before: Vec<f64> = (-3..=3).map(|x| p.evaluate(2, Node::Index(0), &[x as f64])).collect();
        p.add_cut(2, Node::Index(0), cut(1.0, 0.0, 0.0)).unwrap();
        let after: Vec<f64> = (-3..=3).map(|x| p.evaluate(2, Node::Index(0), &[x as f64])).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn mismatched_cut_width() {
        let mut p = CutPool::new();
        p.add_cut(2, Node::Root, cut(1.0, 0.0, 0.0)).unwrap();
        let wide = Cut {
            gradient: vec![1.0, 2.0],
            intercept: 0.0,
            anchor: vec![0.0, 0.0],
            iteration: 1,
        };
        assert!(matches!(p.add_cut(2, Node::Root, wide), Err(Error::Dimension(_))));
    }

    #[test]
    fn aggregation_examples() {
        let u = ConditionalWeights::uniform(3);
        let c = aggregate_backward(&[7.0; 3], &vec![vec![2.0]; 3], &u, &[0.0], 1).unwrap();
        assert!((c.intercept - 7.0).abs() < 1e-14 && (c.gradient[0] - 2.0).abs() < 1e-14);

        let w = ConditionalWeights::new(vec![0.25, 0.75]).unwrap();
        let c = aggregate_backward(&[4.0, 8.0], &[vec![1.0], vec![2.0]], &w, &[0.0], 1).unwrap();
        assert_eq!((c.gradient[0], c.intercept), (1.75, 7.0));

        let w = ConditionalWeights::new(vec![1.0, 0.0]).unwrap();
        let c = aggregate_backward(&[3.0, 99.0], &[vec![5.0], vec![-5.0]], &w, &[0.0], 1).unwrap();
        assert_eq!((c.gradient[0], c.intercept), (5.0, 3.0));

        assert!(aggregate_backward(&[1.0], &[vec![1.0], vec![1.0]], &w, &[0.0], 1).is_err());
    }

    #[test]
    fn envelope_examples() {
        let mut s = EnvelopeStore::new();
        assert_eq!(s.evaluate(2, Node::Root, &[1.0]).unwrap(), f64::INFINITY);
        s.set_penalty(2, 10.0);
        s.envelope_update(2, Node::Root, vec![0.0], 2.0).unwrap();
        assert!((s.evaluate(2, Node::Root, &[1.0]).unwrap() - 12.0).abs() < 1e-12);

        let mut s = EnvelopeStore::new();
        s.set_penalty(2, 1e6);
        s.envelope_update(2, Node::Root, vec![0.0], 0.0).unwrap();
        s.envelope_update(2, Node::Root, vec![2.0], 2.0).unwrap();
        assert!((s.evaluate(2, Node::Root, &[1.0]).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_pool_splice_uses_lower_box() {
        let mut b = LpBuilder::new();
        let x = b.add_var(0.0, 1.0, 1.0);
        let s = splice_lower(&mut b, &[x], &[], 1.0, -1e9).unwrap();
        let sol = solve(&b.build()).unwrap();
        assert_eq!(s.value(&sol.primal), -1e9);
        assert_eq!(sol.objective_value, -1e9);
    }

    #[test]
    fn dump_format() {
        let mut p = CutPool::new();
        p.add_cut(3, Node::Index(1), cut(-0.5, 2.0, 1.0)).unwrap();
        let mut out = Vec::new();
        p.dump(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "t,j,k,intercept,gradient\n3,2,0,2.0,-0.5\n");
    }

    proptest! {
        #[test]
        fn envelope_is_convex_and_below_points(
            pts in prop::collection::vec((-3.0..3.0f64, -5.0..5.0f64), 1..6),
            a in -4.0..4.0f64, c in -4.0..4.0f64, lam in 0.0..1.0f64,
        ) {
            let mut s = EnvelopeStore::new();
            s.set_penalty(2, 7.0);
            for (x, v) in &pts {
                s.envelope_update(2, Node::Root, vec![*x], *v).unwrap();
            }
            for (x, v) in &pts {
                prop_assert!(s.evaluate(2, Node::Root, &[*x]).unwrap() <= v + 1e-9);
            }
            let fa = s.evaluate(2, Node::Root, &[a]).unwrap();
            let fc = s.evaluate(2, Node::Root, &[c]).unwrap();
            let fm = s.evaluate(2, Node::Root, &[lam * a + (1.0 - lam) * c]).unwrap();
            prop_assert!(fm <= lam * fa + (1.0 - lam) * fc + 1e-8);
        }

        #[test]
        fn cut_max_is_convex(
            cs in prop::collection::vec((-3.0..3.0f64, -5.0..5.0f64, -2.0..2.0f64), 1..6),
            a in -4.0..4.0f64, c in -4.0..4.0f64, lam in 0.0..1.0f64,
        ) {
            let mut p = CutPool::new();
            for (g, v, x) in &cs {
                p.add_cut(2, Node::Root, cut(*g, *v, *x)).unwrap();
            }
            let f = |x: f64| p.evaluate(2, Node::Root, &[x]);
            prop_assert!(f(lam * a + (1.0 - lam) * c) <= lam * f(a) + (1.0 - lam) * f(c) + 1e-8);
            for (_, v, x) in &cs {
                prop_assert!(f(*x) >= *v - 1e-12);
            }
        }
    }
}
