//! Observed trajectories, forward sampling and a synthetic Markov generator.
//!
//! Stages are numbered `1..=T` and paths `0..N` in the API. Files and error
//! messages use 1-based path numbers, with path `0` reserved for the shared
//! deterministic first stage.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::ConditionalWeights;

/// One realization `(c, A, B, b)` of a stage's data plus its kernel covariate.
///
/// The stage LP is `min c'x  s.t.  A x + B z = b,  x >= 0` where `z` is the
/// state carried in from the previous stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageDatum {
    pub c: Vec<f64>,
    /// `rows x cols`, row-major.
    pub a: Vec<Vec<f64>>,
    /// `rows x state_dim(t-1)`, row-major.
    pub b_mat: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub feature: Vec<f64>,
}

/// Dimensions of one stage. The first `state_dim` decision columns are the
/// state passed to the next stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageShape {
    pub rows: usize,
    pub cols: usize,
    pub state_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectorySchema {
    pub horizon: usize,
    pub n_paths: usize,
    pub feature_dim: usize,
    /// `stages[t-1]` describes stage `t`.
    pub stages: Vec<StageShape>,
}

impl TrajectorySchema {
    pub fn stage(&self, t: usize) -> &StageShape {
        &self.stages[t - 1]
    }

    /// Width of the incoming state at stage `t` (0 at the root).
    pub fn state_in(&self, t: usize) -> usize {
        if t <= 1 {
            0
        } else {
            self.stages[t - 2].state_dim
        }
    }

    fn validate(&self) -> Result<()> {
        if self.horizon < 1 || self.n_paths < 1 {
            return Err(Error::InvalidParameter("need T >= 1 and N >= 1".into()));
        }
        if self.stages.len() != self.horizon {
            return Err(Error::Dimension(format!(
                "{} stage shapes for horizon {}",
                self.stages.len(),
                self.horizon
            )));
        }
        for (k, s) in self.stages.iter().enumerate() {
            if s.state_dim > s.cols {
                return Err(Error::Dimension(format!(
                    "stage {} state width {} exceeds {} columns",
                    k + 1,
                    s.state_dim,
                    s.cols
                )));
            }
        }
        Ok(())
    }
}

/// N observed trajectories sharing a deterministic first stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySet {
    pub schema: TrajectorySchema,
    pub stage1: StageDatum,
    /// `data[t-2][i]` is path `i` at stage `t`, for `t` in `2..=T`.
    pub data: Vec<Vec<StageDatum>>,
}

impl TrajectorySet {
    pub fn new(schema: TrajectorySchema, stage1: StageDatum, data: Vec<Vec<StageDatum>>) -> Result<Self> {
        let set = Self { schema, stage1, data };
        set.validate()?;
        Ok(set)
    }

    pub fn horizon(&self) -> usize {
        self.schema.horizon
    }

    pub fn n_paths(&self) -> usize {
        self.schema.n_paths
    }

    pub fn feature_dim(&self) -> usize {
        self.schema.feature_dim
    }

    /// Path `i`'s datum at stage `t >= 2`; the shared datum at `t = 1`.
    pub fn datum(&self, t: usize, i: usize) -> &StageDatum {
        if t == 1 {
            &self.stage1
        } else {
            &self.data[t - 2][i]
        }
    }

    /// Stage-`t` features of all paths, the kernel anchors for moves out of stage `t`.
    pub fn features(&self, t: usize) -> Vec<Vec<f64>> {
        (0..self.n_paths()).map(|i| self.datum(t, i).feature.clone()).collect()
    }

    /// The trajectories restricted to `paths`, in that order.
    pub fn subset(&self, paths: &[usize]) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidParameter("empty path subset".into()));
        }
        let mut schema = self.schema.clone();
        schema.n_paths = paths.len();
        let data = self
            .data
            .iter()
            .map(|stage| paths.iter().map(|&i| stage[i].clone()).collect())
            .collect();
        Self::new(schema, self.stage1.clone(), data)
    }

    pub fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        let t_count = self.schema.horizon;
        if self.data.len() != t_count - 1 {
            return Err(Error::Dimension(format!(
                "{} random stages stored, horizon {t_count} needs {}",
                self.data.len(),
                t_count - 1
            )));
        }
        check_datum(&self.schema, 1, 0, &self.stage1)?;
        for (k, stage) in self.data.iter().enumerate() {
            let t = k + 2;
            if stage.len() != self.schema.n_paths {
                return Err(Error::DataShape {
                    stage: t,
                    path: stage.len() + 1,
                    message: format!("{} paths stored, {} declared", stage.len(), self.schema.n_paths),
                });
            }
            for (i, d) in stage.iter().enumerate() {
                check_datum(&self.schema, t, i + 1, d)?;
            }
        }
        Ok(())
    }
}

fn check_datum(schema: &TrajectorySchema, t: usize, path: usize, d: &StageDatum) -> Result<()> {
    let shape = schema.stage(t);
    let din = schema.state_in(t);
    let fail = |message: String| Error::DataShape { stage: t, path, message };
    if d.c.len() != shape.cols {
        return Err(fail(format!("cost has {} entries, expected {}", d.c.len(), shape.cols)));
    }
    if d.rhs.len() != shape.rows {
        return Err(fail(format!("rhs has {} entries, expected {}", d.rhs.len(), shape.rows)));
    }
    if d.a.len() != shape.rows || d.a.iter().any(|r| r.len() != shape.cols) {
        return Err(fail(format!("A is not {} x {}", shape.rows, shape.cols)));
    }
    if d.b_mat.len() != shape.rows || d.b_mat.iter().any(|r| r.len() != din) {
        return Err(fail(format!("B is not {} x {din}", shape.rows)));
    }
    if d.feature.len() != schema.feature_dim {
        return Err(fail(format!(
            "feature has {} entries, expected {}",
            d.feature.len(),
            schema.feature_dim
        )));
    }
    let all = d
        .c
        .iter()
        .chain(&d.rhs)
        .chain(&d.feature)
        .chain(d.a.iter().flatten())
        .chain(d.b_mat.iter().flatten());
    if all.clone().any(|v| !v.is_finite()) {
        return Err(fail("non-finite entry".into()));
    }
    Ok(())
}

const MAGIC: &str = "#ddsddp-trajectories";

fn fmt_f64(v: f64) -> String {
    // Debug formatting is the shortest string that parses back to `v`.
    format!("{v:?}")
}

/// Writes `set` in the self-describing CSV layout read by [`load_trajectories`].
pub fn save_trajectories<W: Write>(set: &TrajectorySet, out: W) -> Result<()> {
    let s = &set.schema;
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    w.write_record([
        MAGIC.to_string(),
        "version=1".into(),
        format!("T={}", s.horizon),
        format!("N={}", s.n_paths),
        format!("p={}", s.feature_dim),
    ])?;
    for (k, sh) in s.stages.iter().enumerate() {
        w.write_record([
            "#stage".to_string(),
            (k + 1).to_string(),
            format!("rows={}", sh.rows),
            format!("cols={}", sh.cols),
            format!("state={}", sh.state_dim),
        ])?;
    }
    let mut row = |path: usize, t: usize, d: &StageDatum| -> Result<()> {
        let mut rec = vec![path.to_string(), t.to_string()];
        let values = d
            .c
            .iter()
            .chain(d.a.iter().flatten())
            .chain(d.b_mat.iter().flatten())
            .chain(&d.rhs)
            .chain(&d.feature);
        rec.extend(values.map(|v| fmt_f64(*v)));
        w.write_record(&rec)?;
        Ok(())
    };
    row(0, 1, &set.stage1)?;
    for (k, stage) in set.data.iter().enumerate() {
        for (i, d) in stage.iter().enumerate() {
            row(i + 1, k + 2, d)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_kv(field: &str, key: &str, line: u64) -> Result<usize> {
    field
        .trim()
        .strip_prefix(key)
        .and_then(|v| v.strip_prefix('='))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Parse {
            line,
            message: format!("expected {key}=<integer>, found {field:?}"),
        })
}

/// Reads trajectories written by [`save_trajectories`].
///
/// When `expected` is given the declared schema must equal it.
pub fn load_trajectories<R: Read>(source: R, expected: Option<&TrajectorySchema>) -> Result<TrajectorySet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(source);
    let mut records = reader.records();

    let line_of = |r: &csv::StringRecord| r.position().map_or(0, |p| p.line());
    let first = match records.next() {
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty input".into(),
            })
        }
        Some(r) => r?,
    };
    let line = line_of(&first);
    if first.get(0).map(str::trim) != Some(MAGIC) || first.len() != 5 {
        return Err(Error::Parse {
            line,
            message: format!("missing {MAGIC} header"),
        });
    }
    if parse_kv(&first[1], "version", line)? != 1 {
        return Err(Error::Parse {
            line,
            message: "unsupported version".into(),
        });
    }
    let horizon = parse_kv(&first[2], "T", line)?;
    let n_paths = parse_kv(&first[3], "N", line)?;
    let feature_dim = parse_kv(&first[4], "p", line)?;
    if horizon == 0 || n_paths == 0 {
        return Err(Error::Parse {
            line,
            message: "T and N must be positive".into(),
        });
    }

    let mut stages = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let rec = records.next().ok_or(Error::Parse {
            line: line + t as u64,
            message: format!("missing #stage line for stage {t}"),
        })??;
        let line = line_of(&rec);
        if rec.get(0).map(str::trim) != Some("#stage") || rec.len() != 5 || rec[1].trim().parse() != Ok(t) {
            return Err(Error::Parse {
                line,
                message: format!("expected #stage,{t},rows=..,cols=..,state=.."),
            });
        }
        stages.push(StageShape {
            rows: parse_kv(&rec[2], "rows", line)?,
            cols: parse_kv(&rec[3], "cols", line)?,
            state_dim: parse_kv(&rec[4], "state", line)?,
        });
    }
    let schema = TrajectorySchema {
        horizon,
        n_paths,
        feature_dim,
        stages,
    };
    schema.validate()?;
    if let Some(exp) = expected {
        if exp != &schema {
            return Err(Error::Dimension("declared schema differs from the expected one".into()));
        }
    }

    let mut stage1: Option<StageDatum> = None;
    let mut data: Vec<Vec<Option<StageDatum>>> = vec![vec![None; n_paths]; horizon.saturating_sub(1)];
    for rec in records {
        let rec = rec?;
        let line = line_of(&rec);
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        let index = |k: usize, what: &str| -> Result<usize> {
            rec.get(k).and_then(|f| f.trim().parse().ok()).ok_or_else(|| Error::Parse {
                line,
                message: format!("invalid {what} field"),
            })
        };
        let path = index(0, "path")?;
        let t = index(1, "stage")?;
        if t < 1 || t > horizon || (t == 1) != (path == 0) || path > n_paths {
            return Err(Error::Parse {
                line,
                message: format!("invalid (path, stage) = ({path}, {t})"),
            });
        }
        let shape = schema.stage(t);
        let din = schema.state_in(t);
        let width = shape.cols + shape.rows * shape.cols + shape.rows * din + shape.rows + feature_dim;
        if rec.len() != 2 + width {
            return Err(Error::DataShape {
                stage: t,
                path,
                message: format!("line {line}: {} values, expected {width}", rec.len() - 2),
            });
        }
        let mut values = Vec::with_capacity(width);
        for (k, f) in rec.iter().skip(2).enumerate() {
            let v: f64 = f.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("column {} is not a number: {f:?}", k + 3),
            })?;
            values.push(v);
        }
        let mut it = values.into_iter();
        let mut take = |n: usize| -> Vec<f64> { it.by_ref().take(n).collect() };
        let c = take(shape.cols);
        let a = (0..shape.rows).map(|_| take(shape.cols)).collect();
        let b_mat = (0..shape.rows).map(|_| take(din)).collect();
        let rhs = take(shape.rows);
        let feature = take(feature_dim);
        let d = StageDatum {
            c,
            a,
            b_mat,
            rhs,
            feature,
        };
        let slot = if t == 1 { &mut stage1 } else { &mut data[t - 2][path - 1] };
        if slot.is_some() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate row for (path, stage) = ({path}, {t})"),
            });
        }
        *slot = Some(d);
    }

    let stage1 = stage1.ok_or(Error::DataShape {
        stage: 1,
        path: 0,
        message: "missing first-stage row".into(),
    })?;
    let mut full = Vec::with_capacity(data.len());
    for (k, stage) in data.into_iter().enumerate() {
        let mut v = Vec::with_capacity(n_paths);
        for (i, d) in stage.into_iter().enumerate() {
            v.push(d.ok_or(Error::DataShape {
                stage: k + 2,
                path: i + 1,
                message: "missing row".into(),
            })?);
        }
        full.push(v);
    }
    TrajectorySet::new(schema, stage1, full)
}

/// A sampled forward path: `indices[t-2]` is the path drawn at stage `t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForwardScenario {
    pub indices: Vec<usize>,
    pub rng_seed: u64,
}

/// Inverse-CDF draw. Zero-weight entries are never returned.
pub fn sample_index<R: Rng>(weights: &ConditionalWeights, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let w = weights.as_slice();
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, &x) in w.iter().enumerate() {
        if x > 0.0 {
            cum += x;
            last_positive = i;
            if u < cum {
                return i;
            }
        }
    }
    last_positive
}

/// Draws stages `2..=horizon` in sequence. `weights_fn(t, prev)` gives the
/// distribution over paths at stage `t` given the index drawn at `t-1`
/// (`None` when `t-1` is the root).
pub fn sample_forward<F>(horizon: usize, mut weights_fn: F, rng_seed: u64) -> Result<ForwardScenario>
where
    F: FnMut(usize, Option<usize>) -> Result<ConditionalWeights>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut indices = Vec::with_capacity(horizon.saturating_sub(1));
    let mut prev = None;
    for t in 2..=horizon {
        let w = weights_fn(t, prev)?;
        let i = sample_index(&w, &mut rng);
        indices.push(i);
        prev = Some(i);
    }
    Ok(ForwardScenario { indices, rng_seed })
}

/// `xi_{t+1} = mu + Phi xi_t + eps_t`, `eps ~ N(0, noise_cov)`, clamped to a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovSpec {
    pub mu: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub noise_cov: Vec<Vec<f64>>,
    /// Stage-1 feature.
    pub initial: Vec<f64>,
    pub box_lower: Vec<f64>,
    pub box_upper: Vec<f64>,
}

impl MarkovSpec {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    fn validate(&self) -> Result<Vec<Vec<f64>>> {
        let p = self.dim();
        let square = |m: &Vec<Vec<f64>>| m.len() == p && m.iter().all(|r| r.len() == p);
        if p == 0
            || !square(&self.phi)
            || !square(&self.noise_cov)
            || self.initial.len() != p
            || self.box_lower.len() != p
            || self.box_upper.len() != p
        {
            return Err(Error::Dimension(format!("Markov spec blocks must all have dimension {p}")));
        }
        if self.box_lower.iter().zip(&self.box_upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidParameter("box lower exceeds upper".into()));
        }
        let r = spectral_radius(&self.phi);
        if r >= 1.0 {
            return Err(Error::UnstableProcess(r));
        }
        psd_factor(&self.noise_cov)
    }
}

/// Spectral radius via Gelfand's formula on repeated squares.
pub fn spectral_radius(m: &[Vec<f64>]) -> f64 {
    let p = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut log_scale = 0.0f64;
    let mut power = 1.0f64;
    let norm = |a: &Vec<Vec<f64>>| a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    for _ in 0..60 {
        let n = norm(&a);
        if n == 0.0 {
            return 0.0;
        }
        log_scale += n.ln() / power;
        for v in a.iter_mut().flatten() {
            *v /= n;
        }
        let mut sq = vec![vec![0.0; p]; p];
        for i in 0..p {
            for k in 0..p {
                if a[i][k] != 0.0 {
                    for j in 0..p {
                        sq[i][j] += a[i][k] * a[k][j];
                    }
                }
            }
        }
        a = sq;
        power *= 2.0;
    }
    let n = norm(&a);
    if n == 0.0 {
        return 0.0;
    }
    (log_scale + n.ln() / power).exp()
}

/// Lower-triangular `L` with `L L' = cov`, allowing semidefinite input.
fn psd_factor(cov: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let p = cov.len();
    let scale = 1.0 + cov.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    let tol = 1e-12 * scale;
    let mut l = vec![vec![0.0; p]; p];
    for j in 0..p {
        if (0..p).any(|i| (cov[i][j] - cov[j][i]).abs() > tol) {
            return Err(Error::InvalidParameter("noise covariance is not symmetric".into()));
        }
        let d = cov[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if d < -tol {
            return Err(Error::InvalidParameter("noise covariance is not positive semidefinite".into()));
        }
        let d = d.max(0.0).sqrt();
        l[j][j] = d;
        for i in j + 1..p {
            let s = cov[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if d > tol {
                l[i][j] = s / d;
            } else if s.abs() > tol.sqrt() {
                return Err(Error::InvalidParameter("noise covariance is not positive semidefinite".into()));
            }
        }
    }
    Ok(l)
}

/// `paths[i][t-1]` is path `i`'s feature at stage `t`; stage 1 is `spec.initial`.
pub fn simulate_markov_features(spec: &MarkovSpec, horizon: usize, n_paths: usize, seed: u64) -> Result<Vec<Vec<Vec<f64>>>> {
    let chol = spec.validate()?;
    let p = spec.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut paths = Vec::with_capacity(n_paths);
    for _ in 0..n_paths {
        let mut path = Vec::with_capacity(horizon);
        let mut xi = spec.initial.clone();
        path.push(xi.clone());
        for _ in 1..horizon {
            let z: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
            let next: Vec<f64> = (0..p)
                .map(|r| {
                    let drift: f64 = spec.phi[r].iter().zip(&xi).map(|(a, b)| a * b).sum();
                    let eps: f64 = chol[r].iter().zip(&z).map(|(a, b)| a * b).sum();
                    (spec.mu[r] + drift + eps).clamp(spec.box_lower[r], spec.box_upper[r])
                })
                .collect();
            xi = next;
            path.push(xi.clone());
        }
        paths.push(path);
    }
    Ok(paths)
}

/// Maps a stage and its feature to the stage data; implemented by model builders.
pub trait DatumTemplate {
    fn horizon(&self) -> usize;
    fn feature_dim(&self) -> usize;
    fn shape(&self, t: usize) -> StageShape;
    fn datum(&self, t: usize, feature: &[f64]) -> StageDatum;
}

/// Builds a [`TrajectorySet`] from feature paths shaped like the output of
/// [`simulate_markov_features`].
pub fn trajectories_from_features<D: DatumTemplate + ?Sized>(template: &D, paths: &[Vec<Vec<f64>>]) -> Result<TrajectorySet> {
    let horizon = template.horizon();
    if paths.is_empty() {
        return Err(Error::EmptyAnchors);
    }
    if let Some(i) = paths.iter().position(|p| p.len() != horizon) {
        return Err(Error::DataShape {
            stage: horizon,
            path: i + 1,
            message: "feature path length differs from the horizon".into(),
        });
    }
    let schema = TrajectorySchema {
        horizon,
        n_paths: paths.len(),
        feature_dim: template.feature_dim(),
        stages: (1..=horizon).map(|t| template.shape(t)).collect(),
    };
    let stage1 = template.datum(1, &paths[0][0]);
    let data = (2..=horizon)
        .map(|t| paths.iter().map(|p| template.datum(t, &p[t - 1])).collect())
        .collect();
    TrajectorySet::new(schema, stage1, data)
}

/// Simulates `n_paths` feature paths and maps them through `template`.
pub fn generate_synthetic_markov<D: DatumTemplate + ?Sized>(
    spec: &MarkovSpec,
    template: &D,
    n_paths: usize,
    seed: u64,
) -> Result<TrajectorySet> {
    let paths = simulate_markov_features(spec, template.horizon(), n_paths, seed)?;
    trajectories_from_features(template, &paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(phi: f64, mu: f64, var: f64) -> MarkovSpec {
        MarkovSpec {
            mu: vec![mu],
            phi: vec![vec![phi]],
            noise_cov: vec![vec![var]],
            initial: vec![0.0],
            box_lower: vec![-100.0],
            box_upper: vec![100.0],
        }
    }

    /// One row `x_1 = feature`, state width 1.
    struct Echo(usize);

    impl DatumTemplate for Echo {
        fn horizon(&self) -> usize {
            self.0
        }
        fn feature_dim(&self) -> usize {
            1
        }
        fn shape(&self, _t: usize) -> StageShape {
            StageShape {
                rows: 1,
                cols: 1,
                state_dim: 1,
            }
        }
        fn datum(&self, t: usize, f: &[f64]) -> StageDatum {
            StageDatum {
                c: vec![1.0],
                a: vec![vec![1.0]],
                b_mat: vec![vec![0.0; usize::from(t > 1)]],
                rhs: vec![f[0].abs()],
                feature: f.to_vec(),
            }
        }
    }

    #[test]
    fn deterministic_recursion() {
        let paths = simulate_markov_features(&scalar(0.5, 1.0, 0.0), 4, 2, 9).unwrap();
        for p in &paths {
            let f: Vec<f64> = p.iter().map(|v| v[0]).collect();
            assert_eq!(f, vec![0.0, 1.0, 1.5, 1.75]);
        }
        let flat = simulate_markov_features(&scalar(0.0, 3.0, 0.0), 3, 1, 1).unwrap();
        assert_eq!(flat[0][1..], [vec![3.0], vec![3.0]]);
    }

    #[test]
    fn unstable_process_rejected() {
        assert!(matches!(
            simulate_markov_features(&scalar(1.0, 0.0, 1.0), 3, 1, 0),
            Err(Error::UnstableProcess(_))
        ));
        let mut rot = scalar(0.0, 0.0, 0.0);
        rot.mu = vec![0.0, 0.0];
        rot.phi = vec![vec![0.0, -1.2], vec![1.2, 0.0]];
        rot.noise_cov = vec![vec![0.0; 2]; 2];
        rot.initial = vec![0.0; 2];
        rot.box_lower = vec![-1.0; 2];
        rot.box_upper = vec![1.0; 2];
        assert!(matches!(simulate_markov_features(&rot, 2, 1, 0), Err(Error::UnstableProcess(_))));
    }

    #[test]
    fn spectral_radius_values() {
        assert!((spectral_radius(&[vec![0.5]]) - 0.5).abs() < 1e-12);
        let r = spectral_radius(&[vec![0.0, -0.9], vec![0.9, 0.0]]);
        assert!((r - 0.9).abs() < 1e-9);
        assert_eq!(spectral_radius(&[vec![0.0, 1.0], vec![0.0, 0.0]]), 0.0);
    }

    #[test]
    fn clamping_to_box() {
        let mut s = scalar(0.0, 50.0, 0.0);
        s.box_upper = vec![2.0];
        let paths = simulate_markov_features(&s, 3, 1, 0).unwrap();
        assert_eq!(paths[0][2], vec![2.0]);
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let s = scalar(0.3, 0.1, 0.2);
        let a = generate_synthetic_markov(&s, &Echo(3), 5, 42).unwrap();
        let b = generate_synthetic_markov(&s, &Echo(3), 5, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_markov(&s, &Echo(3), 5, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let s = scalar(0.3, 0.1, 0.2);
        let set = generate_synthetic_markov(&s, &Echo(3), 2, 7).unwrap();
        let mut buf = Vec::new();
        save_trajectories(&set, &mut buf).unwrap();
        let back = load_trajectories(buf.as_slice(), Some(&set.schema)).unwrap();
        assert_eq!(back, set);
        assert_eq!(back.n_paths(), 2);
    }

    #[test]
    fn missing_column_names_stage_and_path() {
        let set = generate_synthetic_markov(&scalar(0.3, 0.1, 0.2), &Echo(3), 2, 7).unwrap();
        let mut buf = Vec::new();
        save_trajectories(&set, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let broken: Vec<String> = text
            .lines()
            .map(|l| {
                if l.starts_with("1,3,") {
                    l.rsplit_once(',').unwrap().0.to_string()
                } else {
                    l.to_string()
                }
            })
            .collect();
        let err = load_trajectories(broken.join("\n").as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::DataShape { stage: 3, path: 1, .. }), "{err}");
    }

    #[test]
    fn empty_and_garbage_inputs() {
        assert!(matches!(load_trajectories(&b""[..], None), Err(Error::Parse { .. })));
        let bad = format!("{MAGIC},version=1,T=1,N=1,p=0\n#stage,1,rows=1,cols=1,state=0\n0,1,1.0,x,1.0\n");
        let err = load_trajectories(bad.as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn degenerate_weights_always_pick_first() {
        for seed in 0..20 {
            let s = sample_forward(5, |_, _| ConditionalWeights::new(vec![1.0, 0.0, 0.0]), seed).unwrap();
            assert_eq!(s.indices, vec![0; 4]);
        }
    }

    #[test]
    fn uniform_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = ConditionalWeights::uniform(2);
        let hits = (0..10_000).filter(|_| sample_index(&w, &mut rng) == 0).count();
        assert!((hits as f64 / 10_000.0 - 0.5).abs() <= 0.02);
    }

    #[test]
    fn zero_weight_entries_never_drawn() {
        let w = ConditionalWeights::new(vec![0.0, 0.5, 0.0, 0.5, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let i = sample_index(&w, &mut rng);
            assert!(i == 1 || i == 3);
        }
    }

    #[test]
    fn forward_sampling_is_seeded() {
        let f = |_, prev: Option<usize>| {
            let mut w = vec![0.25; 4];
            if let Some(p) = prev {
                w[p] += 0.5;
                w.iter_mut().for_each(|x| *x /= 1.5);
            }
            ConditionalWeights::from_unnormalized(w)
        };
        assert_eq!(sample_forward(6, f, 3).unwrap(), sample_forward(6, f, 3).unwrap());
    }

    #[test]
    fn subset_reindexes_paths() {
        let set = generate_synthetic_markov(&scalar(0.3, 0.1, 0.2), &Echo(3), 4, 7).unwrap();
        let sub = set.subset(&[3, 1]).unwrap();
        assert_eq!(sub.n_paths(), 2);
        assert_eq!(sub.datum(2, 0), set.datum(2, 3));
        assert_eq!(sub.datum(3, 1), set.datum(3, 1));
    }
}
