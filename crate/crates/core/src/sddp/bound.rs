//! Out-of-sample generalization bound calculator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constants of the bound. Per-stage vectors have `T - 1` entries:
/// `sigma`, `lipschitz` and `delta` are indexed by stages `2..=T`,
/// `diameter` and `dims` by stages `1..=T-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub horizon: usize,
    pub sigma: Vec<f64>,
    pub lipschitz: Vec<f64>,
    pub diameter: Vec<f64>,
    pub dims: Vec<usize>,
    pub delta: Vec<f64>,
    /// Lower bound on the feature density.
    pub g_min: f64,
    /// Covering radius of the decision sets.
    pub eta: f64,
    pub n: usize,
    pub h: f64,
    pub p: usize,
}

impl BoundInputs {
    /// The same constants at every stage.
    #[allow(clippy::too_many_arguments)]
    pub fn uniform(
        horizon: usize,
        sigma: f64,
        lipschitz: f64,
        diameter: f64,
        dim: usize,
        g_min: f64,
        delta: f64,
        eta: f64,
        n: usize,
        h: f64,
        p: usize,
    ) -> Self {
        let k = horizon.saturating_sub(1);
        Self {
            horizon,
            sigma: vec![sigma; k],
            lipschitz: vec![lipschitz; k],
            diameter: vec![diameter; k],
            dims: vec![dim; k],
            delta: vec![delta; k],
            g_min,
            eta,
            n,
            h,
            p,
        }
    }

    fn validate(&self) -> Result<()> {
        let k = self.horizon.checked_sub(1).filter(|k| *k >= 1).ok_or_else(|| Error::Domain("need T >= 2".into()))?;
        for (name, len) in [
            ("sigma", self.sigma.len()),
            ("lipschitz", self.lipschitz.len()),
            ("diameter", self.diameter.len()),
            ("dims", self.dims.len()),
            ("delta", self.delta.len()),
        ] {
            if len != k {
                return Err(Error::Domain(format!("{name} has {len} entries, expected {k}")));
            }
        }
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
            }
        };
        pos("g_min", self.g_min)?;
        pos("eta", self.eta)?;
        pos("h", self.h)?;
        if self.n < 1 {
            return Err(Error::Domain("N must be positive".into()));
        }
        for &d in &self.diameter {
            pos("diameter", d)?;
        }
        for (&s, &l) in self.sigma.iter().zip(&self.lipschitz) {
            if !(s >= 0.0 && s.is_finite() && l >= 0.0 && l.is_finite()) {
                return Err(Error::Domain("sigma and lipschitz must be nonnegative".into()));
            }
        }
        if let Some(d) = self.delta.iter().find(|d| !(**d > 0.0 && **d < 1.0)) {
            return Err(Error::Domain(format!("delta must lie in (0, 1), got {d}")));
        }
        Ok(())
    }
}

/// `sum_{t=2}^{T} sqrt(sigma_t^2 log(N^{t-2} prod_{s<t} (D_s/eta)^{d_s} / delta_t)
/// / (N h^p g)) + 2 L_t eta`, with unit constants in place of the
/// asymptotic factors.
pub fn generalization_bound(c: &BoundInputs) -> Result<f64> {
    c.validate()?;
    let n = c.n as f64;
    let denom = n * c.h.powi(c.p as i32) * c.g_min;
    let mut total = 0.0;
    let mut covering = 0.0;
    for t in 2..=c.horizon {
        let k = t - 2;
        covering += c.dims[k] as f64 * (c.diameter[k] / c.eta).ln();
        let log_term = (t as f64 - 2.0) * n.ln() + covering - c.delta[k].ln();
        if log_term < 0.0 {
            return Err(Error::Domain(format!("log term at stage {t} is negative ({log_term})")));
        }
        total += (c.sigma[k].powi(2) * log_term / denom).sqrt() + 2.0 * c.lipschitz[k] * c.eta;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(n: usize, horizon: usize) -> BoundInputs {
        BoundInputs::uniform(horizon, 1.0, 1.0, 1.0, 1, 1.0, 0.1, 0.01, n, 0.4, 1)
    }

    #[test]
    fn spot_value() {
        // Two stage terms written out by hand.
        let denom = 100.0 * 0.4;
        let t2 = (((1.0f64 / 0.01).ln() - 0.1f64.ln()) / denom).sqrt() + 0.02;
        let t3 = ((100f64.ln() + 2.0 * (1.0f64 / 0.01).ln() - 0.1f64.ln()) / denom).sqrt() + 0.02;
        let got = generalization_bound(&base(100, 3)).unwrap();
        assert!((got - (t2 + t3)).abs() < 1e-12);
        assert!((got - 1.0903498452347289).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_and_slope_gives_zero() {
        let mut c = base(100, 4);
        c.sigma = vec![0.0; 3];
        c.lipschitz = vec![0.0; 3];
        assert_eq!(generalization_bound(&c).unwrap(), 0.0);
    }

    #[test]
    fn monotone_in_n_and_t() {
        for t in 2..8 {
            let mut prev = f64::INFINITY;
            for k in 0..10 {
                let v = generalization_bound(&base(10 << k, t)).unwrap();
                assert!(v < prev);
                prev = v;
            }
            assert!(generalization_bound(&base(50, t + 1)).unwrap() > generalization_bound(&base(50, t)).unwrap());
        }
    }

    #[test]
    fn domain_errors() {
        let mut c = base(100, 3);
        c.delta[0] = 1.0;
        assert!(matches!(generalization_bound(&c), Err(Error::Domain(_))));
        let mut c = base(100, 3);
        c.h = 0.0;
        assert!(matches!(generalization_bound(&c), Err(Error::Domain(_))));
        assert!(matches!(generalization_bound(&base(100, 1)), Err(Error::Domain(_))));
        let mut c = base(100, 3);
        c.sigma.pop();
        assert!(matches!(generalization_bound(&c), Err(Error::Domain(_))));
    }
}
