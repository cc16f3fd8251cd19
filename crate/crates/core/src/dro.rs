//! Distributionally robust expectation over a polyhedral ambiguity set.
//!
//! Around nominal weights `w_hat` the set is
//!
//! ```text
//! { w >= 0 : e'w = 1,  sum_i |w_i - w_hat_i| / sqrt(w_hat_i) <= sqrt(N) rho,
//!                      max_i |w_i - w_hat_i| / sqrt(w_hat_i) <= rho }
//! ```
//!
//! [`inner_max_primal`] solves the worst-case expectation directly and
//! [`dualize_inner`] solves its LP dual; [`splice_dro`] embeds the dual into
//! a stage LP so the worst case is taken jointly with the stage decision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::ConditionalWeights;
use crate::lp::{solve, LpBuilder, LpStatus};

/// Smallest nominal weight kept after flooring.
pub const WEIGHT_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityParams {
    pub rho: f64,
    pub nominal: ConditionalWeights,
}

impl AmbiguityParams {
    /// Rejects negative radii; zero nominal entries are rejected when the
    /// set is used.
    pub fn new(rho: f64, nominal: ConditionalWeights) -> Result<Self> {
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(Error::InvalidParameter(format!("radius must be >= 0, got {rho}")));
        }
        Ok(Self { rho, nominal })
    }

    /// Floors nominal entries at [`WEIGHT_FLOOR`] and renormalizes, so
    /// weights that underflowed in the kernel stay usable.
    pub fn floored(rho: f64, nominal: &ConditionalWeights) -> Result<Self> {
        let w: Vec<f64> = nominal.as_slice().iter().map(|w| w.max(WEIGHT_FLOOR)).collect();
        Self::new(rho, ConditionalWeights::from_unnormalized(w)?)
    }

    pub fn n(&self) -> usize {
        self.nominal.len()
    }

    fn sqrt_nominal(&self) -> Result<Vec<f64>> {
        self.nominal
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, &w)| if w > 0.0 { Ok(w.sqrt()) } else { Err(Error::DegenerateWeight(i)) })
            .collect()
    }
}

/// How the radius is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RhoRule {
    Manual { rho: f64 },
    /// `rho = c / sqrt(N h^p)`
    RateScaled { c: f64 },
}

impl RhoRule {
    pub fn resolve(&self, n: usize, h: f64, p: usize) -> f64 {
        match *self {
            RhoRule::Manual { rho } => rho,
            RhoRule::RateScaled { c } => c / (n as f64 * h.powi(p as i32)).sqrt(),
        }
    }
}

/// Dual multipliers of the worst-case expectation problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroDualVars {
    pub gamma: f64,
    pub beta: f64,
    pub mu: Vec<f64>,
    pub zeta: Vec<f64>,
    pub psi: Vec<f64>,
}

fn check_values(z: &[f64], params: &AmbiguityParams) -> Result<()> {
    if z.len() != params.n() {
        return Err(Error::Dimension(format!("{} values for {} weights", z.len(), params.n())));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite value".into()));
    }
    Ok(())
}

/// `max w'z` over the ambiguity set; returns the value and a maximizer.
pub fn inner_max_primal(z: &[f64], params: &AmbiguityParams) -> Result<(f64, ConditionalWeights)> {
    check_values(z, params)?;
    let sw = params.sqrt_nominal()?;
    let nominal = params.nominal.as_slice();
    if params.rho == 0.0 {
        return Ok((params.nominal.expect(z), params.nominal.clone()));
    }
    let n = z.len();
    let rho = params.rho;
    // w = w_hat + sqrt(w_hat) (p - q), p, q >= 0.
    let mut b = LpBuilder::new();
    let p0 = b.add_nonneg_block(n);
    let q0 = b.add_nonneg_block(n);
    for i in 0..n {
        b.set_cost(p0 + i, -z[i] * sw[i]);
        b.set_cost(q0 + i, z[i] * sw[i]);
    }
    b.add_offset(-params.nominal.expect(z));
    b.add_le_row((0..n).flat_map(|i| [(p0 + i, 1.0), (q0 + i, 1.0)]).collect(), (n as f64).sqrt() * rho);
    for i in 0..n {
        b.add_le_row(vec![(p0 + i, 1.0), (q0 + i, 1.0)], rho);
        b.add_le_row(vec![(q0 + i, 1.0), (p0 + i, -1.0)], sw[i]);
    }
    b.add_eq_row((0..n).flat_map(|i| [(p0 + i, sw[i]), (q0 + i, -sw[i])]).collect(), 0.0);
    let sol = solve(&b.build())?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::InvalidParameter(format!("worst-case LP status {:?}", sol.status)));
    }
    let mut w: Vec<f64> = (0..n)
        .map(|i| (nominal[i] + sw[i] * (sol.primal[p0 + i] - sol.primal[q0 + i])).max(0.0))
        .collect();
    // Remove roundoff so the result is an exact probability vector.
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    let weights = ConditionalWeights::from_unnormalized(w)?;
    Ok((-sol.objective_value, weights))
}

/// Solves the LP dual of [`inner_max_primal`].
pub fn dualize_inner(z: &[f64], params: &AmbiguityParams) -> Result<(f64, DroDualVars)> {
    check_values(z, params)?;
    let mut b = LpBuilder::new();
    let ells: Vec<usize> = z.iter().map(|&v| b.add_var(0.0, v, v)).collect();
    let sp = splice_dro(&mut b, &ells, params, 1.0)?;
    let sol = solve(&b.build())?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::InvalidParameter(format!("dual LP status {:?}", sol.status)));
    }
    let vars = sp.dual_vars(&sol.primal, params);
    Ok((sol.objective_value, vars))
}

/// Columns added by [`splice_dro`]. `mu` and `zeta` are stored scaled by
/// `1/sqrt(w_hat)`; [`DroSplice::dual_vars`] undoes the scaling.
#[derive(Debug, Clone)]
pub struct DroSplice {
    pub gamma: usize,
    pub beta: usize,
    pub mu: usize,
    pub zeta: usize,
    pub psi: usize,
    pub n: usize,
}

impl DroSplice {
    pub fn dual_vars(&self, primal: &[f64], params: &AmbiguityParams) -> DroDualVars {
        let sw: Vec<f64> = params.nominal.as_slice().iter().map(|w| w.sqrt()).collect();
        DroDualVars {
            gamma: primal[self.gamma],
            beta: primal[self.beta],
            mu: (0..self.n).map(|i| sw[i] * primal[self.mu + i]).collect(),
            zeta: (0..self.n).map(|i| sw[i] * primal[self.zeta + i]).collect(),
            psi: (0..self.n).map(|i| primal[self.psi + i]).collect(),
        }
    }
}

/// Replaces `sum_i w_hat_i l_i` by its worst case over the ambiguity set,
/// with objective weight `cost`. `values[i]` is the column holding `l_i`;
/// the caller must leave those columns without objective cost.
///
/// Added rows: `l_i <= gamma + mu'_i - zeta'_i` and
/// `sqrt(w_hat_i) (mu'_i + zeta'_i) = psi_i + beta / sqrt(N)`; objective
/// `gamma + rho (beta + sum psi) + sum w_hat_i (mu'_i - zeta'_i)`.
pub fn splice_dro(b: &mut LpBuilder, values: &[usize], params: &AmbiguityParams, cost: f64) -> Result<DroSplice> {
    let n = params.n();
    if values.len() != n {
        return Err(Error::Dimension(format!("{} value columns for {n} weights", values.len())));
    }
    let sw = params.sqrt_nominal()?;
    let nominal = params.nominal.as_slice();
    let gamma = b.add_free(cost);
    let beta = b.add_nonneg(cost * params.rho);
    let mu = b.add_nonneg_block(n);
    let zeta = b.add_nonneg_block(n);
    let psi = b.add_nonneg_block(n);
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    for i in 0..n {
        b.set_cost(mu + i, cost * nominal[i]);
        b.set_cost(zeta + i, -cost * nominal[i]);
        b.set_cost(psi + i, cost * params.rho);
        b.add_le_row(
            vec![(values[i], 1.0), (gamma, -1.0), (mu + i, -1.0), (zeta + i, 1.0)],
            0.0,
        );
        b.add_eq_row(
            vec![(mu + i, sw[i]), (zeta + i, sw[i]), (psi + i, -1.0), (beta, -inv_sqrt_n)],
            0.0,
        );
    }
    Ok(DroSplice {
        gamma,
        beta,
        mu,
        zeta,
        psi,
        n,
    })
}

/// `sum w z^2 - (sum w z)^2`, clamped at zero.
pub fn empirical_conditional_variance(z: &[f64], weights: &ConditionalWeights) -> Result<f64> {
    if z.len() != weights.len() {
        return Err(Error::Dimension(format!("{} values for {} weights", z.len(), weights.len())));
    }
    let mean = weights.expect(z);
    let second: f64 = weights.as_slice().iter().zip(z).map(|(w, v)| w * v * v).sum();
    Ok((second - mean * mean).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VrReport {
    pub mean: f64,
    pub variance: f64,
    pub dro_value: f64,
    /// `mean + rho sqrt(variance)`
    pub lhs: f64,
    /// `dro_value + rho^2 u_bar`
    pub rhs: f64,
    pub holds: bool,
}

/// Compares the variance-regularized mean with the robust value plus
/// `rho^2 u_bar`. Requires `0 <= z_i <= u_bar`.
pub fn check_vr_sandwich(z: &[f64], weights: &ConditionalWeights, rho: f64, u_bar: f64) -> Result<VrReport> {
    if z.iter().any(|&v| v < 0.0 || v > u_bar) {
        return Err(Error::InvalidParameter("values must lie in [0, u_bar]".into()));
    }
    let params = AmbiguityParams::new(rho, weights.clone())?;
    let mean = weights.expect(z);
    let variance = empirical_conditional_variance(z, weights)?;
    let (dro_value, _) = inner_max_primal(z, &params)?;
    let lhs = mean + rho * variance.sqrt();
    let rhs = dro_value + rho * rho * u_bar;
    let holds = lhs <= rhs + 1e-12 * (1.0 + rhs.abs());
    Ok(VrReport {
        mean,
        variance,
        dro_value,
        lhs,
        rhs,
        holds,
    })
}

/// Largest violation of the ambiguity-set constraints by `w`.
pub fn ambiguity_violation(w: &[f64], params: &AmbiguityParams) -> f64 {
    let nominal = params.nominal.as_slice();
    let n = nominal.len() as f64;
    let dev: Vec<f64> = w.iter().zip(nominal).map(|(a, b)| (a - b).abs() / b.sqrt()).collect();
    let l1 = dev.iter().sum::<f64>() - n.sqrt() * params.rho;
    let linf = dev.iter().fold(f64::NEG_INFINITY, |m, d| m.max(*d)) - params.rho;
    let mass = (w.iter().sum::<f64>() - 1.0).abs();
    let neg = w.iter().fold(0.0f64, |m, v| m.max(-v));
    l1.max(linf).max(mass).max(neg).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(rho: f64, w: &[f64]) -> AmbiguityParams {
        AmbiguityParams::new(rho, ConditionalWeights::new(w.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn zero_radius_is_nominal() {
        let p = params(0.0, &[0.2, 0.3, 0.5]);
        let (v, w) = inner_max_primal(&[1.0, 2.0, 4.0], &p).unwrap();
        assert!((v - 2.8).abs() < 1e-15);
        assert_eq!(w, p.nominal);
        let (dv, _) = dualize_inner(&[1.0, 2.0, 4.0], &p).unwrap();
        assert!((dv - 2.8).abs() < 1e-12);
    }

    #[test]
    fn constant_values() {
        let p = params(0.7, &[0.25, 0.25, 0.5]);
        let (v, _) = inner_max_primal(&[3.0; 3], &p).unwrap();
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn two_point_example() {
        let p = params(0.2, &[0.5, 0.5]);
        let (v, w) = inner_max_primal(&[0.0, 1.0], &p).unwrap();
        assert!((v - 0.6).abs() < 1e-12, "{v}");
        assert!((w[0] - 0.4).abs() < 1e-12 && (w[1] - 0.6).abs() < 1e-12);
        let (dv, vars) = dualize_inner(&[0.0, 1.0], &p).unwrap();
        assert!((dv - 0.6).abs() < 1e-12);
        for i in 0..2 {
            let lhs = vars.mu[i] + vars.zeta[i];
            let rhs = vars.psi[i] + vars.beta / 2f64.sqrt();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_values_have_zero_dual() {
        let p = params(0.3, &[0.5, 0.5]);
        let (dv, _) = dualize_inner(&[0.0, 0.0], &p).unwrap();
        assert!(dv.abs() < 1e-12);
    }

    #[test]
    fn single_scenario_ignores_radius() {
        let p = params(5.0, &[1.0]);
        assert!((inner_max_primal(&[4.0], &p).unwrap().0 - 4.0).abs() < 1e-12);
        assert!((dualize_inner(&[4.0], &p).unwrap().0 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn large_radius_is_capped_by_max() {
        let p = params(100.0, &[0.2, 0.3, 0.5]);
        let z = [1.0, 5.0, 2.0];
        let (v, w) = inner_max_primal(&z, &p).unwrap();
        assert!(v <= 5.0 + 1e-12);
        assert!((v - 5.0).abs() < 1e-9, "reachable point mass on the max: {v}");
        assert!(ambiguity_violation(w.as_slice(), &p) <= 1e-9);
    }

    #[test]
    fn zero_nominal_weight_is_rejected() {
        let p = params(0.1, &[1.0, 0.0]);
        assert!(matches!(inner_max_primal(&[1.0, 2.0], &p), Err(Error::DegenerateWeight(1))));
        let f = AmbiguityParams::floored(0.1, &p.nominal).unwrap();
        assert!(inner_max_primal(&[1.0, 2.0], &f).is_ok());
    }

    #[test]
    fn variance_examples() {
        let u = ConditionalWeights::uniform(2);
        assert_eq!(empirical_conditional_variance(&[3.0, 3.0], &u).unwrap(), 0.0);
        assert_eq!(empirical_conditional_variance(&[0.0, 1.0], &u).unwrap(), 0.25);
        let d = ConditionalWeights::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(empirical_conditional_variance(&[3.0, 100.0], &d).unwrap(), 0.0);
    }

    #[test]
    fn sandwich_trivial_cases() {
        let w = ConditionalWeights::new(vec![0.3, 0.7]).unwrap();
        let r = check_vr_sandwich(&[1.0, 2.0], &w, 0.0, 2.0).unwrap();
        assert!(r.holds && (r.lhs - r.rhs).abs() < 1e-15);
        let r = check_vr_sandwich(&[2.0, 2.0], &w, 0.4, 2.0).unwrap();
        assert!(r.holds && r.variance == 0.0);
        assert!(check_vr_sandwich(&[-1.0, 2.0], &w, 0.4, 2.0).is_err());
    }

    #[test]
    fn rate_scaled_radius() {
        let r = RhoRule::RateScaled { c: 2.0 }.resolve(16, 0.25, 2);
        assert!((r - 2.0).abs() < 1e-15);
    }

    fn problem() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
        (1usize..=8).prop_flat_map(|n| {
            (
                prop::collection::vec(0.05..1.0f64, n),
                prop::collection::vec(-10.0..10.0f64, n),
                0.0..1.0f64,
            )
        })
    }

    proptest! {
        #[test]
        fn primal_dual_agree((raw, z, rho) in problem()) {
            let nominal = ConditionalWeights::from_unnormalized(raw).unwrap();
            let p = AmbiguityParams::new(rho, nominal).unwrap();
            let (v, w) = inner_max_primal(&z, &p).unwrap();
            let (dv, _) = dualize_inner(&z, &p).unwrap();
            prop_assert!((v - dv).abs() <= 1e-8 * (1.0 + v.abs()));
            prop_assert!(ambiguity_violation(w.as_slice(), &p) <= 1e-9);
            prop_assert!((w.expect(&z) - v).abs() <= 1e-9 * (1.0 + v.abs()));
        }

        #[test]
        fn monotone_in_radius((raw, z, rho) in problem(), extra in 0.0..0.5f64) {
            let nominal = ConditionalWeights::from_unnormalized(raw).unwrap();
            let a = inner_max_primal(&z, &AmbiguityParams::new(rho, nominal.clone()).unwrap()).unwrap().0;
            let b = inner_max_primal(&z, &AmbiguityParams::new(rho + extra, nominal).unwrap()).unwrap().0;
            prop_assert!(b >= a - 1e-12);
        }
    }
}
