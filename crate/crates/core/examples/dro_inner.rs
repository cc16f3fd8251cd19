//! The worst-case expectation over the ambiguity set: primal maximizer,
//! dual multipliers, and the variance-regularization sandwich.
//!
//! cargo run --example dro_inner

use ddsddp::dro::{ambiguity_violation, check_vr_sandwich, dualize_inner, inner_max_primal, AmbiguityParams};
use ddsddp::kernel::ConditionalWeights;

fn main() -> ddsddp::Result<()> {
    let nominal = ConditionalWeights::new(vec![0.1, 0.2, 0.3, 0.4])?;
    let z = [4.0, 1.0, 3.0, 0.5];

    println!("rho    nominal   robust    dual      violation");
    for rho in [0.0, 0.05, 0.2, 0.5, 2.0] {
        let params = AmbiguityParams::new(rho, nominal.clone())?;
        let (primal, w) = inner_max_primal(&z, &params)?;
        let (dual, _) = dualize_inner(&z, &params)?;
        println!(
            "{rho:<5}  {:<8.5}  {primal:<8.5}  {dual:<8.5}  {:.1e}",
            nominal.expect(&z),
            ambiguity_violation(w.as_slice(), &params)
        );
    }

    let params = AmbiguityParams::new(0.5, nominal.clone())?;
    let (_, vars) = dualize_inner(&z, &params)?;
    println!("\ndual at rho = 0.5: gamma {:.4}, beta {:.4}, psi {:.4?}", vars.gamma, vars.beta, vars.psi);

    let r = check_vr_sandwich(&z, &nominal, 0.1, 4.0)?;
    println!(
        "mean + rho sd = {:.5} <= robust + rho^2 u = {:.5}: {}",
        r.lhs, r.rhs, r.holds
    );
    Ok(())
}
