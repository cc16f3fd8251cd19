//! Evaluate the out-of-sample generalization bound as the sample size,
//! bandwidth and horizon vary.
//!
//! cargo run --example generalization_bound

use ddsddp::sddp::{generalization_bound, BoundInputs};

fn main() -> ddsddp::Result<()> {
    let at = |n: usize, h: f64, horizon: usize| {
        generalization_bound(&BoundInputs::uniform(horizon, 1.0, 1.0, 1.0, 1, 1.0, 0.1, 0.01, n, h, 1))
    };

    println!("reference (N=100, h=0.4, T=3): {:.16}", at(100, 0.4, 3)?);

    println!("\nN        bound (h = N^-1/5, T = 3)");
    for n in [100, 1_000, 10_000, 100_000, 1_000_000] {
        let h = (n as f64).powf(-0.2);
        println!("{n:<8} {:.5}", at(n, h, 3)?);
    }

    println!("\nT   bound (N = 1000, h = 0.4)");
    for horizon in 2..=6 {
        println!("{horizon:<3} {:.5}", at(1000, 0.4, horizon)?);
    }
    Ok(())
}
