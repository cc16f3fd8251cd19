//! Solve a small inventory problem with DD-SDDP and compare the bounds
//! with the extensive-form LP on the same scenario tree.
//!
//! cargo run --example toy_sddp

use ddsddp::kernel::KernelConfig;
use ddsddp::sddp::{extensive_form_oracle, run, GapMode, SolveConfig};
use ddsddp::toy::InventoryToy;

fn main() -> ddsddp::Result<()> {
    let toy = InventoryToy::new(2, 4);
    let traj = toy.sample(3, 0.6, 1.0, 42)?;
    let cfg = SolveConfig {
        epsilon: 1e-7,
        gap_mode: GapMode::Absolute,
        max_iterations: 200,
        kernel: KernelConfig::manual(1.0),
        ..SolveConfig::default()
    };

    let out = run(&traj, &cfg)?;
    println!("iter  lower          upper          gap");
    for r in &out.records {
        println!("{:<4}  {:<13.6}  {:<13.6}  {:.2e}", r.k, r.lb, r.ub, r.gap);
    }
    println!("converged: {}", out.converged);
    println!("first-stage decision: {:.4?}", out.first_stage);
    println!("extensive form:       {:.6}", extensive_form_oracle(&traj, &cfg)?);
    Ok(())
}
