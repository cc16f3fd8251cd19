//! Sweep the ambiguity radius for RDD-SDDP in single- and multi-cut mode.
//! The robust value grows with the radius and matches the extensive form.
//!
//! cargo run --example robust_sddp

use ddsddp::dro::RhoRule;
use ddsddp::kernel::KernelConfig;
use ddsddp::sddp::{extensive_form_oracle, run, Algorithm, CutMode, GapMode, SolveConfig};
use ddsddp::toy::InventoryToy;

fn main() -> ddsddp::Result<()> {
    let toy = InventoryToy::new(1, 3);
    let traj = toy.sample(4, 0.6, 1.0, 9)?;

    println!("rho    mode    lower        upper        iters  oracle");
    for rho in [0.0, 0.1, 0.3, 1.0, 3.0] {
        for mode in [CutMode::Single, CutMode::Multi] {
            let cfg = SolveConfig {
                algorithm: Algorithm::Rdd,
                rho: RhoRule::Manual { rho },
                cut_mode: mode,
                epsilon: 1e-7,
                gap_mode: GapMode::Absolute,
                max_iterations: 300,
                kernel: KernelConfig::manual(1.0),
                ..SolveConfig::default()
            };
            let out = run(&traj, &cfg)?;
            let last = out.records.last().expect("at least one iteration");
            let oracle = extensive_form_oracle(&traj, &cfg)?;
            println!(
                "{rho:<5}  {:<6}  {:<11.6}  {:<11.6}  {:<5}  {oracle:.6}",
                format!("{mode:?}"),
                last.lb,
                last.ub,
                out.records.len()
            );
        }
    }
    Ok(())
}
