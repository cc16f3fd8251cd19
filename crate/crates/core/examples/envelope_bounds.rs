//! Drive the solver one iteration at a time and watch the cut lower bound
//! and the penalized envelope upper bound close in on the stage-2
//! cost-to-go.
//!
//! cargo run --example envelope_bounds

use ddsddp::cuts::Node;
use ddsddp::kernel::KernelConfig;
use ddsddp::sddp::{SolveConfig, Solver};
use ddsddp::toy::InventoryToy;

fn main() -> ddsddp::Result<()> {
    let toy = InventoryToy::new(1, 3);
    let traj = toy.sample(3, 0.6, 1.0, 5)?;
    let cfg = SolveConfig {
        kernel: KernelConfig::manual(1.0),
        ..SolveConfig::default()
    };
    let mut solver = Solver::new(&traj, &cfg)?;
    let grid = [0.0, 1.0, 2.0, 3.0, 4.0];

    for _ in 0..6 {
        let r = solver.iterate()?.clone();
        println!(
            "iteration {}: lb {:.4} ub {:.4}, {} cuts, {} envelope points, penalty {:.2}",
            r.k,
            r.lb,
            r.ub,
            solver.cut_pool().len(),
            solver.envelopes().len(),
            solver.envelopes().penalty(2)
        );
        for &x in &grid {
            let (lo, hi) = solver.cost_to_go_bounds(2, Node::Root, &[x])?;
            println!("  x = {x:.1}  [{lo:>9.4}, {hi:>9.4}]");
        }
        if solver.converged() {
            break;
        }
    }
    Ok(())
}
