//! Simulate a clamped VAR(1) feature process, map it into inventory stage
//! data, write the trajectory CSV and read it back.
//!
//! cargo run --example synthetic_paths -- [paths] [seed]

use ddsddp::scenario::{load_trajectories, save_trajectories, simulate_markov_features};
use ddsddp::toy::InventoryToy;

fn main() -> ddsddp::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);

    let toy = InventoryToy::new(2, 3);
    let process = toy.demand_process(0.7, 0.5);
    let paths = simulate_markov_features(&process, toy.horizon, n, seed)?;
    for (i, p) in paths.iter().enumerate() {
        println!("path {i}: {p:.3?}");
    }

    let set = toy.sample(n, 0.7, 0.5, seed)?;
    let mut buf = Vec::new();
    save_trajectories(&set, &mut buf)?;
    let text = String::from_utf8(buf).expect("csv output is utf-8");
    println!("\n{}", text.lines().take(6).collect::<Vec<_>>().join("\n"));

    let back = load_trajectories(text.as_bytes(), Some(&set.schema))?;
    println!("\nreloaded {} paths over {} stages", back.n_paths(), back.horizon());
    Ok(())
}
