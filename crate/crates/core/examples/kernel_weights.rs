//! Conditional weights from the Nadaraya-Watson kernel at several
//! bandwidths, plus the automatic bandwidth rule.
//!
//! cargo run --example kernel_weights

use ddsddp::kernel::{auto_bandwidth, nw_weights, KernelConfig};

fn main() -> ddsddp::Result<()> {
    let anchors: Vec<Vec<f64>> = [0.0, 0.5, 1.0, 2.0, 4.0].iter().map(|&a| vec![a]).collect();
    let query = [0.8];

    for h in [0.1, 0.5, 2.0, 100.0] {
        let w = nw_weights(&query, &anchors, &KernelConfig::manual(h))?;
        let row: Vec<String> = w.as_slice().iter().map(|v| format!("{v:.4}")).collect();
        println!("h = {h:<6} [{}]", row.join(", "));
    }

    for n in [10, 100, 1000] {
        println!("auto bandwidth n={n:<5} p=2: {:.4}", auto_bandwidth(n, 2, 1.0));
    }
    Ok(())
}
