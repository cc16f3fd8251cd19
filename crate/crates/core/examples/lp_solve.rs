//! Build a small LP with the row builder, solve it, and cross-check the
//! optimum against brute-force vertex enumeration.
//!
//! cargo run --example lp_solve

use ddsddp::lp::{enumerate_vertices, solve, LpBuilder};

fn main() -> ddsddp::Result<()> {
    // min -3x - 2y  s.t.  x + y <= 4,  x + 3y <= 6,  x <= 3
    let mut b = LpBuilder::new();
    let x = b.add_nonneg(-3.0);
    let y = b.add_nonneg(-2.0);
    b.add_le_row(vec![(x, 1.0), (y, 1.0)], 4.0);
    b.add_le_row(vec![(x, 1.0), (y, 3.0)], 6.0);
    b.set_bounds(x, 0.0, 3.0);
    let lp = b.build();

    let sol = solve(&lp)?;
    println!("status    {:?}", sol.status);
    println!("objective {}", sol.objective_value);
    println!("x = {}, y = {}", sol.primal[x], sol.primal[y]);
    println!("row duals {:?}", sol.duals);
    println!("pivots    {}", sol.iterations);

    let vertices = enumerate_vertices(&lp)?;
    let best = vertices.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
    println!("{} vertices, best {}", vertices.len(), best);
    Ok(())
}
