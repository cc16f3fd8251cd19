//! Train DD, RDD and a stagewise-independent baseline on synthetic
//! persistent returns, then compare them on held-out paths.
//!
//! cargo run --release --example portfolio_backtest -- [seeds] [iterations]

use ddsddp::dro::RhoRule;
use ddsddp::kernel::KernelConfig;
use ddsddp::scenario::{simulate_markov_features, trajectories_from_features};
use ddsddp::sddp::{cross_validate_rho, evaluate_policy_out_of_sample, run, Algorithm, ReportSpec, SolveConfig, TransitionModel};
use ddsddp::stage::{PiecewiseUtility, PortfolioInstance};

fn main() -> ddsddp::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let seeds: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let iterations: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(40);

    let inst = PortfolioInstance::new(3, 4, (0.001, 0.001), 1.001, PiecewiseUtility::default_exponential())?;
    let process = inst.return_process(&[1.01, 1.015, 1.02], 0.8, &[0.03, 0.05, 0.07])?;
    let wealth = |x: &[f64]| inst.terminal_wealth(x);
    let spec = ReportSpec {
        terminal_wealth: Some(&wealth),
        benchmark_wealth: inst.risk_free.powi(3),
    };
    let base = SolveConfig {
        max_iterations: iterations,
        epsilon: 1e-6,
        kernel: KernelConfig::auto(0.1),
        ..SolveConfig::default()
    };

    println!("seed  model  rho     mean_utility  variance      wealth  sharpe");
    for seed in 0..seeds {
        let paths = simulate_markov_features(&process, inst.horizon, 40, seed)?;
        let train = trajectories_from_features(&inst, &paths[..20])?;
        let test = trajectories_from_features(&inst, &paths[20..])?;

        let cv = cross_validate_rho(
            &train,
            &SolveConfig { algorithm: Algorithm::Rdd, ..base.clone() },
            &[0.0, 0.05, 0.1, 0.2, 0.4],
            2,
        )?;
        let models = [
            ("dd", SolveConfig { ..base.clone() }),
            (
                "rdd",
                SolveConfig {
                    algorithm: Algorithm::Rdd,
                    rho: RhoRule::Manual { rho: cv.best_rho },
                    ..base.clone()
                },
            ),
            (
                "indep",
                SolveConfig {
                    transition: TransitionModel::Independent,
                    ..base.clone()
                },
            ),
        ];
        for (name, cfg) in models {
            let out = run(&train, &cfg)?;
            let rep = evaluate_policy_out_of_sample(&out.policy, &test, &spec)?;
            let w = rep.wealth_stats.as_ref().expect("wealth requested");
            println!(
                "{seed:>4}  {name:<5}  {:<6.3}  {:>12.6}  {:>10.3e}  {:>6.4}  {:>6.3}",
                out.policy.rho(),
                rep.utility,
                rep.variance,
                w.mean,
                w.sharpe
            );
        }
    }
    Ok(())
}
