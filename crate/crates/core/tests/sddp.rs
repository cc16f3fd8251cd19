use ddsddp::kernel::KernelConfig;
use ddsddp::dro::RhoRule;
use ddsddp::sddp::{
    evaluate_policy_out_of_sample, extensive_form_oracle, run, Algorithm, CutMode, GapMode, ReportSpec, SolveConfig,
};
use ddsddp::toy::InventoryToy;

fn cfg(alg: Algorithm, rho: f64, seed: u64) -> SolveConfig {
    SolveConfig {
        algorithm: alg,
        epsilon: 1e-7,
        gap_mode: GapMode::Absolute,
        max_iterations: 500,
        seed,
        kernel: KernelConfig::manual(1.0),
        rho: RhoRule::Manual { rho },
        ..SolveConfig::default()
    }
}

fn assert_monotone(records: &[ddsddp::sddp::IterationRecord]) {
    for w in records.windows(2) {
        assert!(w[1].lb >= w[0].lb);
        assert!(w[1].ub <= w[0].ub);
    }
    for r in records {
        assert!(r.lb <= r.ub + 1e-7, "lb {} ub {}", r.lb, r.ub);
    }
}

#[test]
fn toy_matches_oracle() {
    for seed in 0..5 {
        let toy = InventoryToy::new(1, 3);
        let traj = toy.sample(2, 0.6, 1.0, seed).unwrap();
        let c = cfg(Algorithm::Dd, 0.0, seed);
        let oracle = extensive_form_oracle(&traj, &c).unwrap();
        let out = run(&traj, &c).unwrap();
        let last = out.records.last().unwrap();
        assert!(out.converged, "seed {seed}: gap {}", last.gap);
        assert!((last.lb - oracle).abs() < 1e-6, "seed {seed}: lb {} oracle {oracle}", last.lb);
        assert!((last.ub - oracle).abs() < 1e-6);
        assert_monotone(&out.records);
    }
}

#[test]
fn robust_and_multi_cut_match_oracle() {
    for seed in 0..6 {
        let toy = InventoryToy::new(2, 3);
        let traj = toy.sample(2, 0.6, 1.0, 100 + seed).unwrap();
        for (alg, rho) in [(Algorithm::Dd, 0.0), (Algorithm::Rdd, 0.3), (Algorithm::Rdd, 2.0)] {
            for mode in [CutMode::Single, CutMode::Multi] {
                let c = SolveConfig {
                    cut_mode: mode,
                    ..cfg(alg, rho, seed)
                };
                let oracle = extensive_form_oracle(&traj, &c).unwrap();
                let out = run(&traj, &c).unwrap();
                let last = out.records.last().unwrap();
                assert!(out.converged, "seed {seed} {alg:?} {mode:?}: gap {}", last.gap);
                assert!((last.lb - oracle).abs() < 1e-6, "seed {seed} {alg:?} {mode:?}: lb {} oracle {oracle}", last.lb);
                assert!((last.ub - oracle).abs() < 1e-6);
                assert_monotone(&out.records);
                for r in &out.records {
                    assert!(r.lb <= oracle + 1e-7 && r.ub >= oracle - 1e-7);
                }
            }
        }
    }
}

#[test]
fn zero_radius_collapses_to_nominal() {
    let toy = InventoryToy::new(1, 4);
    let traj = toy.sample(3, 0.6, 1.0, 7).unwrap();
    let mut c = cfg(Algorithm::Dd, 0.0, 11);
    c.max_iterations = 15;
    let dd = run(&traj, &c).unwrap();
    c.algorithm = Algorithm::Rdd;
    let rdd = run(&traj, &c).unwrap();
    assert_eq!(dd.records.len(), rdd.records.len());
    for (a, b) in dd.records.iter().zip(&rdd.records) {
        assert!((a.lb - b.lb).abs() <= 1e-8 && (a.ub - b.ub).abs() <= 1e-8, "{a:?} {b:?}");
    }
}

#[test]
fn two_stage_converges_quickly() {
    let toy = InventoryToy::new(2, 2);
    let traj = toy.sample(5, 0.5, 1.0, 3).unwrap();
    let c = cfg(Algorithm::Dd, 0.0, 0);
    let out = run(&traj, &c).unwrap();
    assert!(out.records.len() <= 6, "{} iterations", out.records.len());
    assert!(out.records.last().unwrap().gap <= 1e-8);
}

#[test]
fn in_sample_evaluation_two_stage() {
    let toy = InventoryToy::new(1, 2);
    let traj = toy.sample(6, 0.5, 1.0, 5).unwrap();
    let out = run(&traj, &cfg(Algorithm::Dd, 0.0, 0)).unwrap();
    let rep = evaluate_policy_out_of_sample(&out.policy, &traj, &ReportSpec::default()).unwrap();
    assert!(rep.failures.is_empty());
    assert!((rep.mean - out.records.last().unwrap().lb).abs() < 1e-6, "{} vs {}", rep.mean, out.records.last().unwrap().lb);
    let again = evaluate_policy_out_of_sample(&out.policy, &traj, &ReportSpec::default()).unwrap();
    assert_eq!(rep, again);
}

#[test]
fn identical_paths_give_identical_costs() {
    let toy = InventoryToy::new(1, 3);
    let traj = toy.sample(4, 0.5, 0.0, 5).unwrap();
    let c = cfg(Algorithm::Dd, 0.0, 0);
    let out = run(&traj, &c).unwrap();
    let oracle = extensive_form_oracle(&traj, &c).unwrap();
    assert!((out.records.last().unwrap().lb - oracle).abs() < 1e-6);
    let rep = evaluate_policy_out_of_sample(&out.policy, &traj, &ReportSpec::default()).unwrap();
    assert!(rep.costs.iter().all(|v| *v == rep.costs[0]));
    assert!((rep.costs[0] - oracle).abs() < 1e-6);
}

#[test]
fn robust_value_dominates_nominal() {
    for seed in 0..4 {
        let toy = InventoryToy::new(1, 3);
        let traj = toy.sample(3, 0.6, 1.0, 300 + seed).unwrap();
        let nominal = extensive_form_oracle(&traj, &cfg(Algorithm::Dd, 0.0, seed)).unwrap();
        let mut prev = nominal;
        for rho in [0.1, 0.5, 2.0] {
            let robust = extensive_form_oracle(&traj, &cfg(Algorithm::Rdd, rho, seed)).unwrap();
            assert!(robust >= prev - 1e-8, "seed {seed} rho {rho}: {robust} < {prev}");
            prev = robust;
        }
        let out = run(&traj, &cfg(Algorithm::Rdd, 0.5, seed)).unwrap();
        assert!(out.records.last().unwrap().lb >= nominal - 1e-7);
    }
}
