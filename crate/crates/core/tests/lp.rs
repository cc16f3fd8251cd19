use ddsddp::lp::{solve, LinearProgram, LpStatus};

fn load_fixture(name: &str) -> LinearProgram {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let vec = |k: &str| -> Vec<f64> { v[k].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect() };
    let a = v["A"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect())
        .collect();
    let mut lp = LinearProgram::new(vec("c"), a, vec("b"));
    lp.var_lower = vec("lo").into_iter().map(|x| if x <= -1e300 { f64::NEG_INFINITY } else { x }).collect();
    lp.var_upper = vec("hi").into_iter().map(|x| if x >= 1e300 { f64::INFINITY } else { x }).collect();
    lp.free_mask = v["free"].as_array().unwrap().iter().map(|x| x.as_bool().unwrap()).collect();
    lp
}

/// A degenerate portfolio stage LP on which tiny ratio-test pivots used to
/// corrupt the basis inverse and report a false ray. Reference value from
/// an independent interior-point/dual-simplex solver.
#[test]
fn degenerate_stage_lp_is_optimal() {
    let lp = load_fixture("degenerate_stage_lp.json");
    let sol = solve(&lp).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective_value - -0.6307009486223224).abs() < 1e-9, "{}", sol.objective_value);
    assert!(lp.residual(&sol.primal) < 1e-9);
}
