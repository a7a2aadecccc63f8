//! Acceptance criteria. Each test prints one `[PASS]`/`[FAIL]` line and then
//! asserts; run with `cargo test --test acceptance -- --nocapture` to see them.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{
    brute_force_block_system, exhaustive_best_support, lag_coupled_dataset, normal_equations,
};
use speedcast::forecast::{rolling_evaluate, ForecastConfig, LagOrders, Method};
use speedcast::{
    build_block_problem, compute_errors, solve_block_sparse, solve_least_squares, BlockLayout,
    Normalizer, RegressionProblem, SolverConfig,
};

fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id}: {name} ({detail})");
    assert!(pass, "criterion {id} failed: {detail}");
}

fn within(elapsed: Duration, limit_secs: f64) -> bool {
    elapsed.as_secs_f64() < limit_secs
}

#[test]
fn criterion_1_builder_matches_brute_force() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    for _ in 0..100 {
        let p = rng.random_range(1..=4);
        let orders: Vec<usize> = (0..p).map(|_| rng.random_range(1..=4)).collect();
        let n_max = orders.iter().max().unwrap() + rng.random_range(0..=2);
        let rows = rng.random_range(1..=6);
        let len = n_max + rows + rng.random_range(0..=3);
        let target = rng.random_range(0..p);
        let columns: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..len).map(|_| rng.random_range(0.0..120.0)).collect())
            .collect();
        let dataset = common::dataset_from(&columns, target);

        let layout = BlockLayout::new(orders.clone(), n_max).unwrap();
        let problem = build_block_problem(&dataset, &layout, rows).unwrap();
        let (b, a) = brute_force_block_system(&columns, target, &orders, n_max, rows);
        if problem.b.as_slice() != b.as_slice() || problem.a != a {
            mismatches += 1;
        }
    }
    let elapsed = started.elapsed();
    verdict(
        1,
        "block builder equals brute-force double summation",
        mismatches == 0 && within(elapsed, 1.0),
        format!(
            "{mismatches} mismatches of 100, {:.3}s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_2_least_squares_matches_normal_equations() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a = DMatrix::from_fn(30, 8, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(30, |_, _| rng.random_range(-10.0..10.0));
        let oracle = normal_equations(&a, &b);
        let layout = BlockLayout::with_orders(vec![2, 3, 3]).unwrap();
        let mut problem = RegressionProblem::new(b, a, layout).unwrap();
        let x = solve_least_squares(&mut problem).unwrap();
        let rel = (&x.x - &oracle).norm() / oracle.norm();
        worst = worst.max(rel);
    }
    let elapsed = started.elapsed();
    verdict(
        2,
        "dense least squares matches normal equations",
        worst <= 1e-8 && within(elapsed, 1.0),
        format!(
            "worst relative error {worst:.2e}, {:.3}s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_3_block_sparse_exact_recovery() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for instance in 0..200 {
        let orders: Vec<usize> = (0..10).map(|_| rng.random_range(1..=4)).collect();
        let layout = BlockLayout::with_orders(orders).unwrap();
        let n = layout.total_cols();
        let rows = n + 8;
        let gaussian = DMatrix::from_fn(rows, n, |_, _| rng.random_range(-1.0..1.0));
        let a = gaussian.qr().q();

        let k_true = rng.random_range(1..=3);
        let mut support = BTreeSet::new();
        while support.len() < k_true {
            support.insert(rng.random_range(0..10));
        }
        let mut x_true = DVector::zeros(n);
        for &blk in &support {
            for col in layout.block_cols(blk) {
                let mag = rng.random_range(0.5..2.0);
                x_true[col] = if rng.random_bool(0.5) { mag } else { -mag };
            }
        }
        let b = &a * &x_true;

        let (oracle_support, oracle_x) = exhaustive_best_support(&a, &b, &layout, k_true);
        let mut problem = RegressionProblem::new(b, a, layout.clone()).unwrap();
        let cfg = SolverConfig::new(3).with_tolerance(1e-9);
        let fit = solve_block_sparse(&mut problem, &cfg).unwrap();

        let err = (&fit.x - &x_true).amax();
        let oracle_err = (&fit.x - &oracle_x).amax();
        worst = worst.max(err);
        if fit.active_blocks != support
            || oracle_support != support
            || err > 1e-8
            || oracle_err > 1e-8
        {
            failures.push(instance);
        }
    }
    let elapsed = started.elapsed();
    verdict(
        3,
        "BOMP recovers exact support and coefficients",
        failures.is_empty() && within(elapsed, 10.0),
        format!(
            "{} failures of 200, worst coefficient error {worst:.2e}, {:.3}s",
            failures.len(),
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_4_recursive_rollout_matches_powers() {
    let started = Instant::now();
    let len = 140;
    let mut y = vec![100.0];
    for t in 1..len {
        y.push(0.9 * y[t - 1]);
    }
    let dataset = common::dataset_from(&[y.clone()], 0);
    let at = 130;
    let config = ForecastConfig {
        horizon_steps: 6,
        training_rows: 108,
        orders: LagOrders::Uniform(12),
        ..ForecastConfig::default()
    };
    let result = speedcast::recursive_forecast(&dataset, at, &config).unwrap();
    let normalizer = Normalizer::fit(&dataset, at - 120..at).unwrap();
    let mut worst: f64 = 0.0;
    for h in 1..=6 {
        let expected = normalizer
            .normalize_value(0, 0.9f64.powi(h) * y[at - 1])
            .unwrap();
        worst = worst.max((result.normalized[h as usize - 1] - expected).abs());
    }
    let elapsed = started.elapsed();
    verdict(
        4,
        "6-step AR(1) rollout equals 0.9^h continuation",
        worst <= 1e-6 && within(elapsed, 1.0),
        format!(
            "max deviation {worst:.2e} normalized, {:.3}s",
            elapsed.as_secs_f64()
        ),
    );
}

fn ordering_config(method: Method) -> ForecastConfig {
    ForecastConfig {
        method,
        ..ForecastConfig::default()
    }
}

#[test]
fn criterion_5_blocksparse_beats_ar() {
    let started = Instant::now();
    let (dataset, test) = lag_coupled_dataset();
    let bs = rolling_evaluate(
        &dataset,
        test.clone(),
        &ordering_config(Method::BlockSparse),
    )
    .unwrap();
    let ar = rolling_evaluate(&dataset, test, &ordering_config(Method::Ar)).unwrap();
    let bs_err = compute_errors(&bs.actuals(), &bs.predictions()).unwrap();
    let ar_err = compute_errors(&ar.actuals(), &ar.predictions()).unwrap();
    let gain = 1.0 - bs_err.mae / ar_err.mae;
    let elapsed = started.elapsed();
    verdict(
        5,
        "blocksparse MAE at least 10% below AR",
        gain >= 0.10 && bs.points.len() == 108 && within(elapsed, 5.0),
        format!(
            "blocksparse MAE {:.3}, AR MAE {:.3}, improvement {:.1}%, {:.3}s",
            bs_err.mae,
            ar_err.mae,
            100.0 * gain,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_6_metric_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut violations = 0;
    let mut worst_scale: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(2..60);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..130.0)).collect();
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..130.0)).collect();
        let r = compute_errors(&a, &p).unwrap();
        if r.mae > r.rmse {
            violations += 1;
        }
        let base = r.nrmse.unwrap();
        for c in [0.1, 3.0, 1000.0] {
            let sa: Vec<f64> = a.iter().map(|v| v * c).collect();
            let sp: Vec<f64> = p.iter().map(|v| v * c).collect();
            let s = compute_errors(&sa, &sp).unwrap().nrmse.unwrap();
            worst_scale = worst_scale.max((s - base).abs() / base);
        }
    }
    verdict(
        6,
        "MAE <= RMSE and NRMSE scale invariance",
        violations == 0 && worst_scale <= 1e-10,
        format!("{violations} MAE>RMSE cases, worst NRMSE drift {worst_scale:.2e}"),
    );
}

#[test]
fn criterion_7_protocol_shape() {
    let (dataset, test) = lag_coupled_dataset();
    let config = ForecastConfig {
        training_rows: 108,
        horizon_steps: 6,
        ..ForecastConfig::default()
    };
    let trace = rolling_evaluate(&dataset, test.clone(), &config).unwrap();
    let origins: Vec<usize> = trace.strides.iter().map(|s| s.origin).collect();
    let expected: Vec<usize> = test.clone().step_by(6).collect();
    verdict(
        7,
        "108-sample test range gives 18 refits and 108 pairs",
        trace.refits() == 18
            && trace.points.len() == 108
            && origins == expected
            && test.len() == 108,
        format!("{} refits, {} pairs", trace.refits(), trace.points.len()),
    );
}

#[test]
fn criterion_8_evaluate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, _) = lag_coupled_dataset();
    let data = dir.path().join("day.csv");
    std::fs::write(&data, speedcast::ingest::write_csv(&dataset)).unwrap();

    let run = |out: &str| {
        let out = dir.path().join(out);
        let code = speedcast::cli::run([
            "speedcast",
            "evaluate",
            "--data",
            data.to_str().unwrap(),
            "--target",
            "target",
            "--method",
            "blocksparse",
            "--out",
            out.to_str().unwrap(),
        ]);
        (code, out)
    };
    let (c1, o1) = run("first");
    let (c2, o2) = run("second");
    let t1 = std::fs::read(o1.join("trace.csv")).unwrap_or_default();
    let t2 = std::fs::read(o2.join("trace.csv")).unwrap_or_default();
    let outputs_present = ["report.md", "forecast.svg", "forecast_plot.csv"]
        .iter()
        .all(|f| o1.join(f).exists());
    verdict(
        8,
        "identical evaluate runs give byte-identical traces",
        c1 == 0 && c2 == 0 && !t1.is_empty() && t1 == t2 && outputs_present,
        format!("exit codes {c1}/{c2}, trace {} bytes", t1.len()),
    );
}

#[test]
fn criterion_9_support_persistence() {
    let (dataset, test) = lag_coupled_dataset();
    let trace = rolling_evaluate(&dataset, test, &ordering_config(Method::BlockSparse)).unwrap();
    let upstream = dataset.find_sensor("upstream").unwrap();
    let noise = dataset.find_sensor("noise").unwrap();
    let up_share = trace.support_frequency(upstream);
    let noise_share = trace.support_frequency(noise);
    verdict(
        9,
        "delayed-copy block persists, noise block stays out",
        up_share >= 0.9 && noise_share <= 0.1,
        format!(
            "upstream in {:.0}% of strides, noise in {:.0}%",
            100.0 * up_share,
            100.0 * noise_share
        ),
    );
}
