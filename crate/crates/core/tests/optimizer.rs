//! Expected-improvement search on synthetic objectives with known optima.

use dtrgp::bayesopt::{optimize_policy, Budget, GpConfig, Source};
use dtrgp::policy::{ParamBox, PolicyParams};
use dtrgp::rng;
use rand::Rng;

fn bowl(theta: &PolicyParams, center: [f64; 2]) -> f64 {
    -((theta.0[0] - center[0]).powi(2) + (theta.0[1] - center[1]).powi(2))
}

fn budget(n_initial: usize, n_ei: usize) -> Budget {
    Budget {
        n_initial,
        n_ei,
        ..Budget::default()
    }
}

#[test]
fn bowl_optimum_found_in_nearly_every_repetition() {
    let bx = ParamBox::unit_square();
    let mut hits = 0;
    for rep in 0..100u64 {
        let mut r = rng::stream(rng::derive(20, 0, rep));
        let center = [r.random_range(0.05..0.95), r.random_range(0.05..0.95)];
        let trace = optimize_policy(
            |t| Ok((bowl(t, center), 0.0)),
            &bx,
            &budget(10, 30),
            &GpConfig::default(),
            rng::derive(20, 1, rep),
        )
        .unwrap();
        let d = (trace.best_theta.0[0] - center[0]).hypot(trace.best_theta.0[1] - center[1]);
        hits += (d <= 0.05) as usize;
    }
    assert!(hits >= 95, "{hits} of 100 repetitions within 0.05");
}

#[test]
fn trace_reproducible_and_consistent() {
    let bx = ParamBox::unit_square();
    let c = [0.3, 0.8];
    let run = || optimize_policy(|t| Ok((bowl(t, c), 0.01)), &bx, &budget(8, 12), &GpConfig::default(), 77).unwrap();
    let a = run();
    let b = run();
    assert_eq!(a, b);
    assert_eq!(a.records.len(), a.budget_used);
    assert!(a.records[..8].iter().all(|r| r.source == Source::InitialDesign));
    assert!(a.records[8..].iter().all(|r| r.source == Source::EiStep));
    assert_eq!(a.best_value, bowl(&a.best_theta, c));
    let mut best = f64::NEG_INFINITY;
    for r in &a.records {
        assert!(bx.contains(&r.theta));
        best = best.max(r.value);
    }
    assert_eq!(best, a.best_value);
}

#[test]
fn no_ei_steps_returns_best_initial_point() {
    let bx = ParamBox::unit_square();
    let c = [0.5, 0.5];
    let trace = optimize_policy(|t| Ok((bowl(t, c), 0.0)), &bx, &budget(12, 0), &GpConfig::default(), 3).unwrap();
    assert_eq!(trace.records.len(), 12);
    let best = trace.records.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(trace.best_value, best);
}

#[test]
fn evaluator_failure_carries_partial_trace() {
    let bx = ParamBox::unit_square();
    let mut calls = 0;
    let err = optimize_policy(
        |t| {
            calls += 1;
            if calls > 5 {
                Err(dtrgp::Error::Estimation("boom".into()))
            } else {
                Ok((bowl(t, [0.5, 0.5]), 0.0))
            }
        },
        &bx,
        &budget(10, 5),
        &GpConfig::default(),
        1,
    )
    .unwrap_err();
    match err {
        dtrgp::Error::Evaluator { completed, partial, .. } => {
            assert_eq!(completed, 5);
            assert_eq!(partial.records.len(), 5);
        }
        other => panic!("unexpected error {other}"),
    }
}
