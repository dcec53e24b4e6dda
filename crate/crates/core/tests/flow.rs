use std::sync::Arc;

use geodrat_core::expr::{parse_expression, EvalContext};
use geodrat_core::flow::{
    conservation_report, independence_check, integrate, run_batch, write_csv, BatchConfig, FractionalLinearIntegral, IntegratorConfig, Method,
    PhaseState,
};
use geodrat_core::geometry::{hamiltonian, Domain, MetricSpec};
use geodrat_core::killing::{example, CovectorField, ExprField, ProductField, ScalarField, SumField};
use geodrat_core::registry::lookup;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn metric(lambda: &str, d: [f64; 4]) -> MetricSpec {
    MetricSpec::new("test", parse_expression(lambda).unwrap(), Domain::new(d[0], d[1], d[2], d[3]).unwrap(), EvalContext::new()).unwrap()
}

fn bessel_metric() -> MetricSpec {
    lookup("bessel").unwrap().metric(&[]).unwrap()
}

fn cov(u: &str, v: &str) -> CovectorField {
    CovectorField::parse(u, v, &EvalContext::new()).unwrap()
}

fn bessel_integral() -> FractionalLinearIntegral {
    FractionalLinearIntegral::new(example::p(), example::q())
}

fn bessel_region() -> Domain {
    Domain::new(0.1, 1.0, 0.5, 2.0).unwrap()
}

#[test]
fn flat_geodesics_are_lines() {
    let m = metric("0", [-50.0, 50.0, -50.0, 50.0]);
    let s0 = PhaseState::new(0.2, -0.4, 0.6, 0.8);
    let tr = integrate(&m, s0, 10.0, &IntegratorConfig::default()).unwrap();
    for s in &tr.samples {
        assert!((s.state.p - 0.6).abs() < 1e-12 && (s.state.q - 0.8).abs() < 1e-12);
        assert!((s.state.x - (0.2 + 0.6 * s.t)).abs() < 1e-12);
        assert!((s.state.y - (-0.4 + 0.8 * s.t)).abs() < 1e-12);
        assert!(s.drift < 1e-12);
    }
    assert!((tr.t_end() - 10.0).abs() < 1e-12);
    assert!(!tr.stats.exited);
}

#[test]
fn bessel_energy_drift() {
    let m = bessel_metric();
    let tr = integrate(&m, PhaseState::new(0.0, 1.0, 0.7, 0.3), 10.0, &IntegratorConfig::default()).unwrap();
    assert!(tr.stats.energy_drift <= 1e-9, "{:?}", tr.stats);
    assert!(tr.stats.energy_ok);
    let ts: Vec<f64> = tr.samples.iter().map(|s| s.t).collect();
    assert!(ts.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn exits_are_flagged_and_bad_starts_rejected() {
    let m = metric("0", [-1.0, 1.0, -1.0, 1.0]);
    let tr = integrate(&m, PhaseState::new(0.0, 0.0, 1.0, 0.0), 5.0, &IntegratorConfig::default()).unwrap();
    assert!(tr.stats.exited);
    assert!(tr.t_end() < 1.0 + 1e-12);
    assert!(integrate(&m, PhaseState::new(2.0, 0.0, 1.0, 0.0), 1.0, &IntegratorConfig::default()).is_err());
    assert!(integrate(&m, PhaseState::new(0.0, 0.0, 1.0, 0.0), -1.0, &IntegratorConfig::default()).is_err());
}

#[test]
fn bessel_integral_is_conserved() {
    let m = bessel_metric();
    let f = bessel_integral();
    let cfg = BatchConfig { count: 100, t_end: 10.0, seed: 11, region: Some(bessel_region()), ..BatchConfig::default() };
    let results = run_batch(&m, Some(&f), &cfg);
    assert_eq!(results.len(), 100);
    for r in &results {
        assert!(r.error.is_none(), "{r:?}");
        assert!(r.drift.unwrap() <= 1e-8, "{r:?}");
    }
}

#[test]
fn ratio_of_flat_killing_vectors_is_conserved() {
    let m = metric("0", [-50.0, 50.0, -50.0, 50.0]);
    let f = FractionalLinearIntegral::new(cov("1", "0"), cov("0", "1"));
    let tr = integrate(&m, PhaseState::new(0.1, 0.2, 0.3, 0.9), 10.0, &IntegratorConfig::default()).unwrap();
    assert!(conservation_report(&f, &tr, 1e-6).unwrap().max_drift < 1e-13);
}

#[test]
fn non_integral_drifts() {
    let m = bessel_metric();
    let f = FractionalLinearIntegral::new(cov("x", "0"), cov("0", "y"));
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..5 {
        let s = geodrat_core::flow::random_state(&m, &bessel_region(), &mut rng).unwrap();
        let tr = integrate(&m, s, 10.0, &IntegratorConfig::default()).unwrap();
        assert!(conservation_report(&f, &tr, 1e-6).unwrap().max_drift > 1e-2);
    }
}

#[test]
fn independence() {
    let flat = metric("0", [-2.0, 2.0, -2.0, 2.0]);
    let pq = FractionalLinearIntegral::new(cov("1", "0"), cov("0", "1"));
    let s = PhaseState::new(0.3, 0.4, 0.5, -0.7);
    assert!(independence_check(&pq, &flat, &s, 1e-6).unwrap().independent);
    let constant = FractionalLinearIntegral::new(cov("2", "0"), cov("1", "0"));
    assert!(!independence_check(&constant, &flat, &s, 1e-6).unwrap().independent);
    assert!(independence_check(&pq, &flat, &PhaseState::new(0.3, 0.4, 0.5, 0.0), 1e-6).is_err());

    let m = bessel_metric();
    let f = bessel_integral();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10 {
        let s = geodrat_core::flow::random_state(&m, &bessel_region(), &mut rng).unwrap();
        let rep = independence_check(&f, &m, &s, 1e-6).unwrap();
        assert!(rep.independent, "{rep:?}");
    }
}

/// Relative energy error at t_end for a fixed step.
fn fixed_step_drift(m: &MetricSpec, s0: PhaseState, method: Method, h: f64, t_end: f64) -> f64 {
    let cfg = IntegratorConfig { method, fixed_step: Some(h), sample_dt: None, max_refinements: 0, ..IntegratorConfig::default() };
    let tr = integrate(m, s0, t_end, &cfg).unwrap();
    assert!(!tr.stats.exited);
    tr.last().drift
}

#[test]
fn observed_orders_match_nominal() {
    let m = metric("0.8*sin(x)*cos(0.7*y) + 0.3*x", [-50.0, 50.0, -50.0, 50.0]);
    let s0 = PhaseState::new(0.1, 0.3, 0.8, 0.5);
    let e1 = fixed_step_drift(&m, s0, Method::Gbs8, 0.4, 4.0);
    let e2 = fixed_step_drift(&m, s0, Method::Gbs8, 0.2, 4.0);
    let order = (e1 / e2).log2();
    assert!((order - 8.0).abs() <= 0.5, "extrapolation order {order} from {e1:e}, {e2:e}");
    let e1 = fixed_step_drift(&m, s0, Method::ImplicitMidpoint, 0.2, 4.0);
    let e2 = fixed_step_drift(&m, s0, Method::ImplicitMidpoint, 0.1, 4.0);
    let order = (e1 / e2).log2();
    assert!((order - 2.0).abs() <= 0.5, "midpoint order {order} from {e1:e}, {e2:e}");
}

#[test]
fn time_reversal_returns_home() {
    let m = bessel_metric();
    let s0 = PhaseState::new(0.4, 1.1, -0.3, 0.9);
    let cfg = IntegratorConfig::default();
    let fwd = integrate(&m, s0, 6.0, &cfg).unwrap();
    let back = integrate(&m, fwd.last().state.reversed(), 6.0, &cfg).unwrap();
    let end = back.last().state.reversed();
    for (a, b) in end.to_array().iter().zip(s0.to_array()) {
        assert!((a - b).abs() < 1e-8, "{end:?} vs {s0:?}");
    }
}

#[test]
fn drift_is_stable_under_mobius_and_gauge() {
    let m = bessel_metric();
    let f = bessel_integral();
    // F' = (2P − Q)/(P + 3Q), then both scaled by e^{x/2}
    let ctx = EvalContext::new();
    let comb = |a: f64, b: f64| -> CovectorField {
        let lin = |x: &Arc<dyn ScalarField>, y: &Arc<dyn ScalarField>| -> Arc<dyn ScalarField> {
            Arc::new(SumField(Arc::new(ProductField(ExprField::constant(a), x.clone())), Arc::new(ProductField(ExprField::constant(b), y.clone()))))
        };
        let p = example::p();
        let q = example::q();
        CovectorField::new(lin(&p.u, &q.u), lin(&p.v, &q.v))
    };
    let scale = |c: CovectorField| {
        let e = ExprField::arc(parse_expression("exp(x/2)").unwrap(), &ctx);
        CovectorField::new(Arc::new(ProductField(e.clone(), c.u)), Arc::new(ProductField(e, c.v)))
    };
    let g = FractionalLinearIntegral::new(scale(comb(2.0, -1.0)), scale(comb(1.0, 3.0)));
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..5 {
        let s = geodrat_core::flow::random_state(&m, &bessel_region(), &mut rng).unwrap();
        let tr = integrate(&m, s, 10.0, &IntegratorConfig::default()).unwrap();
        let d1 = conservation_report(&f, &tr, 1e-6).unwrap().max_drift.max(1e-15);
        let d2 = conservation_report(&g, &tr, 1e-6).unwrap().max_drift.max(1e-15);
        assert!(d1 < 1e-8 && d2 < 1e-8, "{d1:e} {d2:e}");
        let ratio = d1 / d2;
        assert!((0.1..=10.0).contains(&ratio) || d1.max(d2) < 1e-13, "{d1:e} {d2:e}");
    }
}

#[test]
fn batch_is_deterministic_across_thread_counts() {
    let m = bessel_metric();
    let f = bessel_integral();
    let base = BatchConfig { count: 8, t_end: 2.0, seed: 5, region: Some(bessel_region()), ..BatchConfig::default() };
    let one = run_batch(&m, Some(&f), &BatchConfig { threads: Some(1), ..base });
    let four = run_batch(&m, Some(&f), &BatchConfig { threads: Some(4), ..base });
    for (a, b) in one.iter().zip(&four) {
        assert_eq!(a.index, b.index);
        assert_eq!(a.start, b.start);
        assert_eq!(a.drift, b.drift);
    }
    let other = run_batch(&m, Some(&f), &BatchConfig { seed: 6, ..base });
    assert_ne!(one[0].start, other[0].start);
}

#[test]
fn csv_has_expected_columns() {
    let m = bessel_metric();
    let f = bessel_integral();
    let s0 = PhaseState::new(0.4, 1.1, -0.3, 0.9);
    let tr = integrate(&m, s0, 1.0, &IntegratorConfig::default()).unwrap();
    let mut buf = Vec::new();
    write_csv(&mut buf, &tr, Some(&f), 1e-6).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,x,y,p,q,H,F");
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first.len(), 7);
    assert_eq!(first[1], 0.4);
    let h = hamiltonian(&m, 0.4, 1.1, -0.3, 0.9).unwrap();
    assert!((first[5] - h).abs() < 1e-15);
    assert_eq!(text.lines().count(), tr.samples.len() + 1);
    // a zero of Q leaves F empty
    let flat = metric("0", [-2.0, 2.0, -2.0, 2.0]);
    let pq = FractionalLinearIntegral::new(cov("1", "0"), cov("0", "1"));
    let tr = integrate(&flat, PhaseState::new(0.0, 0.0, 1.0, 0.0), 0.1, &IntegratorConfig::default()).unwrap();
    let mut buf = Vec::new();
    write_csv(&mut buf, &tr, Some(&pq), 1e-6).unwrap();
    assert!(String::from_utf8(buf).unwrap().lines().nth(1).unwrap().ends_with(','));
}

#[test]
fn random_states_have_unit_speed() {
    let m = bessel_metric();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..10 {
        let s = geodrat_core::flow::random_state(&m, &bessel_region(), &mut rng).unwrap();
        assert!((hamiltonian(&m, s.x, s.y, s.p, s.q).unwrap() - 0.5).abs() < 1e-14);
        let _: f64 = rng.random();
    }
}
