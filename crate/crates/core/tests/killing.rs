use geodrat_core::expr::{bessel, parse_expression, EvalContext, Expression};
use geodrat_core::flow::PhaseState;
use geodrat_core::geometry::{Domain, Grid, MetricSpec};
use geodrat_core::killing::{
    bracket_residual, characteristic_w, ck_march, example, gap_value, gauge_transform, killing_dimension, rkv_dimension, rkv_residuals,
    solve_rkv_given_cofactor, CkInit, Cofactor, CofactorField, CovectorField, MarchOptions, ScalarField,
};
use geodrat_core::registry::lookup;
use proptest::prelude::*;
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

fn cof(a: &str, b: &str) -> Cofactor {
    Cofactor::parse(a, b, &EvalContext::new()).unwrap()
}

fn max3(r: [f64; 3]) -> f64 {
    r.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn random_points(n: usize, d: [f64; 4], seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (rng.random_range(d[0]..d[1]), rng.random_range(d[2]..d[3]))).collect()
}

const BESSEL_PATCH: [f64; 4] = [0.1, 1.0, 0.5, 2.0];

#[test]
fn flat_killing_vectors_have_zero_residual() {
    let m = metric("0", [-2.0, 2.0, -2.0, 2.0]);
    for (x, y) in random_points(10, [-1.5, 1.5, -1.5, 1.5], 1) {
        assert_eq!(max3(rkv_residuals(&m, &cov("1", "0"), &Cofactor::zero(), x, y).unwrap()), 0.0);
        assert!(max3(rkv_residuals(&m, &cov("-y", "x"), &Cofactor::zero(), x, y).unwrap()) < 1e-15);
    }
    assert!(rkv_residuals(&m, &cov("1", "0"), &Cofactor::zero(), 3.0, 0.0).is_err());
}

#[test]
fn bessel_pair_with_native_cofactor() {
    let m = bessel_metric();
    let l = example::native_cofactor();
    for (x, y) in random_points(20, BESSEL_PATCH, 2) {
        for r in [example::p(), example::q()] {
            let res = max3(rkv_residuals(&m, &r, &l, x, y).unwrap());
            assert!(res < 1e-10, "residual {res} at ({x}, {y})");
        }
    }
}

#[test]
fn bracket_residual_in_phase_space() {
    let flat = metric("0", [-2.0, 2.0, -2.0, 2.0]);
    let s = PhaseState::new(0.3, -0.7, 1.1, 0.4);
    assert_eq!(bracket_residual(&flat, &cov("1", "0"), &Cofactor::zero(), &s).unwrap(), 0.0);

    let m = bessel_metric();
    let l = example::native_cofactor();
    let ctx = EvalContext::new();
    let f = parse_expression("x + y").unwrap();
    let (rg, lg) = gauge_transform(&example::q(), &l, &f, &ctx);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let s = PhaseState::new(rng.random_range(0.1..1.0), rng.random_range(0.5..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        assert!(bracket_residual(&m, &example::q(), &l, &s).unwrap().abs() < 1e-9);
        assert!(bracket_residual(&m, &example::p(), &l, &s).unwrap().abs() < 1e-9);
        assert!(bracket_residual(&m, &rg, &lg, &s).unwrap().abs() < 1e-9);
        // the equation is linear in momenta squared: a wrong cofactor shows up
        assert!(bracket_residual(&m, &example::q(), &Cofactor::zero(), &s).unwrap().abs() > 1e-6);
    }
}

#[test]
fn bracket_agrees_with_coordinate_residuals() {
    // X_H(R) + L R = e^{-2λ}(r1 p² + r2 p q + r3 q²)
    let m = metric("0.3*sin(x)*y + 0.1*x^2", [-2.0, 2.0, -2.0, 2.0]);
    let r = cov("x*y + 1", "cos(x) - y");
    let l = cof("0.2*y", "x - 0.5");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let s = PhaseState::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let rr = rkv_residuals(&m, &r, &l, s.x, s.y).unwrap();
        let e = m.jets(s.x, s.y, 0, None).unwrap().e2l;
        let expect = (rr[0] * s.p * s.p + rr[1] * s.p * s.q + rr[2] * s.q * s.q) / e;
        let got = bracket_residual(&m, &r, &l, &s).unwrap();
        assert!((got - expect).abs() < 1e-12 * (1.0 + expect.abs()), "{got} {expect}");
    }
}

#[test]
fn gauge_transform_cases() {
    let ctx = EvalContext::new();
    let flat = metric("0", [-2.0, 2.0, -2.0, 2.0]);
    let (r, l) = gauge_transform(&cov("1", "0"), &Cofactor::zero(), &Expression::constant(0.0), &ctx);
    assert_eq!(r.u.value(0.4, 0.2).unwrap(), 1.0);
    assert_eq!(l.a.value(0.4, 0.2).unwrap(), 0.0);
    let (r, l) = gauge_transform(&cov("1", "0"), &Cofactor::zero(), &parse_expression("x").unwrap(), &ctx);
    assert!((r.u.value(0.4, 0.2).unwrap() - 0.4f64.exp()).abs() < 1e-15);
    assert_eq!(l.a.value(0.4, 0.2).unwrap(), -1.0);
    let s = PhaseState::new(0.4, 0.2, 0.7, -1.3);
    assert!(bracket_residual(&flat, &r, &l, &s).unwrap().abs() < 1e-15);

    // Bessel pair: the gauge e^{-x}/sqrt(J0² + J1²) kills b and normalizes the pair
    let m = bessel_metric();
    let (rq, lg) = gauge_transform(&example::q(), &example::native_cofactor(), &example::gauge_f(), &ctx);
    let gauged = example::gauged_cofactor();
    for (x, y) in random_points(10, BESSEL_PATCH, 5) {
        assert!((lg.a.value(x, y).unwrap() - gauged.a.value(x, y).unwrap()).abs() < 1e-13);
        assert!(lg.b.value(x, y).unwrap().abs() < 1e-13);
        let (j0, j1) = (bessel::j0(y), bessel::j1(y));
        let n = (-x).exp() / (j0 * j0 + j1 * j1).sqrt();
        assert!((rq.u.value(x, y).unwrap() - n * j1).abs() < 1e-13);
        assert!((rq.v.value(x, y).unwrap() - n * j0).abs() < 1e-13);
        assert!(max3(rkv_residuals(&m, &rq, &gauged, x, y).unwrap()) < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn gauge_preserves_solutions(c in prop::array::uniform4(-1.0f64..1.0)) {
        let f = parse_expression(&format!("({})*x + ({})*y^2 + ({})*sin(x*y)", c[0], c[1], c[2])).unwrap();
        let m = bessel_metric();
        let (r, l) = gauge_transform(&example::p(), &example::native_cofactor(), &f, &EvalContext::new());
        let s = PhaseState::new(0.5 + 0.3 * c[3], 1.2, 0.8, -0.6 + c[3]);
        prop_assert!(bracket_residual(&m, &r, &l, &s).unwrap().abs() < 1e-9);
    }
}

#[test]
fn gap_for_closed_cofactor_is_curvature_condition() {
    let lambdas = ["0.3*sin(x)*y + 0.1*x^2", "x^3/7 - y*x/3", "0.5*log(1 + x^2 + 2*y^2)", "exp(0.2*x - 0.3*y)", "besselj0(x + y)"];
    let closed = cof("2*x*y + cos(x)", "x^2 + 1");
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for lam in lambdas {
        let m = metric(lam, [-1.0, 1.0, -1.0, 1.0]);
        for _ in 0..5 {
            let (x, y) = (rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8));
            let [u, v, uy, vx]: [f64; 4] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            assert!(closed.sample(x, y).unwrap().rho.abs() < 1e-14);
            let j = m.jets(x, y, 3, Some(1)).unwrap();
            let k = j.k();
            let expect = 2.0 * j.e2l * (k.d(1, 0) * u + k.d(0, 1) * v);
            let got = gap_value(&m, &closed, u, v, uy, vx, x, y).unwrap();
            assert!((got - expect).abs() < 1e-10 * (1.0 + expect.abs()), "{lam}: {got} vs {expect}");
        }
    }
    let flat = metric("0", [-1.0, 1.0, -1.0, 1.0]);
    assert_eq!(gap_value(&flat, &Cofactor::zero(), 0.3, -1.0, 2.0, 0.5, 0.1, 0.2).unwrap(), 0.0);
}

#[test]
fn gap_vanishes_on_bessel_pair() {
    let m = bessel_metric();
    let l = example::native_cofactor();
    for (x, y) in random_points(10, BESSEL_PATCH, 7) {
        for r in [example::p(), example::q()] {
            let uj = r.u.jet(x, y, 1).unwrap();
            let vj = r.v.jet(x, y, 1).unwrap();
            let g = gap_value(&m, &l, uj.value(), vj.value(), uj.d(0, 1), vj.d(1, 0), x, y).unwrap();
            assert!(g.abs() < 1e-8, "gap {g}");
        }
    }
}

fn interior_residual(m: &MetricSpec, r: &CovectorField, l: &dyn CofactorField, g: &Grid) -> f64 {
    let mut worst = 0.0f64;
    for j in 1..g.ny - 1 {
        for i in 1..g.nx - 1 {
            worst = worst.max(max3(rkv_residuals(m, r, l, g.x(i), g.y(j)).unwrap()));
        }
    }
    worst
}

#[test]
fn ck_march_flat_translation() {
    let m = metric("0", [-2.0, 2.0, -2.0, 2.0]);
    let init = CkInit::from_fn(-1.0, 1.0, 0.0, 21, |_| (1.0, 0.0, 0.0));
    let sol = ck_march(&m, &init, 0.2, &MarchOptions::default()).unwrap();
    assert!(sol.u.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
    assert!(sol.v.values.iter().chain(&sol.f.values).all(|v| v.abs() < 1e-14));
}

#[test]
fn ck_march_random_analytic_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..3 {
        let c: [f64; 4] = std::array::from_fn(|_| rng.random_range(-0.5..0.5));
        let lam = format!("{}*x*y + {}*sin(x) + {}*y^2", c[0], c[1], c[2]);
        let m = metric(&lam, [-2.0, 2.0, -2.0, 2.0]);
        let k = c[3];
        let init = CkInit::from_fn(-0.5, 0.5, 0.0, 41, |x| (1.5 + 0.3 * x, k * x * x, 0.2 * x));
        let sol = ck_march(&m, &init, 0.08, &MarchOptions::default()).unwrap();
        let res = interior_residual(&m, &sol.covector(), &sol.cofactor(), &sol.grid());
        assert!(res < 1e-6, "{lam}: residual {res}");
        assert!(sol.error_estimate < 1e-9);
    }
}

#[test]
fn ck_march_on_bessel_strip() {
    let m = bessel_metric();
    let init = CkInit::from_fn(0.2, 0.8, 1.0, 41, |x| (1.0 + 0.2 * x, 0.5, 0.0));
    let sol = ck_march(&m, &init, 0.06, &MarchOptions::default()).unwrap();
    assert!(interior_residual(&m, &sol.covector(), &sol.cofactor(), &sol.grid()) < 1e-6);
}

#[test]
fn ck_march_stops_at_u_floor() {
    let m = metric("0", [-2.0, 2.0, -2.0, 2.0]);
    let init = CkInit::from_fn(-1.0, 1.0, 0.0, 21, |x| (x, 0.0, 0.0));
    assert!(ck_march(&m, &init, 0.1, &MarchOptions::default()).is_err());
}

#[test]
fn characteristics_flat_constant() {
    let m = metric("0", [-2.0, 2.0, -2.0, 2.0]);
    let sol = characteristic_w(&m, (-1.0, 1.0), 0.0, 0.5, &|_| 0.7, &MarchOptions::default()).unwrap();
    assert!(sol.w.values.iter().all(|w| (w - 0.7).abs() < 1e-13));
    assert!(sol.a.values.iter().chain(&sol.b.values).all(|v| v.abs() < 1e-12));
}

#[test]
fn characteristics_linear_lambda() {
    // λ = x, w(x, 0) = 0 gives w = −tan y, a = −1, b = −tan y
    let m = metric("x", [-2.0, 2.0, -1.0, 1.5]);
    let sol = characteristic_w(&m, (-1.0, 1.0), 0.0, 0.5, &|_| 0.0, &MarchOptions::default()).unwrap();
    let g = sol.grid();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let y = g.y(j);
            assert!((sol.w.at(i, j) + y.tan()).abs() < 1e-9);
            assert!((sol.a.at(i, j) + 1.0).abs() < 1e-9);
            assert!((sol.b.at(i, j) + y.tan()).abs() < 1e-6);
        }
    }
    let res = interior_residual(&m, &sol.covector(), &sol.cofactor(), &g);
    assert!(res < 1e-6, "residual {res}");
}

#[test]
fn characteristics_recover_bessel_direction() {
    let m = bessel_metric();
    let w0 = |_x: f64| bessel::j0(1.0) / bessel::j1(1.0);
    let sol = characteristic_w(&m, (0.0, 1.2), 1.0, 0.3, &w0, &MarchOptions::default()).unwrap();
    let g = sol.grid();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let y = g.y(j);
            assert!((sol.w.at(i, j) - bessel::j0(y) / bessel::j1(y)).abs() < 1e-8);
        }
    }
    let res = interior_residual(&m, &sol.covector(), &sol.cofactor(), &g);
    assert!(res < 1e-6, "residual {res}");
}

#[test]
fn characteristics_report_collisions() {
    let m = metric("0", [-3.0, 3.0, -3.0, 3.0]);
    // dx/dy = −w with w = x converges all characteristics at y = 1
    let r = characteristic_w(&m, (-1.0, 1.0), 0.0, 1.5, &|x| x, &MarchOptions::default());
    assert!(r.is_err());
}

fn bessel_grid() -> Grid {
    Grid::new(Domain::new(BESSEL_PATCH[0], BESSEL_PATCH[1], BESSEL_PATCH[2], BESSEL_PATCH[3]).unwrap(), 21, 21)
}

#[test]
fn solve_rkv_reconstructs_bessel_pair() {
    let m = bessel_metric();
    let l = example::native_cofactor();
    let g = bessel_grid();
    let base = (10, 10);
    let (bx, by) = (g.x(base.0), g.y(base.1));
    for r in [example::q(), example::p()] {
        let cauchy = (r.u.value(bx, by).unwrap(), r.v.value(bx, by).unwrap());
        let sol = solve_rkv_given_cofactor(&m, &l, &g, base, cauchy, 4).unwrap();
        let scale = sol.u.max_abs().max(sol.v.max_abs());
        for (x, y) in g.points() {
            assert!((sol.u.value(x, y).unwrap() - r.u.value(x, y).unwrap()).abs() < 1e-6 * scale);
            assert!((sol.v.value(x, y).unwrap() - r.v.value(x, y).unwrap()).abs() < 1e-6 * scale);
        }
    }
}

#[test]
fn solve_rkv_is_linear_in_cauchy_data() {
    let m = bessel_metric();
    let l = example::native_cofactor();
    let g = bessel_grid();
    let s1 = solve_rkv_given_cofactor(&m, &l, &g, (4, 7), (0.3, -1.1), 4).unwrap();
    let s2 = solve_rkv_given_cofactor(&m, &l, &g, (4, 7), (0.9, 0.4), 4).unwrap();
    let s12 = solve_rkv_given_cofactor(&m, &l, &g, (4, 7), (1.2, -0.7), 4).unwrap();
    for k in 0..g.len() {
        assert!((s1.u.values[k] + s2.u.values[k] - s12.u.values[k]).abs() < 1e-9);
        assert!((s1.v.values[k] + s2.v.values[k] - s12.v.values[k]).abs() < 1e-9);
    }
}

#[test]
fn solve_rkv_rejects_closed_cofactor() {
    let m = bessel_metric();
    assert!(solve_rkv_given_cofactor(&m, &Cofactor::zero(), &bessel_grid(), (10, 10), (1.0, 0.0), 4).is_err());
}

#[test]
fn dimension_two_for_bessel_cofactor() {
    let m = bessel_metric();
    let rep = rkv_dimension(&m, &example::native_cofactor(), &bessel_grid(), 1e-5).unwrap();
    assert_eq!(rep.dim, 2, "{rep:?}");
    let rep = rkv_dimension(&m, &example::gauged_cofactor(), &bessel_grid(), 1e-5).unwrap();
    assert_eq!(rep.dim, 2, "{rep:?}");
}

#[test]
fn dimension_zero_for_inconsistent_cofactor() {
    let m = bessel_metric();
    let rep = rkv_dimension(&m, &cof("0", "x*y"), &bessel_grid(), 1e-5).unwrap();
    assert_eq!(rep.dim, 0, "{rep:?}");
    assert!(rep.residual_singular_values[1] > 1e-3);
}

#[test]
fn killing_dimension_of_model_metrics() {
    let g = Grid::new(Domain::new(-1.0, 1.0, -1.0, 1.0).unwrap(), 21, 21);
    for name in ["flat", "sphere"] {
        let m = lookup(name).unwrap().metric(&[]).unwrap();
        let rep = killing_dimension(&m, &g, 1e-6).unwrap();
        assert_eq!(rep.dim, 3, "{name}: {rep:?}");
        assert!(rep.gap > 1e3, "{name}: {rep:?}");
    }
    let h2 = lookup("h2").unwrap().metric(&[]).unwrap();
    let g = Grid::new(Domain::new(0.3, 1.3, 0.2, 1.2).unwrap(), 21, 21);
    let rep = killing_dimension(&h2, &g, 1e-6).unwrap();
    assert_eq!(rep.dim, 0, "{rep:?}");
    // a metric of revolution keeps its translation
    let rev = lookup("rev-x2").unwrap().metric(&[]).unwrap();
    let g = Grid::new(Domain::new(0.2, 1.2, -0.5, 0.5).unwrap(), 21, 21);
    let rep = killing_dimension(&rev, &g, 1e-6).unwrap();
    assert_eq!(rep.dim, 1, "{rep:?}");
}
