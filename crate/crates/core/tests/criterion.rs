use std::sync::OnceLock;

use geodrat_core::criterion::{
    candidates_at, decide, find_w_candidates, mobius_orbit_check, mobius_transform, phi_grid, phi_stats, propagate_branch, psi_factor_check,
    reconstruct_cofactor, revolution_fastpath, Branch, BranchOptions, CompiledSystem, CriterionError, DecideConfig, DerivedSystem, Moduli, PhiVerdict,
    Verdict,
};
use geodrat_core::expr::bessel::{j0, j1};
use geodrat_core::flow::{conservation_report, integrate, random_state, FractionalLinearIntegral, IntegratorConfig, Trajectory};
use geodrat_core::geometry::{Domain, Grid, MetricSpec};
use geodrat_core::killing::{example, ExprField, GridField, ScalarField};
use geodrat_core::registry::{lookup, Expected, REGISTRY};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sys() -> &'static CompiledSystem {
    static SYS: OnceLock<CompiledSystem> = OnceLock::new();
    SYS.get_or_init(|| CompiledSystem::new(DerivedSystem::derive().expect("derivation succeeds")))
}

fn registry_metric(name: &str) -> MetricSpec {
    lookup(name).unwrap().metric(&[]).unwrap()
}

fn analysis_grid(name: &str, n: usize) -> Grid {
    Grid::new(lookup(name).unwrap().analysis_domain(), n, n)
}

/// `w = a_y` of the Bessel cofactor, evaluated through the expression engine.
fn bessel_w(x: f64, y: f64) -> f64 {
    ExprField::parse(example::W, &Default::default()).unwrap().value(x, y).unwrap()
}

/// `a = J₀J₁ / (y(J₀² + J₁²))` from the series implementation.
fn bessel_a(y: f64) -> f64 {
    let (a, b) = (j0(y), j1(y));
    a * b / (y * (a * a + b * b))
}

#[test]
fn flat_eq0_is_pure_sextic() {
    let m = registry_metric("flat");
    let s = sys().specialize(&m, 0.3, -0.2).unwrap();
    assert_eq!(s.eq0.c.len(), 7);
    assert_eq!(s.eq0.c[6], 5400.0);
    assert!(s.eq0.c[..6].iter().all(|c| *c == 0.0), "{:?}", s.eq0.c);
    // a sextuple root: numerically a tight cluster around 0
    let roots = s.eq0.real_roots(1e-7);
    assert!(!roots.is_empty() && roots.iter().all(|r| r.abs() <= 1e-6), "{roots:?}");
    assert!(find_w_candidates(sys(), &m, 0.3, -0.2, 1e-6).unwrap().is_empty());
}

#[test]
fn bessel_specializes_to_exact_degree_six() {
    let s = sys().specialize(&registry_metric("bessel"), 0.0, 1.0).unwrap();
    assert_eq!(s.eq0.degree(), 6);
    assert!(s.eq0.c.iter().all(|c| c.is_finite()));
    assert!(s.members.iter().all(|p| p.c.iter().all(|c| c.is_finite())));
}

#[test]
fn bessel_candidate_is_the_cofactor_root() {
    let c = find_w_candidates(sys(), &registry_metric("bessel"), 0.3, 1.2, 1e-6).unwrap();
    assert_eq!(c.len(), 1, "{c:?}");
    let w = bessel_w(0.3, 1.2);
    assert!((c[0].w - w).abs() <= 1e-10 * (1.0 + w.abs()), "{} vs {w}", c[0].w);
}

#[test]
fn bessel_root_annihilates_every_member() {
    let m = registry_metric("bessel");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let (x, y) = (rng.random_range(-1.0..2.0), rng.random_range(0.3..3.0));
        let s = sys().specialize(&m, x, y).unwrap();
        let r = s.residuals(bessel_w(x, y));
        assert!(r.iter().all(|v| *v <= 1e-8), "({x}, {y}): {r:?}");
    }
}

#[test]
fn h2_has_no_common_real_root() {
    let m = registry_metric("h2");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let (x, y) = (rng.random_range(0.3..1.3), rng.random_range(0.2..1.2));
        let c = find_w_candidates(sys(), &m, x, y, 1e-6).unwrap();
        assert!(c.is_empty(), "({x}, {y}): {c:?}");
    }
}

#[test]
fn phi_vanishes_on_bessel_grid() {
    let pts = phi_grid(sys(), &registry_metric("bessel"), &analysis_grid("bessel", 21)).unwrap();
    for p in &pts {
        assert!(p.components.iter().all(|c| *c <= 1e-6), "({}, {}): {:?}", p.x, p.y, p.components);
    }
    assert_eq!(phi_stats(&pts).verdict, PhiVerdict::Zero);
}

#[test]
fn phi_bounded_away_from_zero_on_h2() {
    let pts = phi_grid(sys(), &registry_metric("h2"), &analysis_grid("h2", 21)).unwrap();
    let stats = phi_stats(&pts);
    assert_eq!(stats.verdict, PhiVerdict::Nonzero, "{stats:?}");
    assert!(stats.min >= 1e-3);
    // excluded points sit near the curve k_x = 0 only
    assert!(stats.flagged * 10 < stats.points, "{stats:?}");
    let mut g: Vec<f64> = pts.iter().map(|p| p.grad_k).collect();
    g.sort_by(f64::total_cmp);
    let median = g[g.len() / 2];
    for p in pts.iter().filter(|p| p.flag.is_some()) {
        assert!(p.k_x.abs() <= 0.1 * median, "({}, {})", p.x, p.y);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn at_most_six_candidates(x in 0.3f64..1.3, y in 0.3f64..1.8, which in 0usize..3, tol in 1e-8f64..1.0) {
        let name = ["bessel", "h2", "h1eps"][which];
        let c = find_w_candidates(sys(), &registry_metric(name), x, y, tol).unwrap();
        prop_assert!(c.len() <= 6);
    }
}

#[test]
fn bessel_branch_follows_closed_form() {
    let m = registry_metric("bessel");
    let g = analysis_grid("bessel", 21);
    let base = (10, 10);
    let s = sys().specialize(&m, g.x(base.0), g.y(base.1)).unwrap();
    let c = candidates_at(&s, 1e-6);
    let b = propagate_branch(sys(), &m, &g, base, c[0].w, &BranchOptions::default()).unwrap();
    for i in 0..g.nx {
        for j in 0..g.ny {
            let w = bessel_w(g.x(i), g.y(j));
            assert!((b.w.at(i, j) - w).abs() <= 1e-8, "node ({i}, {j})");
        }
    }
    assert!(b.max_snap <= 1e-6);
}

#[test]
fn bessel_cofactor_reconstruction() {
    let m = registry_metric("bessel");
    let g = analysis_grid("bessel", 21);
    let base = (10, 10);
    let s = sys().specialize(&m, g.x(base.0), g.y(base.1)).unwrap();
    let w0 = candidates_at(&s, 1e-6)[0].w;
    let cof = reconstruct_cofactor(&propagate_branch(sys(), &m, &g, base, w0, &BranchOptions::default()).unwrap(), base.1).unwrap();
    assert!(cof.consistency <= 1e-4);
    // the reconstruction fixes a = 0 on the base row; the closed form is shifted to match
    let shift = bessel_a(g.y(base.1));
    let scale = (0..g.ny).map(|j| bessel_a(g.y(j)).abs()).fold(0.0, f64::max);
    for i in 0..g.nx {
        for j in 0..g.ny {
            let err = (cof.a.at(i, j) + shift - bessel_a(g.y(j))).abs() / scale;
            assert!(err <= 1e-6, "node ({i}, {j}): {err:e}");
        }
    }
}

fn synthetic_branch(g: &Grid, w: impl Fn(f64, f64) -> f64, w_y: impl Fn(f64, f64) -> f64) -> Branch {
    let field = |f: &dyn Fn(f64, f64) -> f64| GridField::new(*g, g.points().into_iter().map(|(x, y)| f(x, y)).collect());
    Branch { w: field(&w), w_x: field(&|_, _| 0.0), w_y: field(&w_y), seed: 0.0, base: (g.nx / 2, g.ny / 2), max_snap: 0.0, max_member_residual: 0.0 }
}

#[test]
fn closed_cofactor_branch_is_rejected() {
    let g = Grid::new(Domain::new(-1.0, 1.0, -1.0, 1.0).unwrap(), 11, 11);
    let b = synthetic_branch(&g, |_, _| 0.0, |_, _| 0.0);
    assert!(matches!(reconstruct_cofactor(&b, 5), Err(CriterionError::WNearZero(_))));
}

#[test]
fn reconstructed_a_integrates_w() {
    let g = Grid::new(Domain::new(0.0, 1.0, -0.5, 1.0).unwrap(), 31, 31);
    let w = |x: f64, y: f64| (2.0 * y).cos() + x * y;
    let w_y = |x: f64, y: f64| -2.0 * (2.0 * y).sin() + x;
    let b = synthetic_branch(&g, w, w_y);
    let base = 10;
    let cof = reconstruct_cofactor(&b, base).unwrap();
    let y0 = g.y(base);
    let exact = |x: f64, y: f64| 0.5 * ((2.0 * y).sin() - (2.0 * y0).sin()) + 0.5 * x * (y * y - y0 * y0);
    for (x, y) in g.points() {
        // composite Hermite error is about h⁴ L max|w''''| / 720
        assert!((cof.a.value(x, y).unwrap() - exact(x, y)).abs() <= 1e-6, "({x}, {y})");
        let ay = cof.a.jet(x, y, 1).unwrap().d(0, 1);
        assert!((ay - w(x, y)).abs() <= 1e-4, "({x}, {y})");
    }
}

#[test]
fn constant_curvature_short_circuits() {
    for name in ["flat", "sphere"] {
        let d = decide(sys(), &registry_metric(name), &analysis_grid(name, 21), &DecideConfig::default()).unwrap();
        assert_eq!(d.report.verdict, Verdict::ConstantCurvature, "{name}");
        assert_eq!(d.report.moduli, Moduli::Rp2);
        assert!(d.report.phi.is_none(), "{name}: Φ must not be evaluated");
    }
}

#[test]
fn bessel_integral_exists_and_is_unique() {
    let d = decide(sys(), &registry_metric("bessel"), &analysis_grid("bessel", 21), &DecideConfig::default()).unwrap();
    assert_eq!(d.report.verdict, Verdict::Exists, "{:?}", d.report);
    assert_eq!(d.report.moduli, Moduli::Points(1));
    assert_eq!(d.integrals.len(), 1);
    assert_eq!(d.report.branches[0].dimension.as_ref().unwrap().dim, 2);
}

#[test]
fn negative_verdicts() {
    for name in ["h2", "rev-x2", "h1", "h1-rev"] {
        let d = decide(sys(), &registry_metric(name), &analysis_grid(name, 21), &DecideConfig::default()).unwrap();
        assert_eq!(d.report.verdict, Verdict::None, "{name}: {:?}", d.report);
        assert_eq!(d.report.moduli, Moduli::Empty);
        assert!(d.integrals.is_empty());
    }
    let d = decide(sys(), &registry_metric("h2"), &analysis_grid("h2", 21), &DecideConfig::default()).unwrap();
    assert!(d.report.phi.unwrap().min >= 1e-3);
}

#[test]
fn revolution_fast_path_agrees_with_general_pipeline() {
    for name in ["rev-x2", "h1-rev"] {
        let m = registry_metric(name);
        let g = analysis_grid(name, 21);
        let fast = decide(sys(), &m, &g, &DecideConfig::default()).unwrap().report;
        assert!(fast.revolution.as_ref().unwrap().incompatible_everywhere, "{name}");
        assert!(fast.phi.is_none(), "{name}: the fast path decides alone");
        let general = decide(sys(), &m, &g, &DecideConfig { fast_path: false, ..Default::default() }).unwrap().report;
        assert!(general.revolution.is_none());
        assert_eq!(fast.verdict, Verdict::None, "{name}");
        assert_eq!(general.verdict, fast.verdict, "{name}: {general:?}");
    }
}

#[test]
fn revolution_radicands() {
    for name in ["rev-x2", "h1-rev"] {
        let m = registry_metric(name);
        let w = revolution_fastpath(sys(), &m, &lookup(name).unwrap().analysis_domain(), 10, 1e-3).unwrap();
        assert_eq!(w.samples.len(), 10);
        for s in &w.samples {
            let rd = s.denominator_radicand;
            assert!(s.invariants.k_x.abs() > 0.0);
            // the denominator radicand in closed form through k_x, k_xx and j
            assert!((rd - s.denominator_radicand_closed).abs() <= 1e-10 * rd.abs().max(1e-3), "{name} x = {}", s.x);
            assert!(s.division_remainder <= 1e-12, "{name} x = {}", s.x);
            // Eq0 has no w⁴ term, so the radicands of the Eq0 branch sum to −ρ_D
            let sum: f64 = s.eq0_radicands.iter().map(|r| r.0).sum();
            assert!(sum * rd < 0.0, "{name} x = {}", s.x);
            assert!((sum + rd).abs() <= 1e-8 * rd.abs(), "{name} x = {}", s.x);
            assert!(s.incompatible);
        }
    }
    // H1 carries the denominator twice: the Eq0 branch is exactly w² = −2ρ_D
    let m = registry_metric("h1-rev");
    let w = revolution_fastpath(sys(), &m, &lookup("h1-rev").unwrap().analysis_domain(), 10, 1e-3).unwrap();
    for s in &w.samples {
        let rd = s.denominator_radicand;
        assert!(s.eq0_radicands.iter().any(|r| (r.0 - rd).abs() <= 1e-8 * rd.abs()));
        assert!(s.eq0_radicands.iter().any(|r| (r.0 + 2.0 * rd).abs() <= 1e-8 * rd.abs()));
    }
}

#[test]
fn revolution_fast_path_refuses_constant_curvature() {
    let m = registry_metric("flat");
    let r = revolution_fastpath(sys(), &m, &Domain::new(-1.0, 1.0, -1.0, 1.0).unwrap(), 10, 1e-3);
    assert!(matches!(r, Err(CriterionError::ConstantCurvature)));
}

#[test]
fn psi_factor_divides_every_member() {
    let m = registry_metric("bessel");
    let pts: Vec<(f64, f64)> = (0..10).map(|i| (0.1 + 0.09 * i as f64, 0.5 + 0.15 * i as f64)).chain([(0.5, 1.0)]).collect();
    let r = psi_factor_check(sys(), &m, &pts, 1e-8).unwrap();
    assert!(r.ok, "{r:?}");
    for p in &r.points {
        assert!(p.remainders.iter().all(|v| *v <= 1e-8), "{p:?}");
        assert_eq!(p.quotient_degree, 5);
        assert!(p.psi_at_w.abs() <= 1e-10);
        assert!((p.w - bessel_w(p.x, p.y)).abs() <= 1e-12);
    }
}

fn bessel_trajectories(n: usize, seed: u64) -> (MetricSpec, Vec<Trajectory>) {
    let m = registry_metric("bessel");
    let region = Domain::new(0.1, 1.0, 0.5, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trs = (0..n).map(|_| integrate(&m, random_state(&m, &region, &mut rng).unwrap(), 3.0, &IntegratorConfig::default()).unwrap()).collect();
    (m, trs)
}

#[test]
fn mobius_orbit_of_bessel_integral() {
    let (_, trs) = bessel_trajectories(6, 21);
    let f = FractionalLinearIntegral::new(example::p(), example::q());
    let id = mobius_orbit_check(&f, [[1.0, 0.0], [0.0, 1.0]], &trs, 1e-6).unwrap();
    assert!(id.ok);
    assert_eq!(id.original, id.transformed);
    let swap = mobius_orbit_check(&f, [[0.0, 1.0], [1.0, 0.0]], &trs, 1e-6).unwrap();
    assert!(swap.ok && swap.transformed <= 1e-8, "{swap:?}");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut done = 0;
    while done < 10 {
        let mat: [[f64; 2]; 2] = [[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)], [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]];
        if (mat[0][0] * mat[1][1] - mat[0][1] * mat[1][0]).abs() < 0.1 {
            continue;
        }
        let r = mobius_orbit_check(&f, mat, &trs, 1e-6).unwrap();
        assert!(r.ok, "{mat:?}: {r:?}");
        done += 1;
    }
}

#[test]
fn mobius_rejects_singular_matrix() {
    let f = FractionalLinearIntegral::new(example::p(), example::q());
    assert!(matches!(mobius_transform(&f, [[1.0, 2.0], [2.0, 4.0]]), Err(CriterionError::SingularMatrix(_))));
}

#[test]
fn mobius_transform_matches_pointwise_formula() {
    let f = FractionalLinearIntegral::new(example::p(), example::q());
    let mat = [[0.5, -1.5], [2.0, 0.25]];
    let g = mobius_transform(&f, mat).unwrap();
    let s = geodrat_core::flow::PhaseState::new(0.4, 1.1, 0.3, -0.7);
    let (p, q) = f.pair(&s).unwrap();
    let (gp, gq) = g.pair(&s).unwrap();
    assert!((gp - (0.5 * p - 1.5 * q)).abs() <= 1e-14);
    assert!((gq - (2.0 * p + 0.25 * q)).abs() <= 1e-14);
}

/// Every registry verdict at the default settings, and for each certified integral an
/// independent conservation run on fresh trajectories.
#[test]
fn registry_verdicts_are_sound() {
    for e in REGISTRY {
        let m = e.metric(&[]).unwrap();
        let g = Grid::new(e.analysis_domain(), 21, 21);
        let d = decide(sys(), &m, &g, &DecideConfig::default()).unwrap();
        let want = match e.expected {
            Expected::ConstantCurvature => Verdict::ConstantCurvature,
            Expected::Exists => Verdict::Exists,
            Expected::None => Verdict::None,
        };
        assert_eq!(d.report.verdict, want, "{}: {:?}", e.name, d.report);
        match d.report.verdict {
            Verdict::Exists => {
                let patch = m.with_domain(g.domain).unwrap();
                let region = Domain::new(
                    g.domain.x_min + 0.3 * g.domain.width(),
                    g.domain.x_max - 0.3 * g.domain.width(),
                    g.domain.y_min + 0.3 * g.domain.height(),
                    g.domain.y_max - 0.3 * g.domain.height(),
                )
                .unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(99);
                for f in &d.integrals {
                    for _ in 0..4 {
                        let tr = integrate(&patch, random_state(&patch, &region, &mut rng).unwrap(), 0.4, &IntegratorConfig::default()).unwrap();
                        if let Ok(r) = conservation_report(f, &tr, 1e-3) {
                            assert!(r.max_drift <= 1e-5, "{}: {r:?}", e.name);
                        }
                    }
                }
            }
            Verdict::None => assert!(d.integrals.is_empty() && !d.report.branches.iter().any(|b| b.drift.is_some_and(|x| x <= 1e-6))),
            _ => {}
        }
    }
}

#[test]
fn eps_families_switch_with_parameter() {
    for name in ["h1eps", "h2eps"] {
        let e = lookup(name).unwrap();
        let g = Grid::new(e.analysis_domain(), 21, 21);
        let at = |eps: f64| decide(sys(), &e.metric(&[("eps".into(), eps)]).unwrap(), &g, &DecideConfig::default()).unwrap().report;
        let yes = at(4.0);
        assert_eq!(yes.verdict, Verdict::Exists, "{name}: {yes:?}");
        assert_eq!(yes.moduli, Moduli::Points(1));
        let no = at(1.2);
        assert_eq!(no.verdict, Verdict::None, "{name}: {no:?}");
        assert!(no.phi.unwrap().min >= 1e-3);
    }
}
