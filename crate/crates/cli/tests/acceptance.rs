//! Acceptance suite: one pass/fail line per criterion, printed straight to stderr so the
//! lines survive output capture.

use std::io::Write;

use geodrat_cli::{cmd_analyze, cmd_derive, cmd_rkv, cmd_verify, IntegralSpec, RkvMode, RkvRequest, RunConfig};
use geodrat_core::criterion::{decide, mobius_orbit_check, psi_factor_check, CompiledSystem, DecideConfig, DerivedSystem, Moduli, Verdict};
use geodrat_core::expr::{parse_expression, EvalContext};
use geodrat_core::flow::{integrate, random_state, FractionalLinearIntegral, IntegratorConfig, PhaseState};
use geodrat_core::geometry::{Domain, Grid, MetricSpec};
use geodrat_core::killing::{bracket_residual, example, gauge_transform, killing_dimension, rkv_residuals, Cofactor, CovectorField};
use geodrat_core::registry::lookup;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BESSEL_PATCH: [f64; 4] = [0.1, 1.0, 0.5, 2.0];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn report(n: usize, title: &str, o: &Outcome) {
    let status = if o.pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n} [{status}] {title}: {}", o.detail);
}

/// `J₀`, `J₁` by their power series; independent of the library implementation.
fn bessel_series(y: f64) -> (f64, f64) {
    let q = -0.25 * y * y;
    let (mut t0, mut t1) = (1.0, 0.5 * y);
    let (mut s0, mut s1) = (t0, t1);
    for k in 1..60 {
        let k = k as f64;
        t0 *= q / (k * k);
        t1 *= q / (k * (k + 1.0));
        s0 += t0;
        s1 += t1;
    }
    (s0, s1)
}

/// `a = J₀J₁ / (y(J₀² + J₁²))`.
fn bessel_a(y: f64) -> f64 {
    let (a, b) = bessel_series(y);
    a * b / (y * (a * a + b * b))
}

fn bessel_metric() -> MetricSpec {
    lookup("bessel").unwrap().metric(&[]).unwrap()
}

fn patch() -> Domain {
    Domain::new(BESSEL_PATCH[0], BESSEL_PATCH[1], BESSEL_PATCH[2], BESSEL_PATCH[3]).unwrap()
}

fn random_states(m: &MetricSpec, n: usize, seed: u64) -> Vec<PhaseState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_state(m, &patch(), &mut rng).unwrap()).collect()
}

fn example_cfg(name: &str, params: &[(&str, f64)]) -> RunConfig {
    let mut cfg = RunConfig::for_example(name);
    for (k, v) in params {
        cfg.params.insert(k.to_string(), *v);
    }
    cfg
}

fn criterion_1() -> Outcome {
    let d = cmd_derive().unwrap();
    let block = d.checksum_block();
    let anchors = [
        "Eq0: degree 6, leading 5400",
        "Eq0: w^5, w^4, w^3 coefficients vanish",
        "EQ1 denominator: 30*k_x*w^2 + ...",
        "w_x numerator leading term: 180*e^(-2λ)*w^5",
        "w_y numerator leading term: (18*k_xy - 18*λ_x*k_y + 42*λ_y*k_x)*w^3",
        "EQ0 member degrees: {10, 8, 7, 6}",
    ];
    let missing: Vec<&str> = anchors.iter().copied().filter(|a| !block.contains(a)).collect();
    let mut degrees = d.degrees;
    degrees.sort_unstable();
    let pass = d.ok() && missing.is_empty() && degrees == [6, 7, 8, 10];
    outcome(pass, format!("degrees {:?}, {} checksum lines ok, missing anchors {missing:?}", d.degrees, d.lines.len()))
}

fn criterion_2() -> Outcome {
    let out = cmd_analyze(&example_cfg("bessel", &[])).unwrap();
    let r = &out.report;
    let on_patch = out.grid.nx == 21 && out.grid.ny == 21 && out.grid.domain == patch();
    let verdict_ok = r.verdict == Verdict::Exists && r.moduli == Moduli::Points(1) && out.cofactors.len() == 1;
    let mut err = f64::INFINITY;
    if let (Some(c), Some((_, y_seed))) = (out.cofactors.first(), r.seed_point) {
        // the reconstruction fixes a = 0 on the seed row, which is a gauge shift in x alone
        let g = Grid::new(out.grid.domain, out.grid.nx, out.grid.ny);
        let (mut worst, mut scale) = (0.0f64, 0.0f64);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let truth = bessel_a(g.y(j));
                worst = worst.max((c.a[g.index(i, j)] + bessel_a(y_seed) - truth).abs());
                scale = scale.max(truth.abs());
            }
        }
        err = worst / scale;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let pts: Vec<(f64, f64)> = (0..20).map(|_| (rng.random_range(0.1..1.0), rng.random_range(0.5..2.0))).collect();
    let sys = CompiledSystem::new(DerivedSystem::derive().unwrap());
    let psi = psi_factor_check(&sys, &bessel_metric(), &pts, 1e-8).unwrap();
    let pass = on_patch && verdict_ok && err <= 1e-6 && psi.ok;
    outcome(
        pass,
        format!("verdict {:?} moduli {:?}, cofactor relative error {err:.2e} (≤ 1e-6), Ψ₁ remainder {:.2e} (≤ 1e-8)", r.verdict, r.moduli, psi.max_remainder),
    )
}

fn criterion_3() -> Outcome {
    let cfg = example_cfg("bessel", &[]);
    let exact = cmd_verify(&cfg, &IntegralSpec::known("bessel").unwrap(), None).unwrap();
    let mut bent = IntegralSpec::known("bessel").unwrap();
    bent.u = format!("{} + 0.01*x", bent.u);
    let perturbed = cmd_verify(&cfg, &bent, None).unwrap();
    let s = &exact.summary;
    let p = &perturbed.summary;
    let pass = s.trajectories == 100
        && s.failed == 0
        && cfg.batch.t_end == 10.0
        && s.max_drift <= 1e-8
        && s.max_energy_drift <= 1e-9
        && p.failed == 0
        && p.median_drift >= 1e-3;
    outcome(
        pass,
        format!(
            "{} trajectories to t = {}: F drift {:.2e} (≤ 1e-8), H drift {:.2e} (≤ 1e-9); perturbed median drift {:.2e}, max {:.2e} (≥ 1e-3)",
            s.trajectories, cfg.batch.t_end, s.max_drift, s.max_energy_drift, p.median_drift, p.max_drift
        ),
    )
}

fn criterion_4() -> Outcome {
    let m = bessel_metric();
    let l = example::native_cofactor();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut pointwise, mut bracket) = (0.0f64, 0.0f64);
    for r in [example::p(), example::q()] {
        for _ in 0..20 {
            let (x, y) = (rng.random_range(0.1..1.0), rng.random_range(0.5..2.0));
            pointwise = rkv_residuals(&m, &r, &l, x, y).unwrap().iter().fold(pointwise, |a, v| a.max(v.abs()));
        }
        for s in random_states(&m, 20, 40) {
            bracket = bracket.max(bracket_residual(&m, &r, &l, &s).unwrap().abs());
        }
    }
    outcome(pointwise <= 1e-10 && bracket <= 1e-10, format!("defining residuals {pointwise:.2e}, bracket residual {bracket:.2e} (≤ 1e-10)"))
}

fn criterion_5() -> Outcome {
    let h2 = cmd_analyze(&example_cfg("h2", &[("b", 1.0)])).unwrap();
    let h2_min = h2.report.phi.as_ref().map(|p| p.min).unwrap_or(f64::NAN);
    let h2_ok = h2.report.verdict == Verdict::None && h2_min >= 1e-3;

    let fast = cmd_analyze(&example_cfg("rev-x2", &[])).unwrap();
    let general = cmd_analyze(&RunConfig { fast_path: false, ..example_cfg("rev-x2", &[]) }).unwrap();
    let rev_min = general.report.phi.as_ref().map(|p| p.min).unwrap_or(f64::NAN);
    let witness = fast.report.revolution.as_ref().is_some_and(|w| w.incompatible_everywhere);
    let rev_ok = fast.report.verdict == Verdict::None && general.report.verdict == Verdict::None && witness && rev_min >= 1e-3;
    outcome(
        h2_ok && rev_ok,
        format!(
            "h2: {:?} with Φ min {h2_min:.3e}; λ = x²: fast path {:?} (witness {witness}), general {:?} with Φ min {rev_min:.3e}",
            h2.report.verdict, fast.report.verdict, general.report.verdict
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for name in ["flat", "sphere"] {
        let out = cmd_analyze(&example_cfg(name, &[])).unwrap();
        let entry = lookup(name).unwrap();
        let m = entry.metric(&[]).unwrap();
        let dim = killing_dimension(&m, &Grid::new(entry.analysis_domain(), 21, 21), 1e-6).unwrap();
        let ok = out.report.verdict == Verdict::ConstantCurvature && out.report.moduli == Moduli::Rp2 && dim.dim == 3 && dim.gap >= 1e3;
        pass &= ok;
        detail.push(format!("{name}: {:?}/{:?}, rank {} gap {:.2e}", out.report.verdict, out.report.moduli, dim.dim, dim.gap));
    }
    outcome(pass, detail.join("; "))
}

fn criterion_7() -> Outcome {
    let cfg = example_cfg("bessel", &[]);
    let given = cmd_rkv(&cfg, &RkvRequest::default()).unwrap();
    let dim = given.dimension.as_ref().map(|d| d.dim).unwrap_or(usize::MAX);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut random_dims = Vec::new();
    for _ in 0..5 {
        let c: [f64; 6] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let req = RkvRequest {
            mode: RkvMode::GivenCofactor,
            a: Some(format!("{} + {}*x + {}*y^2", c[0], c[1], c[2])),
            b: Some(format!("{} + {}*x*y + {}*x^2", c[3], c[4], c[5])),
            ..RkvRequest::default()
        };
        random_dims.push(cmd_rkv(&cfg, &req).unwrap().dimension.map(|d| d.dim).unwrap_or(usize::MAX));
    }
    let pass = dim == 2 && random_dims.iter().all(|&d| d == 0);
    outcome(pass, format!("Example-1 cofactor: dimension {dim}; random cofactors: dimensions {random_dims:?}"))
}

fn criterion_8() -> Outcome {
    let m = bessel_metric();
    let ctx = EvalContext::new();
    let states = random_states(&m, 20, 80);
    // gauge: the bracket residual picks up exactly the factor e^f, for solutions and non-solutions
    let gauges = [example::GAUGE_F, "0.3*sin(x*y) + 0.2*x^2 - y/5"];
    let pairs = [
        (example::p(), example::native_cofactor()),
        (CovectorField::parse("x*y + 1", "cos(x) - y^2", &ctx).unwrap(), Cofactor::parse("x - 2*y", "x*y^2", &ctx).unwrap()),
    ];
    let mut gauge_err = 0.0f64;
    for g in gauges {
        let f = parse_expression(g).unwrap();
        for (r, l) in &pairs {
            let (r2, l2) = gauge_transform(r, l, &f, &ctx);
            for s in &states {
                let ef = geodrat_core::expr::evaluate(&f, s.x, s.y, &ctx).unwrap().exp();
                let before = bracket_residual(&m, r, l, s).unwrap();
                let after = bracket_residual(&m, &r2, &l2, s).unwrap();
                gauge_err = gauge_err.max((after - ef * before).abs() / (1.0 + (ef * before).abs()));
            }
        }
    }
    let f = FractionalLinearIntegral::new(example::p(), example::q());
    let trajectories: Vec<_> = random_states(&m, 10, 81).into_iter().map(|s| integrate(&m, s, 10.0, &IntegratorConfig::default()).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut ratios = Vec::new();
    let mut mobius_ok = true;
    while ratios.len() < 10 {
        let mat: [[f64; 2]; 2] = std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-2.0..2.0)));
        if (mat[0][0] * mat[1][1] - mat[0][1] * mat[1][0]).abs() < 0.1 {
            continue;
        }
        let rep = mobius_orbit_check(&f, mat, &trajectories, 1e-6).unwrap();
        mobius_ok &= rep.ok;
        ratios.push(rep.transformed / rep.original.max(1e-300));
    }
    let worst = ratios.iter().copied().fold(0.0f64, f64::max);
    outcome(gauge_err <= 1e-9 && mobius_ok, format!("gauge defect {gauge_err:.2e} (≤ 1e-9); Möbius drift ratio at most {worst:.2} over 10 matrices (≤ 10)"))
}

fn criterion_9() -> Outcome {
    let at4 = cmd_analyze(&example_cfg("h2eps", &[("eps", 4.0)])).unwrap();
    let at12 = cmd_analyze(&example_cfg("h2eps", &[("eps", 1.2)])).unwrap();
    let same_grid = at4.grid.domain == at12.grid.domain && at4.grid.nx == at12.grid.nx;
    let med = |o: &geodrat_cli::AnalyzeOutput| o.report.phi.as_ref().map(|p| p.median).unwrap_or(f64::NAN);
    let accept = matches!(at4.report.verdict, Verdict::Exists | Verdict::Inconclusive);
    let pass = same_grid && accept && at12.report.verdict == Verdict::None;
    outcome(
        pass,
        format!(
            "ε = 4: {:?} {:?}, Φ median {:.2e}; ε = 1.2: {:?}, Φ median {:.2e}",
            at4.report.verdict,
            at4.report.moduli,
            med(&at4),
            at12.report.verdict,
            med(&at12)
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("derivation checksums", criterion_1),
        ("Bessel example end to end", criterion_2),
        ("conservation of F", criterion_3),
        ("relative Killing residuals", criterion_4),
        ("negative verdicts", criterion_5),
        ("constant curvature", criterion_6),
        ("dimension alternative", criterion_7),
        ("gauge and Möbius invariance", criterion_8),
        ("eps family (stretch)", criterion_9),
    ];
    let mut failed = Vec::new();
    for (k, (title, run)) in criteria.iter().enumerate() {
        let o = run();
        report(k + 1, title, &o);
        // the stretch criterion is reported but does not gate the suite
        if !o.pass && k + 1 < 9 {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn analyze_report_is_deterministic() {
    let cfg = example_cfg("bessel", &[]);
    let a = geodrat_cli::to_json("analyze", Some(&cfg), &cmd_analyze(&cfg).unwrap()).unwrap();
    let b = geodrat_cli::to_json("analyze", Some(&cfg), &cmd_analyze(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn decide_defaults_match_cli_defaults() {
    let cli = example_cfg("bessel", &[]).decide_config();
    let core = DecideConfig::default();
    assert_eq!(cli.phi, core.phi);
    assert_eq!(cli.rkv_tol, core.rkv_tol);
    let m = bessel_metric();
    let sys = CompiledSystem::new(DerivedSystem::derive().unwrap());
    let d = decide(&sys, &m, &Grid::new(patch(), 21, 21), &core).unwrap();
    assert_eq!(d.report.verdict, Verdict::Exists);
}
