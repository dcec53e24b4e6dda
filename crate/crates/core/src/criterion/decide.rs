//! The decision pipeline, the obstruction for metrics of revolution, and checks on the
//! Bessel factorization and on the Möbius orbit of an integral.

use std::sync::Arc;

use nalgebra::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::branch::{propagate_branch, reconstruct_cofactor, BranchCofactor, BranchOptions};
use super::phi::{candidates_at, phi_grid, phi_stats_with, PhiBands, PhiStats, PhiVerdict, WCandidate};
use super::specialize::CompiledSystem;
use super::univariate::UniPoly;
use super::CriterionError;
use crate::expr::bessel::{j0, j1};
use crate::flow::{conservation_report, integrate, random_state, FlowError, FractionalLinearIntegral, IntegratorConfig, Trajectory};
use crate::geometry::{is_constant_curvature, is_revolution, revolution_invariants, CurvatureSurvey, Domain, Grid, InvariantFrame, MetricSpec};
use crate::killing::{rkv_dimension, solve_rkv_given_cofactor, CovectorField, DimensionReport, ExprField, Field, ProductField, ScalarField, SumField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ConstantCurvature,
    Exists,
    None,
    Inconclusive,
}

/// Integrals up to Möbius transformations: the whole projective plane, finitely many
/// points, none, or undetermined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Moduli {
    Rp2,
    Points(usize),
    Empty,
    Unknown,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct VerifyConfig {
    pub trajectories: usize,
    pub t_end: f64,
    pub drift_tol: f64,
    pub q_min: f64,
    pub seed: u64,
    /// Fraction of the patch trimmed from each side when drawing start points.
    pub margin: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { trajectories: 8, t_end: 0.5, drift_tol: 1e-6, q_min: 1e-3, seed: 7, margin: 0.2 }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecideConfig {
    pub curvature_tol: f64,
    pub curvature_samples: usize,
    pub revolution_tol: f64,
    pub revolution_samples: usize,
    pub fast_path: bool,
    pub phi: PhiBands,
    pub candidate_tol: f64,
    pub rkv_tol: f64,
    /// Upper bound on nodes per axis when refining a branch.
    pub max_refined_nodes: usize,
    pub branch: BranchOptions,
    pub verify: VerifyConfig,
    #[serde(skip)]
    pub integrator: IntegratorConfig,
}

impl Default for DecideConfig {
    fn default() -> Self {
        DecideConfig {
            curvature_tol: 1e-8,
            curvature_samples: 15,
            revolution_tol: 1e-10,
            revolution_samples: 10,
            fast_path: true,
            phi: PhiBands::default(),
            candidate_tol: 1e-6,
            rkv_tol: 1e-4,
            max_refined_nodes: 81,
            branch: BranchOptions::default(),
            verify: VerifyConfig::default(),
            integrator: IntegratorConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CofactorPoint {
    pub x: f64,
    pub y: f64,
    pub a: f64,
    pub w: f64,
    /// `(u, v)` of `P` and of `Q`.
    pub p: (f64, f64),
    pub q: (f64, f64),
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchStatus {
    Accepted,
    Lost(String),
    Rejected(String),
    NotConserved(String),
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchReport {
    pub seed: f64,
    /// Grid the branch was finally resolved on.
    pub grid: (usize, usize),
    pub status: BranchStatus,
    pub max_snap: Option<f64>,
    pub max_member_residual: Option<f64>,
    pub consistency: Option<f64>,
    pub dimension: Option<DimensionReport>,
    pub drift: Option<f64>,
    pub samples: Vec<CofactorPoint>,
}

impl BranchReport {
    fn new(seed: f64, grid: &Grid) -> BranchReport {
        BranchReport {
            seed,
            grid: (grid.nx, grid.ny),
            status: BranchStatus::Lost(String::new()),
            max_snap: None,
            max_member_residual: None,
            consistency: None,
            dimension: None,
            drift: None,
            samples: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RevolutionSample {
    pub x: f64,
    pub invariants: InvariantFrame,
    /// `w²` on which the EQ1 denominator vanishes.
    pub denominator_radicand: f64,
    /// The same from `e^{2λ}(k_xx + 3 e^λ j k_x)/30`.
    pub denominator_radicand_closed: f64,
    /// Remaining roots `w²` of Eq0 after removing the denominator factor, as `(re, im)`.
    pub eq0_radicands: Vec<(f64, f64)>,
    /// `|Eq0 mod D| / |Eq0|` in the variable `w²`.
    pub division_remainder: f64,
    /// Relative size of the EQ1 numerators on the vanishing-denominator branch.
    pub denominator_branch_residual: Option<f64>,
    /// Smallest member residual over the real roots of the Eq0 branch.
    pub eq0_branch_residual: Option<f64>,
    pub incompatible: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RevolutionWitness {
    pub samples: Vec<RevolutionSample>,
    pub tol: f64,
    pub incompatible_everywhere: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub metric: String,
    pub domain: Domain,
    pub grid: (usize, usize),
    pub verdict: Verdict,
    pub moduli: Moduli,
    pub curvature: CurvatureSurvey,
    pub revolution: Option<RevolutionWitness>,
    pub phi: Option<PhiStats>,
    pub seed_point: Option<(f64, f64)>,
    pub candidates: Vec<WCandidate>,
    pub branches: Vec<BranchReport>,
    pub notes: Vec<String>,
}

/// A report together with the integrals it certified.
pub struct Decision {
    pub report: CriterionReport,
    pub integrals: Vec<FractionalLinearIntegral>,
    pub cofactors: Vec<BranchCofactor>,
}

fn even_part(p: &UniPoly) -> (Vec<f64>, f64) {
    let c = &p.c;
    let scale = p.max_abs().max(f64::MIN_POSITIVE);
    let odd = c.iter().skip(1).step_by(2).fold(0.0f64, |m, v| m.max(v.abs())) / scale;
    (c.iter().step_by(2).copied().collect(), odd)
}

fn numerator_residual(p: &UniPoly, w: f64) -> f64 {
    let mag = p.magnitude(w.abs());
    if mag == 0.0 {
        0.0
    } else {
        p.eval(w).abs() / mag
    }
}

/// Witness that a metric of revolution carries no fractional-linear integral.
///
/// At each sample abscissa, `w` must either keep the EQ1 denominator at zero, forcing
/// `w² = ρ_D` and the EQ1 numerators to vanish there, or be a real root of Eq0 away from
/// the denominator, where the other three members must vanish too. Both alternatives are
/// evaluated; the metric is obstructed where both fail by more than `tol`.
pub fn revolution_fastpath(sys: &CompiledSystem, m: &MetricSpec, domain: &Domain, samples: usize, tol: f64) -> Result<RevolutionWitness, CriterionError> {
    let patch = m.with_domain(*domain)?;
    let y = domain.center().1;
    let n = samples.max(2);
    let mut out = Vec::with_capacity(n);
    let mut k_range = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let x = domain.x_min + (i as f64 + 0.5) / n as f64 * domain.width();
        let inv = revolution_invariants(&patch, x)?;
        k_range = (k_range.0.min(inv.k), k_range.1.max(inv.k));
        let s = sys.specialize(&patch, x, y)?;
        let (den, _) = even_part(&s.den);
        let rad_d = if den.len() >= 2 && den[1] != 0.0 { -den[0] / den[1] } else { f64::NAN };
        let jets = patch.jets(x, y, 0, None)?;
        let closed = jets.e2l * (inv.k_xx + 3.0 * jets.lambda.value().exp() * inv.j * inv.k_x) / 30.0;

        let (e, _) = even_part(&s.eq0);
        // synthetic division of Eq0(s), s = w², by (s − ρ_D)
        let mut q = vec![0.0; e.len().saturating_sub(1)];
        let mut carry = 0.0;
        for k in (1..e.len()).rev() {
            carry = e[k] + carry * rad_d;
            q[k - 1] = carry;
        }
        let remainder = (e[0] + carry * rad_d).abs() / e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let quotient = UniPoly::new(q);
        let radicands: Vec<Complex<f64>> = quotient.roots();

        let d_res = (rad_d > 0.0).then(|| {
            let w = rad_d.sqrt();
            numerator_residual(&s.nx, w).max(numerator_residual(&s.ny, w))
        });
        let near_d = |r: &Complex<f64>| (r.re - rad_d).abs() <= 1e-6 * (1.0 + rad_d.abs());
        let real_s: Vec<f64> = radicands.iter().filter(|r| r.im.abs() <= 1e-7 * (1.0 + r.re.abs()) && r.re > 0.0 && !near_d(r)).map(|r| r.re).collect();
        let e_res = (!real_s.is_empty()).then(|| {
            real_s
                .iter()
                .flat_map(|s2| [s2.sqrt(), -s2.sqrt()])
                .map(|w| s.residuals(w)[1..].iter().copied().fold(0.0, f64::max))
                .fold(f64::INFINITY, f64::min)
        });
        let incompatible = d_res.is_none_or(|r| r > tol) && e_res.is_none_or(|r| r > tol);
        out.push(RevolutionSample {
            x,
            invariants: inv,
            denominator_radicand: rad_d,
            denominator_radicand_closed: closed,
            eq0_radicands: radicands.iter().map(|r| (r.re, r.im)).collect(),
            division_remainder: remainder,
            denominator_branch_residual: d_res,
            eq0_branch_residual: e_res,
            incompatible,
        });
    }
    if k_range.1 - k_range.0 <= 1e-12 * (1.0 + k_range.0.abs()) {
        return Err(CriterionError::ConstantCurvature);
    }
    let all = out.iter().all(|s| s.incompatible);
    Ok(RevolutionWitness { samples: out, tol, incompatible_everywhere: all })
}

fn shrink(d: &Domain, margin: f64) -> Domain {
    let (dx, dy) = (margin * d.width(), margin * d.height());
    Domain { x_min: d.x_min + dx, x_max: d.x_max - dx, y_min: d.y_min + dy, y_max: d.y_max - dy }
}

/// Largest conservation drift of `f` on trajectories started in the middle of the patch.
fn verify_drift(patch: &MetricSpec, f: &FractionalLinearIntegral, cfg: &VerifyConfig, integrator: &IntegratorConfig) -> Result<f64, CriterionError> {
    let region = shrink(&patch.domain, cfg.margin);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst = 0.0f64;
    let mut measured = 0;
    for _ in 0..cfg.trajectories {
        let s0 = random_state(patch, &region, &mut rng)?;
        let tr = integrate(patch, s0, cfg.t_end, integrator)?;
        match conservation_report(f, &tr, cfg.q_min) {
            Ok(r) => {
                worst = worst.max(r.max_drift);
                measured += 1;
            }
            Err(FlowError::QVanishes) => {}
            Err(e) => return Err(e.into()),
        }
    }
    if measured == 0 {
        return Err(FlowError::QVanishes.into());
    }
    Ok(worst)
}

fn samples(grid: &Grid, cof: &BranchCofactor, p: &CovectorField, q: &CovectorField) -> Result<Vec<CofactorPoint>, CriterionError> {
    let mut out = Vec::new();
    for k in 0..5 {
        let t = (k as f64 + 0.5) / 5.0;
        let x = grid.domain.x_min + t * grid.domain.width();
        let y = grid.domain.y_min + t * grid.domain.height();
        out.push(CofactorPoint {
            x,
            y,
            a: cof.a.value(x, y)?,
            w: cof.w.value(x, y)?,
            p: (p.u.value(x, y)?, p.v.value(x, y)?),
            q: (q.u.value(x, y)?, q.v.value(x, y)?),
        });
    }
    Ok(out)
}

struct Certified {
    integral: FractionalLinearIntegral,
    cofactor: BranchCofactor,
}

fn follow_branch(sys: &CompiledSystem, patch: &MetricSpec, grid: &Grid, base: (usize, usize), w0: f64, cfg: &DecideConfig) -> (BranchReport, Option<Certified>) {
    let mut rep = BranchReport::new(w0, grid);
    // the stencil check on a_y is resolution-limited where w is steep, so an unresolved
    // check is retried on a grid with half the spacing
    let mut grid = *grid;
    let mut base = base;
    let cof = loop {
        let branch = match propagate_branch(sys, patch, &grid, base, w0, &cfg.branch) {
            Ok(b) => b,
            Err(e) => {
                rep.status = BranchStatus::Lost(e.to_string());
                return (rep, None);
            }
        };
        rep.grid = (grid.nx, grid.ny);
        rep.max_snap = Some(branch.max_snap);
        rep.max_member_residual = Some(branch.max_member_residual);
        match reconstruct_cofactor(&branch, base.1) {
            Ok(c) => break c,
            Err(CriterionError::Inconsistent(c)) if 2 * grid.nx - 1 <= cfg.max_refined_nodes && 2 * grid.ny - 1 <= cfg.max_refined_nodes => {
                rep.consistency = Some(c);
                grid = Grid::new(grid.domain, 2 * grid.nx - 1, 2 * grid.ny - 1);
                base = (2 * base.0, 2 * base.1);
            }
            Err(e) => {
                rep.status = BranchStatus::Rejected(e.to_string());
                return (rep, None);
            }
        }
    };
    let grid = &grid;
    rep.consistency = Some(cof.consistency);
    let dim = match rkv_dimension(patch, &cof, grid, cfg.rkv_tol) {
        Ok(d) => d,
        Err(e) => {
            rep.status = BranchStatus::Rejected(e.to_string());
            return (rep, None);
        }
    };
    let ok_dim = dim.dim == 2;
    rep.dimension = Some(dim);
    if !ok_dim {
        rep.status = BranchStatus::Rejected("relative Killing vectors with this cofactor do not form a plane".into());
        return (rep, None);
    }
    let build = || -> Result<(CovectorField, CovectorField), CriterionError> {
        let p = solve_rkv_given_cofactor(patch, &cof, grid, base, (1.0, 0.0), cfg.branch.substeps)?;
        let q = solve_rkv_given_cofactor(patch, &cof, grid, base, (0.0, 1.0), cfg.branch.substeps)?;
        Ok((p.covector(), q.covector()))
    };
    let (p, q) = match build() {
        Ok(pq) => pq,
        Err(e) => {
            rep.status = BranchStatus::Rejected(e.to_string());
            return (rep, None);
        }
    };
    if let Ok(s) = samples(grid, &cof, &p, &q) {
        rep.samples = s;
    }
    let f = FractionalLinearIntegral::new(p, q);
    match verify_drift(patch, &f, &cfg.verify, &cfg.integrator) {
        Ok(d) if d <= cfg.verify.drift_tol => {
            rep.drift = Some(d);
            rep.status = BranchStatus::Accepted;
            (rep, Some(Certified { integral: f, cofactor: cof }))
        }
        Ok(d) => {
            rep.drift = Some(d);
            rep.status = BranchStatus::NotConserved(format!("drift {d:.3e} exceeds {:.1e}", cfg.verify.drift_tol));
            (rep, None)
        }
        Err(e) => {
            rep.status = BranchStatus::NotConserved(e.to_string());
            (rep, None)
        }
    }
}

/// Runs the criterion on the rectangle of `grid`.
pub fn decide(sys: &CompiledSystem, m: &MetricSpec, grid: &Grid, cfg: &DecideConfig) -> Result<Decision, CriterionError> {
    let patch = m.with_domain(grid.domain)?;
    let curvature = is_constant_curvature(&patch, cfg.curvature_tol, cfg.curvature_samples)?;
    let mut report = CriterionReport {
        metric: m.name.clone(),
        domain: grid.domain,
        grid: (grid.nx, grid.ny),
        verdict: Verdict::Inconclusive,
        moduli: Moduli::Unknown,
        curvature,
        revolution: None,
        phi: None,
        seed_point: None,
        candidates: Vec::new(),
        branches: Vec::new(),
        notes: Vec::new(),
    };
    let mut decision = Decision { report: report.clone(), integrals: Vec::new(), cofactors: Vec::new() };
    if curvature.constant {
        report.verdict = Verdict::ConstantCurvature;
        report.moduli = Moduli::Rp2;
        report.notes.push("constant curvature: every pair of Killing vectors gives an integral".into());
        decision.report = report;
        return Ok(decision);
    }

    if cfg.fast_path && is_revolution(&patch, cfg.revolution_tol)? {
        let witness = revolution_fastpath(sys, &patch, &grid.domain, cfg.revolution_samples, cfg.phi.reject_min)?;
        let done = witness.incompatible_everywhere;
        report.revolution = Some(witness);
        if done {
            report.verdict = Verdict::None;
            report.moduli = Moduli::Empty;
            report.notes.push("metric of revolution: neither the vanishing-denominator branch nor the Eq0 branch is consistent".into());
            decision.report = report;
            return Ok(decision);
        }
        report.notes.push("revolution witness not conclusive at every sample; running the general pipeline".into());
    }

    let points = phi_grid(sys, &patch, grid)?;
    let stats = phi_stats_with(&points, &cfg.phi);
    let verdict = stats.verdict;
    report.phi = Some(stats);
    match verdict {
        PhiVerdict::Nonzero => {
            report.verdict = Verdict::None;
            report.moduli = Moduli::Empty;
            decision.report = report;
            return Ok(decision);
        }
        PhiVerdict::Inconclusive => {
            report.notes.push("Φ statistics fall between the zero and nonzero bands".into());
            decision.report = report;
            return Ok(decision);
        }
        PhiVerdict::Zero => {}
    }

    let base = (grid.nx / 2, grid.ny / 2);
    let (bx, by) = (grid.x(base.0), grid.y(base.1));
    report.seed_point = Some((bx, by));
    let spec = sys.specialize(&patch, bx, by)?;
    let mut cands = candidates_at(&spec, cfg.candidate_tol);
    cands.dedup_by(|a, b| (a.w - b.w).abs() <= 1e-9 * (1.0 + a.w.abs()));
    report.candidates = cands.clone();
    if cands.is_empty() {
        report.verdict = Verdict::None;
        report.moduli = Moduli::Empty;
        report.notes.push("Φ vanishes only through non-real common roots; no real cofactor exists".into());
        decision.report = report;
        return Ok(decision);
    }

    for c in &cands {
        let (rep, cert) = follow_branch(sys, &patch, grid, base, c.w, cfg);
        report.branches.push(rep);
        if let Some(cert) = cert {
            decision.integrals.push(cert.integral);
            decision.cofactors.push(cert.cofactor);
        }
    }
    let accepted = decision.integrals.len();
    let unverified = report.branches.iter().any(|b| matches!(b.status, BranchStatus::NotConserved(_)));
    if accepted > 0 {
        report.verdict = Verdict::Exists;
        report.moduli = Moduli::Points(accepted);
    } else if unverified {
        report.notes.push("a branch passed every algebraic test but conservation could not be confirmed".into());
    } else {
        report.verdict = Verdict::None;
        report.moduli = Moduli::Empty;
        report.notes.push("no candidate root extends to a consistent branch on the patch".into());
    }
    decision.report = report;
    Ok(decision)
}

fn scaled(c: f64, f: &Field) -> Field {
    Arc::new(ProductField(ExprField::constant(c), f.clone()))
}

fn combine(a: f64, p: &Field, b: f64, q: &Field) -> Field {
    Arc::new(SumField(scaled(a, p), scaled(b, q)))
}

/// `(αP + βQ)/(γP + δQ)` for `mat = [[α, β], [γ, δ]]`.
pub fn mobius_transform(f: &FractionalLinearIntegral, mat: [[f64; 2]; 2]) -> Result<FractionalLinearIntegral, CriterionError> {
    let det = mat[0][0] * mat[1][1] - mat[0][1] * mat[1][0];
    let size = mat.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if det.abs() <= 1e-12 * size * size {
        return Err(CriterionError::SingularMatrix(det));
    }
    let row = |r: [f64; 2]| CovectorField::new(combine(r[0], &f.p.u, r[1], &f.q.u), combine(r[0], &f.p.v, r[1], &f.q.v));
    Ok(FractionalLinearIntegral::new(row(mat[0]), row(mat[1])))
}

#[derive(Clone, Debug, Serialize)]
pub struct MobiusReport {
    pub original: f64,
    pub transformed: f64,
    pub ok: bool,
}

fn drift_on(f: &FractionalLinearIntegral, trajectories: &[Trajectory], q_min: f64) -> Result<f64, CriterionError> {
    let mut worst = 0.0f64;
    for tr in trajectories {
        match conservation_report(f, tr, q_min) {
            Ok(r) => worst = worst.max(r.max_drift),
            Err(FlowError::QVanishes) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(worst)
}

/// Drift floor below which both integrals count as exactly conserved.
pub const MOBIUS_FLOOR: f64 = 1e-12;

/// Whether the Möbius image of `f` is conserved as well as `f` itself (within a factor 10).
pub fn mobius_orbit_check(f: &FractionalLinearIntegral, mat: [[f64; 2]; 2], trajectories: &[Trajectory], q_min: f64) -> Result<MobiusReport, CriterionError> {
    let g = mobius_transform(f, mat)?;
    let original = drift_on(f, trajectories, q_min)?;
    let transformed = drift_on(&g, trajectories, q_min)?;
    Ok(MobiusReport { original, transformed, ok: transformed <= 10.0 * original.max(MOBIUS_FLOOR) })
}

#[derive(Clone, Debug, Serialize)]
pub struct PsiPoint {
    pub x: f64,
    pub y: f64,
    /// `|remainder| / |dividend|` for Eq0, Eq0', Eq0'', Eq0''' divided by `Ψ₁`.
    pub remainders: [f64; 4],
    /// Degree of `Eq0 / Ψ₁`.
    pub quotient_degree: usize,
    /// Closed-form `w` of the integral and `Ψ₁` there.
    pub w: f64,
    pub psi_at_w: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PsiReport {
    pub points: Vec<PsiPoint>,
    pub max_remainder: f64,
    pub tol: f64,
    pub ok: bool,
}

/// `Ψ₁ = y²S²w + y(J₁⁴ − J₀⁴) + 2J₀³J₁` with `S = J₀² + J₁²`.
pub fn psi1(y: f64) -> UniPoly {
    let (a, b) = (j0(y), j1(y));
    let s = a * a + b * b;
    UniPoly::new(vec![y * (b.powi(4) - a.powi(4)) + 2.0 * a.powi(3) * b, y * y * s * s])
}

/// The root of `Ψ₁`, i.e. `a_y` for the cofactor of the Bessel integral.
pub fn bessel_w(y: f64) -> f64 {
    let (a, b) = (j0(y), j1(y));
    let s = a * a + b * b;
    (y * (a.powi(4) - b.powi(4)) - 2.0 * a.powi(3) * b) / (y * y * s * s)
}

/// Divides the specialized EQ0 members of the Bessel metric by `Ψ₁` at `points`.
pub fn psi_factor_check(sys: &CompiledSystem, m: &MetricSpec, points: &[(f64, f64)], tol: f64) -> Result<PsiReport, CriterionError> {
    let mut out = Vec::with_capacity(points.len());
    for &(x, y) in points {
        let s = sys.specialize(m, x, y)?;
        let psi = psi1(y);
        let rem = |p: &UniPoly| {
            let (_, r) = p.div_rem(&psi);
            r.max_abs() / p.max_abs()
        };
        let (q, _) = s.eq0.div_rem(&psi);
        let w = bessel_w(y);
        out.push(PsiPoint {
            x,
            y,
            remainders: [rem(&s.eq0), rem(&s.members[0]), rem(&s.members[1]), rem(&s.members[2])],
            quotient_degree: q.degree(),
            w,
            psi_at_w: psi.eval(w),
        });
    }
    let max_remainder = out.iter().map(|p| p.remainders[0]).fold(0.0, f64::max);
    let ok = max_remainder <= tol && out.iter().all(|p| p.quotient_degree == 5);
    Ok(PsiReport { points: out, max_remainder, tol, ok })
}
