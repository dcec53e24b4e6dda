//! The pipeline behind each verb. Every command returns a serializable result; rendering
//! and file output happen in the caller.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use geodrat_core::criterion::jetpoly::{kv, lam, q, W00};
use geodrat_core::criterion::{decide, CompiledSystem, CriterionReport, DerivedSystem, JetPolynomial, Verdict};
use geodrat_core::expr::{evaluate, parse_expression, EvalContext};
use geodrat_core::flow::{
    independence_check, integrate, random_state, run_batch, write_csv, FractionalLinearIntegral, IndependenceReport, IntegratorConfig, IntegratorStats,
    PhaseState, Trajectory,
};
use geodrat_core::geometry::{Domain, Grid, MetricSpec};
use geodrat_core::killing::{
    characteristic_w, ck_march, example, rkv_dimension, rkv_residuals, solve_rkv_given_cofactor, CkInit, Cofactor, CofactorField, CovectorField,
    DimensionReport, MarchOptions, ScalarField,
};
use geodrat_core::registry::{ExampleEntry, REGISTRY};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Resolved, RunConfig};
use crate::CliError;

/// The derived system, compiled once per process.
pub fn system() -> Result<&'static CompiledSystem, CliError> {
    static SYS: OnceLock<CompiledSystem> = OnceLock::new();
    if let Some(s) = SYS.get() {
        return Ok(s);
    }
    let sys = CompiledSystem::new(DerivedSystem::derive()?);
    Ok(SYS.get_or_init(|| sys))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GridInfo {
    pub domain: Domain,
    pub nx: usize,
    pub ny: usize,
    /// Values are stored row by row: index `j·nx + i` holds node `(x_i, y_j)`.
    pub layout: &'static str,
}

impl GridInfo {
    fn of(g: &Grid) -> GridInfo {
        GridInfo { domain: g.domain, nx: g.nx, ny: g.ny, layout: "row-major in y" }
    }
}

fn nodes(g: &Grid) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0); g.len()];
    for j in 0..g.ny {
        for i in 0..g.nx {
            out[g.index(i, j)] = (g.x(i), g.y(j));
        }
    }
    out
}

fn sample(g: &Grid, f: impl Fn(f64, f64) -> Result<f64, CliError>) -> Result<Vec<f64>, CliError> {
    nodes(g).into_iter().map(|(x, y)| f(x, y)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SampledCofactor {
    /// `a` with `b = 0`; fixed to vanish on the row through the seed point.
    pub a: Vec<f64>,
    /// `w = a_y`.
    pub w: Vec<f64>,
    pub consistency: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SampledPair {
    /// `P = u p + v q`.
    pub p_u: Vec<f64>,
    pub p_v: Vec<f64>,
    /// `Q = u p + v q`.
    pub q_u: Vec<f64>,
    pub q_v: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalyzeOutput {
    pub report: CriterionReport,
    pub grid: GridInfo,
    pub cofactors: Vec<SampledCofactor>,
    pub integrals: Vec<SampledPair>,
}

impl AnalyzeOutput {
    pub fn exit_code(&self) -> i32 {
        match self.report.verdict {
            Verdict::Inconclusive => 2,
            _ => 0,
        }
    }
}

pub fn cmd_analyze(cfg: &RunConfig) -> Result<AnalyzeOutput, CliError> {
    let Resolved { metric, analysis, .. } = cfg.resolve()?;
    let grid = cfg.grid_on(analysis);
    let mut dcfg = cfg.decide_config();
    dcfg.verify.seed = cfg.batch.seed;
    let d = decide(system()?, &metric, &grid, &dcfg)?;
    let mut cofactors = Vec::new();
    for c in &d.cofactors {
        cofactors.push(SampledCofactor {
            a: sample(&grid, |x, y| Ok(c.a.value(x, y)?))?,
            w: sample(&grid, |x, y| Ok(c.w.value(x, y)?))?,
            consistency: c.consistency,
        });
    }
    let mut integrals = Vec::new();
    for f in &d.integrals {
        integrals.push(SampledPair {
            p_u: sample(&grid, |x, y| Ok(f.p.u.value(x, y)?))?,
            p_v: sample(&grid, |x, y| Ok(f.p.v.value(x, y)?))?,
            q_u: sample(&grid, |x, y| Ok(f.q.u.value(x, y)?))?,
            q_v: sample(&grid, |x, y| Ok(f.q.v.value(x, y)?))?,
        });
    }
    Ok(AnalyzeOutput { report: d.report, grid: GridInfo::of(&grid), cofactors, integrals })
}

/// `F = P/Q` with `P = u p + v q` and `Q = w p + r q`, as expression texts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralSpec {
    pub u: String,
    pub v: String,
    pub w: String,
    pub r: String,
}

impl IntegralSpec {
    /// The integral shipped with an example, if any.
    pub fn known(example: &str) -> Option<IntegralSpec> {
        match example {
            "bessel" => Some(IntegralSpec { u: example::P_U.into(), v: example::P_V.into(), w: example::Q_U.into(), r: example::Q_V.into() }),
            "flat" => Some(IntegralSpec { u: "1".into(), v: "0".into(), w: "0".into(), r: "1".into() }),
            _ => None,
        }
    }

    pub fn build(&self, ctx: &EvalContext) -> Result<FractionalLinearIntegral, CliError> {
        Ok(FractionalLinearIntegral::new(CovectorField::parse(&self.u, &self.v, ctx)?, CovectorField::parse(&self.w, &self.r, ctx)?))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryRow {
    pub index: usize,
    pub start: PhaseState,
    pub t_reached: f64,
    pub stats: Option<IntegratorStats>,
    pub drift: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DriftSummary {
    pub trajectories: usize,
    pub failed: usize,
    pub exited: usize,
    pub min_drift: f64,
    pub median_drift: f64,
    pub max_drift: f64,
    pub max_energy_drift: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyOutput {
    pub integral: IntegralSpec,
    pub region: Domain,
    /// Whether `dF` and `dH` are independent at the first start state.
    pub independence: Result<IndependenceReport, String>,
    pub summary: DriftSummary,
    pub trajectories: Vec<TrajectoryRow>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn cmd_verify(cfg: &RunConfig, integral: &IntegralSpec, threads: Option<usize>) -> Result<VerifyOutput, CliError> {
    let Resolved { metric, analysis, .. } = cfg.resolve()?;
    let f = integral.build(&metric.params)?;
    let bcfg = cfg.batch_config(analysis, threads);
    let independence = {
        let mut rng = ChaCha8Rng::seed_from_u64(bcfg.seed);
        rng.set_stream(0);
        random_state(&metric, &analysis, &mut rng)
            .map_err(CliError::from)
            .and_then(|s| Ok(independence_check(&f, &metric, &s, 1e-6)?))
            .map_err(|e| e.to_string())
            .and_then(|r| if r.independent { Ok(r) } else { Err(format!("dF and dH are dependent: singular values {:?}", r.singular_values)) })
    };
    let rows: Vec<TrajectoryRow> = run_batch(&metric, Some(&f), &bcfg)
        .into_iter()
        .map(|r| TrajectoryRow { index: r.index, start: r.start, t_reached: r.t_reached, stats: r.stats, drift: r.drift, error: r.error })
        .collect();
    let drifts: Vec<f64> = rows.iter().filter_map(|r| r.drift).collect();
    let summary = DriftSummary {
        trajectories: rows.len(),
        failed: rows.iter().filter(|r| r.error.is_some()).count(),
        exited: rows.iter().filter(|r| r.stats.as_ref().is_some_and(|s| s.exited)).count(),
        min_drift: drifts.iter().copied().fold(f64::INFINITY, f64::min),
        median_drift: median(drifts.clone()),
        max_drift: drifts.iter().copied().fold(0.0, f64::max),
        max_energy_drift: rows.iter().filter_map(|r| r.stats.as_ref()).map(|s| s.energy_drift).fold(0.0, f64::max),
    };
    Ok(VerifyOutput { integral: integral.clone(), region: analysis, independence, summary, trajectories: rows })
}

impl VerifyOutput {
    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["index", "x", "y", "p", "q", "t_reached", "steps", "energy_drift", "drift", "error"])?;
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.6e}")).unwrap_or_default();
        for r in &self.trajectories {
            let s = r.start;
            w.write_record([
                r.index.to_string(),
                format!("{:.17e}", s.x),
                format!("{:.17e}", s.y),
                format!("{:.17e}", s.p),
                format!("{:.17e}", s.q),
                format!("{:.6e}", r.t_reached),
                r.stats.as_ref().map(|s| s.steps.to_string()).unwrap_or_default(),
                opt(r.stats.as_ref().map(|s| s.energy_drift)),
                opt(r.drift),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        into_string(w)
    }
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String, CliError> {
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Clone, Debug, Serialize)]
pub struct ChecksumLine {
    pub text: String,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeriveOutput {
    pub lines: Vec<ChecksumLine>,
    /// Degrees in `w` of Eq0, Eq0', Eq0'', Eq0'''.
    pub degrees: [i32; 4],
    pub jet_orders: (usize, usize),
    #[serde(skip)]
    pub dump: String,
}

impl DeriveOutput {
    pub fn ok(&self) -> bool {
        self.lines.iter().all(|l| l.ok)
    }

    pub fn checksum_block(&self) -> String {
        let mut s = String::from("# checksums\n");
        for l in &self.lines {
            if l.ok {
                s.push_str(&format!("{}\n", l.text));
            } else {
                s.push_str(&format!("MISMATCH {}\n", l.text));
            }
        }
        s
    }
}

fn var(v: geodrat_core::criterion::JetVar) -> JetPolynomial {
    JetPolynomial::var(v)
}

/// Derives the system and compares its shape with the published anchors.
pub fn cmd_derive() -> Result<DeriveOutput, CliError> {
    let s = &system()?.derived;
    let mut lines = Vec::new();
    let mut line = |ok: bool, good: String, bad: String| lines.push(ChecksumLine { text: if ok { good } else { bad }, ok });

    let lead = s.eq0.coeff_in(W00, 6);
    let deg0 = s.eq0.max_exp(W00).unwrap_or(0);
    line(deg0 == 6 && lead == JetPolynomial::int(5400), "Eq0: degree 6, leading 5400".into(), format!("Eq0: degree {deg0}, leading {lead}"));
    let gaps: Vec<i32> = (3..=5).filter(|&k| !s.eq0.coeff_in(W00, k).is_zero()).collect();
    line(gaps.is_empty(), "Eq0: w^5, w^4, w^3 coefficients vanish".into(), format!("Eq0: nonzero coefficients at w^{gaps:?}"));

    let dc = s.den.coefficients_in(W00);
    let powers: Vec<i32> = dc.keys().copied().collect();
    let den_ok = powers == [0, 2] && dc[&2] == var(kv(1, 0)).scale(&q(30));
    let free = dc.get(&0).map(|p| p.len()).unwrap_or(0);
    line(den_ok, format!("EQ1 denominator: 30*k_x*w^2 + ... ({free} terms free of w)"), format!("EQ1 denominator: powers {powers:?}, leading {}", s.den.coeff_in(W00, *powers.last().unwrap_or(&0))));

    let nx5 = s.nx.coeff_in(W00, 5);
    let nx_ok = s.nx.max_exp(W00) == Some(5) && nx5 == JetPolynomial::e2l(-1).scale(&q(180));
    line(nx_ok, "w_x numerator leading term: 180*e^(-2λ)*w^5".into(), format!("w_x numerator leading term: ({nx5})*w^{:?}", s.nx.max_exp(W00)));

    let ny3 = s.ny.coeff_in(W00, 3);
    let want = &(&var(kv(1, 1)).scale(&q(18)) - &(&var(lam(1, 0)) * &var(kv(0, 1))).scale(&q(18))) + &(&var(lam(0, 1)) * &var(kv(1, 0))).scale(&q(42));
    line(s.ny.max_exp(W00) == Some(3) && ny3 == want, "w_y numerator leading term: (18*k_xy - 18*λ_x*k_y + 42*λ_y*k_x)*w^3".into(), format!("w_y numerator leading term: ({ny3})*w^{:?}", s.ny.max_exp(W00)));

    let degrees = s.degrees();
    let names = s.members().map(|(n, _)| n);
    let listing: Vec<String> = names.iter().zip(degrees).map(|(n, d)| format!("{n} {d}")).collect();
    let mut sorted = degrees;
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    line(sorted == [10, 8, 7, 6], format!("EQ0 member degrees: {{10, 8, 7, 6}} ({})", listing.join(", ")), format!("EQ0 member degrees: {sorted:?} ({})", listing.join(", ")));

    let shape = s.check_shape();
    line(shape.is_ok(), "shape check: passed".into(), format!("shape check: {}", shape.err().map(|e| e.to_string()).unwrap_or_default()));

    Ok(DeriveOutput { lines, degrees, jet_orders: s.jet_orders(), dump: s.dump() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RkvMode {
    /// Cauchy–Kovalevskaya march of `(u, v, f)` with `a = f_y`, `b = −f_x`.
    Ck,
    /// Characteristics of the quasilinear equation for `w = v/u`.
    Characteristics,
    /// Prolonged system for a prescribed cofactor.
    GivenCofactor,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RkvRequest {
    pub mode: RkvMode,
    /// Initial data on the bottom edge of the analysis rectangle (`ck`: u, v, f; `characteristics`: w).
    pub u0: String,
    pub v0: String,
    pub f0: String,
    pub w0: String,
    /// Cofactor for `given-cofactor`; defaults to the example's when it ships one.
    pub a: Option<String>,
    pub b: Option<String>,
    /// Cauchy data `(u, v)` at the grid centre for `given-cofactor`.
    pub cauchy: (f64, f64),
    /// Strip height for the marching modes; defaults to a fraction of the rectangle.
    pub height: Option<f64>,
}

impl Default for RkvRequest {
    fn default() -> Self {
        RkvRequest {
            mode: RkvMode::GivenCofactor,
            u0: "1".into(),
            v0: "0".into(),
            f0: "0".into(),
            w0: "0".into(),
            a: None,
            b: None,
            cauchy: (1.0, 0.0),
            height: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualStats {
    /// Over interior nodes, the largest of the three defining residuals.
    pub max: f64,
    pub mean: f64,
    /// `max` divided by the largest `|u|`, `|v|` on the grid.
    pub relative: f64,
    pub nodes: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RkvOutput {
    pub mode: RkvMode,
    pub grid: GridInfo,
    pub fields: BTreeMap<&'static str, Vec<f64>>,
    pub residual: ResidualStats,
    pub error_estimate: Option<f64>,
    pub dimension: Option<DimensionReport>,
}

fn residual_stats(m: &MetricSpec, r: &CovectorField, l: &dyn CofactorField, g: &Grid) -> Result<ResidualStats, CliError> {
    let (mut worst, mut sum, mut n, mut scale) = (0.0f64, 0.0, 0usize, 0.0f64);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let (x, y) = (g.x(i), g.y(j));
            scale = scale.max(r.u.value(x, y)?.abs()).max(r.v.value(x, y)?.abs());
            if i == 0 || j == 0 || i + 1 == g.nx || j + 1 == g.ny {
                continue;
            }
            let res = rkv_residuals(m, r, l, x, y)?.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            worst = worst.max(res);
            sum += res;
            n += 1;
        }
    }
    Ok(ResidualStats { max: worst, mean: sum / n.max(1) as f64, relative: worst / scale.max(f64::MIN_POSITIVE), nodes: n })
}

/// Initial data as a function of `x` on the row `y`; evaluation failures become NaN and
/// surface as marching errors.
fn expr_fn(text: &str, ctx: &EvalContext) -> Result<impl Fn(f64, f64) -> f64, CliError> {
    let e = parse_expression(text)?;
    let ctx = ctx.clone();
    Ok(move |x: f64, y: f64| evaluate(&e, x, y, &ctx).unwrap_or(f64::NAN))
}

fn dump_fields(g: &Grid, r: &CovectorField, l: &dyn CofactorField) -> Result<BTreeMap<&'static str, Vec<f64>>, CliError> {
    let mut out = BTreeMap::new();
    out.insert("u", sample(g, |x, y| Ok(r.u.value(x, y)?))?);
    out.insert("v", sample(g, |x, y| Ok(r.v.value(x, y)?))?);
    out.insert("a", sample(g, |x, y| Ok(l.ab(x, y)?.0))?);
    out.insert("b", sample(g, |x, y| Ok(l.ab(x, y)?.1))?);
    Ok(out)
}

fn known_cofactor(example: Option<&ExampleEntry>) -> Option<(&'static str, &'static str)> {
    match example.map(|e| e.name) {
        Some("bessel") => Some((example::A_GAUGED, "0")),
        _ => None,
    }
}

pub fn cmd_rkv(cfg: &RunConfig, req: &RkvRequest) -> Result<RkvOutput, CliError> {
    let Resolved { metric, analysis, example } = cfg.resolve()?;
    let ctx = metric.params.clone();
    let opts = MarchOptions { u_min: cfg.tolerances.u_min, cols: cfg.grid[0].max(5), ..MarchOptions::default() };
    match req.mode {
        RkvMode::Ck => {
            let (u0, v0, f0) = (expr_fn(&req.u0, &ctx)?, expr_fn(&req.v0, &ctx)?, expr_fn(&req.f0, &ctx)?);
            let y0 = analysis.y_min;
            let init = CkInit::from_fn(analysis.x_min, analysis.x_max, y0, cfg.grid[0], |x| (u0(x, y0), v0(x, y0), f0(x, y0)));
            let sol = ck_march(&metric, &init, req.height.unwrap_or(0.05 * analysis.height()), &opts)?;
            let (r, l, g) = (sol.covector(), sol.cofactor(), sol.grid());
            Ok(RkvOutput {
                mode: req.mode,
                grid: GridInfo::of(&g),
                fields: dump_fields(&g, &r, &l)?,
                residual: residual_stats(&metric, &r, &l, &g)?,
                error_estimate: Some(sol.error_estimate),
                dimension: None,
            })
        }
        RkvMode::Characteristics => {
            let w0 = expr_fn(&req.w0, &ctx)?;
            let y0 = analysis.y_min;
            let sol = characteristic_w(&metric, (analysis.x_min, analysis.x_max), y0, req.height.unwrap_or(0.3 * analysis.height()), &|x| w0(x, y0), &opts)?;
            let (r, l, g) = (sol.covector(), sol.cofactor(), sol.grid());
            let mut fields = dump_fields(&g, &r, &l)?;
            fields.insert("w", sol.w.values.clone());
            Ok(RkvOutput {
                mode: req.mode,
                grid: GridInfo::of(&g),
                fields,
                residual: residual_stats(&metric, &r, &l, &g)?,
                error_estimate: Some(sol.error_estimate),
                dimension: None,
            })
        }
        RkvMode::GivenCofactor => {
            let (a, b) = match (&req.a, &req.b) {
                (Some(a), Some(b)) => (a.clone(), b.clone()),
                (None, None) => match known_cofactor(example) {
                    Some((a, b)) => (a.to_string(), b.to_string()),
                    None => return Err(CliError::Config("given-cofactor mode needs --a and --b for this metric".into())),
                },
                _ => return Err(CliError::Config("give both --a and --b".into())),
            };
            let l = Cofactor::parse(&a, &b, &ctx)?;
            let g = cfg.grid_on(analysis);
            let base = (g.nx / 2, g.ny / 2);
            let sol = solve_rkv_given_cofactor(&metric, &l, &g, base, req.cauchy, 4)?;
            let r = sol.covector();
            let dimension = rkv_dimension(&metric, &l, &g, cfg.tolerances.residual_tol)?;
            Ok(RkvOutput {
                mode: req.mode,
                grid: GridInfo::of(&g),
                fields: dump_fields(&g, &r, &l)?,
                residual: residual_stats(&metric, &r, &l, &g)?,
                error_estimate: None,
                dimension: Some(dimension),
            })
        }
    }
}

impl RkvOutput {
    pub fn to_csv(&self) -> Result<String, CliError> {
        let g = Grid::new(self.grid.domain, self.grid.nx, self.grid.ny);
        let names: Vec<&str> = self.fields.keys().copied().collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["x", "y"].iter().chain(&names))?;
        for (k, (x, y)) in nodes(&g).into_iter().enumerate() {
            let mut rec = vec![format!("{x:.17e}"), format!("{y:.17e}")];
            rec.extend(names.iter().map(|n| format!("{:.17e}", self.fields[n][k])));
            w.write_record(&rec)?;
        }
        into_string(w)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GeodesicOutput {
    pub start: PhaseState,
    pub t_end: f64,
    pub integral: Option<IntegralSpec>,
    pub trajectory: Trajectory,
    #[serde(skip)]
    pub csv: String,
}

/// Integrates one geodesic from `start`, or from a seeded random unit-speed state in the
/// analysis rectangle.
pub fn cmd_geodesic(cfg: &RunConfig, start: Option<PhaseState>, integral: Option<&IntegralSpec>) -> Result<GeodesicOutput, CliError> {
    let Resolved { metric, analysis, .. } = cfg.resolve()?;
    let start = match start {
        Some(s) => s,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.batch.seed);
            random_state(&metric, &analysis, &mut rng)?
        }
    };
    let icfg = IntegratorConfig { energy_tol: cfg.tolerances.energy_tol, ..IntegratorConfig::default() };
    let tr = integrate(&metric, start, cfg.batch.t_end, &icfg)?;
    let f = integral.map(|i| i.build(&metric.params)).transpose()?;
    let mut buf = Vec::new();
    write_csv(&mut buf, &tr, f.as_ref(), cfg.tolerances.q_min)?;
    let csv = String::from_utf8(buf).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(GeodesicOutput { start, t_end: cfg.batch.t_end, integral: integral.cloned(), trajectory: tr, csv })
}

pub fn cmd_examples() -> &'static [ExampleEntry] {
    REGISTRY
}

pub fn examples_csv() -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["name", "conformal", "params", "expected", "note"])?;
    for e in REGISTRY {
        let params: Vec<String> = e.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let expected = serde_json::to_value(e.expected)?.as_str().unwrap_or_default().to_string();
        w.write_record([e.name, e.conformal, &params.join(";"), &expected, e.note])?;
    }
    into_string(w)
}
