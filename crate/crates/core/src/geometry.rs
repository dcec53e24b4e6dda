//! Conformal metrics `g = e^{2λ}(dx² + dy²)`, their Hamiltonian and curvature.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::expr::{EvalContext, ExprError, Expression, Jet, JetProgram};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("domain has no area: {0:?}")]
    EmptyDomain(Domain),
    #[error("conformal factor is not positive and finite near ({x}, {y})")]
    NonPositive { x: f64, y: f64 },
    #[error("point ({x}, {y}) lies outside the metric domain")]
    OutsideDomain { x: f64, y: f64 },
    #[error("parameter `{0}` has no value")]
    UnboundParameter(String),
    #[error("metric is not of revolution form: max |λ_y| = {0:e}")]
    NotRevolution(f64),
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Domain {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Domain, GeometryError> {
        let d = Domain { x_min, x_max, y_min, y_max };
        if !(x_max > x_min && y_max > y_min) || ![x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::EmptyDomain(d));
        }
        Ok(d)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let ex = 1e-12 * (self.x_max - self.x_min);
        let ey = 1e-12 * (self.y_max - self.y_min);
        x >= self.x_min - ex && x <= self.x_max + ex && y >= self.y_min - ey && y <= self.y_max + ey
    }

    pub fn contains_domain(&self, o: &Domain) -> bool {
        self.contains(o.x_min, o.y_min) && self.contains(o.x_max, o.y_max)
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }
}

/// Uniform tensor grid including the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub domain: Domain,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(domain: Domain, nx: usize, ny: usize) -> Grid {
        assert!(nx >= 2 && ny >= 2, "grid needs at least two nodes per axis");
        Grid { domain, nx, ny }
    }

    pub fn hx(&self) -> f64 {
        self.domain.width() / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        self.domain.height() / (self.ny - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx - 1 {
            self.domain.x_max
        } else {
            self.domain.x_min + i as f64 * self.hx()
        }
    }

    pub fn y(&self, j: usize) -> f64 {
        if j == self.ny - 1 {
            self.domain.y_max
        } else {
            self.domain.y_min + j as f64 * self.hy()
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major index with `x` varying fastest.
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.ny {
            for i in 0..self.nx {
                out.push((self.x(i), self.y(j)));
            }
        }
        out
    }
}

/// λ-jet, curvature jet and `e^{2λ}` at one point.
#[derive(Debug, Clone)]
pub struct MetricJets {
    pub lambda: Jet,
    pub k: Option<Jet>,
    pub e2l: f64,
}

impl MetricJets {
    pub fn k(&self) -> &Jet {
        self.k.as_ref().expect("curvature jet was not requested")
    }
}

type ProgramCache = Arc<Mutex<HashMap<(usize, Option<usize>), Arc<JetProgram>>>>;

/// Isothermal metric with its domain and parameter values.
#[derive(Clone)]
pub struct MetricSpec {
    pub name: String,
    lambda: Expression,
    curvature: Expression,
    pub domain: Domain,
    pub params: EvalContext,
    programs: ProgramCache,
}

impl std::fmt::Debug for MetricSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricSpec")
            .field("name", &self.name)
            .field("lambda", &self.lambda.to_string())
            .field("domain", &self.domain)
            .field("params", &self.params)
            .finish()
    }
}

pub const SANITY_GRID: usize = 21;

impl MetricSpec {
    /// Builds a metric from λ and checks parameters and positivity on a sample grid.
    pub fn new(name: &str, lambda: Expression, domain: Domain, params: EvalContext) -> Result<MetricSpec, GeometryError> {
        for p in lambda.params() {
            if !params.params.contains_key(&p) {
                return Err(GeometryError::UnboundParameter(p));
            }
        }
        let curvature = build_curvature(&lambda);
        let m = MetricSpec { name: name.to_string(), lambda, curvature, domain, params, programs: Default::default() };
        let prog = m.program(1, None)?;
        for (x, y) in Grid::new(domain, SANITY_GRID, SANITY_GRID).points() {
            let ok = match prog.eval(x, y, &m.params) {
                Ok(j) => j[0].value().is_finite() && (2.0 * j[0].value()).exp() > 0.0,
                Err(_) => false,
            };
            if !ok {
                return Err(GeometryError::NonPositive { x, y });
            }
        }
        Ok(m)
    }

    /// Builds a metric from the conformal factor `e^{2λ}`, taking `λ = ½ log(·)`.
    pub fn from_conformal(name: &str, conformal: &Expression, domain: Domain, params: EvalContext) -> Result<MetricSpec, GeometryError> {
        let lambda = Expression::constant(0.5).mul(&conformal.log());
        MetricSpec::new(name, lambda, domain, params)
    }

    pub fn lambda(&self) -> &Expression {
        &self.lambda
    }

    pub fn with_domain(&self, domain: Domain) -> Result<MetricSpec, GeometryError> {
        MetricSpec::new(&self.name, self.lambda.clone(), domain, self.params.clone())
    }

    fn program(&self, lam_order: usize, k_order: Option<usize>) -> Result<Arc<JetProgram>, GeometryError> {
        let mut cache = self.programs.lock().expect("program cache poisoned");
        if let Some(p) = cache.get(&(lam_order, k_order)) {
            return Ok(p.clone());
        }
        let mut exprs = vec![(self.lambda.clone(), lam_order)];
        if let Some(ko) = k_order {
            exprs.push((self.curvature.clone(), ko));
        }
        let p = Arc::new(JetProgram::new(&exprs)?);
        cache.insert((lam_order, k_order), p.clone());
        Ok(p)
    }

    /// Jets of λ (and optionally of k) at a point; no domain check.
    pub fn jets(&self, x: f64, y: f64, lam_order: usize, k_order: Option<usize>) -> Result<MetricJets, GeometryError> {
        let prog = self.program(lam_order, k_order)?;
        let mut js = prog.eval(x, y, &self.params)?;
        let k = if k_order.is_some() { js.pop() } else { None };
        let lambda = js.pop().expect("λ jet");
        let e2l = (2.0 * lambda.value()).exp();
        Ok(MetricJets { lambda, k, e2l })
    }

    pub fn check_inside(&self, x: f64, y: f64) -> Result<(), GeometryError> {
        if self.domain.contains(x, y) {
            Ok(())
        } else {
            Err(GeometryError::OutsideDomain { x, y })
        }
    }
}

fn build_curvature(lambda: &Expression) -> Expression {
    use crate::expr::Var;
    let lap = lambda.derivative(Var::X).derivative(Var::X).add(&lambda.derivative(Var::Y).derivative(Var::Y));
    Expression::constant(-2.0).mul(lambda).exp().mul(&lap).neg()
}

/// `k = −e^{−2λ}(λ_xx + λ_yy)`.
pub fn curvature_expr(m: &MetricSpec) -> Expression {
    m.curvature.clone()
}

/// `H = ½ e^{−2λ}(p² + q²)`.
pub fn hamiltonian(m: &MetricSpec, x: f64, y: f64, p: f64, q: f64) -> Result<f64, GeometryError> {
    m.check_inside(x, y)?;
    let j = m.jets(x, y, 0, None)?;
    Ok(0.5 * (p * p + q * q) / j.e2l)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureSurvey {
    pub constant: bool,
    pub mean_k: f64,
    pub max_deviation: f64,
}

/// Samples k on a `n × n` grid and tests `max |k − mean| ≤ tol (1 + |mean|)`.
pub fn is_constant_curvature(m: &MetricSpec, tol: f64, n: usize) -> Result<CurvatureSurvey, GeometryError> {
    let ks = Grid::new(m.domain, n, n)
        .points()
        .into_iter()
        .map(|(x, y)| Ok(m.jets(x, y, 0, Some(0))?.k().value()))
        .collect::<Result<Vec<f64>, GeometryError>>()?;
    let mean = ks.iter().sum::<f64>() / ks.len() as f64;
    let dev = ks.iter().fold(0.0f64, |acc, k| acc.max((k - mean).abs()));
    Ok(CurvatureSurvey { constant: dev <= tol * (1.0 + mean.abs()), mean_k: mean, max_deviation: dev })
}

/// Point invariants used by the criterion and the revolution fast path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantFrame {
    pub k: f64,
    pub k_x: f64,
    pub k_y: f64,
    pub k_xx: f64,
    /// `e^{−λ} λ_x`
    pub j: f64,
}

/// Largest `|λ_y|` over the sanity grid.
pub fn max_lambda_y(m: &MetricSpec) -> Result<f64, GeometryError> {
    let mut worst = 0.0f64;
    for (x, y) in Grid::new(m.domain, SANITY_GRID, SANITY_GRID).points() {
        worst = worst.max(m.jets(x, y, 1, None)?.lambda.d(0, 1).abs());
    }
    Ok(worst)
}

pub fn is_revolution(m: &MetricSpec, tol: f64) -> Result<bool, GeometryError> {
    Ok(max_lambda_y(m)? <= tol)
}

/// Invariants of a metric of revolution `λ = λ(x)` at abscissa `x`.
pub fn revolution_invariants(m: &MetricSpec, x: f64) -> Result<InvariantFrame, GeometryError> {
    let worst = max_lambda_y(m)?;
    if worst > 1e-10 {
        return Err(GeometryError::NotRevolution(worst));
    }
    let y = m.domain.center().1;
    let jets = m.jets(x, y, 1, Some(2))?;
    let k = jets.k();
    Ok(InvariantFrame {
        k: k.value(),
        k_x: k.d(1, 0),
        k_y: k.d(0, 1),
        k_xx: k.d(2, 0),
        j: (-jets.lambda.value()).exp() * jets.lambda.d(1, 0),
    })
}
