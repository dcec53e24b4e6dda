//! Scalar fields backed by expressions or sampled grids.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use super::KillingError;
use crate::expr::{EvalContext, Expression, Jet, JetProgram};
use crate::geometry::Grid;

/// A smooth function of `(x, y)` with partial derivatives on demand.
pub trait ScalarField: Send + Sync {
    /// Partials `∂^i_x ∂^j_y` for `i + j ≤ order`.
    fn jet(&self, x: f64, y: f64, order: usize) -> Result<Jet, KillingError>;

    fn value(&self, x: f64, y: f64) -> Result<f64, KillingError> {
        Ok(self.jet(x, y, 0)?.value())
    }
}

pub type Field = Arc<dyn ScalarField>;

/// Field given by an expression; derivatives are exact.
pub struct ExprField {
    pub expr: Expression,
    pub ctx: EvalContext,
    programs: Mutex<HashMap<usize, Arc<JetProgram>>>,
}

impl ExprField {
    pub fn new(expr: Expression, ctx: EvalContext) -> ExprField {
        ExprField { expr, ctx, programs: Mutex::new(HashMap::new()) }
    }

    pub fn parse(text: &str, ctx: &EvalContext) -> Result<ExprField, KillingError> {
        let expr = crate::expr::parse_expression(text)?;
        for p in expr.params() {
            ctx.get(&p)?;
        }
        Ok(ExprField::new(expr, ctx.clone()))
    }

    pub fn arc(expr: Expression, ctx: &EvalContext) -> Field {
        Arc::new(ExprField::new(expr, ctx.clone()))
    }

    pub fn constant(c: f64) -> Field {
        Arc::new(ExprField::new(Expression::constant(c), EvalContext::new()))
    }
}

impl ScalarField for ExprField {
    fn jet(&self, x: f64, y: f64, order: usize) -> Result<Jet, KillingError> {
        let prog = {
            let mut cache = self.programs.lock().expect("program cache poisoned");
            match cache.get(&order) {
                Some(p) => p.clone(),
                None => {
                    let p = Arc::new(JetProgram::new(&[(self.expr.clone(), order)])?);
                    cache.insert(order, p.clone());
                    p
                }
            }
        };
        Ok(prog.eval(x, y, &self.ctx)?.remove(0))
    }
}

/// Values on a uniform grid; derivatives from local five-point Lagrange interpolation,
/// centred in the interior and shifted one-sided near the boundary.
#[derive(Clone, Debug)]
pub struct GridField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

pub const STENCIL: usize = 5;

/// Weights `d^n/dt^n L_k(t)` of the Lagrange basis on nodes `0..5`, for `n ≤ order`.
pub(crate) fn lagrange_weights(t: f64, order: usize) -> Vec<[f64; STENCIL]> {
    let mut out = vec![[0.0; STENCIL]; order + 1];
    for k in 0..STENCIL {
        // coefficients of L_k in ascending powers of t
        let mut c = vec![1.0];
        let mut denom = 1.0;
        for m in 0..STENCIL {
            if m == k {
                continue;
            }
            denom *= k as f64 - m as f64;
            let mut next = vec![0.0; c.len() + 1];
            for (p, v) in c.iter().enumerate() {
                next[p + 1] += v;
                next[p] -= m as f64 * v;
            }
            c = next;
        }
        for v in c.iter_mut() {
            *v /= denom;
        }
        for (n, row) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (p, v) in c.iter().enumerate().skip(n) {
                let fall: f64 = (0..n).map(|r| (p - r) as f64).product();
                acc += v * fall * t.powi((p - n) as i32);
            }
            row[k] = acc;
        }
    }
    out
}

pub(crate) fn window(s: f64, n: usize) -> usize {
    let c = s.round() as isize - 2;
    c.clamp(0, (n - STENCIL) as isize) as usize
}

impl GridField {
    pub fn new(grid: Grid, values: Vec<f64>) -> GridField {
        assert_eq!(values.len(), grid.len());
        assert!(grid.nx >= STENCIL && grid.ny >= STENCIL, "grid fields need at least 5 × 5 nodes");
        GridField { grid, values }
    }

    pub fn sample<F: Fn(f64, f64) -> Result<f64, KillingError>>(grid: Grid, f: F) -> Result<GridField, KillingError> {
        let values = grid.points().into_iter().map(|(x, y)| f(x, y)).collect::<Result<Vec<_>, _>>()?;
        Ok(GridField::new(grid, values))
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl ScalarField for GridField {
    fn jet(&self, x: f64, y: f64, order: usize) -> Result<Jet, KillingError> {
        if order >= STENCIL {
            return Err(KillingError::OrderTooHigh(order));
        }
        let g = &self.grid;
        let d = &g.domain;
        let slack = 1e-9 * (d.width() + d.height());
        if x < d.x_min - slack || x > d.x_max + slack || y < d.y_min - slack || y > d.y_max + slack {
            return Err(KillingError::OutsideGrid { x, y });
        }
        let (hx, hy) = (g.hx(), g.hy());
        let sx = (x - d.x_min) / hx;
        let sy = (y - d.y_min) / hy;
        let (i0, j0) = (window(sx, g.nx), window(sy, g.ny));
        let wx = lagrange_weights(sx - i0 as f64, order);
        let wy = lagrange_weights(sy - j0 as f64, order);
        let mut jet = Jet::zeros(order);
        for n in 0..=order {
            for j in 0..=n {
                let i = n - j;
                let mut acc = 0.0;
                for a in 0..STENCIL {
                    for b in 0..STENCIL {
                        acc += wx[i][a] * wy[j][b] * self.at(i0 + a, j0 + b);
                    }
                }
                jet.set(i, j, acc / (hx.powi(i as i32) * hy.powi(j as i32)));
            }
        }
        Ok(jet)
    }
}

/// Pointwise product of two fields.
pub struct ProductField(pub Field, pub Field);

impl ScalarField for ProductField {
    fn jet(&self, x: f64, y: f64, order: usize) -> Result<Jet, KillingError> {
        Ok(self.0.jet(x, y, order)?.mul(&self.1.jet(x, y, order)?))
    }
}

/// Pointwise sum of two fields.
pub struct SumField(pub Field, pub Field);

impl ScalarField for SumField {
    fn jet(&self, x: f64, y: f64, order: usize) -> Result<Jet, KillingError> {
        Ok(self.0.jet(x, y, order)?.add(&self.1.jet(x, y, order)?))
    }
}

/// `sign · ∂_x base` or `sign · ∂_y base`.
pub struct PartialField {
    pub base: Field,
    pub along_x: bool,
    pub sign: f64,
}

impl ScalarField for PartialField {
    fn jet(&self, x: f64, y: f64, order: usize) -> Result<Jet, KillingError> {
        let j = self.base.jet(x, y, order + 1)?;
        Ok(if self.along_x { j.dx() } else { j.dy() }.scale(self.sign))
    }
}
