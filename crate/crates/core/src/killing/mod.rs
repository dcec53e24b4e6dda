//! Relative Killing vectors `R = u p + v q` for a cofactor `L = e^{−2λ}(a p + b q)`.
//!
//! Sign convention: `R` is a relative Killing vector for `L` when
//! `X_H(R) + L·R = 0`, which in isothermal coordinates is the system
//!
//! ```text
//! u_x = −(a + λ_x) u − λ_y v
//! v_x + u_y = −(a v + b u)
//! v_y = −λ_x u − (b + λ_y) v
//! ```
//!
//! With this convention the gauge `R ↦ e^f R` acts on the cofactor by
//! `(a, b) ↦ (a − f_x, b − f_y)`, and `ρ = b_x − a_y` is gauge invariant.

mod fields;
mod march;
mod solve;

use std::sync::Arc;

pub use fields::{ExprField, Field, GridField, PartialField, ProductField, ScalarField, SumField};
pub use march::{characteristic_w, ck_march, CharacteristicSolution, CkInit, CkSolution, MarchOptions};
pub use solve::{killing_dimension, rkv_dimension, solve_rkv_given_cofactor, DimensionReport, RkvSolution};

use crate::expr::{EvalContext, ExprError, Expression, Var};
use crate::flow::PhaseState;
use crate::geometry::{GeometryError, MetricSpec};

#[derive(Debug, thiserror::Error)]
pub enum KillingError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("point ({x}, {y}) lies outside the sampled grid")]
    OutsideGrid { x: f64, y: f64 },
    #[error("grid fields support jets below order 5, requested {0}")]
    OrderTooHigh(usize),
    #[error("ρ = b_x − a_y vanishes near ({x}, {y})")]
    RhoVanishes { x: f64, y: f64 },
    #[error("|u| fell below the floor at height y = {y}")]
    UFloor { y: f64 },
    #[error("characteristics collide near ({x}, {y})")]
    Collision { x: f64, y: f64 },
    #[error("marching breaks down near ({x}, {y}): {msg}")]
    Breakdown { x: f64, y: f64, msg: String },
}

/// `R = u p + v q`.
#[derive(Clone)]
pub struct CovectorField {
    pub u: Field,
    pub v: Field,
}

impl CovectorField {
    pub fn new(u: Field, v: Field) -> CovectorField {
        CovectorField { u, v }
    }

    pub fn from_exprs(u: &Expression, v: &Expression, ctx: &EvalContext) -> CovectorField {
        CovectorField { u: ExprField::arc(u.clone(), ctx), v: ExprField::arc(v.clone(), ctx) }
    }

    pub fn parse(u: &str, v: &str, ctx: &EvalContext) -> Result<CovectorField, KillingError> {
        Ok(CovectorField { u: Arc::new(ExprField::parse(u, ctx)?), v: Arc::new(ExprField::parse(v, ctx)?) })
    }

    pub fn eval(&self, s: &PhaseState) -> Result<f64, KillingError> {
        Ok(self.u.value(s.x, s.y)? * s.p + self.v.value(s.x, s.y)? * s.q)
    }
}

/// `(a, b)` with `L = e^{−2λ}(a p + b q)`.
#[derive(Clone)]
pub struct Cofactor {
    pub a: Field,
    pub b: Field,
}

/// Values of a cofactor needed by the prolonged system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CofactorSample {
    pub a: f64,
    pub b: f64,
    pub rho: f64,
    pub rho_x: f64,
    pub rho_y: f64,
}

/// Anything that can report `a, b, ρ, ρ_x, ρ_y` at a point.
pub trait CofactorField: Send + Sync {
    fn sample(&self, x: f64, y: f64) -> Result<CofactorSample, KillingError>;

    /// `(a, b)` alone.
    fn ab(&self, x: f64, y: f64) -> Result<(f64, f64), KillingError> {
        let s = self.sample(x, y)?;
        Ok((s.a, s.b))
    }
}

impl Cofactor {
    pub fn new(a: Field, b: Field) -> Cofactor {
        Cofactor { a, b }
    }

    pub fn zero() -> Cofactor {
        Cofactor { a: ExprField::constant(0.0), b: ExprField::constant(0.0) }
    }

    pub fn from_exprs(a: &Expression, b: &Expression, ctx: &EvalContext) -> Cofactor {
        Cofactor { a: ExprField::arc(a.clone(), ctx), b: ExprField::arc(b.clone(), ctx) }
    }

    pub fn parse(a: &str, b: &str, ctx: &EvalContext) -> Result<Cofactor, KillingError> {
        Ok(Cofactor { a: Arc::new(ExprField::parse(a, ctx)?), b: Arc::new(ExprField::parse(b, ctx)?) })
    }

    /// `L` at a phase-space state.
    pub fn eval(&self, m: &MetricSpec, s: &PhaseState) -> Result<f64, KillingError> {
        let e = m.jets(s.x, s.y, 0, None)?.e2l;
        Ok((self.a.value(s.x, s.y)? * s.p + self.b.value(s.x, s.y)? * s.q) / e)
    }
}

impl CofactorField for Cofactor {
    fn sample(&self, x: f64, y: f64) -> Result<CofactorSample, KillingError> {
        let a = self.a.jet(x, y, 2)?;
        let b = self.b.jet(x, y, 2)?;
        Ok(CofactorSample {
            a: a.value(),
            b: b.value(),
            rho: b.d(1, 0) - a.d(0, 1),
            rho_x: b.d(2, 0) - a.d(1, 1),
            rho_y: b.d(1, 1) - a.d(0, 2),
        })
    }

    fn ab(&self, x: f64, y: f64) -> Result<(f64, f64), KillingError> {
        Ok((self.a.value(x, y)?, self.b.value(x, y)?))
    }
}

/// Residuals of the three defining equations at a point.
pub fn rkv_residuals(m: &MetricSpec, r: &CovectorField, l: &dyn CofactorField, x: f64, y: f64) -> Result<[f64; 3], KillingError> {
    m.check_inside(x, y)?;
    let lam = m.jets(x, y, 1, None)?.lambda;
    let (lx, ly) = (lam.d(1, 0), lam.d(0, 1));
    let u = r.u.jet(x, y, 1)?;
    let v = r.v.jet(x, y, 1)?;
    let (a, b) = l.ab(x, y)?;
    let (u0, v0) = (u.value(), v.value());
    Ok([
        u.d(1, 0) + (a + lx) * u0 + ly * v0,
        v.d(1, 0) + u.d(0, 1) + a * v0 + b * u0,
        v.d(0, 1) + lx * u0 + (b + ly) * v0,
    ])
}

/// `X_H(R) + L·R` evaluated directly in phase space, `X_H = H_p ∂_x + H_q ∂_y − H_x ∂_p − H_y ∂_q`.
pub fn bracket_residual(m: &MetricSpec, r: &CovectorField, l: &dyn CofactorField, s: &PhaseState) -> Result<f64, KillingError> {
    m.check_inside(s.x, s.y)?;
    let jets = m.jets(s.x, s.y, 1, None)?;
    let (lx, ly) = (jets.lambda.d(1, 0), jets.lambda.d(0, 1));
    let einv = 1.0 / jets.e2l;
    let (p, q) = (s.p, s.q);
    let h = 0.5 * einv * (p * p + q * q);
    let (hp, hq) = (einv * p, einv * q);
    let (hx, hy) = (-2.0 * lx * h, -2.0 * ly * h);
    let u = r.u.jet(s.x, s.y, 1)?;
    let v = r.v.jet(s.x, s.y, 1)?;
    let rx = u.d(1, 0) * p + v.d(1, 0) * q;
    let ry = u.d(0, 1) * p + v.d(0, 1) * q;
    let (rp, rq) = (u.value(), v.value());
    let xh_r = hp * rx + hq * ry - hx * rp - hy * rq;
    let (a, b) = l.ab(s.x, s.y)?;
    let lr = einv * (a * p + b * q) * (rp * p + rq * q);
    Ok(xh_r + lr)
}

/// `(R, L) ↦ (e^f R, L − df)` in the components `(a, b) ↦ (a − f_x, b − f_y)`.
pub fn gauge_transform(r: &CovectorField, l: &Cofactor, f: &Expression, ctx: &EvalContext) -> (CovectorField, Cofactor) {
    let ef = ExprField::arc(f.exp(), ctx);
    let r2 = CovectorField { u: Arc::new(ProductField(ef.clone(), r.u.clone())), v: Arc::new(ProductField(ef, r.v.clone())) };
    let fx = ExprField::arc(f.derivative(Var::X).neg(), ctx);
    let fy = ExprField::arc(f.derivative(Var::Y).neg(), ctx);
    let l2 = Cofactor { a: Arc::new(SumField(l.a.clone(), fx)), b: Arc::new(SumField(l.b.clone(), fy)) };
    (r2, l2)
}

/// The first compatibility condition of the defining system:
///
/// `3(u_y − v_x)ρ + [(3b + 2λ_y)ρ + 4Δλ λ_x − 2(Δλ)_x + 2ρ_y] u
///   − [(3a + 2λ_x)ρ − 4Δλ λ_y + 2(Δλ)_y + 2ρ_x] v`, with `Δλ = λ_xx + λ_yy`.
#[allow(clippy::too_many_arguments)]
pub fn gap_value(m: &MetricSpec, l: &dyn CofactorField, u: f64, v: f64, u_y: f64, v_x: f64, x: f64, y: f64) -> Result<f64, KillingError> {
    let lam = m.jets(x, y, 3, None)?.lambda;
    let (lx, ly) = (lam.d(1, 0), lam.d(0, 1));
    let lap = lam.d(2, 0) + lam.d(0, 2);
    let lap_x = lam.d(3, 0) + lam.d(1, 2);
    let lap_y = lam.d(2, 1) + lam.d(0, 3);
    let c = l.sample(x, y)?;
    let cu = (3.0 * c.b + 2.0 * ly) * c.rho + 4.0 * lap * lx - 2.0 * lap_x + 2.0 * c.rho_y;
    let cv = (3.0 * c.a + 2.0 * lx) * c.rho - 4.0 * lap * ly + 2.0 * lap_y + 2.0 * c.rho_x;
    Ok(3.0 * (u_y - v_x) * c.rho + cu * u - cv * v)
}

/// The Bessel-type example: metric `e^{2x}(J0(y)² + J1(y)²)`, its pair `P`, `Q`
/// and the cofactor in the gauge `b = 0`.
pub mod example {
    use super::*;
    use crate::expr::parse_expression;

    pub const P_U: &str = "x*besselj1(y) - y*besselj0(y)";
    pub const P_V: &str = "y*besselj1(y) + x*besselj0(y)";
    pub const Q_U: &str = "besselj1(y)";
    pub const Q_V: &str = "besselj0(y)";
    /// Cofactor shared by `P` and `Q` as written, before any gauge.
    pub const A_NATIVE: &str = "-1 + besselj0(y)*besselj1(y)/(y*(besselj0(y)^2 + besselj1(y)^2))";
    pub const B_NATIVE: &str = "besselj1(y)^2/(y*(besselj0(y)^2 + besselj1(y)^2))";
    /// Cofactor after the gauge `f = −x − ½ log(J0² + J1²)`, where `b = 0`.
    pub const A_GAUGED: &str = "besselj0(y)*besselj1(y)/(y*(besselj0(y)^2 + besselj1(y)^2))";
    pub const GAUGE_F: &str = "-x - 0.5*log(besselj0(y)^2 + besselj1(y)^2)";
    /// `w = a_y` on the branch carrying the integral.
    pub const W: &str = "(y*(besselj0(y)^4 - besselj1(y)^4) - 2*besselj0(y)^3*besselj1(y))/(y^2*(besselj0(y)^2 + besselj1(y)^2)^2)";

    pub fn p() -> CovectorField {
        CovectorField::parse(P_U, P_V, &EvalContext::new()).expect("valid expressions")
    }

    pub fn q() -> CovectorField {
        CovectorField::parse(Q_U, Q_V, &EvalContext::new()).expect("valid expressions")
    }

    pub fn native_cofactor() -> Cofactor {
        Cofactor::parse(A_NATIVE, B_NATIVE, &EvalContext::new()).expect("valid expressions")
    }

    pub fn gauged_cofactor() -> Cofactor {
        Cofactor::parse(A_GAUGED, "0", &EvalContext::new()).expect("valid expressions")
    }

    pub fn gauge_f() -> Expression {
        parse_expression(GAUGE_F).expect("valid expression")
    }
}
