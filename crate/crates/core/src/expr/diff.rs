//! Symbolic differentiation with a per-node cache.

use std::collections::HashMap;

use super::{Expression, Func, Node, Ratio, Var};

/// Differentiates expressions, reusing results for shared subtrees.
///
/// The cache keeps the key expressions alive, so node addresses stay unique
/// for the lifetime of the differentiator.
#[derive(Default)]
pub struct Differentiator {
    cache: HashMap<(usize, Var), (Expression, Expression)>,
}

impl Differentiator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn diff(&mut self, e: &Expression, v: Var) -> Expression {
        if let Some((_, d)) = self.cache.get(&(e.id(), v)) {
            return d.clone();
        }
        let d = self.diff_node(e, v);
        self.cache.insert((e.id(), v), (e.clone(), d.clone()));
        d
    }

    /// `∂^i_x ∂^j_y e`, built through the cache.
    pub fn partial(&mut self, e: &Expression, i: usize, j: usize) -> Expression {
        let mut d = e.clone();
        for _ in 0..i {
            d = self.diff(&d, Var::X);
        }
        for _ in 0..j {
            d = self.diff(&d, Var::Y);
        }
        d
    }

    fn diff_node(&mut self, e: &Expression, v: Var) -> Expression {
        let zero = || Expression::constant(0.0);
        match e.node() {
            Node::Const(_) | Node::Param(_) => zero(),
            Node::Var(w) => Expression::constant(if *w == v { 1.0 } else { 0.0 }),
            Node::Add(a, b) => self.diff(a, v).add(&self.diff(b, v)),
            Node::Sub(a, b) => self.diff(a, v).sub(&self.diff(b, v)),
            Node::Neg(a) => self.diff(a, v).neg(),
            Node::Mul(a, b) => {
                let (da, db) = (self.diff(a, v), self.diff(b, v));
                da.mul(b).add(&a.mul(&db))
            }
            Node::Div(a, b) => {
                let (da, db) = (self.diff(a, v), self.diff(b, v));
                if db.as_const() == Some(0.0) {
                    return da.div(b);
                }
                da.div(b).sub(&e.mul(&db).div(b))
            }
            Node::Pow(a, r) => {
                let da = self.diff(a, v);
                let lower = a.pow(r.add(Ratio::int(-1)));
                Expression::constant(r.value()).mul(&lower).mul(&da)
            }
            Node::Func(f, a) => {
                let da = self.diff(a, v);
                if da.as_const() == Some(0.0) {
                    return zero();
                }
                let outer = match f {
                    Func::Exp => e.clone(),
                    Func::Log => Expression::constant(1.0).div(a),
                    Func::Sin => Expression::apply(Func::Cos, a),
                    Func::Cos => Expression::apply(Func::Sin, a).neg(),
                    Func::Sqrt => Expression::constant(0.5).div(e),
                    Func::BesselJ0 => Expression::apply(Func::BesselJ1, a).neg(),
                    // J1' = J0 - J1/u
                    Func::BesselJ1 => Expression::apply(Func::BesselJ0, a)
                        .sub(&Expression::apply(Func::BesselJScaled(1), a)),
                    // (J_n/u^n)' = -u J_{n+1}/u^{n+1}
                    Func::BesselJScaled(n) => a.mul(&Expression::apply(Func::BesselJScaled(n + 1), a)).neg(),
                };
                outer.mul(&da)
            }
        }
    }
}
