//! Numeric specialization of the derived system at a point.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;

use super::derive::DerivedSystem;
use super::jetpoly::{JetPolynomial, JetVar, Sym, W00};
use super::univariate::UniPoly;
use crate::geometry::{GeometryError, MetricJets, MetricSpec};

#[derive(Clone, Debug)]
struct Term {
    coef: f64,
    e2l: i32,
    factors: Vec<(usize, i32)>,
}

/// A jet polynomial in `w` compiled to slot-indexed terms grouped by `w`-degree.
#[derive(Clone, Debug)]
struct Compiled {
    by_degree: Vec<Vec<Term>>,
}

impl Compiled {
    fn new(p: &JetPolynomial, slots: &mut BTreeMap<JetVar, usize>) -> Compiled {
        let deg = p.max_exp(W00).unwrap_or(0).max(0) as usize;
        let mut by_degree = vec![Vec::new(); deg + 1];
        for (m, c) in p.terms() {
            let d = m.exp_of(W00);
            assert!(d >= 0, "negative power of w in a compiled polynomial");
            let factors = m
                .vars
                .iter()
                .filter(|(v, _)| *v != W00)
                .map(|(v, e)| {
                    let n = slots.len();
                    (*slots.entry(*v).or_insert(n), *e)
                })
                .collect();
            by_degree[d as usize].push(Term { coef: c.to_f64().expect("finite coefficient"), e2l: m.e2l, factors });
        }
        Compiled { by_degree }
    }

    fn eval(&self, vals: &[f64], e2l: f64) -> UniPoly {
        UniPoly::new(
            self.by_degree
                .iter()
                .map(|terms| {
                    terms
                        .iter()
                        .map(|t| {
                            let mut v = t.coef * e2l.powi(t.e2l);
                            for &(s, e) in &t.factors {
                                v *= vals[s].powi(e);
                            }
                            v
                        })
                        .sum()
                })
                .collect(),
        )
    }
}

/// Derived system compiled for fast repeated specialization.
#[derive(Clone, Debug)]
pub struct CompiledSystem {
    pub derived: DerivedSystem,
    slots: Vec<JetVar>,
    eq0: Compiled,
    members: [Compiled; 3],
    nx: Compiled,
    ny: Compiled,
    den: Compiled,
    lam_order: usize,
    k_order: usize,
}

impl CompiledSystem {
    pub fn new(derived: DerivedSystem) -> CompiledSystem {
        let mut slots = BTreeMap::new();
        let eq0 = Compiled::new(&derived.eq0, &mut slots);
        let members = [
            Compiled::new(&derived.eq0_p, &mut slots),
            Compiled::new(&derived.eq0_pp, &mut slots),
            Compiled::new(&derived.eq0_ppp, &mut slots),
        ];
        let nx = Compiled::new(&derived.nx, &mut slots);
        let ny = Compiled::new(&derived.ny, &mut slots);
        let den = Compiled::new(&derived.den, &mut slots);
        let mut ordered = vec![JetVar::new(Sym::W, 0, 0); slots.len()];
        for (v, s) in &slots {
            ordered[*s] = *v;
        }
        let (lam_order, k_order) = derived.jet_orders();
        CompiledSystem { derived, slots: ordered, eq0, members, nx, ny, den, lam_order, k_order }
    }

    /// Orders of the λ- and k-jets the system needs.
    pub fn jet_orders(&self) -> (usize, usize) {
        (self.lam_order, self.k_order)
    }

    fn slot_values(&self, m: &MetricSpec, x: f64, y: f64) -> Result<(Vec<f64>, MetricJets), GeometryError> {
        let jets = m.jets(x, y, self.lam_order.max(1), Some(self.k_order.max(1)))?;
        let k = jets.k();
        let vals = self
            .slots
            .iter()
            .map(|v| match v.sym {
                Sym::Lambda => jets.lambda.d(v.i as usize, v.j as usize),
                Sym::K => k.d(v.i as usize, v.j as usize),
                _ => unreachable!("only metric jets remain after elimination"),
            })
            .collect();
        Ok((vals, jets))
    }

    /// EQ1 alone at a point: `(N_x, N_y, D)` with `w_x = N_x/D`, `w_y = N_y/D`.
    pub fn eq1_at(&self, m: &MetricSpec, x: f64, y: f64) -> Result<[UniPoly; 3], GeometryError> {
        let (vals, jets) = self.slot_values(m, x, y)?;
        let e = jets.e2l;
        Ok([self.nx.eval(&vals, e), self.ny.eval(&vals, e), self.den.eval(&vals, e)])
    }

    pub fn specialize(&self, m: &MetricSpec, x: f64, y: f64) -> Result<Specialized, GeometryError> {
        let (vals, jets) = self.slot_values(m, x, y)?;
        let k = jets.k();
        let e = jets.e2l;
        let eq0 = self.eq0.eval(&vals, e);
        let den = self.den.eval(&vals, e);
        let deflated = deflate(&eq0, &den);
        Ok(Specialized {
            x,
            y,
            e2l: e,
            k_x: k.d(1, 0),
            k_y: k.d(0, 1),
            eq0_deflated: deflated,
            eq0,
            members: [self.members[0].eval(&vals, e), self.members[1].eval(&vals, e), self.members[2].eval(&vals, e)],
            nx: self.nx.eval(&vals, e),
            ny: self.ny.eval(&vals, e),
            den,
        })
    }
}

/// Relative size below which a remainder counts as zero when deflating.
pub const DEFLATE_TOL: f64 = 1e-9;

/// Divides out factors of `den` from `eq0`; their roots make EQ1 singular.
fn deflate(eq0: &UniPoly, den: &UniPoly) -> UniPoly {
    let mut p = eq0.clone();
    while den.degree() >= 1 && p.degree() >= den.degree() {
        let (q, r) = p.div_rem(den);
        if r.max_abs() > DEFLATE_TOL * p.max_abs() {
            break;
        }
        p = q;
    }
    p
}

/// The system at one point as polynomials in `w`.
#[derive(Clone, Debug)]
pub struct Specialized {
    pub x: f64,
    pub y: f64,
    pub e2l: f64,
    pub k_x: f64,
    pub k_y: f64,
    pub eq0: UniPoly,
    /// `eq0` with factors of the EQ1 denominator removed.
    pub eq0_deflated: UniPoly,
    /// Eq0', Eq0'', Eq0'''.
    pub members: [UniPoly; 3],
    pub nx: UniPoly,
    pub ny: UniPoly,
    pub den: UniPoly,
}

impl Specialized {
    /// `(w_x, w_y)` from EQ1.
    pub fn gradient(&self, w: f64) -> (f64, f64) {
        let d = self.den.eval(w);
        (self.nx.eval(w) / d, self.ny.eval(w) / d)
    }

    /// Relative residuals of all four members at `w`.
    pub fn residuals(&self, w: f64) -> [f64; 4] {
        let z = nalgebra::Complex::new(w, 0.0);
        [
            self.eq0.relative_residual(z),
            self.members[0].relative_residual(z),
            self.members[1].relative_residual(z),
            self.members[2].relative_residual(z),
        ]
    }
}
