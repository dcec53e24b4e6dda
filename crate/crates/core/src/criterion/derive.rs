//! Prolongation of the relative Killing system to the zero-order system in `w`.
//!
//! Gauge `b = 0`, `a_y = w`, so `ρ = b_x − a_y = −w`. The second-order system
//! EQ2 solves for `w_xx, w_xy, w_yy`; one first-order relation Eq1 accompanies
//! it. Cross-differentiation yields the pair EQ1 (`w_x = Nx/D`, `w_y = Ny/D`),
//! the sextic Eq0 and three further polynomials in `w` alone.

use std::fmt::Write as _;

use super::jetpoly::{kv, lam, q, qf, Calculus, Dir, JetPolynomial, JetVar, Monomial, Sym, Q, W00, W01, W02, W10, W11, W20};

/// Right-hand sides of `w_xx`, `w_xy`, `w_yy` (Laurent in `w`).
#[derive(Clone, Debug, PartialEq)]
pub struct Eq2 {
    pub wxx: JetPolynomial,
    pub wxy: JetPolynomial,
    pub wyy: JetPolynomial,
}

impl Eq2 {
    /// Equation `w·(w_target − rhs)` cleared of the `1/w` denominator.
    pub fn cleared(&self, which: usize) -> JetPolynomial {
        let (target, rhs) = match which {
            0 => (W20, &self.wxx),
            1 => (W11, &self.wxy),
            _ => (W02, &self.wyy),
        };
        let lhs = &JetPolynomial::var(target) - rhs;
        lhs.mul_monomial(&Monomial::var(W00, 1), &q(1))
    }

    /// Replaces second-order `w`-jets using the system.
    pub fn reduce(&self, p: &JetPolynomial) -> JetPolynomial {
        p.substitute(W20, &self.wxx).substitute(W11, &self.wxy).substitute(W02, &self.wyy)
    }
}

#[derive(Clone, Debug)]
pub struct DerivedSystem {
    pub eq2: Eq2,
    /// First-order relation, multiplied through by `w`.
    pub eq1: JetPolynomial,
    pub nx: JetPolynomial,
    pub ny: JetPolynomial,
    pub den: JetPolynomial,
    /// The sextic.
    pub eq0: JetPolynomial,
    /// Compatibility of `w_x = Nx/D`, `w_y = Ny/D`.
    pub eq0_p: JetPolynomial,
    /// `D_x Eq0` along EQ1.
    pub eq0_pp: JetPolynomial,
    /// `D_y Eq0` along EQ1.
    pub eq0_ppp: JetPolynomial,
}

#[derive(Debug, thiserror::Error)]
pub enum DeriveError {
    #[error("shape check failed: {0}")]
    Shape(String),
}

fn shape(ok: bool, msg: &str) -> Result<(), DeriveError> {
    if ok {
        Ok(())
    } else {
        Err(DeriveError::Shape(msg.to_string()))
    }
}

/// Builds a polynomial from `(coefficient, factors, power of E)` rows.
fn poly(rows: &[((i64, i64), &[(JetVar, i32)], i32)]) -> JetPolynomial {
    let mut out = JetPolynomial::zero();
    for ((n, d), vars, e) in rows {
        let mut m = Monomial::e2l(*e);
        for (v, k) in vars.iter() {
            m = m.mul(&Monomial::var(*v, *k));
        }
        out = &out + &JetPolynomial::term(qf(*n, *d), m);
    }
    out
}

/// The displayed second-order system, term by term.
pub fn build_eq2() -> Eq2 {
    let (k00, k10, k01, k11, k02) = (kv(0, 0), kv(1, 0), kv(0, 1), kv(1, 1), kv(0, 2));
    let (l10, l01, l20, l11) = (lam(1, 0), lam(0, 1), lam(2, 0), lam(1, 1));
    let wxx = poly(&[
        ((3, 1), &[(k00, 1), (W00, 1)], 1),
        ((-7, 3), &[(l10, 1), (k01, 1)], 1),
        ((1, 1), &[(l01, 1), (k10, 1)], 1),
        ((-1, 1), &[(k11, 1)], 1),
        ((5, 3), &[(k01, 1), (W10, 1), (W00, -1)], 1),
        ((1, 3), &[(k01, 2), (W00, -1)], 2),
        ((2, 1), &[(l01, 2), (W00, 1)], 0),
        ((-2, 3), &[(l10, 2), (W00, 1)], 0),
        ((2, 1), &[(l20, 1), (W00, 1)], 0),
        ((-1, 3), &[(l10, 1), (W10, 1)], 0),
        ((-1, 1), &[(l01, 1), (W01, 1)], 0),
        ((4, 3), &[(W10, 2), (W00, -1)], 0),
    ]);
    let wxy = poly(&[
        ((4, 3), &[(k01, 1), (W01, 1), (W00, -1)], 1),
        ((-1, 3), &[(k10, 1), (W10, 1), (W00, -1)], 1),
        ((-1, 3), &[(l10, 1), (k10, 1)], 1),
        ((-5, 3), &[(l01, 1), (k01, 1)], 1),
        ((-1, 1), &[(k02, 1)], 1),
        ((-1, 3), &[(k10, 1), (k01, 1), (W00, -1)], 2),
        ((-3, 1), &[(W00, 2)], 0),
        ((2, 1), &[(l11, 1), (W00, 1)], 0),
        ((-8, 3), &[(l10, 1), (l01, 1), (W00, 1)], 0),
        ((1, 3), &[(l10, 1), (W01, 1)], 0),
        ((1, 3), &[(l01, 1), (W10, 1)], 0),
        ((4, 3), &[(W10, 1), (W01, 1), (W00, -1)], 0),
    ]);
    let wyy = poly(&[
        ((1, 1), &[(k00, 1), (W00, 1)], 1),
        ((-1, 1), &[(l10, 1), (k01, 1)], 1),
        ((7, 3), &[(l01, 1), (k10, 1)], 1),
        ((1, 1), &[(k11, 1)], 1),
        ((-5, 3), &[(k10, 1), (W01, 1), (W00, -1)], 1),
        ((1, 3), &[(k10, 2), (W00, -1)], 2),
        ((2, 1), &[(l10, 2), (W00, 1)], 0),
        ((-2, 3), &[(l01, 2), (W00, 1)], 0),
        ((-2, 1), &[(l20, 1), (W00, 1)], 0),
        ((-1, 1), &[(l10, 1), (W10, 1)], 0),
        ((-1, 3), &[(l01, 1), (W01, 1)], 0),
        ((4, 3), &[(W01, 2), (W00, -1)], 0),
    ]);
    Eq2 { wxx, wxy, wyy }
}

/// The displayed first-order relation times `w`.
pub fn build_eq1() -> JetPolynomial {
    let (k10, k01, k20, k02) = (kv(1, 0), kv(0, 1), kv(2, 0), kv(0, 2));
    let (l10, l01) = (lam(1, 0), lam(0, 1));
    poly(&[
        ((1, 1), &[(k10, 1), (W10, 1)], 0),
        ((1, 1), &[(k01, 1), (W01, 1)], 0),
        ((-2, 1), &[(l10, 1), (k10, 1), (W00, 1)], 0),
        ((-2, 1), &[(l01, 1), (k01, 1), (W00, 1)], 0),
        ((-1, 1), &[(k20, 1), (W00, 1)], 0),
        ((-1, 1), &[(k02, 1), (W00, 1)], 0),
        ((-6, 1), &[(W00, 3)], -1),
    ])
}

const U: JetVar = JetVar::new(Sym::U, 0, 0);
const V: JetVar = JetVar::new(Sym::V, 0, 0);
const A: JetVar = JetVar::new(Sym::A, 0, 0);

/// Calculus in which `U`, `V` follow the prolonged relative Killing system
/// with `b = 0`, `ρ = −w`.
fn prolonged_calculus() -> Calculus {
    let p = |rows: &[((i64, i64), &[(JetVar, i32)], i32)]| poly(rows);
    let (k10, k01) = (kv(1, 0), kv(0, 1));
    let (l10, l01) = (lam(1, 0), lam(0, 1));
    // E/(3ρ) = −E/(3w); ρ_x/ρ = w_x/w; ρ_y/ρ = w_y/w
    let ux = p(&[((-1, 1), &[(A, 1), (U, 1)], 0), ((-1, 1), &[(l10, 1), (U, 1)], 0), ((-1, 1), &[(l01, 1), (V, 1)], 0)]);
    let vx = p(&[
        ((-1, 3), &[(k10, 1), (U, 1), (W00, -1)], 1),
        ((-1, 3), &[(k01, 1), (V, 1), (W00, -1)], 1),
        ((1, 3), &[(l01, 1), (U, 1)], 0),
        ((1, 3), &[(W01, 1), (W00, -1), (U, 1)], 0),
        ((-1, 1), &[(A, 1), (V, 1)], 0),
        ((-1, 3), &[(l10, 1), (V, 1)], 0),
        ((-1, 3), &[(W10, 1), (W00, -1), (V, 1)], 0),
    ]);
    let uy = p(&[
        ((1, 3), &[(k10, 1), (U, 1), (W00, -1)], 1),
        ((1, 3), &[(k01, 1), (V, 1), (W00, -1)], 1),
        ((-1, 3), &[(l01, 1), (U, 1)], 0),
        ((-1, 3), &[(W01, 1), (W00, -1), (U, 1)], 0),
        ((1, 3), &[(l10, 1), (V, 1)], 0),
        ((1, 3), &[(W10, 1), (W00, -1), (V, 1)], 0),
    ]);
    let vy = p(&[((-1, 1), &[(l10, 1), (U, 1)], 0), ((-1, 1), &[(l01, 1), (V, 1)], 0)]);
    let mut c = Calculus::new();
    c.set_rule(U, Dir::X, ux);
    c.set_rule(U, Dir::Y, uy);
    c.set_rule(V, Dir::X, vx);
    c.set_rule(V, Dir::Y, vy);
    c
}

/// Solves `eq = α·target + rest` for `target` when `α` is a single term.
fn solve_for(eq: &JetPolynomial, target: JetVar) -> Result<JetPolynomial, DeriveError> {
    let cs = eq.coefficients_in(target);
    shape(cs.keys().all(|&e| e == 0 || e == 1), "equation must be linear in the unknown")?;
    let alpha = cs.get(&1).cloned().unwrap_or_default();
    let (m, c) = alpha.as_term().ok_or_else(|| DeriveError::Shape(format!("{} has a non-monomial coefficient", target.name())))?;
    let rest = cs.get(&0).cloned().unwrap_or_default();
    Ok(-&rest.div_term(&m, &c))
}

/// Second-order system and first-order relation obtained by cross-differentiating
/// the prolonged relative Killing system. Independent of [`build_eq2`].
pub fn derive_eq2() -> Result<(Eq2, JetPolynomial), DeriveError> {
    let mut c = prolonged_calculus();
    let u = JetPolynomial::var(U);
    let v = JetPolynomial::var(V);
    let ux = c.d(&u, Dir::X);
    let uy = c.d(&u, Dir::Y);
    let vx = c.d(&v, Dir::X);
    let vy = c.d(&v, Dir::Y);
    let cu = &c.d(&ux, Dir::Y) - &c.d(&uy, Dir::X);
    let cv = &c.d(&vx, Dir::Y) - &c.d(&vy, Dir::X);
    let split = |p: &JetPolynomial| -> Result<(JetPolynomial, JetPolynomial), DeriveError> {
        let a = p.coefficients_in(U);
        shape(a.keys().all(|&e| e <= 1), "compatibility must be linear in U")?;
        let pu = a.get(&1).cloned().unwrap_or_default();
        let pv = a.get(&0).cloned().unwrap_or_default().coeff_in(V, 1);
        Ok((pu, pv))
    };
    let (e0, e1) = split(&cu)?;
    let (e2, e3) = split(&cv)?;
    let eqs = [e0, e1, e2, e3];
    let find = |target: JetVar| {
        eqs.iter().rposition(|e| e.contains(target)).ok_or_else(|| DeriveError::Shape(format!("{} never appears", target.name())))
    };
    let wxx = solve_for(&eqs[find(W20)?], W20)?;
    let wyy = solve_for(&eqs[find(W02)?], W02)?;
    let wxy = solve_for(&eqs[find(W11)?], W11)?;
    let sys = Eq2 { wxx, wxy, wyy };
    for p in [&sys.wxx, &sys.wxy, &sys.wyy] {
        shape(!p.vars().iter().any(|v| v.sym == Sym::A), "cofactor jets must drop out")?;
    }
    // every coefficient equation, reduced, leaves one first-order relation
    let mut first = JetPolynomial::zero();
    for e in &eqs {
        let r = sys.reduce(e).normalized(&[Sym::W], true);
        if r.is_zero() {
            continue;
        }
        if first.is_zero() {
            first = r;
        } else {
            shape(r == first, "reduced compatibilities disagree")?;
        }
    }
    shape(!first.is_zero(), "no first-order relation")?;
    Ok((sys, first))
}

/// Linear form `p·w_x + q·w_y + r`.
struct Linear {
    p: JetPolynomial,
    q: JetPolynomial,
    r: JetPolynomial,
}

fn linear_parts(ell: &JetPolynomial) -> Result<Linear, DeriveError> {
    let mut p = JetPolynomial::zero();
    let mut qq = JetPolynomial::zero();
    let mut r = JetPolynomial::zero();
    for (e, c) in ell.coefficients_in(W10) {
        match e {
            0 => {
                for (f, d) in c.coefficients_in(W01) {
                    match f {
                        0 => r = d,
                        1 => qq = d,
                        _ => return Err(DeriveError::Shape("nonlinear in w_y".into())),
                    }
                }
            }
            1 => {
                shape(!c.contains(W01), "mixed term survives")?;
                p = c;
            }
            _ => return Err(DeriveError::Shape("nonlinear in w_x".into())),
        }
    }
    Ok(Linear { p, q: qq, r })
}

/// Removes the part of `c` quadratic in `(w_x, w_y)` using Eq1, whose linear
/// part is `k_x w_x + k_y w_y`.
fn strip_quadratic(c: &JetPolynomial, eq1: &JetPolynomial) -> Result<JetPolynomial, DeriveError> {
    let kx = Monomial::var(kv(1, 0), 1);
    let ky = Monomial::var(kv(0, 1), 1);
    let q20 = c.coeff_in(W10, 2);
    let q02 = c.coeff_in(W01, 2);
    let alpha = q20.div_term(&kx, &q(1));
    let beta = q02.div_term(&ky, &q(1));
    let corr = &(&alpha * &JetPolynomial::var(W10)) + &(&beta * &JetPolynomial::var(W01));
    let out = c - &(&corr * eq1);
    shape(out.max_exp(W10).unwrap_or(0) <= 1 && out.max_exp(W01).unwrap_or(0) <= 1, "quadratic part does not factor through Eq1")?;
    shape(out.coeff_in(W10, 1).coeff_in(W01, 1).is_zero(), "mixed quadratic term survives")?;
    Ok(out)
}

/// `D·(D_dir P)` with `w_x → Nx/D` or `w_y → Ny/D`, for `P` depending on `w` only through `w`.
fn along(c: &mut Calculus, p: &JetPolynomial, dir: Dir, n: &JetPolynomial, den: &JetPolynomial) -> JetPolynomial {
    let w1 = if dir == Dir::X { W10 } else { W01 };
    let dp = c.d(p, dir);
    let parts = dp.coefficients_in(w1);
    let a = parts.get(&0).cloned().unwrap_or_default();
    let b = parts.get(&1).cloned().unwrap_or_default();
    assert!(parts.keys().all(|&e| e <= 1));
    &(den * &a) + &(&b * n)
}

fn max_w(p: &JetPolynomial) -> i32 {
    p.max_exp(W00).unwrap_or(0)
}

/// Runs the full elimination starting from a second-order system and Eq1.
pub fn derive_system(eq2: &Eq2, eq1: &JetPolynomial) -> Result<DerivedSystem, DeriveError> {
    let mut c = Calculus::new();
    let comp1 = eq2.reduce(&(&c.d(&eq2.wxx, Dir::Y) - &c.d(&eq2.wxy, Dir::X)));
    let comp2 = eq2.reduce(&(&c.d(&eq2.wxy, Dir::Y) - &c.d(&eq2.wyy, Dir::X)));
    let comp3 = eq2.reduce(&c.d(eq1, Dir::X));
    let comp4 = eq2.reduce(&c.d(eq1, Dir::Y));
    // bring everything to polynomial form in w before elimination
    let lift = |p: &JetPolynomial| -> JetPolynomial {
        let m = p.min_exp(W00).unwrap_or(0).min(0);
        p.mul_monomial(&Monomial::var(W00, -m), &q(1))
    };
    let e1 = linear_parts(eq1)?;
    let mut lin = Vec::new();
    for comp in [&comp1, &comp2, &comp3, &comp4] {
        let l = strip_quadratic(&lift(comp), eq1)?;
        lin.push(linear_parts(&lift(&l))?);
    }
    // a form independent of Eq1 fixes w_x, w_y; the others give Eq0
    let det = |l: &Linear| &(&e1.p * &l.q) - &(&l.p * &e1.q);
    let mut chosen: Option<(JetPolynomial, JetPolynomial, JetPolynomial)> = None;
    for l in &lin {
        let d = det(l);
        if d.is_zero() {
            continue;
        }
        // Cramer: w_x = (q1 r − q r1)/det, w_y = (p r1 − p1 r)/det
        let nx = &(&e1.q * &l.r) - &(&l.q * &e1.r);
        let ny = &(&l.p * &e1.r) - &(&e1.p * &l.r);
        let cand = normalize_triple(&nx, &ny, &d)?;
        if chosen.as_ref().is_none_or(|(_, _, dd)| max_w(&cand.2) < max_w(dd) || (max_w(&cand.2) == max_w(dd) && cand.2.len() < dd.len())) {
            chosen = Some(cand);
        }
    }
    let (nx, ny, den) = chosen.ok_or_else(|| DeriveError::Shape("no independent first-order form".into()))?;
    // Eq0: the remaining forms with w_x, w_y eliminated
    let mut eq0: Option<JetPolynomial> = None;
    for l in &lin {
        let z = &(&(&l.p * &nx) + &(&l.q * &ny)) + &(&l.r * &den);
        if z.is_zero() {
            continue;
        }
        let z = deflate(&z.normalized(&[Sym::W], true), &den);
        if eq0.as_ref().is_none_or(|e| max_w(&z) < max_w(e) || (max_w(&z) == max_w(e) && z.len() < e.len())) {
            eq0 = Some(z);
        }
    }
    let eq0 = eq0.ok_or_else(|| DeriveError::Shape("no zero-order relation".into()))?;
    let eq0_pp = along(&mut c, &eq0, Dir::X, &nx, &den).normalized(&[], true);
    let eq0_ppp = along(&mut c, &eq0, Dir::Y, &ny, &den).normalized(&[], true);
    let num = &(&(&along(&mut c, &nx, Dir::Y, &ny, &den) * &den) - &(&nx * &along(&mut c, &den, Dir::Y, &ny, &den)))
        - &(&(&along(&mut c, &ny, Dir::X, &nx, &den) * &den) - &(&ny * &along(&mut c, &den, Dir::X, &nx, &den)));
    let (quo, rem) = num.div_rem_w(&den);
    shape(rem.is_zero(), "compatibility numerator is not divisible by the denominator")?;
    let eq0_p = quo.normalized(&[], true);
    let sys = DerivedSystem { eq2: eq2.clone(), eq1: eq1.clone(), nx, ny, den, eq0, eq0_p, eq0_pp, eq0_ppp };
    sys.check_shape()?;
    Ok(sys)
}

/// Divides out factors of `den` that `p` contains exactly.
fn deflate(p: &JetPolynomial, den: &JetPolynomial) -> JetPolynomial {
    let mut p = p.clone();
    loop {
        let (quo, rem) = p.div_rem_w(den);
        if !rem.is_zero() || !quo.is_polynomial_in_jets() {
            return p;
        }
        p = quo.normalized(&[Sym::W], true);
    }
}

/// Scales `(nx, ny, den)` so that `den` has `w²`-coefficient `30 k_x`.
fn normalize_triple(nx: &JetPolynomial, ny: &JetPolynomial, den: &JetPolynomial) -> Result<(JetPolynomial, JetPolynomial, JetPolynomial), DeriveError> {
    let (mc, c) = JetPolynomial::joint_content(&[nx, ny, den]);
    let (nx, ny, den) = (nx.div_term(&mc, &c), ny.div_term(&mc, &c), den.div_term(&mc, &c));
    let top = max_w(&den);
    let lead = den.coeff_in(W00, top);
    let (m, k) = lead.as_term().ok_or_else(|| DeriveError::Shape("denominator leading coefficient is not a single term".into()))?;
    let target = Monomial::var(kv(1, 0), 1);
    let scale_m = m.div(&target);
    let scale_c = k / q(30);
    Ok((nx.div_term(&scale_m, &scale_c), ny.div_term(&scale_m, &scale_c), den.div_term(&scale_m, &scale_c)))
}

impl JetPolynomial {
    /// No negative exponent on any jet variable other than `w`.
    pub fn is_polynomial_in_jets(&self) -> bool {
        self.terms().all(|(m, _)| m.vars.iter().all(|(v, e)| *e > 0 || v.sym == Sym::W))
    }
}

impl DerivedSystem {
    /// Derives everything from the displayed second-order system.
    pub fn derive() -> Result<DerivedSystem, DeriveError> {
        derive_system(&build_eq2(), &build_eq1())
    }

    /// `(name, polynomial)` for the four zero-order members, sextic first.
    pub fn members(&self) -> [(&'static str, &JetPolynomial); 4] {
        [("Eq0", &self.eq0), ("Eq0'", &self.eq0_p), ("Eq0''", &self.eq0_pp), ("Eq0'''", &self.eq0_ppp)]
    }

    pub fn degrees(&self) -> [i32; 4] {
        self.members().map(|(_, p)| max_w(p))
    }

    /// Structural checks against the published shapes.
    pub fn check_shape(&self) -> Result<(), DeriveError> {
        let e = &self.eq0;
        shape(max_w(e) == 6, "Eq0 must be a sextic")?;
        shape(e.coeff_in(W00, 6) == JetPolynomial::int(5400), "Eq0 leading coefficient must be 5400")?;
        for k in 3..=5 {
            shape(e.coeff_in(W00, k).is_zero(), "Eq0 must have no w^5, w^4, w^3 terms")?;
        }
        let dc = self.den.coefficients_in(W00);
        shape(dc.keys().copied().collect::<Vec<_>>() == vec![0, 2], "denominator must be c2 w^2 + c0")?;
        shape(dc[&2] == JetPolynomial::var(kv(1, 0)).scale(&q(30)), "denominator must lead with 30 k_x w^2")?;
        let mut d = self.degrees().to_vec();
        d.sort_unstable();
        shape(d == vec![6, 7, 8, 10], "member degrees must be 6, 7, 8, 10")?;
        for (name, p) in self.members() {
            shape(p.is_polynomial_in_jets() && p.min_exp(W00).unwrap_or(0) >= 0, &format!("{name} must be polynomial"))?;
            shape(!p.contains(W10) && !p.contains(W01), &format!("{name} must not involve w_x, w_y"))?;
        }
        Ok(())
    }

    /// Highest jet orders used: (λ, k).
    pub fn jet_orders(&self) -> (usize, usize) {
        let mut lo = 1;
        let mut ko = 0;
        for (_, p) in self.members().into_iter().chain([("", &self.nx), ("", &self.ny), ("", &self.den)]) {
            for v in p.vars() {
                match v.sym {
                    Sym::Lambda => lo = lo.max(v.order()),
                    Sym::K => ko = ko.max(v.order()),
                    _ => {}
                }
            }
        }
        (lo, ko)
    }

    /// Plain-text export, one term per line.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let mut section = |name: &str, p: &JetPolynomial| {
            let _ = writeln!(s, "# {name} ({} terms, degree {} in w)", p.len(), max_w(p));
            s.push_str(&p.dump());
        };
        section("w_xx", &self.eq2.wxx);
        section("w_xy", &self.eq2.wxy);
        section("w_yy", &self.eq2.wyy);
        section("Eq1", &self.eq1);
        section("Nx", &self.nx);
        section("Ny", &self.ny);
        section("D", &self.den);
        for (name, p) in self.members() {
            section(name, p);
        }
        s
    }
}

/// Constant factor relating two polynomials that agree up to scale.
pub fn proportional(a: &JetPolynomial, b: &JetPolynomial) -> Option<Q> {
    let (ma, ca) = a.terms().next()?;
    let cb = b.terms().find(|(m, _)| *m == ma)?.1;
    let r = cb / ca;
    (a.scale(&r) == *b).then_some(r)
}

