//! Exact polynomial algebra over jet variables.
//!
//! A term is a rational coefficient times a Laurent monomial in jet variables
//! and a power of `E = e^{2λ}`. λ-jets are kept in the canonical form
//! `λ_{i,j}` with `j ≤ 1`: the identity `λ_xx + λ_yy = −E k` eliminates higher
//! `y`-orders, which makes the representation of jets of an arbitrary metric
//! unique and the zero test exact.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qf(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sym {
    /// conformal exponent λ
    Lambda,
    /// Gaussian curvature k
    K,
    /// `w = a_y`
    W,
    /// cofactor component `a` (gauge `b = 0`)
    A,
    U,
    V,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JetVar {
    pub sym: Sym,
    pub i: u8,
    pub j: u8,
}

impl JetVar {
    pub const fn new(sym: Sym, i: u8, j: u8) -> JetVar {
        JetVar { sym, i, j }
    }

    pub fn order(self) -> usize {
        (self.i + self.j) as usize
    }

    pub fn name(self) -> String {
        let s = match self.sym {
            Sym::Lambda => "L",
            Sym::K => "K",
            Sym::W => "W",
            Sym::A => "A",
            Sym::U => "U",
            Sym::V => "V",
        };
        format!("{s}{}{}", self.i, self.j)
    }
}

pub const W00: JetVar = JetVar::new(Sym::W, 0, 0);
pub const W10: JetVar = JetVar::new(Sym::W, 1, 0);
pub const W01: JetVar = JetVar::new(Sym::W, 0, 1);
pub const W20: JetVar = JetVar::new(Sym::W, 2, 0);
pub const W11: JetVar = JetVar::new(Sym::W, 1, 1);
pub const W02: JetVar = JetVar::new(Sym::W, 0, 2);

pub fn lam(i: u8, j: u8) -> JetVar {
    JetVar::new(Sym::Lambda, i, j)
}

pub fn kv(i: u8, j: u8) -> JetVar {
    JetVar::new(Sym::K, i, j)
}

/// Laurent monomial; `vars` is sorted with nonzero exponents.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial {
    pub e2l: i32,
    pub vars: Vec<(JetVar, i32)>,
}

impl Monomial {
    pub fn one() -> Monomial {
        Monomial::default()
    }

    pub fn var(v: JetVar, e: i32) -> Monomial {
        if e == 0 {
            return Monomial::one();
        }
        Monomial { e2l: 0, vars: vec![(v, e)] }
    }

    pub fn e2l(n: i32) -> Monomial {
        Monomial { e2l: n, vars: vec![] }
    }

    pub fn exp_of(&self, v: JetVar) -> i32 {
        self.vars.iter().find(|(w, _)| *w == v).map_or(0, |(_, e)| *e)
    }

    pub fn mul(&self, o: &Monomial) -> Monomial {
        self.combine(o, 1)
    }

    pub fn div(&self, o: &Monomial) -> Monomial {
        self.combine(o, -1)
    }

    fn combine(&self, o: &Monomial, sign: i32) -> Monomial {
        let mut vars = Vec::with_capacity(self.vars.len() + o.vars.len());
        let (mut a, mut b) = (0, 0);
        while a < self.vars.len() || b < o.vars.len() {
            let pick = match (self.vars.get(a), o.vars.get(b)) {
                (Some(x), Some(y)) => x.0.cmp(&y.0),
                (Some(_), None) => std::cmp::Ordering::Less,
                _ => std::cmp::Ordering::Greater,
            };
            match pick {
                std::cmp::Ordering::Less => {
                    vars.push(self.vars[a]);
                    a += 1;
                }
                std::cmp::Ordering::Greater => {
                    vars.push((o.vars[b].0, sign * o.vars[b].1));
                    b += 1;
                }
                std::cmp::Ordering::Equal => {
                    let e = self.vars[a].1 + sign * o.vars[b].1;
                    if e != 0 {
                        vars.push((self.vars[a].0, e));
                    }
                    a += 1;
                    b += 1;
                }
            }
        }
        Monomial { e2l: self.e2l + sign * o.e2l, vars }
    }

    /// Monomial with `v` removed.
    pub fn without(&self, v: JetVar) -> Monomial {
        Monomial { e2l: self.e2l, vars: self.vars.iter().copied().filter(|(w, _)| *w != v).collect() }
    }

    /// Componentwise minimum of exponents (including absent = 0).
    pub fn meet(&self, o: &Monomial) -> Monomial {
        let keys: BTreeSet<JetVar> = self.vars.iter().chain(o.vars.iter()).map(|(v, _)| *v).collect();
        let vars = keys
            .into_iter()
            .filter_map(|v| {
                let e = self.exp_of(v).min(o.exp_of(v));
                (e != 0).then_some((v, e))
            })
            .collect();
        Monomial { e2l: self.e2l.min(o.e2l), vars }
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, e) in &self.vars {
            if !first {
                f.write_str("*")?;
            }
            first = false;
            if *e == 1 {
                write!(f, "{}", v.name())?;
            } else {
                write!(f, "{}^{}", v.name(), e)?;
            }
        }
        if self.e2l != 0 {
            if !first {
                f.write_str("*")?;
            }
            first = false;
            write!(f, "E^{}", self.e2l)?;
        }
        if first {
            f.write_str("1")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct JetPolynomial {
    terms: BTreeMap<Monomial, Q>,
}

impl JetPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Q) -> Self {
        Self::term(c, Monomial::one())
    }

    pub fn int(n: i64) -> Self {
        Self::constant(q(n))
    }

    pub fn term(c: Q, m: Monomial) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        JetPolynomial { terms }
    }

    pub fn var(v: JetVar) -> Self {
        Self::term(q(1), Monomial::var(v, 1))
    }

    pub fn var_pow(v: JetVar, e: i32) -> Self {
        Self::term(q(1), Monomial::var(v, e))
    }

    /// `E^n = e^{2nλ}`.
    pub fn e2l(n: i32) -> Self {
        Self::term(q(1), Monomial::e2l(n))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Q)> {
        self.terms.iter()
    }

    fn add_term(&mut self, m: Monomial, c: Q) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = e.get() + &c;
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn scale(&self, c: &Q) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        JetPolynomial { terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect() }
    }

    pub fn mul_monomial(&self, m: &Monomial, c: &Q) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        JetPolynomial { terms: self.terms.iter().map(|(t, k)| (t.mul(m), k * c)).collect() }
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::int(1);
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    pub fn vars(&self) -> BTreeSet<JetVar> {
        self.terms.keys().flat_map(|m| m.vars.iter().map(|(v, _)| *v)).collect()
    }

    pub fn contains(&self, v: JetVar) -> bool {
        self.terms.keys().any(|m| m.exp_of(v) != 0)
    }

    pub fn max_exp(&self, v: JetVar) -> Option<i32> {
        self.terms.keys().map(|m| m.exp_of(v)).max()
    }

    pub fn min_exp(&self, v: JetVar) -> Option<i32> {
        self.terms.keys().map(|m| m.exp_of(v)).min()
    }

    /// Splits into coefficients of powers of `v`.
    pub fn coefficients_in(&self, v: JetVar) -> BTreeMap<i32, JetPolynomial> {
        let mut out: BTreeMap<i32, JetPolynomial> = BTreeMap::new();
        for (m, c) in &self.terms {
            out.entry(m.exp_of(v)).or_default().add_term(m.without(v), c.clone());
        }
        out
    }

    pub fn coeff_in(&self, v: JetVar, e: i32) -> JetPolynomial {
        self.coefficients_in(v).remove(&e).unwrap_or_default()
    }

    /// Replaces positive powers of `v` by powers of `by`.
    pub fn substitute(&self, v: JetVar, by: &JetPolynomial) -> JetPolynomial {
        let mut powers: Vec<JetPolynomial> = vec![JetPolynomial::int(1)];
        let mut out = JetPolynomial::zero();
        for (m, c) in &self.terms {
            let e = m.exp_of(v);
            assert!(e >= 0, "cannot substitute into a negative power of {}", v.name());
            if e == 0 {
                out.add_term(m.clone(), c.clone());
                continue;
            }
            while powers.len() <= e as usize {
                let next = powers.last().unwrap() * by;
                powers.push(next);
            }
            let rest = m.without(v);
            for (t, k) in &powers[e as usize].terms {
                out.add_term(t.mul(&rest), k * c);
            }
        }
        out
    }

    /// Exact division by a single term; fails when `self` is not divisible
    /// in the given variable set (negative exponents are only allowed for `laurent` vars).
    pub fn div_term(&self, m: &Monomial, c: &Q) -> JetPolynomial {
        let inv = Q::one() / c;
        JetPolynomial { terms: self.terms.iter().map(|(t, k)| (t.div(m), k * &inv)).collect() }
    }

    /// Returns the single term of a one-term polynomial.
    pub fn as_term(&self) -> Option<(Monomial, Q)> {
        if self.terms.len() == 1 {
            self.terms.iter().next().map(|(m, c)| (m.clone(), c.clone()))
        } else {
            None
        }
    }

    /// True when no exponent other than those of `e2l` is negative.
    pub fn is_polynomial(&self) -> bool {
        self.terms.keys().all(|m| m.vars.iter().all(|(_, e)| *e > 0))
    }

    /// Greatest common monomial divisor (exponents may be negative).
    pub fn monomial_content(&self) -> Monomial {
        let mut it = self.terms.keys();
        let Some(first) = it.next() else { return Monomial::one() };
        it.fold(first.clone(), |acc, m| acc.meet(m))
    }

    /// Positive rational `c` such that `self / c` has coprime integer coefficients.
    pub fn rational_content(&self) -> Q {
        let mut num = BigInt::zero();
        let mut den = BigInt::one();
        for c in self.terms.values() {
            num = num.gcd(c.numer());
            den = den.lcm(c.denom());
        }
        if num.is_zero() {
            return Q::one();
        }
        Q::new(num, den)
    }

    /// Common monomial and rational content of several polynomials.
    pub fn joint_content(ps: &[&JetPolynomial]) -> (Monomial, Q) {
        let mut mono: Option<Monomial> = None;
        let mut all = JetPolynomial::zero();
        for p in ps.iter().filter(|p| !p.is_zero()) {
            let mc = p.monomial_content();
            mono = Some(mono.map_or(mc.clone(), |m| m.meet(&mc)));
            for c in p.terms.values() {
                all.add_term(Monomial::var(W00, all.len() as i32 + 1), c.clone());
            }
        }
        (mono.unwrap_or_default(), all.rational_content())
    }

    /// Removes rational content and the monomial factors in `strip`, then fixes
    /// the sign so that the term with the highest `w`-degree is positive.
    pub fn normalized(&self, strip: &[Sym], strip_e2l: bool) -> JetPolynomial {
        if self.is_zero() {
            return self.clone();
        }
        let mc = self.monomial_content();
        let factor = Monomial {
            e2l: if strip_e2l { mc.e2l } else { 0 },
            vars: mc.vars.iter().copied().filter(|(v, _)| strip.contains(&v.sym)).collect(),
        };
        let mut c = self.rational_content();
        let lead_w = self.max_exp(W00).unwrap_or(0);
        let lead = self.coeff_in(W00, lead_w);
        if lead.terms.values().next_back().is_some_and(|k| k.is_negative()) {
            c = -c;
        }
        self.div_term(&factor, &c)
    }

    pub fn eval<F: Fn(JetVar) -> f64>(&self, e2l: f64, val: F) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                let mut t = c.to_f64().unwrap_or(f64::NAN) * e2l.powi(m.e2l);
                for (v, e) in &m.vars {
                    t *= val(*v).powi(*e);
                }
                t
            })
            .sum()
    }

    pub fn eval_exact<F: Fn(JetVar) -> Q>(&self, e2l: &Q, val: F) -> Q {
        let pw = |b: &Q, e: i32| -> Q {
            let p = num_traits::pow(b.clone(), e.unsigned_abs() as usize);
            if e < 0 {
                Q::one() / p
            } else {
                p
            }
        };
        let mut acc = Q::zero();
        for (m, c) in &self.terms {
            let mut t = c * pw(e2l, m.e2l);
            for (v, e) in &m.vars {
                t *= pw(&val(*v), *e);
            }
            acc += t;
        }
        acc
    }

    /// Long division by `d` as polynomials in `w`, whose leading coefficient must be one term.
    pub fn div_rem_w(&self, d: &JetPolynomial) -> (JetPolynomial, JetPolynomial) {
        let dc = d.coefficients_in(W00);
        let (&m, lead) = dc.iter().next_back().expect("division by zero polynomial");
        let (lm, lc) = lead.as_term().expect("leading coefficient in w must be a single term");
        let mut rem = self.clone();
        let mut quo = JetPolynomial::zero();
        while let Some(n) = rem.max_exp(W00) {
            if n < m || rem.is_zero() {
                break;
            }
            let top = rem.coeff_in(W00, n);
            let t = top.div_term(&lm, &lc).mul_monomial(&Monomial::var(W00, n - m), &q(1));
            rem = &rem - &(&t * d);
            quo = &quo + &t;
        }
        (quo, rem)
    }

    /// One line per term: coefficient, monomial.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (m, c) in self.terms.iter().rev() {
            s.push_str(&format!("{c}\t{m}\n"));
        }
        s
    }
}

impl fmt::Display for JetPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (n, (m, c)) in self.terms.iter().rev().enumerate() {
            let (sign, mag) = if c.is_negative() { ("-", -c.clone()) } else { ("+", c.clone()) };
            if n > 0 || sign == "-" {
                write!(f, " {sign} ")?;
            }
            write!(f, "{mag}*{m}")?;
        }
        Ok(())
    }
}

impl Add for &JetPolynomial {
    type Output = JetPolynomial;
    fn add(self, o: &JetPolynomial) -> JetPolynomial {
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &JetPolynomial {
    type Output = JetPolynomial;
    fn sub(self, o: &JetPolynomial) -> JetPolynomial {
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl Neg for &JetPolynomial {
    type Output = JetPolynomial;
    fn neg(self) -> JetPolynomial {
        JetPolynomial { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect() }
    }
}

impl Mul for &JetPolynomial {
    type Output = JetPolynomial;
    fn mul(self, o: &JetPolynomial) -> JetPolynomial {
        let mut out = JetPolynomial::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }
}

/// Direction of a total derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dir {
    X,
    Y,
}

/// Total derivatives `D_x`, `D_y` on jet polynomials.
///
/// Custom rules can be installed for variables whose derivatives are
/// prescribed by a differential system (for example `U`, `V`).
#[derive(Default)]
pub struct Calculus {
    rules: HashMap<(JetVar, Dir), JetPolynomial>,
    ek_x: Vec<JetPolynomial>,
}

impl Calculus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_rule(&mut self, v: JetVar, dir: Dir, p: JetPolynomial) {
        self.rules.insert((v, dir), p);
    }

    /// `D_x^i (E k)`, cached.
    fn ek_dx(&mut self, i: usize) -> JetPolynomial {
        if self.ek_x.is_empty() {
            self.ek_x.push(&JetPolynomial::e2l(1) * &JetPolynomial::var(kv(0, 0)));
        }
        while self.ek_x.len() <= i {
            let next = self.d(&self.ek_x.last().unwrap().clone(), Dir::X);
            self.ek_x.push(next);
        }
        self.ek_x[i].clone()
    }

    /// Derivative of a single variable.
    pub fn d_var(&mut self, v: JetVar, dir: Dir) -> JetPolynomial {
        if let Some(p) = self.rules.get(&(v, dir)) {
            return p.clone();
        }
        let (i, j) = (v.i, v.j);
        match (v.sym, dir) {
            (Sym::Lambda, Dir::X) => JetPolynomial::var(lam(i + 1, j)),
            (Sym::Lambda, Dir::Y) => match j {
                0 => JetPolynomial::var(lam(i, 1)),
                // λ_{i,2} = −λ_{i+2,0} − D_x^i(E k)
                1 => &(-&JetPolynomial::var(lam(i + 2, 0))) - &self.ek_dx(i as usize),
                _ => panic!("λ-jet {} is not canonical", v.name()),
            },
            (Sym::A, Dir::Y) if j == 0 => JetPolynomial::var(JetVar::new(Sym::W, i, 0)),
            (_, Dir::X) => JetPolynomial::var(JetVar::new(v.sym, i + 1, j)),
            (_, Dir::Y) => JetPolynomial::var(JetVar::new(v.sym, i, j + 1)),
        }
    }

    pub fn d(&mut self, p: &JetPolynomial, dir: Dir) -> JetPolynomial {
        let mut out = JetPolynomial::zero();
        let lam1 = match dir {
            Dir::X => lam(1, 0),
            Dir::Y => lam(0, 1),
        };
        let mut cache: HashMap<JetVar, JetPolynomial> = HashMap::new();
        for (m, c) in &p.terms {
            if m.e2l != 0 {
                let t = m.mul(&Monomial::var(lam1, 1));
                out.add_term(t, c * q(2 * m.e2l as i64));
            }
            for (v, e) in &m.vars {
                let dv = match cache.get(v) {
                    Some(dv) => dv.clone(),
                    None => {
                        let dv = self.d_var(*v, dir);
                        cache.insert(*v, dv.clone());
                        dv
                    }
                };
                let rest = m.div(&Monomial::var(*v, 1));
                let k = c * q(*e as i64);
                for (t, tc) in &dv.terms {
                    out.add_term(t.mul(&rest), &k * tc);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_normalization() {
        let w = JetPolynomial::var(W00);
        let k = JetPolynomial::var(kv(1, 0));
        let p = &(&w * &w) + &k.scale(&q(3));
        assert_eq!(p.len(), 2);
        let z = &p - &p;
        assert!(z.is_zero());
        let r = p.mul_monomial(&Monomial::var(W00, 2), &qf(-2, 3)).normalized(&[Sym::W], true);
        assert_eq!(r, p);
        let (quo, rem) = (&p * &k).div_rem_w(&p);
        assert_eq!(quo, k);
        assert!(rem.is_zero());
    }

    #[test]
    fn canonical_lambda_derivatives() {
        let mut c = Calculus::new();
        // D_y λ_y = λ_yy = −λ_xx − E k
        let l01 = JetPolynomial::var(lam(0, 1));
        let lyy = c.d(&l01, Dir::Y);
        let expect = &(-&JetPolynomial::var(lam(2, 0))) - &(&JetPolynomial::e2l(1) * &JetPolynomial::var(kv(0, 0)));
        assert_eq!(lyy, expect);
        // D_y D_x λ_y = D_x D_y λ_y
        let lx = c.d(&l01, Dir::X);
        let a = c.d(&lx, Dir::Y);
        let b = c.d(&lyy, Dir::X);
        assert_eq!(a, b);
        // D_x E = 2 λ_x E
        let de = c.d(&JetPolynomial::e2l(1), Dir::X);
        assert_eq!(de, (&JetPolynomial::e2l(1) * &JetPolynomial::var(lam(1, 0))).scale(&q(2)));
    }
}
