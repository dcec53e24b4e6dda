//! Symbolic scalar expressions in the plane coordinates `x`, `y`.
//!
//! Expressions are immutable DAGs behind `Arc`, so shared subtrees produced by
//! differentiation are stored once. Construction goes through the smart
//! constructors in this module, which apply a small set of safe rewrites.

pub mod bessel;
mod diff;
mod eval;
mod parse;
mod print;

use std::fmt;
use std::sync::Arc;

pub use diff::Differentiator;
pub use eval::{evaluate, jet_of, EvalContext, Jet, JetProgram};
pub use parse::{parse_expression, parse_with_params};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unbound parameter `{0}`")]
    UnboundParameter(String),
    #[error("division by zero at ({x}, {y})")]
    DivisionByZero { x: f64, y: f64 },
    #[error("{func} outside its domain at ({x}, {y}): argument {arg}")]
    Domain { func: &'static str, arg: f64, x: f64, y: f64 },
    #[error("jet order {0} exceeds the supported maximum of {max}", max = MAX_JET_ORDER)]
    OrderTooHigh(usize),
}

pub const MAX_JET_ORDER: usize = 8;

/// Coordinate variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    BesselJ0,
    BesselJ1,
    /// `J_n(u) / u^n`, the entire family that closes Bessel differentiation.
    BesselJScaled(u32),
}

impl Func {
    pub fn name(self) -> String {
        match self {
            Func::Exp => "exp".into(),
            Func::Log => "log".into(),
            Func::Sin => "sin".into(),
            Func::Cos => "cos".into(),
            Func::Sqrt => "sqrt".into(),
            Func::BesselJ0 => "besselj0".into(),
            Func::BesselJ1 => "besselj1".into(),
            Func::BesselJScaled(n) => format!("besseljs{n}"),
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            "besselj0" => Func::BesselJ0,
            "besselj1" => Func::BesselJ1,
            _ => {
                let digits = name.strip_prefix("besseljs")?;
                if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                    return None;
                }
                Func::BesselJScaled(digits.parse().ok()?)
            }
        })
    }
}

/// Reduced rational exponent `num/den` with `den > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ratio {
    pub num: i64,
    pub den: i64,
}

impl Ratio {
    pub fn new(num: i64, den: i64) -> Ratio {
        assert!(den != 0, "zero denominator in exponent");
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()).max(1) as i64;
        let s = if den < 0 { -1 } else { 1 };
        Ratio { num: s * num / g, den: s * den / g }
    }

    pub fn int(n: i64) -> Ratio {
        Ratio { num: n, den: 1 }
    }

    pub fn is_integer(self) -> bool {
        self.den == 1
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn add(self, o: Ratio) -> Ratio {
        Ratio::new(self.num * o.den + o.num * self.den, self.den * o.den)
    }

    pub fn mul(self, o: Ratio) -> Ratio {
        Ratio::new(self.num * o.num, self.den * o.den)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Debug)]
pub enum Node {
    Const(f64),
    Var(Var),
    Param(String),
    Add(Expression, Expression),
    Sub(Expression, Expression),
    Mul(Expression, Expression),
    Div(Expression, Expression),
    Neg(Expression),
    Pow(Expression, Ratio),
    Func(Func, Expression),
}

#[derive(Clone)]
pub struct Expression(Arc<Node>);

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expression({self})")
    }
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        if Arc::ptr_eq(&self.0, &other.0) {
            return true;
        }
        match (&*self.0, &*other.0) {
            (Node::Const(a), Node::Const(b)) => a.to_bits() == b.to_bits(),
            (Node::Var(a), Node::Var(b)) => a == b,
            (Node::Param(a), Node::Param(b)) => a == b,
            (Node::Add(a, b), Node::Add(c, d))
            | (Node::Sub(a, b), Node::Sub(c, d))
            | (Node::Mul(a, b), Node::Mul(c, d))
            | (Node::Div(a, b), Node::Div(c, d)) => a == c && b == d,
            (Node::Neg(a), Node::Neg(b)) => a == b,
            (Node::Pow(a, r), Node::Pow(b, s)) => r == s && a == b,
            (Node::Func(f, a), Node::Func(g, b)) => f == g && a == b,
            _ => false,
        }
    }
}

impl Expression {
    pub fn node(&self) -> &Node {
        &self.0
    }

    pub(crate) fn id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    fn wrap(n: Node) -> Expression {
        Expression(Arc::new(n))
    }

    /// Builds a node verbatim, bypassing the simplifying constructors.
    pub fn from_node(n: Node) -> Expression {
        Expression(Arc::new(n))
    }

    pub fn constant(c: f64) -> Expression {
        Expression::wrap(Node::Const(c))
    }

    pub fn x() -> Expression {
        Expression::wrap(Node::Var(Var::X))
    }

    pub fn y() -> Expression {
        Expression::wrap(Node::Var(Var::Y))
    }

    pub fn var(v: Var) -> Expression {
        Expression::wrap(Node::Var(v))
    }

    pub fn param(name: &str) -> Expression {
        Expression::wrap(Node::Param(name.to_string()))
    }

    pub fn as_const(&self) -> Option<f64> {
        match &*self.0 {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn add(&self, o: &Expression) -> Expression {
        match (self.as_const(), o.as_const()) {
            (Some(a), Some(b)) => Expression::constant(a + b),
            (Some(a), _) if a == 0.0 => o.clone(),
            (_, Some(b)) if b == 0.0 => self.clone(),
            _ => match &*o.0 {
                Node::Neg(inner) => self.sub(inner),
                _ => Expression::wrap(Node::Add(self.clone(), o.clone())),
            },
        }
    }

    pub fn sub(&self, o: &Expression) -> Expression {
        match (self.as_const(), o.as_const()) {
            (Some(a), Some(b)) => Expression::constant(a - b),
            (_, Some(b)) if b == 0.0 => self.clone(),
            (Some(a), _) if a == 0.0 => o.neg(),
            _ if Arc::ptr_eq(&self.0, &o.0) => Expression::constant(0.0),
            _ => match &*o.0 {
                Node::Neg(inner) => self.add(inner),
                _ => Expression::wrap(Node::Sub(self.clone(), o.clone())),
            },
        }
    }

    pub fn neg(&self) -> Expression {
        match &*self.0 {
            Node::Const(c) => Expression::constant(-c),
            Node::Neg(inner) => inner.clone(),
            _ => Expression::wrap(Node::Neg(self.clone())),
        }
    }

    pub fn mul(&self, o: &Expression) -> Expression {
        match (self.as_const(), o.as_const()) {
            (Some(a), Some(b)) => return Expression::constant(a * b),
            (Some(a), _) | (_, Some(a)) if a == 0.0 => return Expression::constant(0.0),
            (Some(a), _) if a == 1.0 => return o.clone(),
            (_, Some(b)) if b == 1.0 => return self.clone(),
            (Some(a), _) if a == -1.0 => return o.neg(),
            (_, Some(b)) if b == -1.0 => return self.neg(),
            _ => {}
        }
        if let (Some((b1, r1)), Some((b2, r2))) = (self.as_power(), o.as_power()) {
            if b1.shallow_same(&b2) {
                return b1.pow(r1.add(r2));
            }
        }
        match (&*self.0, &*o.0) {
            (Node::Neg(a), Node::Neg(b)) => a.mul(b),
            (Node::Neg(a), _) => a.mul(o).neg(),
            (_, Node::Neg(b)) => self.mul(b).neg(),
            _ => Expression::wrap(Node::Mul(self.clone(), o.clone())),
        }
    }

    pub fn div(&self, o: &Expression) -> Expression {
        match (self.as_const(), o.as_const()) {
            (Some(a), Some(b)) if b != 0.0 => return Expression::constant(a / b),
            (Some(a), _) if a == 0.0 => return Expression::constant(0.0),
            (_, Some(b)) if b == 1.0 => return self.clone(),
            (_, Some(b)) if b == -1.0 => return self.neg(),
            _ => {}
        }
        if let (Some((b1, r1)), Some((b2, r2))) = (self.as_power(), o.as_power()) {
            if b1.shallow_same(&b2) {
                return b1.pow(r1.add(Ratio::new(-r2.num, r2.den)));
            }
        }
        match (&*self.0, &*o.0) {
            (Node::Neg(a), Node::Neg(b)) => a.div(b),
            (Node::Neg(a), _) => a.div(o).neg(),
            (_, Node::Neg(b)) => self.div(b).neg(),
            _ => Expression::wrap(Node::Div(self.clone(), o.clone())),
        }
    }

    pub fn pow(&self, r: Ratio) -> Expression {
        if r.num == 0 {
            return Expression::constant(1.0);
        }
        if r == Ratio::int(1) {
            return self.clone();
        }
        match &*self.0 {
            Node::Const(c) if r.is_integer() => Expression::constant(c.powi(r.num as i32)),
            Node::Const(c) if *c > 0.0 => Expression::constant(c.powf(r.value())),
            // (b^s)^r = b^(rs) holds whenever r is an integer.
            Node::Pow(b, s) if r.is_integer() => b.pow(s.mul(r)),
            _ => Expression::wrap(Node::Pow(self.clone(), r)),
        }
    }

    pub fn powi(&self, n: i64) -> Expression {
        self.pow(Ratio::int(n))
    }

    pub fn apply(f: Func, arg: &Expression) -> Expression {
        if let Some(c) = arg.as_const() {
            if let Ok(v) = eval::apply_func(f, c, 0.0, 0.0) {
                return Expression::constant(v);
            }
        }
        match (f, &*arg.0) {
            (Func::Exp, Node::Func(Func::Log, inner)) => inner.clone(),
            _ => Expression::wrap(Node::Func(f, arg.clone())),
        }
    }

    pub fn exp(&self) -> Expression {
        Expression::apply(Func::Exp, self)
    }

    pub fn log(&self) -> Expression {
        Expression::apply(Func::Log, self)
    }

    pub fn sqrt(&self) -> Expression {
        Expression::apply(Func::Sqrt, self)
    }

    /// Views the node as `base^r`, treating anything else as power one.
    fn as_power(&self) -> Option<(Expression, Ratio)> {
        match &*self.0 {
            Node::Const(_) => None,
            Node::Pow(b, r) => Some((b.clone(), *r)),
            _ => Some((self.clone(), Ratio::int(1))),
        }
    }

    /// Cheap identity test used by power merging; deep comparison only for leaves.
    fn shallow_same(&self, o: &Expression) -> bool {
        if Arc::ptr_eq(&self.0, &o.0) {
            return true;
        }
        match (&*self.0, &*o.0) {
            (Node::Var(a), Node::Var(b)) => a == b,
            (Node::Param(a), Node::Param(b)) => a == b,
            _ => false,
        }
    }

    /// Number of distinct nodes in the DAG.
    pub fn node_count(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.id()) {
                continue;
            }
            match &*e.0 {
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
                Node::Neg(a) | Node::Pow(a, _) | Node::Func(_, a) => stack.push(a.clone()),
                _ => {}
            }
        }
        seen.len()
    }

    /// Names of all parameters, sorted and deduplicated.
    pub fn params(&self) -> Vec<String> {
        let mut out = std::collections::BTreeSet::new();
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.id()) {
                continue;
            }
            match &*e.0 {
                Node::Param(p) => {
                    out.insert(p.clone());
                }
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
                Node::Neg(a) | Node::Pow(a, _) | Node::Func(_, a) => stack.push(a.clone()),
                _ => {}
            }
        }
        out.into_iter().collect()
    }

    pub fn derivative(&self, v: Var) -> Expression {
        Differentiator::new().diff(self, v)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_expr(self, f)
    }
}

/// Pure simplification pass: rebuilds the tree through the smart constructors.
pub fn simplify(e: &Expression) -> Expression {
    let mut memo = std::collections::HashMap::new();
    simplify_rec(e, &mut memo)
}

fn simplify_rec(
    e: &Expression,
    memo: &mut std::collections::HashMap<usize, (Expression, Expression)>,
) -> Expression {
    if let Some((_, s)) = memo.get(&e.id()) {
        return s.clone();
    }
    let out = match e.node() {
        Node::Const(_) | Node::Var(_) | Node::Param(_) => e.clone(),
        Node::Add(a, b) => simplify_rec(a, memo).add(&simplify_rec(b, memo)),
        Node::Sub(a, b) => simplify_rec(a, memo).sub(&simplify_rec(b, memo)),
        Node::Mul(a, b) => simplify_rec(a, memo).mul(&simplify_rec(b, memo)),
        Node::Div(a, b) => simplify_rec(a, memo).div(&simplify_rec(b, memo)),
        Node::Neg(a) => simplify_rec(a, memo).neg(),
        Node::Pow(a, r) => simplify_rec(a, memo).pow(*r),
        Node::Func(f, a) => Expression::apply(*f, &simplify_rec(a, memo)),
    };
    memo.insert(e.id(), (e.clone(), out.clone()));
    out
}
