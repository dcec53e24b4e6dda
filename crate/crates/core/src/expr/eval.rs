//! Numerical evaluation: direct, and through compiled jet programs.

use std::collections::{BTreeMap, HashMap};

use super::{bessel, Differentiator, ExprError, Expression, Func, Node, Ratio, Var, MAX_JET_ORDER};

/// Parameter bindings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalContext {
    pub params: BTreeMap<String, f64>,
}

impl EvalContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn get(&self, name: &str) -> Result<f64, ExprError> {
        self.params.get(name).copied().ok_or_else(|| ExprError::UnboundParameter(name.to_string()))
    }
}

pub(super) fn apply_func(f: Func, v: f64, x: f64, y: f64) -> Result<f64, ExprError> {
    Ok(match f {
        Func::Exp => v.exp(),
        Func::Log => {
            if v <= 0.0 {
                return Err(ExprError::Domain { func: "log", arg: v, x, y });
            }
            v.ln()
        }
        Func::Sin => v.sin(),
        Func::Cos => v.cos(),
        Func::Sqrt => {
            if v < 0.0 {
                return Err(ExprError::Domain { func: "sqrt", arg: v, x, y });
            }
            v.sqrt()
        }
        Func::BesselJ0 => bessel::j0(v),
        Func::BesselJ1 => bessel::j1(v),
        Func::BesselJScaled(n) => bessel::jn_scaled(n, v),
    })
}

fn apply_pow(b: f64, r: Ratio, x: f64, y: f64) -> Result<f64, ExprError> {
    if b == 0.0 && r.num < 0 {
        return Err(ExprError::DivisionByZero { x, y });
    }
    if r.is_integer() {
        return Ok(b.powi(r.num as i32));
    }
    if b >= 0.0 {
        if r.den == 2 {
            return Ok(b.sqrt().powi(r.num as i32));
        }
        return Ok(b.powf(r.value()));
    }
    if r.den % 2 == 1 {
        let m = (-b).powf(r.value());
        return Ok(if r.num % 2 == 0 { m } else { -m });
    }
    Err(ExprError::Domain { func: "pow", arg: b, x, y })
}

fn checked_div(a: f64, b: f64, x: f64, y: f64) -> Result<f64, ExprError> {
    if b == 0.0 {
        Err(ExprError::DivisionByZero { x, y })
    } else {
        Ok(a / b)
    }
}

/// Evaluates `e` at `(x, y)`; shared subtrees are computed once.
pub fn evaluate(e: &Expression, x: f64, y: f64, ctx: &EvalContext) -> Result<f64, ExprError> {
    let prog = Tape::compile(std::slice::from_ref(e));
    let vals = prog.run(x, y, ctx)?;
    Ok(vals[prog.outputs[0]])
}

#[derive(Debug, Clone)]
enum Instr {
    Const(f64),
    Var(Var),
    Param(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    Pow(usize, Ratio),
    Func(Func, usize),
}

/// Straight-line program over a topologically sorted DAG.
#[derive(Debug, Clone)]
struct Tape {
    code: Vec<Instr>,
    params: Vec<String>,
    outputs: Vec<usize>,
}

impl Tape {
    fn compile(roots: &[Expression]) -> Tape {
        let mut tape = Tape { code: Vec::new(), params: Vec::new(), outputs: Vec::new() };
        let mut slot: HashMap<usize, usize> = HashMap::new();
        for r in roots {
            let s = tape.emit(r, &mut slot);
            tape.outputs.push(s);
        }
        tape
    }

    fn emit(&mut self, root: &Expression, slot: &mut HashMap<usize, usize>) -> usize {
        // Iterative post-order walk; DAG depth can be large after differentiation.
        let mut stack: Vec<(Expression, bool)> = vec![(root.clone(), false)];
        while let Some((e, expanded)) = stack.pop() {
            if slot.contains_key(&e.id()) {
                continue;
            }
            let kids: Vec<&Expression> = match e.node() {
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => vec![a, b],
                Node::Neg(a) | Node::Pow(a, _) | Node::Func(_, a) => vec![a],
                _ => vec![],
            };
            if !expanded && kids.iter().any(|k| !slot.contains_key(&k.id())) {
                let kids: Vec<Expression> = kids.into_iter().cloned().collect();
                stack.push((e, true));
                for k in kids.into_iter().rev() {
                    stack.push((k, false));
                }
                continue;
            }
            let s = |k: &Expression| slot[&k.id()];
            let ins = match e.node() {
                Node::Const(c) => Instr::Const(*c),
                Node::Var(v) => Instr::Var(*v),
                Node::Param(p) => {
                    let idx = match self.params.iter().position(|q| q == p) {
                        Some(i) => i,
                        None => {
                            self.params.push(p.clone());
                            self.params.len() - 1
                        }
                    };
                    Instr::Param(idx)
                }
                Node::Add(a, b) => Instr::Add(s(a), s(b)),
                Node::Sub(a, b) => Instr::Sub(s(a), s(b)),
                Node::Mul(a, b) => Instr::Mul(s(a), s(b)),
                Node::Div(a, b) => Instr::Div(s(a), s(b)),
                Node::Neg(a) => Instr::Neg(s(a)),
                Node::Pow(a, r) => Instr::Pow(s(a), *r),
                Node::Func(f, a) => Instr::Func(*f, s(a)),
            };
            self.code.push(ins);
            slot.insert(e.id(), self.code.len() - 1);
        }
        slot[&root.id()]
    }

    fn run(&self, x: f64, y: f64, ctx: &EvalContext) -> Result<Vec<f64>, ExprError> {
        let pv: Vec<f64> = self.params.iter().map(|p| ctx.get(p)).collect::<Result<_, _>>()?;
        let mut r = Vec::with_capacity(self.code.len());
        for ins in &self.code {
            let v = match *ins {
                Instr::Const(c) => c,
                Instr::Var(Var::X) => x,
                Instr::Var(Var::Y) => y,
                Instr::Param(i) => pv[i],
                Instr::Add(a, b) => r[a] + r[b],
                Instr::Sub(a, b) => r[a] - r[b],
                Instr::Mul(a, b) => r[a] * r[b],
                Instr::Div(a, b) => checked_div(r[a], r[b], x, y)?,
                Instr::Neg(a) => -r[a],
                Instr::Pow(a, p) => apply_pow(r[a], p, x, y)?,
                Instr::Func(f, a) => apply_func(f, r[a], x, y)?,
            };
            r.push(v);
        }
        Ok(r)
    }
}

/// Partial derivatives `∂^i_x ∂^j_y f` for `i + j <= order` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    order: usize,
    vals: Vec<f64>,
}

fn jet_index(i: usize, j: usize) -> usize {
    let n = i + j;
    n * (n + 1) / 2 + j
}

impl Jet {
    pub fn zeros(order: usize) -> Jet {
        Jet { order, vals: vec![0.0; jet_index(0, order) + 1] }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `∂^i_x ∂^j_y`; panics beyond the computed order.
    pub fn d(&self, i: usize, j: usize) -> f64 {
        assert!(i + j <= self.order, "jet order {} requested from order-{} jet", i + j, self.order);
        self.vals[jet_index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i + j <= self.order);
        self.vals[jet_index(i, j)] = v;
    }

    pub fn value(&self) -> f64 {
        self.vals[0]
    }

    /// Jet of a product, by the Leibniz rule.
    pub fn mul(&self, o: &Jet) -> Jet {
        let order = self.order.min(o.order);
        let mut out = Jet::zeros(order);
        for n in 0..=order {
            for j in 0..=n {
                let i = n - j;
                let mut acc = 0.0;
                for a in 0..=i {
                    for b in 0..=j {
                        acc += binom(i, a) * binom(j, b) * self.d(a, b) * o.d(i - a, j - b);
                    }
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn add(&self, o: &Jet) -> Jet {
        let order = self.order.min(o.order);
        let mut out = Jet::zeros(order);
        for n in 0..=order {
            for j in 0..=n {
                out.set(n - j, j, self.d(n - j, j) + o.d(n - j, j));
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Jet {
        Jet { order: self.order, vals: self.vals.iter().map(|v| v * c).collect() }
    }

    /// Jet of the partial derivative in `x` (order drops by one).
    pub fn dx(&self) -> Jet {
        self.shift(1, 0)
    }

    pub fn dy(&self) -> Jet {
        self.shift(0, 1)
    }

    fn shift(&self, di: usize, dj: usize) -> Jet {
        assert!(self.order >= 1);
        let order = self.order - 1;
        let mut out = Jet::zeros(order);
        for n in 0..=order {
            for j in 0..=n {
                out.set(n - j, j, self.d(n - j + di, j + dj));
            }
        }
        out
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        Jet { order, vals: self.vals[..=jet_index(0, order)].to_vec() }
    }
}

fn binom(n: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for t in 0..k {
        r = r * (n - t) as f64 / (t + 1) as f64;
    }
    r
}

/// Compiled evaluator for the jets of several expressions at once.
#[derive(Debug, Clone)]
pub struct JetProgram {
    tape: Tape,
    orders: Vec<usize>,
}

impl JetProgram {
    pub fn new(exprs: &[(Expression, usize)]) -> Result<JetProgram, ExprError> {
        let mut d = Differentiator::new();
        let mut roots = Vec::new();
        let mut orders = Vec::new();
        for (e, order) in exprs {
            if *order > MAX_JET_ORDER {
                return Err(ExprError::OrderTooHigh(*order));
            }
            orders.push(*order);
            // Walk the triangle so that every partial reuses its parent.
            let mut row: Vec<Expression> = vec![e.clone()];
            for n in 0..=*order {
                if n > 0 {
                    let mut next = Vec::with_capacity(n + 1);
                    next.push(d.diff(&row[0], Var::X));
                    for j in 1..n {
                        next.push(d.diff(&row[j - 1], Var::Y));
                    }
                    next.push(d.diff(&row[n - 1], Var::Y));
                    row = next;
                }
                roots.extend(row.iter().cloned());
            }
        }
        Ok(JetProgram { tape: Tape::compile(&roots), orders })
    }

    pub fn len(&self) -> usize {
        self.tape.code.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tape.code.is_empty()
    }

    pub fn eval(&self, x: f64, y: f64, ctx: &EvalContext) -> Result<Vec<Jet>, ExprError> {
        let r = self.tape.run(x, y, ctx)?;
        let mut k = 0;
        let mut out = Vec::with_capacity(self.orders.len());
        for &order in &self.orders {
            let n = jet_index(0, order) + 1;
            let vals = self.tape.outputs[k..k + n].iter().map(|&s| r[s]).collect();
            k += n;
            out.push(Jet { order, vals });
        }
        Ok(out)
    }
}

/// Convenience one-shot jet; repeated use should go through [`JetProgram`].
pub fn jet_of(e: &Expression, x: f64, y: f64, order: usize, ctx: &EvalContext) -> Result<Jet, ExprError> {
    let p = JetProgram::new(&[(e.clone(), order)])?;
    Ok(p.eval(x, y, ctx)?.remove(0))
}
