//! Printer whose output re-parses to the identical tree.

use std::fmt;

use super::{Expression, Node, Ratio, Var};

fn prec(e: &Expression) -> u8 {
    match e.node() {
        Node::Add(..) | Node::Sub(..) => 1,
        Node::Mul(..) | Node::Div(..) => 2,
        Node::Neg(_) => 3,
        Node::Pow(..) => 4,
        _ => 5,
    }
}

fn write_const(c: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if c.is_sign_negative() {
        write!(f, "(-{})", -c)
    } else {
        write!(f, "{c}")
    }
}

fn write_child(e: &Expression, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if prec(e) < min {
        f.write_str("(")?;
        write_expr(e, f)?;
        f.write_str(")")
    } else {
        write_expr(e, f)
    }
}

fn write_ratio(r: Ratio, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match (r.den, r.num < 0) {
        (1, false) => write!(f, "{}", r.num),
        (1, true) => write!(f, "({})", r.num),
        _ => write!(f, "({}/{})", r.num, r.den),
    }
}

pub(super) fn write_expr(e: &Expression, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e.node() {
        Node::Const(c) => write_const(*c, f),
        Node::Var(Var::X) => f.write_str("x"),
        Node::Var(Var::Y) => f.write_str("y"),
        Node::Param(p) => f.write_str(p),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
            let (op, level) = match e.node() {
                Node::Add(..) => (" + ", 1),
                Node::Sub(..) => (" - ", 1),
                Node::Mul(..) => ("*", 2),
                _ => ("/", 2),
            };
            write_child(a, level, f)?;
            f.write_str(op)?;
            write_child(b, level + 1, f)
        }
        Node::Neg(a) => {
            f.write_str("-")?;
            if a.as_const().is_some() {
                f.write_str("(")?;
                write_expr(a, f)?;
                f.write_str(")")
            } else {
                write_child(a, 3, f)
            }
        }
        Node::Pow(a, r) => {
            match a.as_const() {
                Some(c) if !c.is_sign_negative() => write_const(c, f)?,
                _ => write_child(a, 5, f)?,
            }
            f.write_str("^")?;
            write_ratio(*r, f)
        }
        Node::Func(func, a) => {
            write!(f, "{}(", func.name())?;
            write_expr(a, f)?;
            f.write_str(")")
        }
    }
}
