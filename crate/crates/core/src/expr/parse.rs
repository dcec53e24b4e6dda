//! Recursive-descent parser.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | base ('^' exponent)?
//! base   := number | ident | ident '(' expr ')' | '(' expr ')'
//! exponent := ['-'] number | '(' ['-'] number ['/' number] ')'
//! ```
//! Identifiers other than `x`, `y` and known function names are parameters.
//! The parser builds nodes verbatim so that printing and re-parsing is exact.

use super::{ExprError, Expression, Func, Node, Ratio, Var};

/// Parses with every free identifier accepted as a parameter.
pub fn parse_expression(text: &str) -> Result<Expression, ExprError> {
    Parser::new(text, None)?.parse_all()
}

/// Parses, rejecting identifiers that are neither coordinates nor in `params`.
pub fn parse_with_params(text: &str, params: &[&str]) -> Result<Expression, ExprError> {
    Parser::new(text, Some(params))?.parse_all()
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Op(char),
    End,
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    allowed: Option<&'a [&'a str]>,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            out.push((Tok::Num(text[start..i].to_string()), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Op(c), i));
            i += 1;
        } else {
            return Err(ExprError::Parse { pos: i, msg: format!("unexpected character `{c}`") });
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

fn number(s: &str, pos: usize) -> Result<f64, ExprError> {
    s.parse::<f64>()
        .map_err(|_| ExprError::Parse { pos, msg: format!("malformed number `{s}`") })
}

/// Exact rational value of a decimal literal such as `0.25` or `1e-3`.
fn decimal_ratio(s: &str, pos: usize) -> Result<Ratio, ExprError> {
    let err = || ExprError::Parse { pos, msg: format!("exponent `{s}` is not a usable rational") };
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(k) => (&s[..k], s[k + 1..].parse::<i32>().map_err(|_| err())?),
        None => (s, 0),
    };
    let (int_part, frac_part) = mant.split_once('.').unwrap_or((mant, ""));
    let digits = format!("{int_part}{frac_part}");
    if digits.is_empty() || digits.len() > 15 {
        return Err(err());
    }
    let num: i64 = digits.parse().map_err(|_| err())?;
    let scale = exp - frac_part.len() as i32;
    if scale.abs() > 15 {
        return Err(err());
    }
    Ok(if scale >= 0 {
        Ratio::new(num * 10i64.pow(scale as u32), 1)
    } else {
        Ratio::new(num, 10i64.pow((-scale) as u32))
    })
}

impl<'a> Parser<'a> {
    fn new(text: &str, allowed: Option<&'a [&'a str]>) -> Result<Parser<'a>, ExprError> {
        Ok(Parser { toks: lex(text)?, pos: 0, allowed })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, msg: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Parse { pos: self.offset(), msg: msg.into() })
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if *self.peek() == Tok::Op(c) {
            self.bump();
            Ok(())
        } else {
            self.fail(format!("expected `{c}`"))
        }
    }

    fn parse_all(mut self) -> Result<Expression, ExprError> {
        if *self.peek() == Tok::End {
            return self.fail("empty expression");
        }
        let e = self.expr()?;
        match self.peek() {
            Tok::End => Ok(e),
            t => self.fail(format!("trailing input at {t:?}")),
        }
    }

    fn expr(&mut self) -> Result<Expression, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expression::from_node(Node::Add(lhs, rhs));
                }
                Tok::Op('-') => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expression::from_node(Node::Sub(lhs, rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expression, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.bump();
                    let rhs = self.factor()?;
                    lhs = Expression::from_node(Node::Mul(lhs, rhs));
                }
                Tok::Op('/') => {
                    self.bump();
                    let rhs = self.factor()?;
                    lhs = Expression::from_node(Node::Div(lhs, rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expression, ExprError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            // A minus sign glued to a bare literal is part of the literal.
            if let (Tok::Num(s), false) = (self.peek().clone(), *self.peek_at(1) == Tok::Op('^')) {
                let pos = self.offset();
                self.bump();
                return Ok(Expression::constant(-number(&s, pos)?));
            }
            let inner = self.factor()?;
            return Ok(Expression::from_node(Node::Neg(inner)));
        }
        let base = self.base()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let r = self.exponent()?;
            return Ok(Expression::from_node(Node::Pow(base, r)));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<Ratio, ExprError> {
        let paren = *self.peek() == Tok::Op('(');
        if paren {
            self.bump();
        }
        let neg = *self.peek() == Tok::Op('-');
        if neg {
            self.bump();
        }
        let pos = self.offset();
        let mut r = match self.bump() {
            Tok::Num(s) => decimal_ratio(&s, pos)?,
            _ => return Err(ExprError::Parse { pos, msg: "exponent must be a rational constant".into() }),
        };
        if paren && *self.peek() == Tok::Op('/') {
            self.bump();
            let pos = self.offset();
            let d = match self.bump() {
                Tok::Num(s) => decimal_ratio(&s, pos)?,
                _ => return Err(ExprError::Parse { pos, msg: "expected exponent denominator".into() }),
            };
            if d.num == 0 {
                return Err(ExprError::Parse { pos, msg: "zero exponent denominator".into() });
            }
            r = r.mul(Ratio::new(d.den, d.num));
        }
        if paren {
            self.expect(')')?;
        }
        Ok(if neg { Ratio::new(-r.num, r.den) } else { r })
    }

    fn base(&mut self) -> Result<Expression, ExprError> {
        let pos = self.offset();
        match self.bump() {
            Tok::Num(s) => Ok(Expression::constant(number(&s, pos)?)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::Op('(') {
                    let f = Func::from_name(&name).ok_or(ExprError::UnknownFunction(name))?;
                    self.bump();
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expression::from_node(Node::Func(f, arg)));
                }
                match name.as_str() {
                    "x" => Ok(Expression::var(Var::X)),
                    "y" => Ok(Expression::var(Var::Y)),
                    _ => {
                        if Func::from_name(&name).is_some() {
                            return Err(ExprError::Parse {
                                pos,
                                msg: format!("function `{name}` needs an argument"),
                            });
                        }
                        if let Some(allowed) = self.allowed {
                            if !allowed.contains(&name.as_str()) {
                                return Err(ExprError::UnknownVariable(name));
                            }
                        }
                        Ok(Expression::param(&name))
                    }
                }
            }
            Tok::End => Err(ExprError::Parse { pos, msg: "unexpected end of input".into() }),
            Tok::Op(c) => Err(ExprError::Parse { pos, msg: format!("unexpected `{c}`") }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_shapes() {
        let e = parse_expression("x^2 + y^2 + b").unwrap();
        assert_eq!(e.to_string(), "x^2 + y^2 + b");
        let e = parse_expression("(1+(x^2+y^2)/4)^(-2)").unwrap();
        assert_eq!(e.params(), Vec::<String>::new());
        let e = parse_expression("x^(1/2) * y^0.5").unwrap();
        match e.node() {
            Node::Mul(a, b) => {
                assert!(matches!(a.node(), Node::Pow(_, r) if *r == Ratio::new(1, 2)));
                assert!(matches!(b.node(), Node::Pow(_, r) if *r == Ratio::new(1, 2)));
            }
            _ => panic!("expected product"),
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(parse_expression("foo(x)"), Err(ExprError::UnknownFunction(_))));
        assert!(matches!(parse_with_params("x + c", &["b"]), Err(ExprError::UnknownVariable(_))));
        assert!(matches!(parse_expression("x +"), Err(ExprError::Parse { .. })));
        assert!(matches!(parse_expression("x ^ y"), Err(ExprError::Parse { .. })));
        assert!(matches!(parse_expression("(x"), Err(ExprError::Parse { .. })));
        assert!(matches!(parse_expression("x $ y"), Err(ExprError::Parse { .. })));
        assert!(matches!(parse_expression(""), Err(ExprError::Parse { .. })));
    }

    #[test]
    fn negative_literals() {
        let e = parse_expression("-2^2").unwrap();
        assert!(matches!(e.node(), Node::Neg(_)));
        let e = parse_expression("x*-3").unwrap();
        match e.node() {
            Node::Mul(_, b) => assert_eq!(b.as_const(), Some(-3.0)),
            _ => panic!(),
        }
    }
}
