//! A small arithmetic expression language used by metric, weight and
//! attenuation configs.
//!
//! Grammar (usual precedence, `^` binds tighter than unary minus on its left
//! operand and is right associative):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Variables: `x1`, `x2`, `beta`, `alpha`, `v1`, `v2`. Constants: `pi`, `e`,
//! `i`. Functions: `exp`, `sin`, `cos`, `sqrt`, `log`.

use std::fmt;

use num_complex::Complex64;

use crate::error::{GeoError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    X1,
    X2,
    Beta,
    Alpha,
    V1,
    V2,
}

impl Var {
    fn name(self) -> &'static str {
        match self {
            Var::X1 => "x1",
            Var::X2 => "x2",
            Var::Beta => "beta",
            Var::Alpha => "alpha",
            Var::V1 => "v1",
            Var::V2 => "v2",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Sqrt,
    Log,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Log => "log",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Imag,
    Var(Var),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// Values of the expression variables at an evaluation point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Bindings {
    pub x: [f64; 2],
    pub beta: f64,
    pub alpha: f64,
    pub v: [f64; 2],
}

impl Bindings {
    pub fn at(x: [f64; 2]) -> Self {
        Bindings { x, ..Default::default() }
    }

    fn get(&self, var: Var) -> f64 {
        match var {
            Var::X1 => self.x[0],
            Var::X2 => self.x[1],
            Var::Beta => self.beta,
            Var::Alpha => self.alpha,
            Var::V1 => self.v[0],
            Var::V2 => self.v[1],
        }
    }
}

/// A parsed expression.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let mut parser = Parser {
            src: source,
            bytes: source.as_bytes(),
            pos: 0,
        };
        let root = parser.expr()?;
        parser.skip_ws();
        if parser.pos != parser.bytes.len() {
            return Err(parser.error("unexpected trailing input"));
        }
        Ok(Expr {
            root: fold(root),
            source: source.to_string(),
        })
    }

    pub fn constant(value: f64) -> Self {
        Expr {
            root: Node::Num(value),
            source: format!("{value:?}"),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, b: &Bindings) -> Complex64 {
        eval_c(&self.root, b)
    }

    /// Real evaluation. Imaginary unit occurrences evaluate to NaN, so callers
    /// should reject complex expressions up front with [`Expr::is_real`].
    pub fn eval_real(&self, b: &Bindings) -> f64 {
        eval_r(&self.root, b)
    }

    pub fn is_real(&self) -> bool {
        !contains(&self.root, &|n| matches!(n, Node::Imag))
    }

    pub fn uses(&self, var: Var) -> bool {
        contains(&self.root, &|n| matches!(n, Node::Var(v) if *v == var))
    }

    /// Symbolic partial derivative with respect to `var`.
    pub fn derivative(&self, var: Var) -> Expr {
        let root = fold(diff(&self.root, var));
        Expr {
            source: render(&root),
            root,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

fn contains(node: &Node, pred: &dyn Fn(&Node) -> bool) -> bool {
    if pred(node) {
        return true;
    }
    match node {
        Node::Num(_) | Node::Imag | Node::Var(_) => false,
        Node::Neg(a) | Node::Call(_, a) => contains(a, pred),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => contains(a, pred) || contains(b, pred),
    }
}

fn eval_c(node: &Node, b: &Bindings) -> Complex64 {
    match node {
        Node::Num(v) => Complex64::new(*v, 0.0),
        Node::Imag => Complex64::new(0.0, 1.0),
        Node::Var(v) => Complex64::new(b.get(*v), 0.0),
        Node::Neg(a) => -eval_c(a, b),
        Node::Add(l, r) => eval_c(l, b) + eval_c(r, b),
        Node::Sub(l, r) => eval_c(l, b) - eval_c(r, b),
        Node::Mul(l, r) => eval_c(l, b) * eval_c(r, b),
        Node::Div(l, r) => eval_c(l, b) / eval_c(r, b),
        Node::Pow(l, r) => {
            let base = eval_c(l, b);
            match integer_exponent(r) {
                Some(k) => base.powi(k),
                None => base.powc(eval_c(r, b)),
            }
        }
        Node::Call(f, a) => {
            let x = eval_c(a, b);
            match f {
                Func::Exp => x.exp(),
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Sqrt => x.sqrt(),
                Func::Log => x.ln(),
            }
        }
    }
}

fn eval_r(node: &Node, b: &Bindings) -> f64 {
    match node {
        Node::Num(v) => *v,
        Node::Imag => f64::NAN,
        Node::Var(v) => b.get(*v),
        Node::Neg(a) => -eval_r(a, b),
        Node::Add(l, r) => eval_r(l, b) + eval_r(r, b),
        Node::Sub(l, r) => eval_r(l, b) - eval_r(r, b),
        Node::Mul(l, r) => eval_r(l, b) * eval_r(r, b),
        Node::Div(l, r) => eval_r(l, b) / eval_r(r, b),
        Node::Pow(l, r) => {
            let base = eval_r(l, b);
            match integer_exponent(r) {
                Some(k) => base.powi(k),
                None => base.powf(eval_r(r, b)),
            }
        }
        Node::Call(f, a) => {
            let x = eval_r(a, b);
            match f {
                Func::Exp => x.exp(),
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Sqrt => x.sqrt(),
                Func::Log => x.ln(),
            }
        }
    }
}

fn integer_exponent(node: &Node) -> Option<i32> {
    match node {
        Node::Num(v) if v.fract() == 0.0 && v.abs() <= 64.0 => Some(*v as i32),
        Node::Neg(a) => integer_exponent(a).map(|k| -k),
        _ => None,
    }
}

fn is_const(node: &Node) -> bool {
    !contains(node, &|n| matches!(n, Node::Var(_)))
}

fn num(v: f64) -> Box<Node> {
    Box::new(Node::Num(v))
}

fn diff(node: &Node, var: Var) -> Node {
    use Node::*;
    match node {
        Num(_) | Imag => Num(0.0),
        Var(v) => Num(if *v == var { 1.0 } else { 0.0 }),
        Neg(a) => Neg(Box::new(diff(a, var))),
        Add(l, r) => Add(Box::new(diff(l, var)), Box::new(diff(r, var))),
        Sub(l, r) => Sub(Box::new(diff(l, var)), Box::new(diff(r, var))),
        Mul(l, r) => Add(
            Box::new(Mul(Box::new(diff(l, var)), r.clone())),
            Box::new(Mul(l.clone(), Box::new(diff(r, var)))),
        ),
        Div(l, r) => Div(
            Box::new(Sub(
                Box::new(Mul(Box::new(diff(l, var)), r.clone())),
                Box::new(Mul(l.clone(), Box::new(diff(r, var)))),
            )),
            Box::new(Pow(r.clone(), num(2.0))),
        ),
        Pow(l, r) if is_const(r) => Mul(
            Box::new(Mul(r.clone(), Box::new(Pow(l.clone(), Box::new(Sub(r.clone(), num(1.0))))))),
            Box::new(diff(l, var)),
        ),
        Pow(l, r) => Mul(
            Box::new(node.clone()),
            Box::new(Add(
                Box::new(Mul(Box::new(diff(r, var)), Box::new(Call(Func::Log, l.clone())))),
                Box::new(Div(Box::new(Mul(r.clone(), Box::new(diff(l, var)))), l.clone())),
            )),
        ),
        Call(f, a) => {
            let inner = Box::new(diff(a, var));
            let outer = match f {
                Func::Exp => node.clone(),
                Func::Sin => Call(Func::Cos, a.clone()),
                Func::Cos => Neg(Box::new(Call(Func::Sin, a.clone()))),
                Func::Sqrt => Div(num(0.5), Box::new(node.clone())),
                Func::Log => Div(num(1.0), a.clone()),
            };
            Mul(Box::new(outer), inner)
        }
    }
}

/// Constant folding and removal of trivial `0`/`1` factors.
fn fold(node: Node) -> Node {
    use Node::*;
    match node {
        Neg(a) => match fold(*a) {
            Num(v) => Num(-v),
            Neg(inner) => *inner,
            other => Neg(Box::new(other)),
        },
        Add(l, r) => match (fold(*l), fold(*r)) {
            (Num(a), Num(b)) => Num(a + b),
            (Num(z), other) | (other, Num(z)) if z == 0.0 => other,
            (a, b) => Add(Box::new(a), Box::new(b)),
        },
        Sub(l, r) => match (fold(*l), fold(*r)) {
            (Num(a), Num(b)) => Num(a - b),
            (other, Num(z)) if z == 0.0 => other,
            (Num(z), other) if z == 0.0 => Neg(Box::new(other)),
            (a, b) => Sub(Box::new(a), Box::new(b)),
        },
        Mul(l, r) => match (fold(*l), fold(*r)) {
            (Num(a), Num(b)) => Num(a * b),
            (Num(z), _) | (_, Num(z)) if z == 0.0 => Num(0.0),
            (Num(o), other) | (other, Num(o)) if o == 1.0 => other,
            (a, b) => Mul(Box::new(a), Box::new(b)),
        },
        Div(l, r) => match (fold(*l), fold(*r)) {
            (Num(a), Num(b)) if b != 0.0 => Num(a / b),
            (Num(z), _) if z == 0.0 => Num(0.0),
            (other, Num(o)) if o == 1.0 => other,
            (a, b) => Div(Box::new(a), Box::new(b)),
        },
        Pow(l, r) => match (fold(*l), fold(*r)) {
            (_, Num(z)) if z == 0.0 => Num(1.0),
            (other, Num(o)) if o == 1.0 => other,
            (Num(a), Num(b)) => Num(a.powf(b)),
            (a, b) => Pow(Box::new(a), Box::new(b)),
        },
        Call(f, a) => match (f, fold(*a)) {
            (Func::Exp, Num(v)) => Num(v.exp()),
            (Func::Sin, Num(v)) => Num(v.sin()),
            (Func::Cos, Num(v)) => Num(v.cos()),
            (f, a) => Call(f, Box::new(a)),
        },
        leaf => leaf,
    }
}

fn render(node: &Node) -> String {
    use Node::*;
    match node {
        Num(v) => format!("{v:?}"),
        Imag => "i".into(),
        Var(v) => v.name().into(),
        Neg(a) => format!("(-{})", render(a)),
        Add(l, r) => format!("({} + {})", render(l), render(r)),
        Sub(l, r) => format!("({} - {})", render(l), render(r)),
        Mul(l, r) => format!("({} * {})", render(l), render(r)),
        Div(l, r) => format!("({} / {})", render(l), render(r)),
        Pow(l, r) => format!("({} ^ {})", render(l), render(r)),
        Call(f, a) => format!("{}({})", f.name(), render(a)),
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, msg: &str) -> GeoError {
        GeoError::Expr(format!("{msg} at offset {} in `{}`", self.pos, self.src))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(_) => Err(self.error("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            let exp_sign = (c == b'+' || c == b'-') && self.pos > start && matches!(self.bytes[self.pos - 1], b'e' | b'E');
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        self.src[start..self.pos]
            .parse::<f64>()
            .map(Node::Num)
            .map_err(|_| self.error("malformed number"))
    }

    fn ident(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.bytes.len() && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        let func = match name {
            "exp" => Some(Func::Exp),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "sqrt" => Some(Func::Sqrt),
            "log" => Some(Func::Log),
            _ => None,
        };
        if let Some(f) = func {
            if !self.eat(b'(') {
                return Err(self.error("expected `(` after function name"));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.error("expected `)`"));
            }
            return Ok(Node::Call(f, Box::new(arg)));
        }
        Ok(match name {
            "x1" => Node::Var(Var::X1),
            "x2" => Node::Var(Var::X2),
            "beta" => Node::Var(Var::Beta),
            "alpha" => Node::Var(Var::Alpha),
            "v1" => Node::Var(Var::V1),
            "v2" => Node::Var(Var::V2),
            "pi" => Node::Num(std::f64::consts::PI),
            "e" => Node::Num(std::f64::consts::E),
            "i" => Node::Imag,
            _ => {
                self.pos = start;
                return Err(self.error(&format!("unknown identifier `{name}`")));
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(x1: f64, x2: f64) -> Bindings {
        Bindings::at([x1, x2])
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = Expr::parse("1 + 2 * 3 ^ 2").unwrap();
        assert_eq!(e.eval_real(&at(0.0, 0.0)), 19.0);
        let e = Expr::parse("-2^2").unwrap();
        assert_eq!(e.eval_real(&at(0.0, 0.0)), -4.0);
        let e = Expr::parse("2^-1").unwrap();
        assert_eq!(e.eval_real(&at(0.0, 0.0)), 0.5);
        let e = Expr::parse("1e-3 * x1 + 2.5E+1").unwrap();
        assert!((e.eval_real(&at(2.0, 0.0)) - 25.002).abs() < 1e-12);
    }

    #[test]
    fn variables_and_functions() {
        let e = Expr::parse("exp(-(x1^2 + x2^2)/0.25) + sin(beta) * cos(alpha)").unwrap();
        let b = Bindings {
            x: [0.1, 0.2],
            beta: 0.3,
            alpha: 0.4,
            v: [0.0, 0.0],
        };
        let want = (-(0.01f64 + 0.04) / 0.25).exp() + 0.3f64.sin() * 0.4f64.cos();
        assert!((e.eval_real(&b) - want).abs() < 1e-15);
        assert!(e.uses(Var::Beta) && !e.uses(Var::V1));
    }

    #[test]
    fn imaginary_unit() {
        let e = Expr::parse("exp(i * pi)").unwrap();
        assert!(!e.is_real());
        let z = e.eval(&at(0.0, 0.0));
        assert!((z.re + 1.0).abs() < 1e-15 && z.im.abs() < 1e-15);
    }

    #[test]
    fn parse_errors_carry_offset() {
        for bad in ["1 +", "foo(x1)", "(x1", "x1 x2", "3 $ 4", "sin x1"] {
            let err = Expr::parse(bad).unwrap_err();
            assert!(err.to_string().contains("offset"), "{bad}: {err}");
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let sources = [
            "0.1 * exp(-((x1 - 0.2)^2 + x2^2) / 0.3^2)",
            "x1^3 * x2 - sin(x1 * x2) / (2 + cos(x2))",
            "sqrt(1.5 + x1^2) * log(2 + x2)",
            "(1.2 + x1^2) ^ (0.5 + x2)",
        ];
        let h = 1e-5;
        for src in sources {
            let e = Expr::parse(src).unwrap();
            for (var, k) in [(Var::X1, 0), (Var::X2, 1)] {
                let d = e.derivative(var);
                for p in [[0.1, -0.3], [0.4, 0.5], [-0.6, 0.2]] {
                    let mut lo = p;
                    let mut hi = p;
                    lo[k] -= h;
                    hi[k] += h;
                    let fd = (e.eval_real(&Bindings::at(hi)) - e.eval_real(&Bindings::at(lo))) / (2.0 * h);
                    let exact = d.eval_real(&Bindings::at(p));
                    assert!((fd - exact).abs() < 1e-8, "{src} d/{var:?} at {p:?}: {fd} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn derivative_of_constant_folds_to_zero() {
        let e = Expr::parse("3 * pi + beta").unwrap();
        assert_eq!(e.derivative(Var::X1).source(), "0.0");
    }
}
