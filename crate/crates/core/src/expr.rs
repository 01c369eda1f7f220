//! Small arithmetic expression language for right-hand sides and barriers.
//!
//! Grammar (usual precedence, `^` right-associative and binding tighter than
//! unary minus):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Variables: `x0`, `theta`, `phi`, `nu0`, `nu1`, `nu2`, and the constants
//! `pi`, `e`. Functions: `sin cos tan cot exp log ln sqrt sinh cosh tanh coth abs`.

use std::fmt;

use crate::dual::Scalar;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X0,
    Theta,
    Phi,
    Nu(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Cot,
    Exp,
    Ln,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
    Coth,
    Abs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// Variable bindings for one evaluation.
#[derive(Clone, Copy, Debug)]
pub struct Bindings<T> {
    pub x0: T,
    pub theta: f64,
    pub phi: f64,
    pub nu: [T; 3],
}

impl<T: Scalar> Bindings<T> {
    /// Bindings at an angular point of `S₀` (`[θ]` or `[φ, θ]`).
    pub fn at(x0: T, x: &[f64], nu: [T; 3]) -> Self {
        let (phi, theta) = if x.len() == 2 { (x[0], x[1]) } else { (0.0, x[0]) };
        Self { x0, theta, phi, nu }
    }
}

/// Parsed expression that keeps its source text for round-tripping.
#[derive(Clone, Debug)]
pub struct Expr {
    src: String,
    root: Node,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.src == other.src
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.src)
    }
}

impl std::str::FromStr for Expr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Expr::parse(s)
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Expression(format!(
                "unexpected trailing input in '{src}'"
            )));
        }
        Ok(Self {
            src: src.trim().to_string(),
            root,
        })
    }

    pub fn constant(v: f64) -> Self {
        Self {
            src: format!("{v:?}"),
            root: Node::Num(v),
        }
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    /// True if the expression reads variable `v`.
    pub fn uses(&self, v: Var) -> bool {
        fn walk(n: &Node, v: Var) -> bool {
            match n {
                Node::Num(_) => false,
                Node::Var(w) => *w == v,
                Node::Neg(a) | Node::Call(_, a) => walk(a, v),
                Node::Bin(_, a, b) => walk(a, v) || walk(b, v),
            }
        }
        walk(&self.root, v)
    }

    pub fn uses_normal(&self) -> bool {
        (0..3).any(|k| self.uses(Var::Nu(k)))
    }

    /// Constant value if the expression reads no variables.
    pub fn as_constant(&self) -> Option<f64> {
        let vars = [Var::X0, Var::Theta, Var::Phi, Var::Nu(0), Var::Nu(1), Var::Nu(2)];
        if vars.iter().any(|v| self.uses(*v)) {
            return None;
        }
        Some(self.eval(&Bindings::at(0.0, &[0.0], [0.0; 3])))
    }

    pub fn eval<T: Scalar>(&self, b: &Bindings<T>) -> T {
        eval_node(&self.root, b)
    }

    /// Evaluates with only `x0` and angular coordinates bound.
    pub fn eval_at(&self, x0: f64, x: &[f64]) -> f64 {
        self.eval(&Bindings::at(x0, x, [0.0; 3]))
    }
}

fn eval_node<T: Scalar>(n: &Node, b: &Bindings<T>) -> T {
    match n {
        Node::Num(v) => T::cst(*v),
        Node::Var(Var::X0) => b.x0,
        Node::Var(Var::Theta) => T::cst(b.theta),
        Node::Var(Var::Phi) => T::cst(b.phi),
        Node::Var(Var::Nu(k)) => b.nu[*k],
        Node::Neg(a) => -eval_node(a, b),
        Node::Bin(op, l, r) => {
            if *op == Op::Pow {
                let base = eval_node(l, b);
                if let Node::Num(p) = **r {
                    if p.fract() == 0.0 && p.abs() < 64.0 {
                        return base.powi(p as i32);
                    }
                    return base.powf(p);
                }
                if let Node::Neg(ref inner) = **r {
                    if let Node::Num(p) = **inner {
                        if p.fract() == 0.0 && p.abs() < 64.0 {
                            return base.powi(-(p as i32));
                        }
                        return base.powf(-p);
                    }
                }
                return base.powd(eval_node(r, b));
            }
            let (x, y) = (eval_node(l, b), eval_node(r, b));
            match op {
                Op::Add => x + y,
                Op::Sub => x - y,
                Op::Mul => x * y,
                Op::Div => x / y,
                Op::Pow => unreachable!(),
            }
        }
        Node::Call(f, a) => {
            let x = eval_node(a, b);
            match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Tan => x.tan(),
                Func::Cot => x.cos() / x.sin(),
                Func::Exp => x.exp(),
                Func::Ln => x.ln(),
                Func::Sqrt => x.sqrt(),
                Func::Sinh => x.sinh(),
                Func::Cosh => x.cosh(),
                Func::Tanh => x.tanh(),
                Func::Coth => x.cosh() / x.sinh(),
                Func::Abs => x.abs(),
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| Error::Expression(format!("bad number '{s}'")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(Error::Expression(format!(
                "unexpected character '{c}' in '{src}'"
            )));
        }
    }
    if out.is_empty() {
        return Err(Error::Expression("empty expression".into()));
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Bin(Op::Add, Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Bin(Op::Sub, Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Bin(Op::Mul, Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Bin(Op::Div, Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Node::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let tok = self
            .peek()
            .cloned()
            .ok_or_else(|| Error::Expression("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(Error::Expression("missing ')'".into()));
                }
                Ok(e)
            }
            Tok::Sym(c) => Err(Error::Expression(format!("unexpected '{c}'"))),
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "tan" => Some(Func::Tan),
                    "cot" => Some(Func::Cot),
                    "exp" => Some(Func::Exp),
                    "log" | "ln" => Some(Func::Ln),
                    "sqrt" => Some(Func::Sqrt),
                    "sinh" => Some(Func::Sinh),
                    "cosh" => Some(Func::Cosh),
                    "tanh" => Some(Func::Tanh),
                    "coth" => Some(Func::Coth),
                    "abs" => Some(Func::Abs),
                    _ => None,
                };
                if let Some(f) = func {
                    if !self.eat('(') {
                        return Err(Error::Expression(format!("'{name}' needs '('")));
                    }
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return Err(Error::Expression("missing ')'".into()));
                    }
                    return Ok(Node::Call(f, Box::new(arg)));
                }
                match name.as_str() {
                    "x0" | "r" => Ok(Node::Var(Var::X0)),
                    "theta" => Ok(Node::Var(Var::Theta)),
                    "phi" => Ok(Node::Var(Var::Phi)),
                    "nu0" => Ok(Node::Var(Var::Nu(0))),
                    "nu1" => Ok(Node::Var(Var::Nu(1))),
                    "nu2" => Ok(Node::Var(Var::Nu(2))),
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    "e" => Ok(Node::Num(std::f64::consts::E)),
                    _ => Err(Error::Expression(format!("unknown identifier '{name}'"))),
                }
            }
        }
    }
}
