//! Membership-function expressions over a subsystem's local state.
//!
//! Grammar (EBNF):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = primary [ "^" unary ] ;            (* right-associative *)
//! primary = number | "pi" | var | func "(" expr ")" | "(" expr ")" ;
//! var     = "x" digit { digit } ;              (* x1 .. xN, 1-based *)
//! func    = "sin" | "cos" | "tan" | "exp" | "sqrt" | "abs" ;
//! number  = digit { digit } [ "." { digit } ] [ ("e" | "E") [ "+" | "-" ] digit { digit } ] ;
//! ```
//!
//! Unary minus binds looser than `^`, so `-x1^2` is `-(x1^2)`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    /// `position` is 1-based; end of input is `len + 1`.
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown identifier `{name}` at position {position}")]
    UnknownIdentifier { name: String, position: usize },
    #[error("function `{name}` takes 1 argument, got {got} (position {position})")]
    Arity {
        name: String,
        got: usize,
        position: usize,
    },
    #[error("evaluation error: {0}")]
    Eval(String),
    #[error("state has dimension {got}, expression expects {expected}")]
    StateDim { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Pi,
    /// 0-based state index.
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed membership expression. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipExpr {
    source: String,
    state_dim: usize,
    ast: Node,
}

impl MembershipExpr {
    pub fn parse(source: &str, state_dim: usize) -> Result<Self, ExprError> {
        let ast = Parser::new(source, state_dim).parse_all()?;
        Ok(Self {
            source: source.to_string(),
            state_dim,
            ast,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn ast(&self) -> &Node {
        &self.ast
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        if x.len() != self.state_dim {
            return Err(ExprError::StateDim {
                got: x.len(),
                expected: self.state_dim,
            });
        }
        eval_node(&self.ast, x)
    }

    /// Central difference of the expression along the flow direction `xdot`.
    pub fn eval_time_derivative(&self, x: &[f64], xdot: &[f64], h: f64) -> Result<f64, ExprError> {
        if !(h > 0.0) {
            return Err(ExprError::Eval(format!("step must be positive, got {h}")));
        }
        if xdot.len() != x.len() {
            return Err(ExprError::StateDim {
                got: xdot.len(),
                expected: x.len(),
            });
        }
        let fwd: Vec<f64> = x.iter().zip(xdot).map(|(a, d)| a + h * d).collect();
        let bwd: Vec<f64> = x.iter().zip(xdot).map(|(a, d)| a - h * d).collect();
        Ok((self.eval(&fwd)? - self.eval(&bwd)?) / (2.0 * h))
    }

    pub fn is_constant(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::Num(_) | Node::Pi => true,
                Node::Var(_) => false,
                Node::Neg(a) | Node::Call(_, a) => walk(a),
                Node::Bin(_, a, b) => walk(a) && walk(b),
            }
        }
        walk(&self.ast)
    }
}

impl fmt::Display for MembershipExpr {
    /// Fully parenthesized form; reparses to an equivalent tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.ast)
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(v) => {
                // `{:?}` keeps a round-trippable representation (e.g. `1e-7`).
                write!(f, "{v:?}")
            }
            Node::Pi => write!(f, "pi"),
            Node::Var(i) => write!(f, "x{}", i + 1),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Bin(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a}{sym}{b})")
            }
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

fn eval_node(node: &Node, x: &[f64]) -> Result<f64, ExprError> {
    Ok(match node {
        Node::Num(v) => *v,
        Node::Pi => std::f64::consts::PI,
        Node::Var(i) => x[*i],
        Node::Neg(a) => -eval_node(a, x)?,
        Node::Bin(op, a, b) => {
            let l = eval_node(a, x)?;
            let r = eval_node(b, x)?;
            match op {
                BinOp::Add => l + r,
                BinOp::Sub => l - r,
                BinOp::Mul => l * r,
                BinOp::Div => {
                    if r == 0.0 {
                        return Err(ExprError::Eval("division by zero".into()));
                    }
                    l / r
                }
                BinOp::Pow => pow(l, r)?,
            }
        }
        Node::Call(func, a) => {
            let v = eval_node(a, x)?;
            match func {
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Tan => v.tan(),
                Func::Exp => v.exp(),
                Func::Sqrt => {
                    if v < 0.0 {
                        return Err(ExprError::Eval(format!("sqrt of negative value {v}")));
                    }
                    v.sqrt()
                }
                Func::Abs => v.abs(),
            }
        }
    })
}

fn pow(base: f64, exp: f64) -> Result<f64, ExprError> {
    if exp.fract() == 0.0 && exp.abs() <= i32::MAX as f64 {
        let n = exp as i32;
        if n < 0 && base == 0.0 {
            return Err(ExprError::Eval("division by zero in negative power".into()));
        }
        return Ok(base.powi(n));
    }
    if base < 0.0 {
        return Err(ExprError::Eval(format!(
            "negative base {base} with non-integer exponent {exp}"
        )));
    }
    if base == 0.0 {
        return Ok(if exp > 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((exp * base.ln()).exp())
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    state_dim: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, state_dim: usize) -> Self {
        Self {
            src: src.as_bytes(),
            pos: 0,
            state_dim,
        }
    }

    fn syntax(&self, at: usize, message: impl Into<String>) -> ExprError {
        ExprError::Syntax {
            position: at + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse_all(mut self) -> Result<Node, ExprError> {
        let node = self.expr()?;
        if let Some(c) = self.peek() {
            return Err(self.syntax(self.pos, format!("unexpected `{}`", c as char)));
        }
        Ok(node)
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.primary()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        let start = {
            self.skip_ws();
            self.pos
        };
        match self.peek() {
            None => Err(self.syntax(self.pos, "unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.syntax(self.pos, "expected `)`"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos])
                    .expect("ascii identifier")
                    .to_string();
                self.identifier(name, start)
            }
            Some(c) => Err(self.syntax(start, format!("unexpected `{}`", c as char))),
        }
    }

    fn identifier(&mut self, name: String, start: usize) -> Result<Node, ExprError> {
        if let Some(func) = Func::from_name(&name) {
            if !self.eat(b'(') {
                return Err(ExprError::Arity {
                    name,
                    got: 0,
                    position: start + 1,
                });
            }
            if self.peek() == Some(b')') {
                return Err(ExprError::Arity {
                    name,
                    got: 0,
                    position: start + 1,
                });
            }
            let arg = self.expr()?;
            let mut got = 1;
            while self.eat(b',') {
                self.expr()?;
                got += 1;
            }
            if got != 1 {
                return Err(ExprError::Arity {
                    name,
                    got,
                    position: start + 1,
                });
            }
            if !self.eat(b')') {
                return Err(self.syntax(self.pos, "expected `)`"));
            }
            return Ok(Node::Call(func, Box::new(arg)));
        }
        if name == "pi" {
            return Ok(Node::Pi);
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                if let Ok(k) = digits.parse::<usize>() {
                    if k >= 1 && k <= self.state_dim {
                        return Ok(Node::Var(k - 1));
                    }
                }
            }
        }
        Err(ExprError::UnknownIdentifier {
            name,
            position: start + 1,
        })
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            digits(self);
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(self);
            if self.pos == exp_start {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii number");
        text.parse::<f64>()
            .map(Node::Num)
            .map_err(|_| self.syntax(start, format!("malformed number `{text}`")))
    }
}
