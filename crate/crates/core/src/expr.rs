//! Scalar expressions of the time variable `t`.
//!
//! Grammar (lowest to highest precedence, all binary operators left-associative):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' operand)*
//! operand := ('-' | '+') operand | primary
//! primary := number | 't' | 'pi' | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | exp | log | sqrt | abs
//! ```

use std::fmt;
use std::ops;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Empty => 0,
            ParseError::Syntax { offset, .. } | ParseError::UnknownIdentifier { offset, .. } => {
                *offset
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero at t = {t}")]
    DivisionByZero { t: f64 },
    #[error("{func} argument {arg} outside its domain at t = {t}")]
    Domain { func: &'static str, arg: f64, t: f64 },
    #[error("non-finite value at t = {t}")]
    NonFinite { t: f64 },
    #[error("time value {t} is not finite")]
    NonFiniteTime { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn apply(self, x: f64, t: f64) -> Result<f64, EvalError> {
        let domain = |func| EvalError::Domain { func, arg: x, t };
        Ok(match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Log if x <= 0.0 => return Err(domain("log")),
            Func::Log => x.ln(),
            Func::Sqrt if x < 0.0 => return Err(domain("sqrt")),
            Func::Sqrt => x.sqrt(),
            Func::Abs => x.abs(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Time,
    Neg(Arc<Node>),
    Binary(BinOp, Arc<Node>, Arc<Node>),
    Call(Func, Arc<Node>),
}

impl Node {
    fn eval(&self, t: f64) -> Result<f64, EvalError> {
        let v = match self {
            Node::Num(v) => *v,
            Node::Time => t,
            Node::Neg(a) => -a.eval(t)?,
            Node::Call(f, a) => f.apply(a.eval(t)?, t)?,
            Node::Binary(op, a, b) => {
                let x = a.eval(t)?;
                let y = b.eval(t)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div if y == 0.0 => return Err(EvalError::DivisionByZero { t }),
                    BinOp::Div => x / y,
                    BinOp::Pow => pow(x, y, t)?,
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite { t })
        }
    }

    fn substitute(self: &Arc<Self>, with: &Arc<Node>) -> Arc<Node> {
        match &**self {
            Node::Num(_) => Arc::clone(self),
            Node::Time => Arc::clone(with),
            Node::Neg(a) => Arc::new(Node::Neg(a.substitute(with))),
            Node::Call(f, a) => Arc::new(Node::Call(*f, a.substitute(with))),
            Node::Binary(op, a, b) => {
                Arc::new(Node::Binary(*op, a.substitute(with), b.substitute(with)))
            }
        }
    }

    fn depends_on_time(&self) -> bool {
        match self {
            Node::Num(_) => false,
            Node::Time => true,
            Node::Neg(a) | Node::Call(_, a) => a.depends_on_time(),
            Node::Binary(_, a, b) => a.depends_on_time() || b.depends_on_time(),
        }
    }
}

fn pow(x: f64, y: f64, t: f64) -> Result<f64, EvalError> {
    if x == 0.0 && y < 0.0 {
        return Err(EvalError::DivisionByZero { t });
    }
    if x < 0.0 && y.fract() != 0.0 {
        return Err(EvalError::Domain { func: "^", arg: x, t });
    }
    Ok(x.powf(y))
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(v) if v.is_sign_negative() => write!(f, "(-{:?})", -v),
            Node::Num(v) => write!(f, "{v:?}"),
            Node::Time => f.write_str("t"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
            Node::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

/// Immutable expression tree in the single variable `t`.
///
/// Cloning is cheap; subtrees are shared.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeExpr {
    root: Arc<Node>,
}

impl TimeExpr {
    pub fn parse(text: &str) -> Result<TimeExpr, ParseError> {
        parse_expr(text)
    }

    pub fn constant(value: f64) -> TimeExpr {
        assert!(value.is_finite(), "expression literals must be finite");
        TimeExpr { root: Arc::new(Node::Num(value)) }
    }

    pub fn time() -> TimeExpr {
        TimeExpr { root: Arc::new(Node::Time) }
    }

    pub fn zero() -> TimeExpr {
        TimeExpr::constant(0.0)
    }

    pub fn one() -> TimeExpr {
        TimeExpr::constant(1.0)
    }

    pub fn node(&self) -> &Node {
        &self.root
    }

    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        if !t.is_finite() {
            return Err(EvalError::NonFiniteTime { t });
        }
        self.root.eval(t)
    }

    pub fn call(func: Func, arg: &TimeExpr) -> TimeExpr {
        TimeExpr { root: Arc::new(Node::Call(func, Arc::clone(&arg.root))) }
    }

    pub fn pow(&self, exponent: &TimeExpr) -> TimeExpr {
        self.binary(BinOp::Pow, exponent)
    }

    fn binary(&self, op: BinOp, rhs: &TimeExpr) -> TimeExpr {
        TimeExpr { root: Arc::new(Node::Binary(op, Arc::clone(&self.root), Arc::clone(&rhs.root))) }
    }

    /// Replaces every occurrence of `t` with `with`.
    pub fn substitute(&self, with: &TimeExpr) -> TimeExpr {
        TimeExpr { root: self.root.substitute(&with.root) }
    }

    /// The expression with `t` replaced by `-t`.
    pub fn reflect_time(&self) -> TimeExpr {
        self.substitute(&-&TimeExpr::time())
    }

    pub fn is_constant(&self) -> bool {
        !self.root.depends_on_time()
    }

    /// True for a literal zero (not for expressions that merely evaluate to zero).
    pub fn is_zero_literal(&self) -> bool {
        matches!(*self.root, Node::Num(v) if v == 0.0)
    }
}

impl fmt::Display for TimeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

impl std::str::FromStr for TimeExpr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expr(s)
    }
}

impl Serialize for TimeExpr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TimeExpr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_expr(&text).map_err(serde::de::Error::custom)
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $op:expr) => {
        impl ops::$trait<&TimeExpr> for &TimeExpr {
            type Output = TimeExpr;
            fn $method(self, rhs: &TimeExpr) -> TimeExpr {
                self.binary($op, rhs)
            }
        }
        impl ops::$trait<TimeExpr> for TimeExpr {
            type Output = TimeExpr;
            fn $method(self, rhs: TimeExpr) -> TimeExpr {
                self.binary($op, &rhs)
            }
        }
    };
}

impl_binop!(Add, add, BinOp::Add);
impl_binop!(Sub, sub, BinOp::Sub);
impl_binop!(Mul, mul, BinOp::Mul);
impl_binop!(Div, div, BinOp::Div);

impl ops::Neg for &TimeExpr {
    type Output = TimeExpr;
    fn neg(self) -> TimeExpr {
        TimeExpr { root: Arc::new(Node::Neg(Arc::clone(&self.root))) }
    }
}

impl ops::Neg for TimeExpr {
    type Output = TimeExpr;
    fn neg(self) -> TimeExpr {
        -&self
    }
}

/// Parses `text` into an expression tree.
pub fn parse_expr(text: &str) -> Result<TimeExpr, ParseError> {
    if let Some(offset) = text.bytes().position(|b| !b.is_ascii()) {
        return Err(ParseError::Syntax { offset, message: "non-ASCII input".into() });
    }
    if text.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let mut parser = Parser { src: text.as_bytes(), pos: 0, depth: 0 };
    let root = parser.expr()?;
    parser.skip_ws();
    if parser.pos < parser.src.len() {
        return Err(parser.error("unexpected trailing input"));
    }
    Ok(TimeExpr { root })
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    depth: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ParseError {
        ParseError::Syntax { offset: self.pos, message: message.to_string() }
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

    fn descend(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            Err(self.error("expression nested too deeply"))
        } else {
            Ok(())
        }
    }

    fn expr(&mut self) -> Result<Arc<Node>, ParseError> {
        self.descend()?;
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Arc::new(Node::Binary(op, lhs, rhs));
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Arc<Node>, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Arc::new(Node::Binary(op, lhs, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Arc<Node>, ParseError> {
        self.descend()?;
        let node = if self.eat(b'-') {
            Arc::new(Node::Neg(self.unary()?))
        } else if self.eat(b'+') {
            self.unary()?
        } else {
            self.power()?
        };
        self.depth -= 1;
        Ok(node)
    }

    fn power(&mut self) -> Result<Arc<Node>, ParseError> {
        let mut base = self.primary()?;
        while self.eat(b'^') {
            let exponent = self.operand()?;
            base = Arc::new(Node::Binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn operand(&mut self) -> Result<Arc<Node>, ParseError> {
        self.descend()?;
        let node = if self.eat(b'-') {
            Arc::new(Node::Neg(self.operand()?))
        } else if self.eat(b'+') {
            self.operand()?
        } else {
            self.primary()?
        };
        self.depth -= 1;
        Ok(node)
    }

    fn primary(&mut self) -> Result<Arc<Node>, ParseError> {
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
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(_) => Err(self.error("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Arc<Node>, ParseError> {
        let start = self.pos;
        let src = self.src;
        let digits = |mut i: usize| {
            while i < src.len() && src[i].is_ascii_digit() {
                i += 1;
            }
            i
        };
        let mut end = digits(start);
        if end < src.len() && src[end] == b'.' {
            end = digits(end + 1);
        }
        if end < src.len() && (src[end] == b'e' || src[end] == b'E') {
            let mut k = end + 1;
            if k < src.len() && (src[k] == b'+' || src[k] == b'-') {
                k += 1;
            }
            let exp_end = digits(k);
            // `2e` followed by a non-digit is not an exponent
            if exp_end > k {
                end = exp_end;
            }
        }
        let text = std::str::from_utf8(&src[start..end]).expect("ascii checked");
        let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
            offset: start,
            message: format!("malformed number `{text}`"),
        })?;
        if !value.is_finite() {
            return Err(ParseError::Syntax { offset: start, message: "number out of range".into() });
        }
        self.pos = end;
        Ok(Arc::new(Node::Num(value)))
    }

    fn identifier(&mut self) -> Result<Arc<Node>, ParseError> {
        let start = self.pos;
        let mut end = start;
        while end < self.src.len() && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_') {
            end += 1;
        }
        let name = std::str::from_utf8(&self.src[start..end]).expect("ascii checked");
        self.pos = end;
        match name {
            "t" => return Ok(Arc::new(Node::Time)),
            "pi" => return Ok(Arc::new(Node::Num(std::f64::consts::PI))),
            _ => {}
        }
        let func = Func::from_name(name).ok_or_else(|| ParseError::UnknownIdentifier {
            offset: start,
            name: name.to_string(),
        })?;
        if !self.eat(b'(') {
            return Err(self.error("expected `(` after function name"));
        }
        let arg = self.expr()?;
        if !self.eat(b')') {
            return Err(self.error("expected `)`"));
        }
        Ok(Arc::new(Node::Call(func, arg)))
    }
}
