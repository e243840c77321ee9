//! Arithmetic expressions over the plane coordinates `(x1, x2)`.
//!
//! Problem data (right-hand sides, obstacle profiles, boundary densities,
//! the upper boundary of the junction body) enters through small closed-form
//! expressions parsed from configuration text. The grammar is deliberately
//! tiny: numeric literals, the variables `x1` and `x2`, the constant `pi`,
//! the binary operators `+ - * / ^`, unary minus, parentheses and the
//! functions `sin`, `cos`, `exp`, `abs`.
//!
//! Parsing is total on that grammar and rejects everything else with a byte
//! position, so a typo in a config file points at the offending character.
//! Evaluation is a side-effect-free tree walk; expressions are immutable and
//! can be shared across threads.

use std::fmt;

/// A parsed expression over `(x1, x2)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    X1,
    X2,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Abs(Box<Expr>),
}

impl Expr {
    /// Evaluate at a point. Division by zero and overflow follow IEEE 754
    /// semantics; data validation rejects non-finite samples downstream.
    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::X1 => x1,
            Expr::X2 => x2,
            Expr::Neg(e) => -e.eval(x1, x2),
            Expr::Add(a, b) => a.eval(x1, x2) + b.eval(x1, x2),
            Expr::Sub(a, b) => a.eval(x1, x2) - b.eval(x1, x2),
            Expr::Mul(a, b) => a.eval(x1, x2) * b.eval(x1, x2),
            Expr::Div(a, b) => a.eval(x1, x2) / b.eval(x1, x2),
            Expr::Pow(a, b) => a.eval(x1, x2).powf(b.eval(x1, x2)),
            Expr::Sin(e) => e.eval(x1, x2).sin(),
            Expr::Cos(e) => e.eval(x1, x2).cos(),
            Expr::Exp(e) => e.eval(x1, x2).exp(),
            Expr::Abs(e) => e.eval(x1, x2).abs(),
        }
    }

    /// Render the expression back to parseable text (fully parenthesized).
    pub fn unparse(&self) -> String {
        match self {
            Expr::Const(c) => {
                if *c < 0.0 {
                    format!("({:?})", c)
                } else {
                    format!("{:?}", c)
                }
            }
            Expr::X1 => "x1".to_string(),
            Expr::X2 => "x2".to_string(),
            Expr::Neg(e) => format!("(-{})", e.unparse()),
            Expr::Add(a, b) => format!("({}+{})", a.unparse(), b.unparse()),
            Expr::Sub(a, b) => format!("({}-{})", a.unparse(), b.unparse()),
            Expr::Mul(a, b) => format!("({}*{})", a.unparse(), b.unparse()),
            Expr::Div(a, b) => format!("({}/{})", a.unparse(), b.unparse()),
            Expr::Pow(a, b) => format!("({}^{})", a.unparse(), b.unparse()),
            Expr::Sin(e) => format!("sin({})", e.unparse()),
            Expr::Cos(e) => format!("cos({})", e.unparse()),
            Expr::Exp(e) => format!("exp({})", e.unparse()),
            Expr::Abs(e) => format!("abs({})", e.unparse()),
        }
    }

    /// True if the expression never reads `x1` (used to detect data that is
    /// admissible for the one-dimensional reduction).
    pub fn is_x1_independent(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::X2 => true,
            Expr::X1 => false,
            Expr::Neg(e) | Expr::Sin(e) | Expr::Cos(e) | Expr::Exp(e) | Expr::Abs(e) => {
                e.is_x1_independent()
            }
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.is_x1_independent() && b.is_x1_independent(),
        }
    }
}

/// Parse failure with the byte offset of the offending token.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at byte {pos}: {message}")]
pub struct ParseError {
    pub pos: usize,
    pub message: String,
}

impl ParseError {
    fn new(pos: usize, message: impl Into<String>) -> Self {
        ParseError {
            pos,
            message: message.into(),
        }
    }
}

/// Parse an expression in the grammar described in the module docs.
pub fn parse_expression(text: &str) -> Result<Expr, ParseError> {
    let mut parser = Parser {
        bytes: text.as_bytes(),
        pos: 0,
    };
    let expr = parser.expr()?;
    parser.skip_ws();
    if parser.pos != parser.bytes.len() {
        return Err(ParseError::new(parser.pos, "unexpected trailing input"));
    }
    Ok(expr)
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
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

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                let rhs = self.term()?;
                lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'-') {
                let rhs = self.term()?;
                lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    // term := unary (('*'|'/') unary)*
    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                let rhs = self.unary()?;
                lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'/') {
                let rhs = self.unary()?;
                lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    // unary := '-' unary | power
    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    // power := atom ('^' unary)?   (right-associative, binds tighter than '-')
    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(ParseError::new(self.pos, "expected ')'"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.identifier(),
            Some(c) => Err(ParseError::new(
                self.pos,
                format!("unexpected character '{}'", c as char),
            )),
            None => Err(ParseError::new(self.pos, "unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|c| c.is_ascii_digit() || *c == b'.')
        {
            self.pos += 1;
        }
        // optional exponent: e.g. 1e-3, 2.5E6
        if self
            .bytes
            .get(self.pos)
            .is_some_and(|c| *c == b'e' || *c == b'E')
        {
            let mut probe = self.pos + 1;
            if self
                .bytes
                .get(probe)
                .is_some_and(|c| *c == b'+' || *c == b'-')
            {
                probe += 1;
            }
            if self.bytes.get(probe).is_some_and(|c| c.is_ascii_digit()) {
                probe += 1;
                while self.bytes.get(probe).is_some_and(|c| c.is_ascii_digit()) {
                    probe += 1;
                }
                self.pos = probe;
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| ParseError::new(start, format!("invalid number literal '{}'", text)))
    }

    fn identifier(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        match name {
            "x1" => Ok(Expr::X1),
            "x2" => Ok(Expr::X2),
            "pi" => Ok(Expr::Const(std::f64::consts::PI)),
            "sin" | "cos" | "exp" | "abs" => {
                if !self.eat(b'(') {
                    return Err(ParseError::new(self.pos, format!("expected '(' after {}", name)));
                }
                let arg = Box::new(self.expr()?);
                if !self.eat(b')') {
                    return Err(ParseError::new(self.pos, "expected ')'"));
                }
                Ok(match name {
                    "sin" => Expr::Sin(arg),
                    "cos" => Expr::Cos(arg),
                    "exp" => Expr::Exp(arg),
                    _ => Expr::Abs(arg),
                })
            }
            _ => Err(ParseError::new(
                start,
                format!("unknown identifier '{}'", name),
            )),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.unparse())
    }
}
