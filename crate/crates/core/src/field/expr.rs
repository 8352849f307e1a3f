//! Scalar expression grammar for symbolic fields on the circle.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' ['-'] integer)?
//! atom  := number | 'z' | 'pi' | '(' expr ')'
//!        | ('abs' | 'sqrt' | 'sin' | 'cos') '(' expr ')'
//!        | 'piecewise' '(' expr (',' const ',' expr)* ')'
//! ```
//!
//! `piecewise(e0, b1, e1, b2, e2)` is `e0` on `[0, b1)`, `e1` on `[b1, b2)`
//! and `e2` on `[b2, 1)`; breakpoints are constant expressions in `(0, 1)`.

use crate::error::{Error, Result};
use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Z,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Abs(Box<Expr>),
    Sqrt(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Piecewise { breaks: Vec<f64>, pieces: Vec<Expr> },
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser { src, chars: src.char_indices().collect(), pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Z => z,
            Expr::Neg(a) => -a.eval(z),
            Expr::Add(a, b) => a.eval(z) + b.eval(z),
            Expr::Sub(a, b) => a.eval(z) - b.eval(z),
            Expr::Mul(a, b) => a.eval(z) * b.eval(z),
            Expr::Div(a, b) => a.eval(z) / b.eval(z),
            Expr::Pow(a, k) => a.eval(z).powi(*k),
            Expr::Abs(a) => a.eval(z).abs(),
            Expr::Sqrt(a) => a.eval(z).sqrt(),
            Expr::Sin(a) => a.eval(z).sin(),
            Expr::Cos(a) => a.eval(z).cos(),
            Expr::Piecewise { breaks, pieces } => {
                let k = breaks.iter().take_while(|&&b| z >= b).count();
                pieces[k].eval(z)
            }
        }
    }

    /// Constant value when the expression does not mention `z`.
    pub fn constant_value(&self) -> Option<f64> {
        if self.mentions_z() {
            None
        } else {
            Some(self.eval(0.0))
        }
    }

    fn mentions_z(&self) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Z => true,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Abs(a) | Expr::Sqrt(a) | Expr::Sin(a) | Expr::Cos(a) => {
                a.mentions_z()
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => a.mentions_z() || b.mentions_z(),
            Expr::Piecewise { pieces, .. } => !pieces.is_empty(),
        }
    }

    /// False when `abs`, `sqrt` or `piecewise` appear; those may break
    /// the sign/order parity of an analytic germ.
    pub fn is_analytic(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Z => true,
            Expr::Abs(_) | Expr::Sqrt(_) | Expr::Piecewise { .. } => false,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Sin(a) | Expr::Cos(a) => a.is_analytic(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => a.is_analytic() && b.is_analytic(),
        }
    }

    /// All piecewise breakpoints, sorted and deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_breaks(&mut out);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn collect_breaks(&self, out: &mut Vec<f64>) {
        match self {
            Expr::Const(_) | Expr::Z => {}
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Abs(a) | Expr::Sqrt(a) | Expr::Sin(a) | Expr::Cos(a) => {
                a.collect_breaks(out)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_breaks(out);
                b.collect_breaks(out);
            }
            Expr::Piecewise { breaks, pieces } => {
                out.extend_from_slice(breaks);
                for p in pieces {
                    p.collect_breaks(out);
                }
            }
        }
    }

    pub fn mul(self, other: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(other))
    }

    pub fn add(self, other: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(other))
    }
}

fn fmt_num(x: f64) -> String {
    let s = format!("{x:?}");
    if x < 0.0 {
        format!("({s})")
    } else {
        s
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{}", fmt_num(*c)),
            Expr::Z => write!(f, "z"),
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, k) => write!(f, "({a})^{k}"),
            Expr::Abs(a) => write!(f, "abs({a})"),
            Expr::Sqrt(a) => write!(f, "sqrt({a})"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Piecewise { breaks, pieces } => {
                write!(f, "piecewise({}", pieces[0])?;
                for (b, p) in breaks.iter().zip(&pieces[1..]) {
                    write!(f, ", {}, {p}", fmt_num(*b))?;
                }
                write!(f, ")")
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        let offset = self.chars.get(self.pos).map_or(self.src.len(), |c| c.0);
        let before = &self.src[..offset];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        Error::Parse { line, column, message: message.to_string() }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            self.skip_ws();
            let neg = self.eat('-');
            self.skip_ws();
            let start = self.pos;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.error("expected an integer exponent"));
            }
            let digits: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
            if self.peek() == Some('.') {
                return Err(self.error("exponents must be integers"));
            }
            let k: i32 = digits.parse().map_err(|_| self.error("exponent out of range"))?;
            return Ok(Expr::Pow(Box::new(base), if neg { -k } else { k }));
        }
        Ok(base)
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == '.') {
            self.pos += 1;
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some('+' | '-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
        text.parse::<f64>().map_err(|_| {
            self.pos = start;
            self.error(&format!("malformed number '{text}'"))
        })
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().map(|c| c.1).collect()
    }

    fn atom(&mut self) -> Result<Expr> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.error("unexpected end of expression")),
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => Ok(Expr::Const(self.number()?)),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                let name = self.ident();
                match name.as_str() {
                    "z" => Ok(Expr::Z),
                    "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                    "abs" | "sqrt" | "sin" | "cos" => {
                        self.expect('(')?;
                        let a = Box::new(self.expr()?);
                        self.expect(')')?;
                        Ok(match name.as_str() {
                            "abs" => Expr::Abs(a),
                            "sqrt" => Expr::Sqrt(a),
                            "sin" => Expr::Sin(a),
                            _ => Expr::Cos(a),
                        })
                    }
                    "piecewise" => self.piecewise(),
                    _ => {
                        self.pos = start;
                        Err(self.error(&format!("unknown identifier '{name}'")))
                    }
                }
            }
            Some(c) => Err(self.error(&format!("unexpected character '{c}'"))),
        }
    }

    fn piecewise(&mut self) -> Result<Expr> {
        self.expect('(')?;
        let mut pieces = vec![self.expr()?];
        let mut breaks = Vec::new();
        while self.eat(',') {
            self.skip_ws();
            let b = self.expr()?;
            let b = b.constant_value().ok_or_else(|| self.error("breakpoints must be constant"))?;
            if !(b > 0.0 && b < 1.0) || breaks.last().is_some_and(|&l| b <= l) {
                return Err(self.error("breakpoints must increase strictly inside (0, 1)"));
            }
            breaks.push(b);
            self.expect(',')?;
            pieces.push(self.expr()?);
        }
        self.expect(')')?;
        Ok(Expr::Piecewise { breaks, pieces })
    }
}
