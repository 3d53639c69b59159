//! Elementwise expressions over the sample value `x`.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?          right-associative
//! atom    := number | 'x' | func '(' sum (',' sum)* ')' | '(' sum ')'
//! func    := abs | sqrt | log | exp | min | max
//! ```

use std::fmt;

use crate::error::{Error, Result};
use crate::types::{Chunk, Epoch};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Sqrt,
    Log,
    Exp,
    Min,
    Max,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "log" => Func::Log,
            "exp" => Func::Exp,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Log => "log",
            Func::Exp => "exp",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    X,
    Num(f64),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Which domain a function was evaluated outside of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainViolation {
    LogNonPositive,
    SqrtNegative,
}

impl fmt::Display for DomainViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainViolation::LogNonPositive => "log of a non-positive value",
            DomainViolation::SqrtNegative => "sqrt of a negative value",
        })
    }
}

impl Expr {
    pub fn eval(&self, x: f64) -> std::result::Result<f64, DomainViolation> {
        Ok(match self {
            Expr::X => x,
            Expr::Num(v) => *v,
            Expr::Neg(e) => -e.eval(x)?,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => a.eval(x)? / b.eval(x)?,
            Expr::Pow(a, b) => a.eval(x)?.powf(b.eval(x)?),
            Expr::Call(f, args) => {
                let a = args[0].eval(x)?;
                match f {
                    Func::Abs => a.abs(),
                    Func::Exp => a.exp(),
                    Func::Sqrt if a < 0.0 => return Err(DomainViolation::SqrtNegative),
                    Func::Sqrt => a.sqrt(),
                    Func::Log if a <= 0.0 => return Err(DomainViolation::LogNonPositive),
                    Func::Log => a.ln(),
                    Func::Min => a.min(args[1].eval(x)?),
                    Func::Max => a.max(args[1].eval(x)?),
                }
            }
        })
    }
}

/// Fully parenthesized; parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::X => f.write_str("x"),
            Expr::Num(v) if v.is_sign_negative() => write!(f, "(-{:?})", -v),
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' | '-' | '*' | '/' | '^' => {
                out.push((i, Tok::Op(c)));
                i += 1;
            }
            '(' => {
                out.push((i, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((i, Tok::RParen));
                i += 1;
            }
            ',' => {
                out.push((i, Tok::Comma));
                i += 1;
            }
            '0'..='9' | '.' => {
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
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| Error::ExprSyntax {
                    position: start,
                    message: format!("bad number '{text}'"),
                })?;
                out.push((start, Tok::Num(v)));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
            }
            other => {
                return Err(Error::ExprSyntax { position: i, message: format!("unexpected character '{other}'") })
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::ExprSyntax { position: self.offset(), message: message.into() })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.product()?;
            lhs = if op == '+' { Expr::Add(lhs.into(), rhs.into()) } else { Expr::Sub(lhs.into(), rhs.into()) };
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' { Expr::Mul(lhs.into(), rhs.into()) } else { Expr::Div(lhs.into(), rhs.into()) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(&Tok::Op('-')) {
            self.pos += 1;
            return Ok(Expr::Neg(self.unary()?.into()));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Op('^')) {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(base.into(), exp.into()));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Ident(name)) if name == "x" => {
                self.pos += 1;
                Ok(Expr::X)
            }
            Some(Tok::Ident(name)) => {
                let Some(func) = Func::from_name(&name) else {
                    return self.error(format!("unknown name '{name}'"));
                };
                self.pos += 1;
                self.expect(Tok::LParen, "'(' after function name")?;
                let mut args = vec![self.sum()?];
                while self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                    args.push(self.sum()?);
                }
                if args.len() != func.arity() {
                    return self.error(format!("{} takes {} argument(s), got {}", func.name(), func.arity(), args.len()));
                }
                self.expect(Tok::RParen, "')'")?;
                Ok(Expr::Call(func, args))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.sum()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Some(_) => self.error("expected a number, 'x', a function or '('"),
            None => self.error("unexpected end of expression"),
        }
    }
}

pub fn parse_expression(text: &str) -> Result<Expr> {
    let toks = tokenize(text)?;
    if toks.is_empty() {
        return Err(Error::ExprSyntax { position: 0, message: "empty expression".into() });
    }
    let mut p = Parser { toks, pos: 0, end: text.len() };
    let e = p.sum()?;
    if p.pos != p.toks.len() {
        return p.error("unexpected trailing input");
    }
    Ok(e)
}

/// A parsed expression plus a count of non-finite results produced so far.
#[derive(Debug, Clone)]
pub struct ExprEvaluator {
    expr: Expr,
    non_finite: u64,
}

impl ExprEvaluator {
    pub fn new(expr: Expr) -> Self {
        ExprEvaluator { expr, non_finite: 0 }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(ExprEvaluator::new(parse_expression(text)?))
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn non_finite(&self) -> u64 {
        self.non_finite
    }

    fn map(&mut self, data: &ndarray::Array2<f64>) -> Result<ndarray::Array2<f64>> {
        let mut out = data.clone();
        for ((row, col), v) in out.indexed_iter_mut() {
            let y = self.expr.eval(*v).map_err(|d| Error::Domain { row, col, message: d.to_string() })?;
            if !y.is_finite() {
                self.non_finite += 1;
            }
            *v = y;
        }
        Ok(out)
    }

    /// Same shape and timestamps; every sample `v` replaced by `expr(v)`.
    pub fn apply(&mut self, chunk: &Chunk) -> Result<Chunk> {
        Ok(chunk.with_data(self.map(chunk.data())?))
    }

    pub fn apply_epoch(&mut self, epoch: &Epoch) -> Result<Epoch> {
        Ok(epoch.with_data(self.map(&epoch.data)?))
    }
}

/// Evaluates `expr` on every sample of `chunk`.
pub fn eval_expression(expr: &Expr, chunk: &Chunk) -> Result<Chunk> {
    ExprEvaluator::new(expr.clone()).apply(chunk)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::channel_names;
    use ndarray::array;

    fn num(v: f64) -> Box<Expr> {
        Box::new(Expr::Num(v))
    }

    #[test]
    fn shapes() {
        assert_eq!(parse_expression("x - 4").unwrap(), Expr::Sub(Box::new(Expr::X), num(4.0)));
        assert_eq!(parse_expression("x ^ 2").unwrap(), Expr::Pow(Box::new(Expr::X), num(2.0)));
        assert_eq!(
            parse_expression("-2^2").unwrap(),
            Expr::Neg(Box::new(Expr::Pow(num(2.0), num(2.0))))
        );
        assert_eq!(parse_expression("2^3^2").unwrap().eval(0.0).unwrap(), 512.0);
        assert_eq!(parse_expression("2^-1").unwrap().eval(0.0).unwrap(), 0.5);
        assert_eq!(parse_expression("8 / 4 / 2").unwrap().eval(0.0).unwrap(), 1.0);
        assert_eq!(parse_expression("1 - 2 - 3").unwrap().eval(0.0).unwrap(), -4.0);
        assert_eq!(parse_expression("max(x, 1e-3) * 2").unwrap().eval(0.0).unwrap(), 2e-3);
    }

    #[test]
    fn syntax_errors() {
        for (src, pos) in [("", 0), ("x +", 3), ("(x", 2), ("y", 0), ("min(x)", 5), ("x $ 2", 2), ("x x", 2)] {
            match parse_expression(src) {
                Err(Error::ExprSyntax { position, .. }) => assert_eq!(position, pos, "{src}"),
                other => panic!("{src}: {other:?}"),
            }
        }
    }

    #[test]
    fn chunk_evaluation() {
        let c = Chunk::regular(0.0, 2.0, channel_names(["a"]), array![[-2.0], [3.0]]).unwrap();
        let sq = eval_expression(&parse_expression("x^2").unwrap(), &c).unwrap();
        assert_eq!(sq.data(), &array![[4.0], [9.0]]);
        assert_eq!(eval_expression(&Expr::X, &c).unwrap(), c);
        let c6 = Chunk::regular(0.0, 2.0, channel_names(["a"]), array![[6.0]]).unwrap();
        assert_eq!(eval_expression(&parse_expression("x - 4").unwrap(), &c6).unwrap().data()[[0, 0]], 2.0);
    }

    #[test]
    fn domain_and_nonfinite() {
        let c = Chunk::regular(0.0, 2.0, channel_names(["a", "b"]), array![[1.0, -1.0]]).unwrap();
        match eval_expression(&parse_expression("sqrt(x)").unwrap(), &c) {
            Err(Error::Domain { row: 0, col: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        let mut ev = ExprEvaluator::parse("1 / (x - 1)").unwrap();
        let out = ev.apply(&c).unwrap();
        assert!(out.data()[[0, 0]].is_infinite());
        assert_eq!(ev.non_finite(), 1);
    }

    #[test]
    fn display_round_trip() {
        for src in ["x - 4", "-x^2", "2^3^2", "abs(x) / (1 + exp(-x))", "min(x, 2) * max(-x, 0.5)", "1.5e-7 * x"] {
            let e = parse_expression(src).unwrap();
            assert_eq!(parse_expression(&e.to_string()).unwrap(), e, "{src}");
        }
    }
}
