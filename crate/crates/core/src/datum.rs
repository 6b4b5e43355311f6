//! Closed-form expressions in `x1, x2` used for boundary data and right-hand
//! sides in scenario files.
//!
//! Grammar: numbers, `x1`, `x2`, `pi`, binary `+ - * / ^` (with `^` binding
//! tightest and associating to the right), unary minus, parentheses, and the
//! functions `pos abs sqrt exp ln sin cos` (one argument) and `min max` (two).
//! `pos(t)` is the positive part `max(t, 0)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func {
    Pos,
    Abs,
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "pos" => Func::Pos,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    X1,
    X2,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Node {
    fn eval(&self, p: Point) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::X1 => p[0],
            Node::X2 => p[1],
            Node::Neg(a) => -a.eval(p),
            Node::Add(a, b) => a.eval(p) + b.eval(p),
            Node::Sub(a, b) => a.eval(p) - b.eval(p),
            Node::Mul(a, b) => a.eval(p) * b.eval(p),
            Node::Div(a, b) => a.eval(p) / b.eval(p),
            Node::Pow(a, b) => {
                let (base, e) = (a.eval(p), b.eval(p));
                if e.fract() == 0.0 && e.abs() <= 64.0 {
                    base.powi(e as i32)
                } else {
                    base.powf(e)
                }
            }
            Node::Call(f, args) => {
                let x = args[0].eval(p);
                match f {
                    Func::Pos => x.max(0.0),
                    Func::Abs => x.abs(),
                    Func::Sqrt => x.sqrt(),
                    Func::Exp => x.exp(),
                    Func::Ln => x.ln(),
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Min => x.min(args[1].eval(p)),
                    Func::Max => x.max(args[1].eval(p)),
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn parse_error(src: &str, offset: usize, message: impl Into<String>) -> Error {
    let (line, column) = line_col(src, offset);
    Error::Parse {
        context: "expression".into(),
        line,
        column,
        message: message.into(),
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
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
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text
                .parse()
                .map_err(|_| parse_error(src, start, format!("malformed number `{text}`")))?;
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else if "+-*/^(),".contains(c) {
            out.push((Tok::Op(c), i));
            i += 1;
        } else {
            let ch = src[i..].chars().next().unwrap_or('?');
            return Err(parse_error(src, i, format!("unexpected character `{ch}`")));
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if t != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if *self.peek() == Tok::Op(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&format!("expected `{c}`")))
        }
    }

    fn unexpected(&self, what: &str) -> Error {
        let found = match self.peek() {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Op(c) => format!("`{c}`"),
            Tok::End => "end of input".into(),
        };
        parse_error(self.src, self.offset(), format!("{what}, found {found}"))
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.bump();
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Op('-') => {
                    self.bump();
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.bump();
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Op('/') => {
                    self.bump();
                    lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if *self.peek() == Tok::Op('+') {
            self.bump();
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            return Ok(Node::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let at = self.offset();
        if matches!(self.peek(), Tok::End | Tok::Op(')' | ',' | '*' | '/' | '^')) {
            return Err(self.unexpected("expected a number, variable, function or `(`"));
        }
        match self.bump() {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "x1" => Ok(Node::X1),
                "x2" => Ok(Node::X2),
                "pi" => Ok(Node::Num(std::f64::consts::PI)),
                _ => {
                    let f = Func::lookup(&name)
                        .ok_or_else(|| parse_error(self.src, at, format!("unknown name `{name}`")))?;
                    self.expect('(')?;
                    let mut args = vec![self.expr()?];
                    while *self.peek() == Tok::Op(',') {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    if args.len() != f.arity() {
                        return Err(parse_error(
                            self.src,
                            at,
                            format!("`{name}` takes {} argument(s), got {}", f.arity(), args.len()),
                        ));
                    }
                    Ok(Node::Call(f, args))
                }
            },
            _ => unreachable!("filtered above"),
        }
    }
}

/// A parsed expression together with its source text.
#[derive(Clone)]
pub struct Expression {
    source: String,
    root: Node,
}

impl Expression {
    pub fn parse(src: &str) -> Result<Self> {
        let toks = lex(src)?;
        let mut p = Parser { src, toks, pos: 0 };
        let root = p.expr()?;
        if *p.peek() != Tok::End {
            return Err(p.unexpected("expected an operator or end of input"));
        }
        Ok(Expression {
            source: src.to_string(),
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, p: Point) -> f64 {
        self.root.eval(p)
    }

    /// Closure form, usable wherever a datum is expected.
    pub fn as_fn(&self) -> impl Fn(Point) -> f64 + '_ {
        move |p| self.eval(p)
    }
}

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expression({:?})", self.source)
    }
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl FromStr for Expression {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Expression::parse(s)
    }
}

impl Serialize for Expression {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Expression {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Expression::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, p: Point) -> f64 {
        Expression::parse(src).unwrap().eval(p)
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(ev("1 + 2 * 3", [0.0, 0.0]), 7.0);
        assert_eq!(ev("2^3^2", [0.0, 0.0]), 512.0);
        assert_eq!(ev("-x2^2", [0.0, 3.0]), -9.0);
        assert_eq!(ev("(1 - x1) / 4", [0.2, 0.0]), 0.2);
        assert_eq!(ev("1.5e-1 * 2", [0.0, 0.0]), 0.3);
        assert_eq!(ev("x1*x2 + 0.5*x2^2", [0.3, 0.4]), 0.3 * 0.4 + 0.5 * 0.16);
    }

    #[test]
    fn functions() {
        assert_eq!(ev("pos(x2 - 0.25)^2 / 2", [0.0, 0.75]), 0.125);
        assert_eq!(ev("pos(x2 - 0.25)^2 / 2", [0.0, 0.1]), 0.0);
        assert_eq!(ev("min(x1, x2) + max(x1, x2)", [1.0, 2.0]), 3.0);
        assert!((ev("sin(pi / 2) + cos(0) + exp(0) + ln(1) + sqrt(4) + abs(-1)", [0.0, 0.0]) - 6.0).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_position() {
        let cases = [
            ("x1 + ", 1, 6),
            ("x1 $ 2", 1, 4),
            ("foo(x1)", 1, 1),
            ("min(x1)", 1, 1),
            ("x1\n  + * x2", 2, 5),
            ("(x1 + x2", 1, 9),
            ("x1 x2", 1, 4),
        ];
        for (src, line, column) in cases {
            match Expression::parse(src) {
                Err(Error::Parse { line: l, column: c, .. }) => assert_eq!((l, c), (line, column), "{src}"),
                other => panic!("{src}: {other:?}"),
            }
        }
    }

    #[test]
    fn serde_round_trip() {
        let e: Expression = serde_json::from_str("\"pos(x2)^2\"").unwrap();
        assert_eq!(serde_json::to_string(&e).unwrap(), "\"pos(x2)^2\"");
        assert!(serde_json::from_str::<Expression>("\"x3\"").is_err());
    }
}
