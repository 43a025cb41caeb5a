//! Canonical prefix s-expression text form, e.g.
//! `(add (mul (const 2) (var 0)) (sin (var 1)))`.
//!
//! Constants print as the shortest decimal that round-trips, so
//! `parse(print(e))` reproduces every constant bit for bit.

use std::fmt;

use super::expr::{Expr, Node};
use super::ParseError;

pub fn format_real(c: f64) -> String {
    if c == 0.0 {
        return if c.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if c.fract() == 0.0 && c.abs() < 1e15 {
        return format!("{}", c as i64);
    }
    format!("{c:?}")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => write!(f, "(const {})", format_real(*c)),
            Node::Var(i) => write!(f, "(var {i})"),
            Node::Add(a, b) => write!(f, "(add {a} {b})"),
            Node::Sub(a, b) => write!(f, "(sub {a} {b})"),
            Node::Mul(a, b) => write!(f, "(mul {a} {b})"),
            Node::Div(a, b) => write!(f, "(div {a} {b})"),
            Node::Neg(a) => write!(f, "(neg {a})"),
            Node::Pow(a, k) => write!(f, "(pow {a} {k})"),
            Node::Sin(a) => write!(f, "(sin {a})"),
            Node::Cos(a) => write!(f, "(cos {a})"),
            Node::Exp(a) => write!(f, "(exp {a})"),
            Node::Tanh(a) => write!(f, "(tanh {a})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn tokenize(s: &str) -> Vec<(usize, Token<'_>)> {
    let mut out = Vec::new();
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => {
                out.push((i, Token::Open));
                i += 1;
            }
            b')' => {
                out.push((i, Token::Close));
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len()
                    && !bytes[i].is_ascii_whitespace()
                    && bytes[i] != b'('
                    && bytes[i] != b')'
                {
                    i += 1;
                }
                out.push((start, Token::Atom(&s[start..i])));
            }
        }
    }
    out
}

struct Parser<'a> {
    toks: Vec<(usize, Token<'a>)>,
    pos: usize,
    len: usize,
}

impl<'a> Parser<'a> {
    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.len, |t| t.0)
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError {
            offset: self.offset(),
            message: msg.into(),
        }
    }

    fn next(&mut self) -> Option<Token<'a>> {
        let t = self.toks.get(self.pos).map(|t| t.1.clone());
        self.pos += 1;
        t
    }

    fn expect_close(&mut self) -> Result<(), ParseError> {
        match self.next() {
            Some(Token::Close) => Ok(()),
            _ => {
                self.pos -= 1;
                Err(self.err("expected ')'"))
            }
        }
    }

    fn atom(&mut self) -> Result<&'a str, ParseError> {
        match self.next() {
            Some(Token::Atom(a)) => Ok(a),
            _ => {
                self.pos -= 1;
                Err(self.err("expected atom"))
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        match self.next() {
            Some(Token::Open) => {}
            _ => {
                self.pos -= 1;
                return Err(self.err("expected '('"));
            }
        }
        let head = self.atom()?;
        let e = match head {
            "const" => {
                let a = self.atom()?;
                let c: f64 = a.parse().map_err(|_| self.err(format!("bad real '{a}'")))?;
                if !c.is_finite() {
                    return Err(self.err("non-finite constant"));
                }
                raw(Node::Const(c))
            }
            "var" => {
                let a = self.atom()?;
                let i: usize = a.parse().map_err(|_| self.err(format!("bad index '{a}'")))?;
                raw(Node::Var(i))
            }
            "add" | "sub" | "mul" | "div" => {
                let a = self.expr()?;
                let b = self.expr()?;
                raw(match head {
                    "add" => Node::Add(a, b),
                    "sub" => Node::Sub(a, b),
                    "mul" => Node::Mul(a, b),
                    _ => Node::Div(a, b),
                })
            }
            "pow" => {
                let a = self.expr()?;
                let k = self.atom()?;
                let k: u32 = k.parse().map_err(|_| self.err(format!("bad exponent '{k}'")))?;
                raw(Node::Pow(a, k))
            }
            "neg" | "sin" | "cos" | "exp" | "tanh" => {
                let a = self.expr()?;
                raw(match head {
                    "neg" => Node::Neg(a),
                    "sin" => Node::Sin(a),
                    "cos" => Node::Cos(a),
                    "exp" => Node::Exp(a),
                    _ => Node::Tanh(a),
                })
            }
            other => return Err(self.err(format!("unknown operator '{other}'"))),
        };
        self.expect_close()?;
        Ok(e)
    }
}

// Parsing reproduces the printed tree verbatim, without re-folding.
fn raw(n: Node) -> Expr {
    Expr::from_node(n)
}

pub fn parse(s: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        toks: tokenize(s),
        pos: 0,
        len: s.len(),
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.err("trailing input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prints_canonical_form() {
        let e = Expr::constant(2.0) * Expr::var(0) + Expr::var(1).sin();
        assert_eq!(e.to_string(), "(add (mul (const 2) (var 0)) (sin (var 1)))");
    }

    #[test]
    fn parses_and_reprints() {
        let s = "(add (mul (const 2) (var 0)) (sin (var 1)))";
        assert_eq!(parse(s).unwrap().to_string(), s);
    }

    #[test]
    fn constants_round_trip_bitwise() {
        for c in [0.1, -1e-6, 1.0 / 3.0, 6.02e23, -0.0, 123456789.0, 5e-324] {
            let e = parse(&Expr::constant(c).to_string()).unwrap();
            assert_eq!(e.as_const().unwrap().to_bits(), c.to_bits(), "{c}");
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse("(foo (var 0))").is_err());
        assert!(parse("(add (var 0))").is_err());
        assert!(parse("(var 0) extra").is_err());
        assert!(parse("(const nan)").is_err());
        assert!(parse("(pow (var 0) -1)").is_err());
    }
}
