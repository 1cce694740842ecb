//! Boolean expressions as found in Liberty `function` attributes and `when`
//! guards: pin names combined with NOT (`!a`, `a'`), AND (`*`, `&`, or
//! juxtaposition), OR (`+`, `|`), XOR (`^`), parentheses, and the constants
//! `0`/`1`.
//!
//! Evaluation is three-valued: a variable may be unknown, and the result is
//! `None` unless the known inputs force it.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoolExpr {
    Const(bool),
    Var(String),
    Not(Box<BoolExpr>),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
    Xor(Box<BoolExpr>, Box<BoolExpr>),
}

impl BoolExpr {
    /// Parse a Liberty-style boolean expression.
    pub fn parse(src: &str) -> Result<BoolExpr> {
        let mut p = Parser { src: src.as_bytes(), pos: 0 };
        let e = p.parse_or()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(Error::semantic(format!(
                "trailing input in boolean expression `{src}` at byte {}",
                p.pos
            )));
        }
        Ok(e)
    }

    /// Three-valued evaluation. `lookup` returns the known constant for a pin
    /// name, or `None` if the pin is unconstrained.
    pub fn eval(&self, lookup: &dyn Fn(&str) -> Option<bool>) -> Option<bool> {
        match self {
            BoolExpr::Const(b) => Some(*b),
            BoolExpr::Var(name) => lookup(name),
            BoolExpr::Not(e) => e.eval(lookup).map(|b| !b),
            BoolExpr::And(a, b) => match (a.eval(lookup), b.eval(lookup)) {
                (Some(false), _) | (_, Some(false)) => Some(false),
                (Some(true), Some(true)) => Some(true),
                _ => None,
            },
            BoolExpr::Or(a, b) => match (a.eval(lookup), b.eval(lookup)) {
                (Some(true), _) | (_, Some(true)) => Some(true),
                (Some(false), Some(false)) => Some(false),
                _ => None,
            },
            BoolExpr::Xor(a, b) => match (a.eval(lookup), b.eval(lookup)) {
                (Some(x), Some(y)) => Some(x ^ y),
                _ => None,
            },
        }
    }

    /// All variable names referenced by the expression.
    pub fn vars(&self, out: &mut Vec<String>) {
        match self {
            BoolExpr::Const(_) => {}
            BoolExpr::Var(n) => {
                if !out.iter().any(|v| v == n) {
                    out.push(n.clone());
                }
            }
            BoolExpr::Not(e) => e.vars(out),
            BoolExpr::And(a, b) | BoolExpr::Or(a, b) | BoolExpr::Xor(a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn parse_or(&mut self) -> Result<BoolExpr> {
        let mut lhs = self.parse_and()?;
        while let Some(c) = self.peek() {
            if c == b'+' || c == b'|' {
                self.pos += 1;
                let rhs = self.parse_and()?;
                lhs = BoolExpr::Or(Box::new(lhs), Box::new(rhs));
            } else {
                break;
            }
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> Result<BoolExpr> {
        let mut lhs = self.parse_xor()?;
        loop {
            match self.peek() {
                Some(b'*') | Some(b'&') => {
                    self.pos += 1;
                    let rhs = self.parse_xor()?;
                    lhs = BoolExpr::And(Box::new(lhs), Box::new(rhs));
                }
                // Juxtaposition is AND: `a b`, `a (b+c)`, `a !b`.
                Some(c) if c == b'(' || c == b'!' || is_ident_start(c) => {
                    let rhs = self.parse_xor()?;
                    lhs = BoolExpr::And(Box::new(lhs), Box::new(rhs));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn parse_xor(&mut self) -> Result<BoolExpr> {
        let mut lhs = self.parse_unary()?;
        while let Some(b'^') = self.peek() {
            self.pos += 1;
            let rhs = self.parse_unary()?;
            lhs = BoolExpr::Xor(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<BoolExpr> {
        match self.peek() {
            Some(b'!') => {
                self.pos += 1;
                let e = self.parse_unary()?;
                Ok(BoolExpr::Not(Box::new(e)))
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.parse_or()?;
                if self.peek() != Some(b')') {
                    return Err(Error::semantic("unbalanced parenthesis in boolean expression"));
                }
                self.pos += 1;
                self.postfix(e)
            }
            Some(c) if is_ident_start(c) => {
                let start = self.pos;
                while self.pos < self.src.len() && is_ident_char(self.src[self.pos]) {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let e = match name {
                    "0" => BoolExpr::Const(false),
                    "1" => BoolExpr::Const(true),
                    _ => BoolExpr::Var(name.to_string()),
                };
                self.postfix(e)
            }
            other => Err(Error::semantic(format!(
                "unexpected {:?} in boolean expression",
                other.map(|b| b as char)
            ))),
        }
    }

    /// Handle the Liberty postfix negation `a'` / `(a+b)'`.
    fn postfix(&mut self, mut e: BoolExpr) -> Result<BoolExpr> {
        while self.src.get(self.pos) == Some(&b'\'') {
            self.pos += 1;
            e = BoolExpr::Not(Box::new(e));
        }
        Ok(e)
    }
}

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'\\'
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'[' || c == b']' || c == b'.' || c == b'\\'
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env<'a>(pairs: &'a [(&'a str, bool)]) -> impl Fn(&str) -> Option<bool> + 'a {
        move |name| pairs.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }

    #[test]
    fn parses_basic_operators() {
        let e = BoolExpr::parse("a * !b + c").unwrap();
        assert_eq!(e.eval(&env(&[("a", true), ("b", false), ("c", false)])), Some(true));
        assert_eq!(e.eval(&env(&[("a", true), ("b", true), ("c", false)])), Some(false));
    }

    #[test]
    fn postfix_negation_and_juxtaposition() {
        let e = BoolExpr::parse("a b'").unwrap();
        assert_eq!(e.eval(&env(&[("a", true), ("b", false)])), Some(true));
        let e = BoolExpr::parse("(a + b)'").unwrap();
        assert_eq!(e.eval(&env(&[("a", false), ("b", false)])), Some(true));
    }

    #[test]
    fn three_valued_shortcuts() {
        let e = BoolExpr::parse("a * b").unwrap();
        // b unknown but a=0 forces the AND.
        assert_eq!(e.eval(&env(&[("a", false)])), Some(false));
        assert_eq!(e.eval(&env(&[("a", true)])), None);
        let e = BoolExpr::parse("a + b").unwrap();
        assert_eq!(e.eval(&env(&[("a", true)])), Some(true));
    }

    #[test]
    fn xor_and_constants() {
        let e = BoolExpr::parse("a ^ 1").unwrap();
        assert_eq!(e.eval(&env(&[("a", true)])), Some(false));
        let e = BoolExpr::parse("0 + a").unwrap();
        assert_eq!(e.eval(&env(&[("a", true)])), Some(true));
    }

    #[test]
    fn rejects_garbage() {
        assert!(BoolExpr::parse("a +").is_err());
        assert!(BoolExpr::parse("(a").is_err());
        assert!(BoolExpr::parse("a ) b").is_err());
    }

    #[test]
    fn collects_vars() {
        let e = BoolExpr::parse("a * b + a ^ c").unwrap();
        let mut vars = Vec::new();
        e.vars(&mut vars);
        assert_eq!(vars, vec!["a".to_string(), "b".to_string(), "c".to_string()]);
    }
}
