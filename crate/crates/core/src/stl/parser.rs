//! Textual STL specification language.
//!
//! Grammar (EBNF):
//!
//! ```text
//! formula  = or , [ "->" , formula ] ;           (* implication, right assoc *)
//! or       = and , { "|" , and } ;
//! and      = until , { "&" , until } ;
//! until    = unary , [ "U" , interval , unary ] ;
//! unary    = "!" , unary
//!          | "G" , interval , unary
//!          | "F" , interval , unary
//!          | "(" , formula , ")"
//!          | predicate ;
//! interval = "[" , number , "," , number , "]" ;
//! predicate = aexpr , rel , aexpr , [ rel , aexpr ] ;   (* chained comparison *)
//! rel      = "<" | "<=" | ">" | ">=" ;
//! aexpr    = term , { ("+" | "-") , term } ;
//! term     = factor , { ("*" | "/") , factor } ;
//! factor   = number | ident | "abs" , "(" , aexpr , ")"
//!          | "(" , aexpr , ")" | "-" , factor ;
//! ```
//!
//! `G`, `F`, `U`, and `abs` are reserved; every other identifier names a
//! signal channel. `p -> q` desugars to `!p | q` and the result is returned
//! in negation normal form. Comparisons canonicalize to `expr > 0`:
//! `lhs < rhs` becomes `rhs - lhs > 0`.

use crate::error::{Error, Result};
use crate::stl::expr::Expr;
use crate::stl::formula::{Interval, Predicate, StlFormula};

pub fn parse_formula(text: &str) -> Result<StlFormula> {
    let mut p = Parser {
        chars: text.as_bytes(),
        pos: 0,
    };
    let f = p.formula()?;
    p.skip_ws();
    if p.pos != p.chars.len() {
        return Err(p.err("unexpected trailing input"));
    }
    f.to_nnf()
}

struct Parser<'a> {
    chars: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.chars[self.pos..].starts_with(token.as_bytes()) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<()> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.err(&format!("expected `{token}`")))
        }
    }

    fn formula(&mut self) -> Result<StlFormula> {
        let lhs = self.or()?;
        self.skip_ws();
        if self.eat("->") {
            let rhs = self.formula()?;
            Ok(StlFormula::Or(vec![lhs.negated(), rhs]))
        } else {
            Ok(lhs)
        }
    }

    fn or(&mut self) -> Result<StlFormula> {
        let mut parts = vec![self.and()?];
        loop {
            self.skip_ws();
            // `|` but not `|a|`-style absolute value (not in the grammar)
            if self.peek() == Some(b'|') && !self.chars[self.pos..].starts_with(b"||") {
                self.pos += 1;
                parts.push(self.and()?);
            } else if self.eat("||") {
                parts.push(self.and()?);
            } else {
                break;
            }
        }
        if parts.len() == 1 {
            Ok(parts.pop().unwrap())
        } else {
            Ok(StlFormula::Or(parts))
        }
    }

    fn and(&mut self) -> Result<StlFormula> {
        let mut parts = vec![self.until()?];
        loop {
            if self.eat("&&") || {
                self.skip_ws();
                self.peek() == Some(b'&') && {
                    self.pos += 1;
                    true
                }
            } {
                parts.push(self.until()?);
            } else {
                break;
            }
        }
        if parts.len() == 1 {
            Ok(parts.pop().unwrap())
        } else {
            Ok(StlFormula::And(parts))
        }
    }

    fn until(&mut self) -> Result<StlFormula> {
        let lhs = self.unary()?;
        self.skip_ws();
        if self.at_temporal(b'U') {
            self.pos += 1;
            let iv = self.interval()?;
            let rhs = self.unary()?;
            Ok(StlFormula::Until(iv, Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    /// True when the next token is the temporal operator `op` followed by
    /// `[`, distinguishing it from a channel name starting with that letter.
    fn at_temporal(&mut self, op: u8) -> bool {
        self.skip_ws();
        if self.chars.get(self.pos) != Some(&op) {
            return false;
        }
        let mut j = self.pos + 1;
        while j < self.chars.len() && self.chars[j].is_ascii_whitespace() {
            j += 1;
        }
        self.chars.get(j) == Some(&b'[')
    }

    fn unary(&mut self) -> Result<StlFormula> {
        self.skip_ws();
        if self.eat("!") {
            return Ok(self.unary()?.negated());
        }
        if self.at_temporal(b'G') {
            self.pos += 1;
            let iv = self.interval()?;
            return Ok(StlFormula::Globally(iv, Box::new(self.unary()?)));
        }
        if self.at_temporal(b'F') {
            self.pos += 1;
            let iv = self.interval()?;
            return Ok(StlFormula::Finally(iv, Box::new(self.unary()?)));
        }
        if self.peek() == Some(b'(') {
            // Could open a sub-formula or a parenthesized arithmetic
            // expression; try the formula first and backtrack on failure.
            let save = self.pos;
            self.pos += 1;
            if let Ok(f) = self.formula() {
                if self.eat(")") {
                    return Ok(f);
                }
            }
            self.pos = save;
        }
        self.predicate()
    }

    fn interval(&mut self) -> Result<Interval> {
        self.expect("[")?;
        let a = self.number()?;
        self.expect(",")?;
        let b = self.number()?;
        self.expect("]")?;
        let pos = self.pos;
        Interval::new(a, b).map_err(|_| Error::Parse {
            pos,
            msg: format!("negative or inverted interval bounds [{a}, {b}]"),
        })
    }

    fn predicate(&mut self) -> Result<StlFormula> {
        let lhs = self.aexpr()?;
        let rel = self.relation()?;
        let mid = self.aexpr()?;
        let first = canonical(lhs, rel, mid.clone());
        self.skip_ws();
        if let Ok(rel2) = self.try_relation() {
            let rhs = self.aexpr()?;
            let second = canonical(mid, rel2, rhs);
            return Ok(StlFormula::And(vec![first, second]));
        }
        Ok(first)
    }

    fn relation(&mut self) -> Result<Rel> {
        self.try_relation()
            .map_err(|_| self.err("expected comparison operator"))
    }

    fn try_relation(&mut self) -> std::result::Result<Rel, ()> {
        self.skip_ws();
        if self.eat("<=") {
            Ok(Rel::Le)
        } else if self.eat(">=") {
            Ok(Rel::Ge)
        } else if self.eat("<") {
            Ok(Rel::Lt)
        } else if self.eat(">") {
            Ok(Rel::Gt)
        } else {
            Err(())
        }
    }

    fn aexpr(&mut self) -> Result<Expr> {
        let mut e = self.term()?;
        loop {
            self.skip_ws();
            if self.chars[self.pos..].starts_with(b"->") {
                break; // implication, not subtraction
            }
            if self.eat("+") {
                e = Expr::Add(Box::new(e), Box::new(self.term()?));
            } else if self.eat("-") {
                e = Expr::Sub(Box::new(e), Box::new(self.term()?));
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut e = self.factor()?;
        loop {
            if self.eat("*") {
                e = Expr::Mul(Box::new(e), Box::new(self.factor()?));
            } else if self.eat("/") {
                e = Expr::Div(Box::new(e), Box::new(self.factor()?));
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn factor(&mut self) -> Result<Expr> {
        self.skip_ws();
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.aexpr()?;
                self.expect(")")?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number().map(Expr::Const),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let name = self.ident();
                if name == "abs" {
                    self.expect("(")?;
                    let e = self.aexpr()?;
                    self.expect(")")?;
                    Ok(Expr::Abs(Box::new(e)))
                } else if name == "G" || name == "F" || name == "U" {
                    Err(self.err(&format!("reserved operator `{name}` in expression")))
                } else {
                    Ok(Expr::Chan(name))
                }
            }
            _ => Err(self.err("expected expression")),
        }
    }

    fn ident(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len()
            && (self.chars[self.pos].is_ascii_alphanumeric() || self.chars[self.pos] == b'_')
        {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.chars[start..self.pos]).into_owned()
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len()
            && (self.chars[self.pos].is_ascii_digit()
                || self.chars[self.pos] == b'.'
                || ((self.chars[self.pos] == b'e' || self.chars[self.pos] == b'E')
                    && self.pos > start)
                || ((self.chars[self.pos] == b'+' || self.chars[self.pos] == b'-')
                    && self.pos > start
                    && (self.chars[self.pos - 1] == b'e' || self.chars[self.pos - 1] == b'E')))
        {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.chars[start..self.pos]).unwrap();
        text.parse::<f64>().map_err(|_| Error::Parse {
            pos: start,
            msg: format!("invalid number `{text}`"),
        })
    }
}

#[derive(Clone, Copy)]
enum Rel {
    Lt,
    Le,
    Gt,
    Ge,
}

/// `lhs rel rhs` in canonical `expr > 0` form. Strict and non-strict
/// relations share the same quantitative semantics.
fn canonical(lhs: Expr, rel: Rel, rhs: Expr) -> StlFormula {
    let expr = match rel {
        Rel::Gt | Rel::Ge => Expr::sub(lhs, rhs),
        Rel::Lt | Rel::Le => Expr::sub(rhs, lhs),
    };
    StlFormula::Pred(Predicate::new(expr))
}
