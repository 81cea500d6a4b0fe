//! Symbolic expression trees over lifted states z1..zn and inputs u1..um.

use std::fmt;

use crate::error::{Error, Result};

/// Division guard: denominators smaller than this in magnitude are flagged.
pub const DIV_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Exp,
    Sin,
    Cos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprTree {
    Const(f64),
    /// Lifted-state variable, zero-based.
    Z(usize),
    /// Input variable, zero-based.
    U(usize),
    Unary(UnaryOp, Box<ExprTree>),
    Binary(BinOp, Box<ExprTree>, Box<ExprTree>),
}

impl ExprTree {
    /// Total node count.
    pub fn complexity(&self) -> usize {
        match self {
            ExprTree::Const(_) | ExprTree::Z(_) | ExprTree::U(_) => 1,
            ExprTree::Unary(_, a) => 1 + a.complexity(),
            ExprTree::Binary(_, a, b) => 1 + a.complexity() + b.complexity(),
        }
    }

    /// Guarded evaluation: `None` flags a tripped division guard or a
    /// non-finite intermediate, so callers penalize rather than crash.
    pub fn eval(&self, z: &[f64], u: &[f64]) -> Option<f64> {
        let v = match self {
            ExprTree::Const(c) => *c,
            ExprTree::Z(i) => z[*i],
            ExprTree::U(j) => u[*j],
            ExprTree::Unary(op, a) => {
                let a = a.eval(z, u)?;
                match op {
                    UnaryOp::Exp => a.exp(),
                    UnaryOp::Sin => a.sin(),
                    UnaryOp::Cos => a.cos(),
                }
            }
            ExprTree::Binary(op, a, b) => {
                let a = a.eval(z, u)?;
                let b = b.eval(z, u)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b.abs() < DIV_GUARD {
                            return None;
                        }
                        a / b
                    }
                }
            }
        };
        v.is_finite().then_some(v)
    }

    pub fn depends_on_input(&self) -> bool {
        match self {
            ExprTree::U(_) => true,
            ExprTree::Const(_) | ExprTree::Z(_) => false,
            ExprTree::Unary(_, a) => a.depends_on_input(),
            ExprTree::Binary(_, a, b) => a.depends_on_input() || b.depends_on_input(),
        }
    }

    /// Symbolic partial derivative with respect to z_i (`wrt_input` false)
    /// or u_i (`wrt_input` true), with light constant folding.
    pub fn differentiate(&self, i: usize, wrt_input: bool) -> ExprTree {
        use ExprTree::*;
        match self {
            Const(_) => Const(0.0),
            Z(k) => Const(if !wrt_input && *k == i { 1.0 } else { 0.0 }),
            U(k) => Const(if wrt_input && *k == i { 1.0 } else { 0.0 }),
            Unary(op, a) => {
                let da = a.differentiate(i, wrt_input);
                let outer = match op {
                    UnaryOp::Exp => Unary(UnaryOp::Exp, a.clone()),
                    UnaryOp::Sin => Unary(UnaryOp::Cos, a.clone()),
                    UnaryOp::Cos => mul(Const(-1.0), Unary(UnaryOp::Sin, a.clone())),
                };
                mul(outer, da)
            }
            Binary(op, a, b) => {
                let da = a.differentiate(i, wrt_input);
                let db = b.differentiate(i, wrt_input);
                match op {
                    BinOp::Add => add(da, db),
                    BinOp::Sub => sub(da, db),
                    BinOp::Mul => add(mul(da, (**b).clone()), mul((**a).clone(), db)),
                    BinOp::Div => {
                        // (a'b - ab') / b^2
                        let num = sub(mul(da, (**b).clone()), mul((**a).clone(), db));
                        let den = mul((**b).clone(), (**b).clone());
                        ExprTree::Binary(BinOp::Div, Box::new(num), Box::new(den))
                    }
                }
            }
        }
    }

    /// Immutable view of the k-th node in preorder.
    pub fn node(&self, k: usize) -> &ExprTree {
        fn walk<'a>(e: &'a ExprTree, k: &mut usize) -> Option<&'a ExprTree> {
            if *k == 0 {
                return Some(e);
            }
            *k -= 1;
            match e {
                ExprTree::Unary(_, a) => walk(a, k),
                ExprTree::Binary(_, a, b) => walk(a, k).or_else(|| walk(b, k)),
                _ => None,
            }
        }
        let mut k = k;
        walk(self, &mut k).expect("node index in range")
    }

    /// Returns a copy with the k-th preorder node replaced by `new`.
    pub fn with_node(&self, k: usize, new: &ExprTree) -> ExprTree {
        fn walk(e: &ExprTree, k: &mut isize, new: &ExprTree) -> ExprTree {
            if *k == 0 {
                *k -= 1;
                return new.clone();
            }
            *k -= 1;
            match e {
                ExprTree::Unary(op, a) => ExprTree::Unary(*op, Box::new(walk(a, k, new))),
                ExprTree::Binary(op, a, b) => {
                    let la = walk(a, k, new);
                    ExprTree::Binary(*op, Box::new(la), Box::new(walk(b, k, new)))
                }
                leaf => leaf.clone(),
            }
        }
        let mut k = k as isize;
        walk(self, &mut k, new)
    }

    /// Constants in preorder.
    pub fn constants(&self) -> Vec<f64> {
        let mut out = Vec::new();
        fn walk(e: &ExprTree, out: &mut Vec<f64>) {
            match e {
                ExprTree::Const(c) => out.push(*c),
                ExprTree::Unary(_, a) => walk(a, out),
                ExprTree::Binary(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                _ => {}
            }
        }
        walk(self, &mut out);
        out
    }

    /// Returns a copy with constants replaced in preorder.
    pub fn with_constants(&self, vals: &[f64]) -> ExprTree {
        fn walk(e: &ExprTree, vals: &[f64], i: &mut usize) -> ExprTree {
            match e {
                ExprTree::Const(_) => {
                    let v = vals[*i];
                    *i += 1;
                    ExprTree::Const(v)
                }
                ExprTree::Unary(op, a) => ExprTree::Unary(*op, Box::new(walk(a, vals, i))),
                ExprTree::Binary(op, a, b) => {
                    let la = walk(a, vals, i);
                    ExprTree::Binary(*op, Box::new(la), Box::new(walk(b, vals, i)))
                }
                leaf => leaf.clone(),
            }
        }
        let mut i = 0;
        let out = walk(self, vals, &mut i);
        debug_assert_eq!(i, vals.len());
        out
    }
}

fn add(a: ExprTree, b: ExprTree) -> ExprTree {
    match (&a, &b) {
        (ExprTree::Const(x), ExprTree::Const(y)) => ExprTree::Const(x + y),
        (ExprTree::Const(x), _) if *x == 0.0 => b,
        (_, ExprTree::Const(y)) if *y == 0.0 => a,
        _ => ExprTree::Binary(BinOp::Add, Box::new(a), Box::new(b)),
    }
}

fn sub(a: ExprTree, b: ExprTree) -> ExprTree {
    match (&a, &b) {
        (ExprTree::Const(x), ExprTree::Const(y)) => ExprTree::Const(x - y),
        (_, ExprTree::Const(y)) if *y == 0.0 => a,
        _ => ExprTree::Binary(BinOp::Sub, Box::new(a), Box::new(b)),
    }
}

fn mul(a: ExprTree, b: ExprTree) -> ExprTree {
    match (&a, &b) {
        (ExprTree::Const(x), ExprTree::Const(y)) => ExprTree::Const(x * y),
        (ExprTree::Const(x), _) if *x == 0.0 => ExprTree::Const(0.0),
        (_, ExprTree::Const(y)) if *y == 0.0 => ExprTree::Const(0.0),
        (ExprTree::Const(x), _) if *x == 1.0 => b,
        (_, ExprTree::Const(y)) if *y == 1.0 => a,
        _ => ExprTree::Binary(BinOp::Mul, Box::new(a), Box::new(b)),
    }
}

/// All partial derivatives: (d/dz_0..n-1, d/du_0..m-1).
pub fn expr_jacobian(e: &ExprTree, n_z: usize, n_u: usize) -> (Vec<ExprTree>, Vec<ExprTree>) {
    let dz = (0..n_z).map(|i| e.differentiate(i, false)).collect();
    let du = (0..n_u).map(|j| e.differentiate(j, true)).collect();
    (dz, du)
}

impl fmt::Display for ExprTree {
    /// Fully parenthesized infix, round-trippable through `parse_expr`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprTree::Const(c) => {
                if *c < 0.0 {
                    write!(f, "({c})")
                } else {
                    write!(f, "{c}")
                }
            }
            ExprTree::Z(i) => write!(f, "z{}", i + 1),
            ExprTree::U(j) => write!(f, "u{}", j + 1),
            ExprTree::Unary(op, a) => {
                let name = match op {
                    UnaryOp::Exp => "exp",
                    UnaryOp::Sin => "sin",
                    UnaryOp::Cos => "cos",
                };
                write!(f, "{name}({a})")
            }
            ExprTree::Binary(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                };
                write!(f, "({a} {sym} {b})")
            }
        }
    }
}

/// Parses the infix form produced by `Display` (plus unparenthesized input
/// with usual precedence).
pub fn parse_expr(src: &str) -> Result<ExprTree> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            pos: self.pos,
            msg: msg.into(),
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

    fn expr(&mut self) -> Result<ExprTree> {
        let mut lhs = self.term()?;
        while let Some(c) = self.peek() {
            let op = match c {
                b'+' => BinOp::Add,
                b'-' => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = ExprTree::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<ExprTree> {
        let mut lhs = self.factor()?;
        while let Some(c) = self.peek() {
            let op = match c {
                b'*' => BinOp::Mul,
                b'/' => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = ExprTree::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<ExprTree> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                let inner = self.factor()?;
                Ok(match inner {
                    ExprTree::Const(c) => ExprTree::Const(-c),
                    e => ExprTree::Binary(
                        BinOp::Mul,
                        Box::new(ExprTree::Const(-1.0)),
                        Box::new(e),
                    ),
                })
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            _ => Err(self.err("expected expression")),
        }
    }

    fn number(&mut self) -> Result<ExprTree> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' {
                self.pos += 1;
            } else if (c == b'+' || c == b'-')
                && self.pos > start
                && matches!(self.src[self.pos - 1], b'e' | b'E')
            {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(ExprTree::Const)
            .map_err(|_| self.err("bad number"))
    }

    fn ident(&mut self) -> Result<ExprTree> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let op = match name {
            "exp" => Some(UnaryOp::Exp),
            "sin" => Some(UnaryOp::Sin),
            "cos" => Some(UnaryOp::Cos),
            _ => None,
        };
        if let Some(op) = op {
            if self.peek() != Some(b'(') {
                return Err(self.err("expected `(` after function name"));
            }
            self.pos += 1;
            let a = self.expr()?;
            if self.peek() != Some(b')') {
                return Err(self.err("expected `)`"));
            }
            self.pos += 1;
            return Ok(ExprTree::Unary(op, Box::new(a)));
        }
        let (kind, digits) = name.split_at(1);
        let idx: usize = digits
            .parse()
            .map_err(|_| self.err("expected variable like z1 or u1"))?;
        if idx == 0 {
            return Err(self.err("variable indices are one-based"));
        }
        match kind {
            "z" => Ok(ExprTree::Z(idx - 1)),
            "u" => Ok(ExprTree::U(idx - 1)),
            _ => Err(self.err("unknown identifier")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn z(i: usize) -> ExprTree {
        ExprTree::Z(i)
    }
    fn u(j: usize) -> ExprTree {
        ExprTree::U(j)
    }
    fn bin(op: BinOp, a: ExprTree, b: ExprTree) -> ExprTree {
        ExprTree::Binary(op, Box::new(a), Box::new(b))
    }

    #[test]
    fn basic_evaluation() {
        let e = bin(BinOp::Add, z(0), u(0));
        assert_eq!(e.eval(&[2.0], &[3.0]), Some(5.0));
        let s = ExprTree::Unary(UnaryOp::Sin, Box::new(ExprTree::Const(0.0)));
        assert_eq!(s.eval(&[], &[]), Some(0.0));
    }

    #[test]
    fn division_by_zero_is_flagged() {
        let e = bin(BinOp::Div, ExprTree::Const(1.0), ExprTree::Const(0.0));
        assert_eq!(e.eval(&[], &[]), None);
        let tiny = bin(BinOp::Div, ExprTree::Const(1.0), ExprTree::Const(1e-13));
        assert_eq!(tiny.eval(&[], &[]), None);
    }

    #[test]
    fn product_rule() {
        let e = bin(BinOp::Mul, z(0), u(0));
        let d = e.differentiate(0, false);
        assert_eq!(d, u(0));
    }

    #[test]
    fn chain_rule_sin() {
        let e = ExprTree::Unary(UnaryOp::Sin, Box::new(z(0)));
        let d = e.differentiate(0, false);
        assert_eq!(d, ExprTree::Unary(UnaryOp::Cos, Box::new(z(0))));
    }

    fn random_tree(rng: &mut ChaCha8Rng, depth: usize) -> ExprTree {
        if depth == 0 || rng.gen_range(0..4) == 0 {
            match rng.gen_range(0..3) {
                0 => ExprTree::Const(rng.gen_range(-2.0..2.0)),
                1 => z(rng.gen_range(0..2)),
                _ => u(0),
            }
        } else if rng.gen_range(0..4) == 0 {
            let op = [UnaryOp::Exp, UnaryOp::Sin, UnaryOp::Cos][rng.gen_range(0..3)];
            ExprTree::Unary(op, Box::new(random_tree(rng, depth - 1)))
        } else {
            let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div][rng.gen_range(0..4)];
            bin(op, random_tree(rng, depth - 1), random_tree(rng, depth - 1))
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut checked = 0;
        let mut seed = 0;
        while checked < 100 {
            seed += 1;
            let mut local = ChaCha8Rng::seed_from_u64(seed);
            let e = random_tree(&mut local, 3);
            let zv = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
            let uv = [rng.gen_range(-1.0..1.0)];
            let (dz, du) = expr_jacobian(&e, 2, 1);
            let h = 1e-6;
            let mut ok = e.eval(&zv, &uv).is_some();
            for (i, d) in dz.iter().enumerate() {
                let Some(an) = d.eval(&zv, &uv) else {
                    ok = false;
                    break;
                };
                let mut zp = zv;
                let mut zm = zv;
                zp[i] += h;
                zm[i] -= h;
                let (Some(fp), Some(fm)) = (e.eval(&zp, &uv), e.eval(&zm, &uv)) else {
                    ok = false;
                    break;
                };
                let fd = (fp - fm) / (2.0 * h);
                let scale = an.abs().max(fd.abs()).max(1.0);
                // Skip ill-conditioned points (huge curvature near guards).
                if scale > 1e4 {
                    ok = false;
                    break;
                }
                assert!(
                    (an - fd).abs() / scale < 1e-6,
                    "seed {seed}: {e} d/dz{i} {an} vs {fd}"
                );
            }
            if ok {
                if let Some(an) = du[0].eval(&zv, &uv) {
                    let mut up = uv;
                    let mut um = uv;
                    up[0] += h;
                    um[0] -= h;
                    if let (Some(fp), Some(fm)) = (e.eval(&zv, &up), e.eval(&zv, &um)) {
                        let fd = (fp - fm) / (2.0 * h);
                        let scale = an.abs().max(fd.abs()).max(1.0);
                        if scale <= 1e4 {
                            assert!((an - fd).abs() / scale < 1e-6, "seed {seed}: {e} d/du");
                        }
                    }
                }
                checked += 1;
            }
        }
    }

    #[test]
    fn display_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..200u64 {
            let mut local = ChaCha8Rng::seed_from_u64(seed);
            let e = random_tree(&mut local, 3);
            let text = e.to_string();
            let back = parse_expr(&text).unwrap_or_else(|err| panic!("{text}: {err}"));
            assert_eq!(back, e, "{text}");
            let _ = &mut rng;
        }
    }

    #[test]
    fn parse_handles_precedence() {
        let e = parse_expr("z1 + u1 * 2").unwrap();
        assert_eq!(
            e,
            bin(
                BinOp::Add,
                z(0),
                bin(BinOp::Mul, u(0), ExprTree::Const(2.0))
            )
        );
    }

    #[test]
    fn constants_round_trip() {
        let e = parse_expr("(z1 * 1.5) + cos(0.25)").unwrap();
        assert_eq!(e.constants(), vec![1.5, 0.25]);
        let e2 = e.with_constants(&[2.5, 0.5]);
        assert_eq!(e2.constants(), vec![2.5, 0.5]);
        assert_eq!(e2.complexity(), e.complexity());
    }

    #[test]
    fn node_surgery() {
        let e = parse_expr("z1 + sin(u1)").unwrap();
        assert_eq!(e.complexity(), 4);
        assert_eq!(*e.node(1), z(0));
        let swapped = e.with_node(2, &ExprTree::Const(7.0));
        assert_eq!(swapped, parse_expr("z1 + 7").unwrap());
    }
}
