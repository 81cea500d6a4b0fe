//! STL formula trees, negation normal form, and horizons.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stl::expr::Expr;

/// Closed time interval `[a, b]` in seconds with `0 <= a <= b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(0.0 <= a && a <= b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidInterval { a, b });
        }
        Ok(Self { a, b })
    }
}

/// An atomic predicate in canonical form `expr > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub expr: Expr,
}

impl Predicate {
    pub fn new(expr: Expr) -> Self {
        Self { expr }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StlFormula {
    Pred(Predicate),
    NegPred(Predicate),
    /// General negation; removed by [`StlFormula::to_nnf`].
    Not(Box<StlFormula>),
    And(Vec<StlFormula>),
    Or(Vec<StlFormula>),
    Globally(Interval, Box<StlFormula>),
    Finally(Interval, Box<StlFormula>),
    Until(Interval, Box<StlFormula>, Box<StlFormula>),
}

impl StlFormula {
    pub fn negated(self) -> StlFormula {
        StlFormula::Not(Box::new(self))
    }

    /// Pushes negation down to predicates. The until operator has no dual in
    /// this fragment, so a negation directly above it is rejected.
    pub fn to_nnf(&self) -> Result<StlFormula> {
        self.nnf(false)
    }

    fn nnf(&self, negate: bool) -> Result<StlFormula> {
        Ok(match self {
            StlFormula::Pred(p) => {
                if negate {
                    StlFormula::NegPred(p.clone())
                } else {
                    StlFormula::Pred(p.clone())
                }
            }
            StlFormula::NegPred(p) => {
                if negate {
                    StlFormula::Pred(p.clone())
                } else {
                    StlFormula::NegPred(p.clone())
                }
            }
            StlFormula::Not(f) => f.nnf(!negate)?,
            StlFormula::And(fs) => {
                let children = fs.iter().map(|f| f.nnf(negate)).collect::<Result<_>>()?;
                if negate {
                    StlFormula::Or(children)
                } else {
                    StlFormula::And(children)
                }
            }
            StlFormula::Or(fs) => {
                let children = fs.iter().map(|f| f.nnf(negate)).collect::<Result<_>>()?;
                if negate {
                    StlFormula::And(children)
                } else {
                    StlFormula::Or(children)
                }
            }
            StlFormula::Globally(iv, f) => {
                let child = Box::new(f.nnf(negate)?);
                if negate {
                    StlFormula::Finally(*iv, child)
                } else {
                    StlFormula::Globally(*iv, child)
                }
            }
            StlFormula::Finally(iv, f) => {
                let child = Box::new(f.nnf(negate)?);
                if negate {
                    StlFormula::Globally(*iv, child)
                } else {
                    StlFormula::Finally(*iv, child)
                }
            }
            StlFormula::Until(iv, l, r) => {
                if negate {
                    return Err(Error::UnsupportedNegation);
                }
                StlFormula::Until(*iv, Box::new(l.nnf(false)?), Box::new(r.nnf(false)?))
            }
        })
    }

    /// Maximum nested sum of upper interval bounds, in seconds.
    pub fn horizon(&self) -> f64 {
        match self {
            StlFormula::Pred(_) | StlFormula::NegPred(_) => 0.0,
            StlFormula::Not(f) => f.horizon(),
            StlFormula::And(fs) | StlFormula::Or(fs) => {
                fs.iter().map(|f| f.horizon()).fold(0.0, f64::max)
            }
            StlFormula::Globally(iv, f) | StlFormula::Finally(iv, f) => iv.b + f.horizon(),
            StlFormula::Until(iv, l, r) => iv.b + l.horizon().max(r.horizon()),
        }
    }

    /// All channel names referenced by predicates.
    pub fn channels(&self) -> Vec<String> {
        fn walk(f: &StlFormula, out: &mut Vec<String>) {
            match f {
                StlFormula::Pred(p) | StlFormula::NegPred(p) => p.expr.channels(out),
                StlFormula::Not(f) => walk(f, out),
                StlFormula::And(fs) | StlFormula::Or(fs) => {
                    fs.iter().for_each(|f| walk(f, out))
                }
                StlFormula::Globally(_, f) | StlFormula::Finally(_, f) => walk(f, out),
                StlFormula::Until(_, l, r) => {
                    walk(l, out);
                    walk(r, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    /// True once negation appears only directly above predicates.
    pub fn is_nnf(&self) -> bool {
        match self {
            StlFormula::Pred(_) | StlFormula::NegPred(_) => true,
            StlFormula::Not(_) => false,
            StlFormula::And(fs) | StlFormula::Or(fs) => fs.iter().all(|f| f.is_nnf()),
            StlFormula::Globally(_, f) | StlFormula::Finally(_, f) => f.is_nnf(),
            StlFormula::Until(_, l, r) => l.is_nnf() && r.is_nnf(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(name: &str) -> StlFormula {
        StlFormula::Pred(Predicate::new(Expr::Chan(name.into())))
    }

    #[test]
    fn de_morgan() {
        let f = StlFormula::And(vec![pred("p"), pred("q")]).negated();
        let nnf = f.to_nnf().unwrap();
        match nnf {
            StlFormula::Or(fs) => {
                assert!(matches!(fs[0], StlFormula::NegPred(_)));
                assert!(matches!(fs[1], StlFormula::NegPred(_)));
            }
            other => panic!("expected Or, got {other:?}"),
        }
    }

    #[test]
    fn globally_duality() {
        let iv = Interval::new(1.0, 2.0).unwrap();
        let f = StlFormula::Globally(iv, Box::new(pred("p"))).negated();
        let nnf = f.to_nnf().unwrap();
        match nnf {
            StlFormula::Finally(got, inner) => {
                assert_eq!(got, iv);
                assert!(matches!(*inner, StlFormula::NegPred(_)));
            }
            other => panic!("expected Finally, got {other:?}"),
        }
    }

    #[test]
    fn double_negation() {
        let f = pred("p").negated().negated();
        assert_eq!(f.to_nnf().unwrap(), pred("p"));
    }

    #[test]
    fn negated_until_is_rejected() {
        let iv = Interval::new(0.0, 1.0).unwrap();
        let f = StlFormula::Until(iv, Box::new(pred("p")), Box::new(pred("q"))).negated();
        assert!(matches!(f.to_nnf(), Err(Error::UnsupportedNegation)));
    }

    #[test]
    fn nested_horizon() {
        let f = StlFormula::Globally(
            Interval::new(1.0, 37.0).unwrap(),
            Box::new(StlFormula::Finally(
                Interval::new(0.0, 2.0).unwrap(),
                Box::new(StlFormula::Globally(
                    Interval::new(0.0, 1.0).unwrap(),
                    Box::new(pred("p")),
                )),
            )),
        );
        assert_eq!(f.horizon(), 40.0);
        assert_eq!(pred("p").horizon(), 0.0);
    }

    #[test]
    fn horizon_max_over_conjuncts() {
        let f = StlFormula::And(vec![
            StlFormula::Finally(Interval::new(0.0, 1.0).unwrap(), Box::new(pred("p"))),
            StlFormula::Globally(Interval::new(2.0, 3.0).unwrap(), Box::new(pred("p"))),
        ]);
        assert_eq!(f.horizon(), 3.0);
    }

    #[test]
    fn interval_validation() {
        assert!(Interval::new(2.0, 1.0).is_err());
        assert!(Interval::new(-1.0, 1.0).is_err());
    }
}
