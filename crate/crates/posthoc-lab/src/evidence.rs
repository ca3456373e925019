//! The ordered evidence space of decisions.
//!
//! A decision is either a non-rejection (the least element) or a rejection at
//! some significance level. Rejections at smaller levels are stronger, hence
//! larger in the evidence order. The numeric representation sends
//! non-rejection to `0` and rejection at level `a` to `1/a`, which is a
//! strict order isomorphism onto `[0, inf]`.
//!
//! Levels live in `[0, inf)`: the open unit interval is where classical tests
//! operate, but the evidence space of a family supremum also needs the
//! rejects-at-every-level decision (level `0`, evidence `inf`) and rejections
//! at levels `>= 1` (evidence `<= 1`).

use std::cmp::Ordering;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::scalar::{Ext, Scalar};

/// Numeric representation of a decision: an extended real in `[0, inf]`.
pub type EvidenceValue<S> = Ext<S>;

#[derive(Debug, Clone, PartialEq)]
pub enum Decision<S> {
    NonReject,
    RejectAt(S),
}

impl<S: Scalar> Decision<S> {
    /// A rejection at `level >= 0`. Level `0` denotes a rejection at every
    /// level (infinite evidence).
    pub fn reject_at(level: S) -> Result<Self> {
        if level.is_negative() {
            return Err(Error::NegativeLevel(level.to_string()));
        }
        Ok(Decision::RejectAt(level))
    }

    /// Total order on decisions: non-rejection is least, and among rejections
    /// a smaller level is the stronger (greater) decision. Level equality is
    /// exact under rationals and tolerance-based under doubles.
    pub fn compare(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Decision::NonReject, Decision::NonReject) => Ordering::Equal,
            (Decision::NonReject, Decision::RejectAt(_)) => Ordering::Less,
            (Decision::RejectAt(_), Decision::NonReject) => Ordering::Greater,
            (Decision::RejectAt(a), Decision::RejectAt(b)) => b.cmp_eps(a),
        }
    }

    pub fn le(&self, other: &Self) -> bool {
        self.compare(other) != Ordering::Greater
    }

    /// `0` for a non-rejection, `1/level` for a rejection.
    pub fn numeric_rep(&self) -> EvidenceValue<S> {
        match self {
            Decision::NonReject => Ext::zero(),
            Decision::RejectAt(level) => {
                if level.is_zero() {
                    Ext::Infinity
                } else {
                    Ext::Finite(S::one() / level.clone())
                }
            }
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Decision::NonReject => serde_json::json!({ "kind": "nonreject" }),
            Decision::RejectAt(level) => {
                serde_json::json!({ "kind": "reject", "level": level.to_json() })
            }
        }
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        match value.get("kind").and_then(Value::as_str) {
            Some("nonreject") => Ok(Decision::NonReject),
            Some("reject") => {
                let level = value
                    .get("level")
                    .ok_or_else(|| Error::Config("decision: missing 'level'".into()))?;
                Decision::reject_at(S::parse_json(level)?)
            }
            _ => Err(Error::Config("decision: unknown 'kind'".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigRational;
    use proptest::prelude::*;

    type R = BigRational;

    fn r(n: i64, d: i64) -> R {
        R::from_ratio(n, d)
    }

    #[test]
    fn nonreject_is_least() {
        let d: Decision<R> = Decision::NonReject;
        let reject = Decision::reject_at(r(1, 2)).unwrap();
        assert_eq!(d.compare(&reject), Ordering::Less);
        assert_eq!(reject.compare(&d), Ordering::Greater);
    }

    #[test]
    fn smaller_level_is_stronger() {
        let five = Decision::reject_at(r(5, 100)).unwrap();
        let one = Decision::reject_at(r(1, 100)).unwrap();
        assert_eq!(five.compare(&one), Ordering::Less);
        assert_eq!(five.compare(&five.clone()), Ordering::Equal);
    }

    #[test]
    fn numeric_rep_values() {
        assert_eq!(Decision::<R>::NonReject.numeric_rep(), Ext::zero());
        let d = Decision::reject_at(r(1, 20)).unwrap();
        assert_eq!(d.numeric_rep(), Ext::Finite(r(20, 1)));
        let all_levels = Decision::reject_at(r(0, 1)).unwrap();
        assert_eq!(all_levels.numeric_rep(), Ext::<R>::Infinity);
    }

    #[test]
    fn negative_level_rejected() {
        assert!(Decision::reject_at(r(-1, 10)).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let d = Decision::reject_at(r(3, 10)).unwrap();
        assert_eq!(Decision::<R>::from_json(&d.to_json()).unwrap(), d);
        let n: Decision<R> = Decision::NonReject;
        assert_eq!(Decision::<R>::from_json(&n.to_json()).unwrap(), n);
    }

    proptest! {
        #[test]
        fn compare_agrees_with_numeric_rep(a in 1i64..1000, b in 1i64..1000) {
            let da = Decision::reject_at(r(a, 1000)).unwrap();
            let db = Decision::reject_at(r(b, 1000)).unwrap();
            prop_assert_eq!(da.compare(&db), da.numeric_rep().cmp_ext(&db.numeric_rep()));
            let nr: Decision<R> = Decision::NonReject;
            prop_assert_eq!(nr.compare(&da), nr.numeric_rep().cmp_ext(&da.numeric_rep()));
        }

        #[test]
        fn numeric_rep_injective_on_rejections(a in 1i64..1000, b in 1i64..1000) {
            let da = Decision::reject_at(r(a, 1000)).unwrap();
            let db = Decision::reject_at(r(b, 1000)).unwrap();
            if da.numeric_rep() == db.numeric_rep() {
                prop_assert_eq!(a, b);
            }
        }
    }
}
