//! Families of level-`a` tests and data-dependent levels.
//!
//! A family assigns a test to every significance level. Two forms are
//! supported:
//!
//! * `Threshold` — a critical-level function `kappa` per outcome; the level-`a`
//!   test rejects where `kappa <= a`. `kappa = 1` is the never-reject
//!   sentinel, `kappa = 0` rejects at every level.
//! * `CoupledField` — a randomized family that rejects, at whatever level it
//!   is queried, on a single shared latent event `A` with per-outcome
//!   conditional probability `r`. External randomization is never simulated:
//!   `r` is the law of the event with the uniform randomizer integrated out,
//!   so every probability below is exact.
//!
//! Plugging a data-dependent level into a family yields a
//! [`RandomizedDecisionProfile`]: per outcome, the plugged level and the
//! rejection probability at that outcome.

use std::sync::Arc;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::evidence::Decision;
use crate::finprob::{same_space, FiniteSpace, Partition, RandomVariable};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub enum FamilyForm<S> {
    /// Critical-level function; rejection region at level `a` is `kappa <= a`.
    Threshold { kappa: Vec<S> },
    /// Shared-event randomized family; `reject_prob` is `P(A | outcome)`.
    CoupledField { reject_prob: Vec<S> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestFamily<S> {
    space: Arc<FiniteSpace<S>>,
    form: FamilyForm<S>,
}

fn check_unit_interval<S: Scalar>(values: &[S], space: &FiniteSpace<S>) -> Result<()> {
    for (i, v) in values.iter().enumerate() {
        if v.is_negative() || v.cmp_num(&S::one()) == std::cmp::Ordering::Greater {
            return Err(Error::UnitIntervalViolation(format!(
                "{} at outcome '{}'",
                v,
                space.outcome(i)
            )));
        }
    }
    Ok(())
}

impl<S: Scalar> TestFamily<S> {
    pub fn threshold(space: &Arc<FiniteSpace<S>>, kappa: Vec<S>) -> Result<Self> {
        if kappa.len() != space.len() {
            return Err(Error::SpaceMismatch);
        }
        check_unit_interval(&kappa, space)?;
        Ok(TestFamily {
            space: Arc::clone(space),
            form: FamilyForm::Threshold { kappa },
        })
    }

    pub fn coupled(space: &Arc<FiniteSpace<S>>, reject_prob: Vec<S>) -> Result<Self> {
        if reject_prob.len() != space.len() {
            return Err(Error::SpaceMismatch);
        }
        check_unit_interval(&reject_prob, space)?;
        Ok(TestFamily {
            space: Arc::clone(space),
            form: FamilyForm::CoupledField { reject_prob },
        })
    }

    /// The family that never rejects (`kappa = 1` everywhere).
    pub fn never_reject(space: &Arc<FiniteSpace<S>>) -> Self {
        TestFamily {
            space: Arc::clone(space),
            form: FamilyForm::Threshold { kappa: vec![S::one(); space.len()] },
        }
    }

    pub fn space(&self) -> &Arc<FiniteSpace<S>> {
        &self.space
    }

    pub fn form(&self) -> &FamilyForm<S> {
        &self.form
    }

    pub fn is_threshold(&self) -> bool {
        matches!(self.form, FamilyForm::Threshold { .. })
    }

    /// Per-outcome rejection probability of the fixed-level test `phi(alpha)`.
    pub fn rejection_profile_at(&self, alpha: &S) -> Vec<S> {
        match &self.form {
            FamilyForm::Threshold { kappa } => kappa
                .iter()
                .map(|k| {
                    if k.le_eps(alpha) {
                        S::one()
                    } else {
                        S::zero()
                    }
                })
                .collect(),
            FamilyForm::CoupledField { reject_prob } => reject_prob.clone(),
        }
    }

    /// `P(phi(alpha) = d_alpha)` under the space's mass.
    pub fn rejection_probability_at(&self, alpha: &S) -> S {
        let profile = self.rejection_profile_at(alpha);
        self.space
            .positive_indices()
            .fold(S::zero(), |acc, i| acc + self.space.mass(i).clone() * profile[i].clone())
    }

    /// Classical validity at a fixed level: `P(phi(alpha) = d_alpha) <= alpha`.
    pub fn classical_validity(&self, alpha: &S) -> Result<ClassicalValidity<S>> {
        check_level_open_unit(alpha)?;
        let rejection_probability = self.rejection_probability_at(alpha);
        let pass = rejection_probability.le_eps(alpha);
        let margin = alpha.clone() - rejection_probability.clone();
        Ok(ClassicalValidity { pass, rejection_probability, margin })
    }

    /// Plugs a data-dependent level into the family.
    pub fn evaluate(&self, levels: &DataDependentLevel<S>) -> Result<RandomizedDecisionProfile<S>> {
        same_space(&self.space, &levels.space)?;
        let entries = (0..self.space.len())
            .map(|i| {
                let level = levels.levels[i].clone();
                let reject_prob = match &self.form {
                    FamilyForm::Threshold { kappa } => {
                        if kappa[i].le_eps(&level) {
                            S::one()
                        } else {
                            S::zero()
                        }
                    }
                    FamilyForm::CoupledField { reject_prob } => reject_prob[i].clone(),
                };
                ProfileEntry { level, reject_prob }
            })
            .collect();
        Ok(RandomizedDecisionProfile { space: Arc::clone(&self.space), entries })
    }

    /// Whether plugging `at1` yields pointwise weaker-or-equal decisions than
    /// plugging `at2`, i.e. `phi(at1)(x) <= phi(at2)(x)` at every outcome.
    ///
    /// For the coupled randomized form the comparison is taken under the
    /// shared event: it holds iff `at1 >= at2` wherever the rejection
    /// probability is positive.
    pub fn dominates(
        &self,
        at1: &DataDependentLevel<S>,
        at2: &DataDependentLevel<S>,
    ) -> Result<bool> {
        same_space(&self.space, &at1.space)?;
        same_space(&self.space, &at2.space)?;
        match &self.form {
            FamilyForm::Threshold { kappa } => {
                for i in 0..self.space.len() {
                    let d1 = threshold_decision(&kappa[i], &at1.levels[i])?;
                    let d2 = threshold_decision(&kappa[i], &at2.levels[i])?;
                    if !d1.le(&d2) {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            FamilyForm::CoupledField { reject_prob } => {
                for i in 0..self.space.len() {
                    if !reject_prob[i].is_zero() && !at1.levels[i].ge_eps(&at2.levels[i]) {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }

    pub fn to_json(&self) -> Value {
        let values = |vs: &[S]| -> serde_json::Map<String, Value> {
            self.space
                .outcomes()
                .iter()
                .zip(vs)
                .map(|(o, v)| (o.clone(), v.to_json()))
                .collect()
        };
        match &self.form {
            FamilyForm::Threshold { kappa } => {
                serde_json::json!({ "form": "threshold", "kappa": values(kappa) })
            }
            FamilyForm::CoupledField { reject_prob } => {
                serde_json::json!({ "form": "coupled", "r": values(reject_prob) })
            }
        }
    }

    pub fn from_json(space: &Arc<FiniteSpace<S>>, value: &Value) -> Result<Self> {
        let form = value
            .get("form")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Config("family: missing 'form'".into()))?;
        let field = match form {
            "threshold" => "kappa",
            "coupled" => "r",
            other => return Err(Error::Config(format!("family: unknown form '{other}'"))),
        };
        let map = value
            .get(field)
            .and_then(Value::as_object)
            .ok_or_else(|| Error::Config(format!("family: missing '{field}' object")))?;
        let mut values = Vec::with_capacity(space.len());
        for name in space.outcomes() {
            let v = map
                .get(name)
                .ok_or_else(|| Error::Config(format!("family: no value for outcome '{name}'")))?;
            values.push(S::parse_json(v)?);
        }
        match form {
            "threshold" => Self::threshold(space, values),
            _ => Self::coupled(space, values),
        }
    }
}

fn threshold_decision<S: Scalar>(kappa: &S, level: &S) -> Result<Decision<S>> {
    if kappa.le_eps(level) {
        Decision::reject_at(level.clone())
    } else {
        Ok(Decision::NonReject)
    }
}

fn check_level_open_unit<S: Scalar>(level: &S) -> Result<()> {
    let in_range = level.cmp_num(&S::zero()) == std::cmp::Ordering::Greater
        && level.cmp_num(&S::one()) == std::cmp::Ordering::Less;
    if in_range {
        Ok(())
    } else {
        Err(Error::LevelOutOfRange(level.to_string()))
    }
}

/// Outcome of a classical fixed-level validity check, with the margin
/// `alpha - P(reject)`.
#[derive(Debug, Clone)]
pub struct ClassicalValidity<S> {
    pub pass: bool,
    pub rejection_probability: S,
    pub margin: S,
}

/// A map from outcomes to significance levels in the open unit interval.
#[derive(Debug, Clone, PartialEq)]
pub struct DataDependentLevel<S> {
    space: Arc<FiniteSpace<S>>,
    levels: Vec<S>,
}

impl<S: Scalar> DataDependentLevel<S> {
    pub fn new(space: &Arc<FiniteSpace<S>>, levels: Vec<S>) -> Result<Self> {
        if levels.len() != space.len() {
            return Err(Error::SpaceMismatch);
        }
        for level in &levels {
            check_level_open_unit(level)?;
        }
        Ok(DataDependentLevel { space: Arc::clone(space), levels })
    }

    pub fn constant(space: &Arc<FiniteSpace<S>>, level: S) -> Result<Self> {
        check_level_open_unit(&level)?;
        Ok(DataDependentLevel {
            space: Arc::clone(space),
            levels: vec![level; space.len()],
        })
    }

    pub fn space(&self) -> &Arc<FiniteSpace<S>> {
        &self.space
    }

    pub fn levels(&self) -> &[S] {
        &self.levels
    }

    pub fn level(&self, index: usize) -> &S {
        &self.levels[index]
    }

    /// The sigma-algebra generated by the level, as a partition: cells are
    /// preimages of distinct level values, ordered by ascending level.
    pub fn conditioning_partition(&self) -> Partition<S> {
        let mut order: Vec<usize> = (0..self.levels.len()).collect();
        order.sort_by(|&a, &b| self.levels[a].cmp_num(&self.levels[b]).then(a.cmp(&b)));
        let mut cells: Vec<Vec<usize>> = Vec::new();
        let mut rep: Option<&S> = None;
        for i in order {
            match rep {
                Some(level) if level.approx_eq(&self.levels[i]) => {
                    cells.last_mut().expect("cell exists").push(i);
                }
                _ => {
                    cells.push(vec![i]);
                    rep = Some(&self.levels[i]);
                }
            }
        }
        for cell in &mut cells {
            cell.sort_unstable();
        }
        Partition::new(&self.space, cells).expect("preimage cells partition the space")
    }

    /// Expected level `E[alpha~]`.
    pub fn mean(&self) -> S {
        self.space
            .positive_indices()
            .fold(S::zero(), |acc, i| acc + self.space.mass(i).clone() * self.levels[i].clone())
    }

    pub fn to_json(&self) -> Value {
        let map: serde_json::Map<String, Value> = self
            .space
            .outcomes()
            .iter()
            .zip(&self.levels)
            .map(|(o, v)| (o.clone(), v.to_json()))
            .collect();
        Value::Object(map)
    }

    pub fn from_json(space: &Arc<FiniteSpace<S>>, value: &Value) -> Result<Self> {
        match value {
            Value::Object(map) => {
                let mut levels = Vec::with_capacity(space.len());
                for name in space.outcomes() {
                    let v = map.get(name).ok_or_else(|| {
                        Error::Config(format!("levels: no value for outcome '{name}'"))
                    })?;
                    levels.push(S::parse_json(v)?);
                }
                Self::new(space, levels)
            }
            other => Self::constant(space, S::parse_json(other)?),
        }
    }
}

/// Per-outcome law of `phi(alpha~)`: the plugged level and the probability of
/// rejecting at it, with the external randomizer integrated out.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedDecisionProfile<S> {
    space: Arc<FiniteSpace<S>>,
    entries: Vec<ProfileEntry<S>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileEntry<S> {
    pub level: S,
    pub reject_prob: S,
}

impl<S: Scalar> RandomizedDecisionProfile<S> {
    pub fn space(&self) -> &Arc<FiniteSpace<S>> {
        &self.space
    }

    pub fn entries(&self) -> &[ProfileEntry<S>] {
        &self.entries
    }

    pub fn reject_prob_rv(&self) -> RandomVariable<S> {
        RandomVariable::from_finite(
            &self.space,
            self.entries.iter().map(|e| e.reject_prob.clone()).collect(),
        )
        .expect("profile is total on the space")
    }

    /// Unconditional rejection probability `P(phi(alpha~) rejects)`.
    pub fn rejection_probability(&self) -> S {
        self.space.positive_indices().fold(S::zero(), |acc, i| {
            acc + self.space.mass(i).clone() * self.entries[i].reject_prob.clone()
        })
    }

    /// Probability of a decision at least as strong as a rejection at level
    /// `a`: rejection happened and the plugged level was `<= a`.
    pub fn exceedance_probability(&self, a: &S) -> S {
        self.space.positive_indices().fold(S::zero(), |acc, i| {
            if self.entries[i].level.le_eps(a) {
                acc + self.space.mass(i).clone() * self.entries[i].reject_prob.clone()
            } else {
                acc
            }
        })
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

    /// Uniform grid of p-values: outcome i (1-based) has kappa = i/n.
    fn pvalue_family(n: usize) -> (Arc<FiniteSpace<R>>, TestFamily<R>) {
        let space = FiniteSpace::uniform(n).unwrap();
        let kappa = (1..=n).map(|i| r(i as i64, n as i64)).collect();
        let family = TestFamily::threshold(&space, kappa).unwrap();
        (space, family)
    }

    #[test]
    fn evaluate_threshold_on_uniform_grid() {
        let (space, family) = pvalue_family(100);
        let dl = DataDependentLevel::constant(&space, r(5, 100)).unwrap();
        let profile = family.evaluate(&dl).unwrap();
        let rejected: usize = profile
            .entries()
            .iter()
            .filter(|e| e.reject_prob.is_one())
            .count();
        assert_eq!(rejected, 5);
        for (i, e) in profile.entries().iter().enumerate() {
            let expect = i < 5;
            assert_eq!(e.reject_prob.is_one(), expect);
        }
    }

    #[test]
    fn evaluate_coupled_is_level_free() {
        let space = FiniteSpace::uniform(4).unwrap();
        let p = r(3, 10);
        let family = TestFamily::coupled(&space, vec![p.clone(); 4]).unwrap();
        let dl = DataDependentLevel::new(
            &space,
            vec![r(1, 10), r(2, 10), r(3, 10), r(9, 10)],
        )
        .unwrap();
        let profile = family.evaluate(&dl).unwrap();
        for e in profile.entries() {
            assert_eq!(e.reject_prob, p);
        }
    }

    #[test]
    fn evaluate_mixed_thresholds() {
        let space = FiniteSpace::new(vec![
            ("x1".into(), r(1, 2)),
            ("x2".into(), r(1, 2)),
        ])
        .unwrap();
        let family = TestFamily::threshold(&space, vec![r(2, 100), r(1, 2)]).unwrap();
        let dl = DataDependentLevel::new(&space, vec![r(1, 100), r(6, 10)]).unwrap();
        let profile = family.evaluate(&dl).unwrap();
        assert_eq!(profile.entries()[0].reject_prob, r(0, 1));
        assert_eq!(profile.entries()[0].level, r(1, 100));
        assert_eq!(profile.entries()[1].reject_prob, r(1, 1));
        assert_eq!(profile.entries()[1].level, r(6, 10));
    }

    #[test]
    fn classical_validity_uniform_pvalues_margin_zero() {
        let (_, family) = pvalue_family(100);
        for k in 1..100 {
            let v = family.classical_validity(&r(k, 100)).unwrap();
            assert!(v.pass);
            assert_eq!(v.margin, r(0, 1));
        }
    }

    #[test]
    fn classical_validity_overshooting_coupled_family_fails() {
        let space = FiniteSpace::uniform(2).unwrap();
        let family = TestFamily::coupled(&space, vec![r(1, 10), r(1, 10)]).unwrap();
        let v = family.classical_validity(&r(5, 100)).unwrap();
        assert!(!v.pass);
        assert_eq!(v.margin, r(-5, 100));
    }

    #[test]
    fn classical_validity_never_reject_passes() {
        let space = FiniteSpace::uniform(3).unwrap();
        let family = TestFamily::never_reject(&space);
        for k in [1i64, 37, 99] {
            assert!(family.classical_validity(&r(k, 100)).unwrap().pass);
        }
    }

    #[test]
    fn conditioning_partition_groups_preimages() {
        let space = FiniteSpace::uniform(3).unwrap();
        let dl = DataDependentLevel::new(&space, vec![r(1, 10), r(2, 10), r(1, 10)]).unwrap();
        let pi = dl.conditioning_partition();
        assert_eq!(pi.cells(), &[vec![0, 2], vec![1]]);

        let constant = DataDependentLevel::constant(&space, r(1, 10)).unwrap();
        assert_eq!(constant.conditioning_partition().cells().len(), 1);

        let injective =
            DataDependentLevel::new(&space, vec![r(1, 10), r(2, 10), r(3, 10)]).unwrap();
        assert_eq!(injective.conditioning_partition().cells().len(), 3);
    }

    #[test]
    fn levels_must_be_strictly_interior() {
        let space = FiniteSpace::uniform(2).unwrap();
        assert!(DataDependentLevel::new(&space, vec![r(0, 1), r(1, 2)]).is_err());
        assert!(DataDependentLevel::new(&space, vec![r(1, 2), r(1, 1)]).is_err());
        assert!(DataDependentLevel::new(&space, vec![r(1, 2), r(6, 10)]).is_ok());
    }

    #[test]
    fn dominates_conservative_bump() {
        // Raising the level on the rejection region weakens the decision.
        let (space, family) = pvalue_family(100);
        let base = DataDependentLevel::constant(&space, r(1, 100)).unwrap();
        let bumped = DataDependentLevel::new(
            &space,
            (1..=100)
                .map(|i| if i <= 1 { r(2, 100) } else { r(1, 100) })
                .collect(),
        )
        .unwrap();
        assert!(family.dominates(&bumped, &base).unwrap());
        assert!(!family.dominates(&base, &bumped).unwrap());
    }

    #[test]
    fn dominates_is_reflexive() {
        let (space, family) = pvalue_family(10);
        let dl = DataDependentLevel::constant(&space, r(3, 10)).unwrap();
        assert!(family.dominates(&dl, &dl).unwrap());
    }

    #[test]
    fn dominates_fails_on_strengthened_rejection() {
        let space = FiniteSpace::uniform(1).unwrap();
        let family = TestFamily::threshold(&space, vec![r(1, 100)]).unwrap();
        let weak = DataDependentLevel::constant(&space, r(5, 100)).unwrap();
        let strong = DataDependentLevel::constant(&space, r(2, 100)).unwrap();
        // strong rejects at a smaller level: phi(strong) > phi(weak)
        assert!(!family.dominates(&strong, &weak).unwrap());
    }

    #[test]
    fn coupled_dominance_ignores_zero_probability_outcomes() {
        let space = FiniteSpace::uniform(2).unwrap();
        let family = TestFamily::coupled(&space, vec![r(0, 1), r(1, 2)]).unwrap();
        let at1 = DataDependentLevel::new(&space, vec![r(1, 100), r(5, 10)]).unwrap();
        let at2 = DataDependentLevel::new(&space, vec![r(9, 10), r(5, 10)]).unwrap();
        // at1 < at2 only where r = 0, so dominance still holds.
        assert!(family.dominates(&at1, &at2).unwrap());
    }

    #[test]
    fn family_json_roundtrip() {
        let space = FiniteSpace::uniform(3).unwrap();
        let family =
            TestFamily::threshold(&space, vec![r(1, 10), r(1, 2), r(1, 1)]).unwrap();
        let back = TestFamily::from_json(&space, &family.to_json()).unwrap();
        assert_eq!(back, family);
        let coupled = TestFamily::coupled(&space, vec![r(0, 1), r(1, 4), r(1, 1)]).unwrap();
        let back = TestFamily::from_json(&space, &coupled.to_json()).unwrap();
        assert_eq!(back, coupled);
    }

    #[test]
    fn exceedance_probability_counts_strong_rejections() {
        let space = FiniteSpace::new(vec![
            ("x1".into(), r(3, 10)),
            ("x2".into(), r(7, 10)),
        ])
        .unwrap();
        let family = TestFamily::threshold(&space, vec![r(5, 100), r(1, 1)]).unwrap();
        let dl = DataDependentLevel::new(&space, vec![r(1, 10), r(99, 100)]).unwrap();
        let profile = family.evaluate(&dl).unwrap();
        assert_eq!(profile.exceedance_probability(&r(1, 10)), r(3, 10));
        assert_eq!(profile.exceedance_probability(&r(5, 100)), r(0, 1));
        assert_eq!(profile.rejection_probability(), r(3, 10));
    }

    fn level_strategy(n: usize) -> impl Strategy<Value = Vec<R>> {
        proptest::collection::vec(1i64..100, n)
            .prop_map(|ks| ks.into_iter().map(|k| r(k, 100)).collect())
    }

    proptest! {
        #[test]
        fn threshold_families_are_monotone_in_level(
            kappas in proptest::collection::vec(0i64..=100, 5),
            a1 in 1i64..100,
            a2 in 1i64..100,
        ) {
            let space = FiniteSpace::uniform(5).unwrap();
            let kappa: Vec<R> = kappas.into_iter().map(|k| r(k, 100)).collect();
            let family = TestFamily::threshold(&space, kappa).unwrap();
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            let lo_profile = family.rejection_profile_at(&r(lo, 100));
            let hi_profile = family.rejection_profile_at(&r(hi, 100));
            for (l, h) in lo_profile.iter().zip(&hi_profile) {
                prop_assert!(l.le_eps(h));
            }
        }

        #[test]
        fn raising_the_level_weakens_decisions_pointwise(
            kappas in proptest::collection::vec(0i64..=100, 4),
            base in level_strategy(4),
            bump in proptest::collection::vec(0i64..20, 4),
        ) {
            let space = FiniteSpace::uniform(4).unwrap();
            let kappa: Vec<R> = kappas.into_iter().map(|k| r(k, 100)).collect();
            let family = TestFamily::threshold(&space, kappa).unwrap();
            let raised: Vec<R> = base.iter().zip(&bump).map(|(b, &d)| {
                let candidate = b.clone() + r(d, 1000);
                if candidate.cmp_num(&r(99, 100)) == std::cmp::Ordering::Greater {
                    b.clone()
                } else {
                    candidate
                }
            }).collect();
            let at_base = DataDependentLevel::new(&space, base).unwrap();
            let at_raised = DataDependentLevel::new(&space, raised).unwrap();
            prop_assert!(family.dominates(&at_raised, &at_base).unwrap());
        }

        #[test]
        fn dominates_is_transitive(
            kappas in proptest::collection::vec(0i64..=100, 3),
            l1 in level_strategy(3),
            l2 in level_strategy(3),
            l3 in level_strategy(3),
        ) {
            let space = FiniteSpace::uniform(3).unwrap();
            let kappa: Vec<R> = kappas.into_iter().map(|k| r(k, 100)).collect();
            let family = TestFamily::threshold(&space, kappa).unwrap();
            let a = DataDependentLevel::new(&space, l1).unwrap();
            let b = DataDependentLevel::new(&space, l2).unwrap();
            let c = DataDependentLevel::new(&space, l3).unwrap();
            if family.dominates(&a, &b).unwrap() && family.dominates(&b, &c).unwrap() {
                prop_assert!(family.dominates(&a, &c).unwrap());
            }
        }
    }
}
