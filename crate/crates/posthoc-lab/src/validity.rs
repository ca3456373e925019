//! Loss functions, certainty equivalents, and candidate validity notions.
//!
//! A validity notion scores the conditional loss profile
//! `E[L(phi(alpha~)) | alpha~]` with a certainty equivalent `rho` and passes
//! when the score is at most the loss threshold `C`. Specializations:
//!
//! * `rho = expectation`, canonical loss — the expected distortion ratio
//!   bound, the notion the axioms single out;
//! * `rho = esssup`, canonical loss — strong conditional validity, the
//!   per-realization bound `P(reject | alpha~) <= alpha~`;
//! * the mean-level comparator `P(reject) <= E[alpha~]`, kept only to show it
//!   does not preserve classical validity.
//!
//! The menu of certainty equivalents is fixed to expectation, essential
//! supremum, integer power means and quantiles: a falsifiable finite slice of
//! the space the pinning result quantifies over.

use serde_json::Value;

use crate::error::{Error, Result};
use crate::finprob::RandomVariable;
use crate::scalar::{powi, Ext, Scalar};
use crate::testfam::{DataDependentLevel, TestFamily};

/// Loss of the rejection decisions, as a function of the level.
#[derive(Debug, Clone, PartialEq)]
pub enum RejectLoss<S> {
    /// Normalized loss `scale / alpha`, embedded as
    /// `L(d_a) = L(0) + (C - L(0)) * scale / a`. `scale = 1` is canonical.
    ScaledInverse { scale: S },
    /// Explicit `(level, loss)` pairs; evaluation outside the table errors.
    Table(Vec<(S, S)>),
}

/// Increasing loss on the decision space together with the validity
/// threshold `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossFunction<S> {
    nonreject: S,
    threshold: S,
    reject: RejectLoss<S>,
}

impl<S: Scalar> LossFunction<S> {
    /// The canonical normalized loss: `L(0) = 0`, `C = 1`, `L(d_a) = 1/a`.
    pub fn canonical() -> Self {
        LossFunction {
            nonreject: S::zero(),
            threshold: S::one(),
            reject: RejectLoss::ScaledInverse { scale: S::one() },
        }
    }

    /// Normalized-form loss `L(d_a) = scale / a` with `L(0) = 0`, `C = 1`.
    pub fn scaled_inverse(scale: S) -> Result<Self> {
        if !scale.is_positive() {
            return Err(Error::NonMonotoneLoss(format!(
                "inverse-level scale {scale} must be positive"
            )));
        }
        Ok(LossFunction {
            nonreject: S::zero(),
            threshold: S::one(),
            reject: RejectLoss::ScaledInverse { scale },
        })
    }

    /// General loss with explicit rejection losses per level.
    ///
    /// Monotonicity in the decision order is enforced: every tabulated loss
    /// is at least `nonreject`, and smaller levels carry larger losses.
    pub fn table(nonreject: S, threshold: S, mut pairs: Vec<(S, S)>) -> Result<Self> {
        pairs.sort_by(|a, b| a.0.cmp_num(&b.0));
        for window in pairs.windows(2) {
            if window[0].0.approx_eq(&window[1].0) {
                return Err(Error::NonMonotoneLoss(format!(
                    "duplicate level {}",
                    window[0].0
                )));
            }
            // Ascending levels must carry descending losses.
            if window[0].1.cmp_eps(&window[1].1) == std::cmp::Ordering::Less {
                return Err(Error::NonMonotoneLoss(format!(
                    "loss increases from level {} to {}",
                    window[0].0, window[1].0
                )));
            }
        }
        for (level, loss) in &pairs {
            if loss.cmp_eps(&nonreject) == std::cmp::Ordering::Less {
                return Err(Error::NonMonotoneLoss(format!(
                    "loss at level {level} is below the non-rejection loss"
                )));
            }
        }
        Ok(LossFunction { nonreject, threshold, reject: RejectLoss::Table(pairs) })
    }

    pub fn with_scaled_inverse(nonreject: S, threshold: S, scale: S) -> Result<Self> {
        if !scale.is_positive() {
            return Err(Error::NonMonotoneLoss("scale must be positive".into()));
        }
        Ok(LossFunction { nonreject, threshold, reject: RejectLoss::ScaledInverse { scale } })
    }

    pub fn at_nonreject(&self) -> &S {
        &self.nonreject
    }

    pub fn threshold(&self) -> &S {
        &self.threshold
    }

    pub fn reject_loss(&self) -> &RejectLoss<S> {
        &self.reject
    }

    /// `L(d_level)`.
    pub fn at_reject(&self, level: &S) -> Result<S> {
        match &self.reject {
            RejectLoss::ScaledInverse { scale } => {
                let spread = self.threshold.clone() - self.nonreject.clone();
                Ok(self.nonreject.clone() + spread * scale.clone() / level.clone())
            }
            RejectLoss::Table(pairs) => pairs
                .iter()
                .find(|(l, _)| l.approx_eq(level))
                .map(|(_, v)| v.clone())
                .ok_or_else(|| Error::LossNotTabulated(level.to_string())),
        }
    }

    /// Positive affine transform `(aL + b, aC + b)`; leaves expected-loss
    /// validity unchanged.
    pub fn affine(&self, a: &S, b: &S) -> Result<Self> {
        if !a.is_positive() {
            return Err(Error::NonMonotoneLoss("affine slope must be positive".into()));
        }
        let map = |v: &S| a.clone() * v.clone() + b.clone();
        let reject = match &self.reject {
            RejectLoss::ScaledInverse { scale } => RejectLoss::ScaledInverse { scale: scale.clone() },
            RejectLoss::Table(pairs) => {
                RejectLoss::Table(pairs.iter().map(|(l, v)| (l.clone(), map(v))).collect())
            }
        };
        Ok(LossFunction {
            nonreject: map(&self.nonreject),
            threshold: map(&self.threshold),
            reject,
        })
    }

    /// Canonical representative `(L - L(0)) / (C - L(0))` with threshold 1.
    pub fn normalize(&self) -> Result<NormalizedLoss<S>> {
        let spread = self.threshold.clone() - self.nonreject.clone();
        if !spread.is_positive() {
            return Err(Error::InvalidThreshold);
        }
        let reject = match &self.reject {
            RejectLoss::ScaledInverse { scale } => RejectLoss::ScaledInverse { scale: scale.clone() },
            RejectLoss::Table(pairs) => RejectLoss::Table(
                pairs
                    .iter()
                    .map(|(l, v)| {
                        (l.clone(), (v.clone() - self.nonreject.clone()) / spread.clone())
                    })
                    .collect(),
            ),
        };
        Ok(NormalizedLoss { reject })
    }

    pub fn to_json(&self) -> Value {
        match &self.reject {
            RejectLoss::ScaledInverse { scale } if scale.is_one()
                && self.nonreject.is_zero()
                && self.threshold.is_one() =>
            {
                serde_json::json!({ "canonical": true })
            }
            RejectLoss::ScaledInverse { scale } => serde_json::json!({
                "L0": self.nonreject.to_json(),
                "C": self.threshold.to_json(),
                "scale": scale.to_json(),
            }),
            RejectLoss::Table(pairs) => {
                let table: Vec<Value> = pairs
                    .iter()
                    .map(|(l, v)| Value::Array(vec![l.to_json(), v.to_json()]))
                    .collect();
                serde_json::json!({
                    "L0": self.nonreject.to_json(),
                    "C": self.threshold.to_json(),
                    "Lreject": table,
                })
            }
        }
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        if value.get("canonical").and_then(Value::as_bool) == Some(true) {
            return Ok(Self::canonical());
        }
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Config("loss: expected an object".into()))?;
        let nonreject = obj
            .get("L0")
            .map(S::parse_json)
            .transpose()?
            .unwrap_or_else(S::zero);
        let threshold = obj
            .get("C")
            .map(S::parse_json)
            .transpose()?
            .unwrap_or_else(S::one);
        if let Some(scale) = obj.get("scale") {
            return Self::with_scaled_inverse(nonreject, threshold, S::parse_json(scale)?);
        }
        let table = obj
            .get("Lreject")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Config("loss: expected 'scale' or 'Lreject'".into()))?;
        let mut pairs = Vec::with_capacity(table.len());
        for entry in table {
            let pair = entry
                .as_array()
                .filter(|a| a.len() == 2)
                .ok_or_else(|| Error::Config("loss: 'Lreject' entries are [level, value]".into()))?;
            pairs.push((S::parse_json(&pair[0])?, S::parse_json(&pair[1])?));
        }
        Self::table(nonreject, threshold, pairs)
    }
}

/// A loss in canonical position: `L(0) = 0`, threshold 1.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedLoss<S> {
    reject: RejectLoss<S>,
}

impl<S: Scalar> NormalizedLoss<S> {
    pub fn at_reject(&self, level: &S) -> Result<S> {
        self.as_loss_function().at_reject(level)
    }

    /// Whether this is the canonical instance `L(d_a) = 1/a`.
    pub fn is_canonical(&self) -> bool {
        match &self.reject {
            RejectLoss::ScaledInverse { scale } => scale.is_one(),
            RejectLoss::Table(pairs) => pairs
                .iter()
                .all(|(l, v)| (l.clone() * v.clone()).approx_eq(&S::one())),
        }
    }

    pub fn as_loss_function(&self) -> LossFunction<S> {
        LossFunction {
            nonreject: S::zero(),
            threshold: S::one(),
            reject: self.reject.clone(),
        }
    }
}

/// Functionals on nonnegative random variables that fix constants.
///
/// These are the candidate aggregators a validity notion may use on the
/// conditional loss profile. `continuous_from_below` is a static
/// documentation flag carried into audit reports, not an audited property.
#[derive(Debug, Clone, PartialEq)]
pub enum CertaintyEquivalent<S> {
    Expectation,
    EssSup,
    PowerMean { q: u32 },
    Quantile { tau: S },
}

impl<S: Scalar> CertaintyEquivalent<S> {
    pub fn power_mean(q: u32) -> Result<Self> {
        if q < 1 {
            return Err(Error::InvalidPowerMeanExponent(q));
        }
        Ok(CertaintyEquivalent::PowerMean { q })
    }

    pub fn quantile(tau: S) -> Result<Self> {
        let interior = tau.is_positive() && tau.cmp_num(&S::one()) == std::cmp::Ordering::Less;
        if !interior {
            return Err(Error::QuantileOrderOutOfRange(tau.to_string()));
        }
        Ok(CertaintyEquivalent::Quantile { tau })
    }

    /// The score `rho(X)`.
    ///
    /// Exact except for one corner: a power mean of a non-constant profile
    /// whose root is irrational is reported as a floating approximation under
    /// the rational backend. Verdicts never go through that corner — see
    /// [`CertaintyEquivalent::passes`].
    pub fn score(&self, x: &RandomVariable<S>) -> Result<Ext<S>> {
        match self {
            CertaintyEquivalent::Expectation => Ok(x.expectation()),
            CertaintyEquivalent::EssSup => Ok(x.esssup()),
            CertaintyEquivalent::PowerMean { q } => {
                if *q == 1 {
                    return Ok(x.expectation());
                }
                let moment = self.power_moment(x, *q)?;
                match moment {
                    Ext::Infinity => Ok(Ext::Infinity),
                    Ext::Finite(m) => match m.nth_root_exact(*q) {
                        Some(root) => Ok(Ext::Finite(root)),
                        None => {
                            let approx = m.approx_f64().powf(1.0 / f64::from(*q));
                            Ok(Ext::Finite(S::from_f64(approx).ok_or_else(|| {
                                Error::NumberParse(format!("{approx}"))
                            })?))
                        }
                    },
                }
            }
            CertaintyEquivalent::Quantile { tau } => x.quantile(tau),
        }
    }

    /// Exact verdict `rho(X) <= c`. Power means compare moments against
    /// `c^q`, avoiding root extraction entirely.
    pub fn passes(&self, x: &RandomVariable<S>, c: &S) -> Result<bool> {
        match self {
            CertaintyEquivalent::Expectation => {
                Ok(x.expectation().le_ext(&Ext::Finite(c.clone())))
            }
            CertaintyEquivalent::EssSup => Ok(x.esssup().le_ext(&Ext::Finite(c.clone()))),
            CertaintyEquivalent::PowerMean { q } => {
                if c.is_negative() {
                    return Ok(false);
                }
                let moment = self.power_moment(x, *q)?;
                Ok(moment.le_ext(&Ext::Finite(powi(c, *q))))
            }
            CertaintyEquivalent::Quantile { tau } => {
                Ok(x.quantile(tau)?.le_ext(&Ext::Finite(c.clone())))
            }
        }
    }

    fn power_moment(&self, x: &RandomVariable<S>, q: u32) -> Result<Ext<S>> {
        for v in x.values() {
            if let Some(f) = v.as_finite() {
                if f.is_negative() && !f.approx_eq(&S::zero()) {
                    return Err(Error::NegativePowerMeanInput);
                }
            }
        }
        let powered: Vec<Ext<S>> = x.values().iter().map(|v| v.pow(q)).collect();
        Ok(RandomVariable::new(x.space(), powered)
            .expect("same space")
            .expectation())
    }

    /// Static flag recorded in audit reports; quantiles are treated as not
    /// continuous from below.
    pub fn continuous_from_below(&self) -> bool {
        !matches!(self, CertaintyEquivalent::Quantile { .. })
    }

    pub fn describe(&self) -> String {
        match self {
            CertaintyEquivalent::Expectation => "expectation".into(),
            CertaintyEquivalent::EssSup => "esssup".into(),
            CertaintyEquivalent::PowerMean { q } => format!("power_mean({q})"),
            CertaintyEquivalent::Quantile { tau } => format!("quantile({tau})"),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            CertaintyEquivalent::Expectation => Value::String("expectation".into()),
            CertaintyEquivalent::EssSup => Value::String("esssup".into()),
            CertaintyEquivalent::PowerMean { q } => serde_json::json!({ "power_mean": q }),
            CertaintyEquivalent::Quantile { tau } => {
                serde_json::json!({ "quantile": tau.to_json() })
            }
        }
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        match value {
            Value::String(s) => match s.as_str() {
                "expectation" => Ok(CertaintyEquivalent::Expectation),
                "esssup" => Ok(CertaintyEquivalent::EssSup),
                other => Err(Error::Config(format!("rho: unknown tag '{other}'"))),
            },
            Value::Object(map) => {
                if let Some(q) = map.get("power_mean") {
                    let q = q
                        .as_u64()
                        .or_else(|| q.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as u64))
                        .ok_or_else(|| Error::Config("rho: power_mean wants an integer".into()))?;
                    return Self::power_mean(u32::try_from(q).map_err(|_| {
                        Error::Config("rho: power_mean exponent too large".into())
                    })?);
                }
                if let Some(tau) = map.get("quantile") {
                    return Self::quantile(S::parse_json(tau)?);
                }
                Err(Error::Config("rho: expected 'power_mean' or 'quantile'".into()))
            }
            other => Err(Error::Config(format!("rho: cannot parse {other}"))),
        }
    }

    /// Parse CLI-style descriptions: `expectation`, `esssup`,
    /// `power-mean:2`, `quantile:0.5`.
    pub fn parse_cli(text: &str) -> Result<Self> {
        match text {
            "expectation" => return Ok(CertaintyEquivalent::Expectation),
            "esssup" => return Ok(CertaintyEquivalent::EssSup),
            _ => {}
        }
        if let Some((tag, arg)) = text.split_once(':') {
            match tag {
                "power-mean" | "power_mean" => {
                    let q: u32 = arg
                        .parse()
                        .map_err(|_| Error::Config(format!("rho: bad exponent '{arg}'")))?;
                    return Self::power_mean(q);
                }
                "quantile" => return Self::quantile(S::parse_decimal(arg)?),
                _ => {}
            }
        }
        Err(Error::Config(format!("rho: cannot parse '{text}'")))
    }
}

/// Conditional loss profile with bookkeeping about dropped zero-mass cells.
#[derive(Debug, Clone)]
pub struct ConditionalLossProfile<S> {
    pub rv: RandomVariable<S>,
    pub dropped_cells: Vec<usize>,
}

/// The random variable `E[L(phi(alpha~)) | alpha~]`: on each conditioning
/// cell, `L(0) + (L(d_a) - L(0)) * P(reject | cell)` where `a` is the cell's
/// level.
pub fn conditional_loss_profile<S: Scalar>(
    phi: &TestFamily<S>,
    alpha_tilde: &DataDependentLevel<S>,
    loss: &LossFunction<S>,
) -> Result<ConditionalLossProfile<S>> {
    let profile = phi.evaluate(alpha_tilde)?;
    let partition = alpha_tilde.conditioning_partition();
    let conditional = profile.reject_prob_rv().conditional_expectation(&partition)?;
    let l0 = loss.at_nonreject().clone();
    let mut values = vec![Ext::Finite(l0.clone()); phi.space().len()];
    for (c, cell) in partition.cells().iter().enumerate() {
        if conditional.dropped_cells.contains(&c) {
            continue;
        }
        let level = alpha_tilde.level(cell[0]);
        let spread = loss.at_reject(level)? - l0.clone();
        for &i in cell {
            let mean_reject = conditional.rv.value(i).expect_finite()?.clone();
            values[i] = Ext::Finite(l0.clone() + spread.clone() * mean_reject);
        }
    }
    Ok(ConditionalLossProfile {
        rv: RandomVariable::new(phi.space(), values)?,
        dropped_cells: conditional.dropped_cells,
    })
}

/// Outcome of a general validity evaluation.
#[derive(Debug, Clone)]
pub struct Verdict<S> {
    pub pass: bool,
    pub score: Ext<S>,
    pub threshold: S,
    pub dropped_cells: Vec<usize>,
}

/// General validity: `rho(E[L(phi(alpha~)) | alpha~]) <= C`.
pub fn general_validity<S: Scalar>(
    phi: &TestFamily<S>,
    alpha_tilde: &DataDependentLevel<S>,
    rho: &CertaintyEquivalent<S>,
    loss: &LossFunction<S>,
) -> Result<Verdict<S>> {
    let profile = conditional_loss_profile(phi, alpha_tilde, loss)?;
    Ok(Verdict {
        pass: rho.passes(&profile.rv, loss.threshold())?,
        score: rho.score(&profile.rv)?,
        threshold: loss.threshold().clone(),
        dropped_cells: profile.dropped_cells,
    })
}

/// `E[P(reject | alpha~) / alpha~]`, computed directly on atoms through the
/// tower property. Equals the general-validity score under `rho =
/// expectation` and canonical loss; the two routes are kept independent so
/// tests can compare them.
pub fn expected_distortion_ratio<S: Scalar>(
    phi: &TestFamily<S>,
    alpha_tilde: &DataDependentLevel<S>,
) -> Result<Ext<S>> {
    let profile = phi.evaluate(alpha_tilde)?;
    let space = phi.space();
    let mut acc = S::zero();
    for i in space.positive_indices() {
        let e = &profile.entries()[i];
        acc = acc + space.mass(i).clone() * e.reject_prob.clone() / e.level.clone();
    }
    Ok(Ext::Finite(acc))
}

/// Per-cell outcome of the strong conditional validity check.
#[derive(Debug, Clone)]
pub struct CellRatio<S> {
    pub level: S,
    pub conditional_reject: S,
    pub ratio: S,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct StrongConditionalReport<S> {
    pub pass: bool,
    pub cells: Vec<CellRatio<S>>,
    /// Largest conditional ratio over positive-mass cells.
    pub worst_ratio: S,
}

/// Strong conditional validity: `P(reject | alpha~) <= alpha~` on every
/// positive-mass conditioning cell. Equivalent to general validity with
/// `rho = esssup` and canonical loss.
pub fn strong_conditional_validity<S: Scalar>(
    phi: &TestFamily<S>,
    alpha_tilde: &DataDependentLevel<S>,
) -> Result<StrongConditionalReport<S>> {
    let profile = phi.evaluate(alpha_tilde)?;
    let partition = alpha_tilde.conditioning_partition();
    let space = phi.space();
    let mut cells = Vec::new();
    let mut pass = true;
    let mut worst = S::zero();
    for cell in partition.cells() {
        let mut mass = S::zero();
        let mut reject = S::zero();
        for &i in cell {
            mass = mass + space.mass(i).clone();
            reject = reject + space.mass(i).clone() * profile.entries()[i].reject_prob.clone();
        }
        if mass.is_zero() || mass.is_negative() {
            continue;
        }
        let level = alpha_tilde.level(cell[0]).clone();
        let conditional = reject / mass;
        let ratio = conditional.clone() / level.clone();
        let cell_pass = conditional.le_eps(&level);
        pass &= cell_pass;
        if ratio.cmp_num(&worst) == std::cmp::Ordering::Greater {
            worst = ratio.clone();
        }
        cells.push(CellRatio { level, conditional_reject: conditional, ratio, pass: cell_pass });
    }
    Ok(StrongConditionalReport { pass, cells, worst_ratio: worst })
}

#[derive(Debug, Clone)]
pub struct MeanLevelReport<S> {
    pub pass: bool,
    pub rejection_probability: S,
    pub mean_level: S,
}

/// The rejected comparator `P(reject) <= E[alpha~]`. It nests classical
/// validity but fails to preserve it; the preservation audit demonstrates
/// this.
pub fn mean_level_validity<S: Scalar>(
    phi: &TestFamily<S>,
    alpha_tilde: &DataDependentLevel<S>,
) -> Result<MeanLevelReport<S>> {
    let profile = phi.evaluate(alpha_tilde)?;
    let rejection_probability = profile.rejection_probability();
    let mean_level = alpha_tilde.mean();
    Ok(MeanLevelReport {
        pass: rejection_probability.le_eps(&mean_level),
        rejection_probability,
        mean_level,
    })
}

/// A certainty equivalent paired with a loss: one configured notion of
/// validity.
#[derive(Debug, Clone)]
pub struct ValidityNotion<S> {
    pub rho: CertaintyEquivalent<S>,
    pub loss: LossFunction<S>,
}

impl<S: Scalar> ValidityNotion<S> {
    pub fn new(rho: CertaintyEquivalent<S>, loss: LossFunction<S>) -> Self {
        ValidityNotion { rho, loss }
    }

    pub fn canonical_expectation() -> Self {
        ValidityNotion {
            rho: CertaintyEquivalent::Expectation,
            loss: LossFunction::canonical(),
        }
    }

    pub fn evaluate(
        &self,
        phi: &TestFamily<S>,
        alpha_tilde: &DataDependentLevel<S>,
    ) -> Result<Verdict<S>> {
        general_validity(phi, alpha_tilde, &self.rho, &self.loss)
    }

    /// Whether this is the pinned notion: expectation of the canonical
    /// normalized loss.
    pub fn is_pinned(&self) -> Result<bool> {
        Ok(matches!(self.rho, CertaintyEquivalent::Expectation)
            && self.loss.normalize()?.is_canonical())
    }
}

/// Either a certainty-equivalent notion or the mean-level comparator; what
/// the axiom checkers quantify their "declared valid" premise over.
#[derive(Debug, Clone)]
pub enum NotionConfig<S> {
    General(ValidityNotion<S>),
    MeanLevel,
}

impl<S: Scalar> NotionConfig<S> {
    pub fn declares_valid(
        &self,
        phi: &TestFamily<S>,
        alpha_tilde: &DataDependentLevel<S>,
    ) -> Result<(bool, Ext<S>)> {
        match self {
            NotionConfig::General(notion) => {
                let verdict = notion.evaluate(phi, alpha_tilde)?;
                Ok((verdict.pass, verdict.score))
            }
            NotionConfig::MeanLevel => {
                let report = mean_level_validity(phi, alpha_tilde)?;
                Ok((report.pass, Ext::Finite(report.rejection_probability)))
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            NotionConfig::General(n) => n.rho.describe(),
            NotionConfig::MeanLevel => "mean_level".into(),
        }
    }
}
