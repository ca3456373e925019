//! Exact probability on finite sample spaces.
//!
//! A [`FiniteSpace`] is an ordered list of named outcomes with probability
//! mass. Random variables are total maps into the extended line `[..., inf]`;
//! expectations, essential suprema, quantiles and conditional expectations
//! given a finite partition are all computed in closed form in the backend
//! arithmetic. Zero-mass outcomes are legal but invisible to `esssup`,
//! quantiles and conditioning, matching the "essential" semantics.
//!
//! Everything here is immutable after construction and safe to share across
//! threads.

use std::collections::HashMap;
use std::sync::Arc;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::scalar::{Ext, Scalar};

/// Finite sample space with probability mass; the null distribution `P` of a
/// scenario and the carrier of every random variable in it.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSpace<S> {
    outcomes: Vec<String>,
    mass: Vec<S>,
}

impl<S: Scalar> FiniteSpace<S> {
    /// Builds a space from `(outcome, mass)` pairs. Masses must be
    /// nonnegative and sum to one (exactly under rationals, within tolerance
    /// under doubles); outcome names must be unique.
    pub fn new(pairs: Vec<(String, S)>) -> Result<Arc<Self>> {
        if pairs.is_empty() {
            return Err(Error::InvalidMass("empty sample space".into()));
        }
        let mut seen = HashMap::new();
        let mut outcomes = Vec::with_capacity(pairs.len());
        let mut mass = Vec::with_capacity(pairs.len());
        let mut total = S::zero();
        for (name, m) in pairs {
            if seen.insert(name.clone(), ()).is_some() {
                return Err(Error::InvalidMass(format!("duplicate outcome '{name}'")));
            }
            if m.is_negative() && !m.approx_eq(&S::zero()) {
                return Err(Error::InvalidMass(format!("negative mass at '{name}'")));
            }
            total = total + m.clone();
            outcomes.push(name);
            mass.push(m);
        }
        if !total.approx_eq(&S::one()) {
            return Err(Error::InvalidMass(format!("masses sum to {total}, not 1")));
        }
        Ok(Arc::new(FiniteSpace { outcomes, mass }))
    }

    /// Uniform space over `n` outcomes named `x000001`, `x000002`, ...
    pub fn uniform(n: usize) -> Result<Arc<Self>> {
        if n == 0 {
            return Err(Error::InvalidMass("empty sample space".into()));
        }
        let m = S::one() / S::from_ratio(n as i64, 1);
        Self::new(
            (1..=n)
                .map(|i| (format!("x{i:06}"), m.clone()))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn outcome(&self, index: usize) -> &str {
        &self.outcomes[index]
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn mass(&self, index: usize) -> &S {
        &self.mass[index]
    }

    pub fn masses(&self) -> &[S] {
        &self.mass
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.outcomes.iter().position(|o| o == name)
    }

    /// Indices carrying strictly positive mass.
    pub fn positive_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| !self.mass[i].is_zero() && !self.mass[i].is_negative())
    }

    pub fn to_json(&self) -> Value {
        let mass: serde_json::Map<String, Value> = self
            .outcomes
            .iter()
            .zip(&self.mass)
            .map(|(o, m)| (o.clone(), m.to_json()))
            .collect();
        serde_json::json!({ "outcomes": self.outcomes, "mass": mass })
    }

    pub fn from_json(value: &Value) -> Result<Arc<Self>> {
        let outcomes = value
            .get("outcomes")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Config("space: missing 'outcomes' array".into()))?;
        let mass = value
            .get("mass")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::Config("space: missing 'mass' object".into()))?;
        if mass.len() != outcomes.len() {
            return Err(Error::Config(
                "space: 'mass' must have exactly one entry per outcome".into(),
            ));
        }
        let mut pairs = Vec::with_capacity(outcomes.len());
        for o in outcomes {
            let name = o
                .as_str()
                .ok_or_else(|| Error::Config("space: outcome names must be strings".into()))?;
            let m = mass
                .get(name)
                .ok_or_else(|| Error::Config(format!("space: no mass for outcome '{name}'")))?;
            pairs.push((name.to_string(), S::parse_json(m)?));
        }
        Self::new(pairs)
    }
}

pub(crate) fn same_space<S: Scalar>(a: &Arc<FiniteSpace<S>>, b: &Arc<FiniteSpace<S>>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(Error::SpaceMismatch)
    }
}

/// Total map from outcomes into the extended line.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomVariable<S> {
    space: Arc<FiniteSpace<S>>,
    values: Vec<Ext<S>>,
}

/// Conditional expectation of a random variable given a partition.
///
/// `dropped_cells` lists partition cells of zero total mass; the conditional
/// value there is arbitrary and set to zero.
#[derive(Debug, Clone)]
pub struct ConditionalExpectation<S> {
    pub rv: RandomVariable<S>,
    pub dropped_cells: Vec<usize>,
}

impl<S: Scalar> RandomVariable<S> {
    pub fn new(space: &Arc<FiniteSpace<S>>, values: Vec<Ext<S>>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::SpaceMismatch);
        }
        Ok(RandomVariable { space: Arc::clone(space), values })
    }

    pub fn from_finite(space: &Arc<FiniteSpace<S>>, values: Vec<S>) -> Result<Self> {
        Self::new(space, values.into_iter().map(Ext::Finite).collect())
    }

    pub fn constant(space: &Arc<FiniteSpace<S>>, value: S) -> Self {
        RandomVariable {
            space: Arc::clone(space),
            values: vec![Ext::Finite(value); space.len()],
        }
    }

    pub fn space(&self) -> &Arc<FiniteSpace<S>> {
        &self.space
    }

    pub fn values(&self) -> &[Ext<S>] {
        &self.values
    }

    pub fn value(&self, index: usize) -> &Ext<S> {
        &self.values[index]
    }

    /// All values as plain scalars; errors if any value is infinite.
    pub fn finite_values(&self) -> Result<Vec<S>> {
        self.values
            .iter()
            .map(|v| v.expect_finite().cloned())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| !v.is_infinite())
    }

    /// `sum_x P(x) X(x)`, infinite iff an atom of positive mass carries `inf`.
    pub fn expectation(&self) -> Ext<S> {
        let mut acc = Ext::zero();
        for i in self.space.positive_indices() {
            acc = acc.add(&self.values[i].scale(self.space.mass(i)));
        }
        acc
    }

    /// Maximum over outcomes of positive mass.
    pub fn esssup(&self) -> Ext<S> {
        self.space
            .positive_indices()
            .map(|i| self.values[i].clone())
            .reduce(|a, b| if a.cmp_ext(&b) == std::cmp::Ordering::Less { b } else { a })
            .expect("space has at least one positive-mass outcome")
    }

    /// Left-continuous `tau`-quantile of the distribution of the variable:
    /// the smallest attained value `v` with `P(X <= v) >= tau`.
    pub fn quantile(&self, tau: &S) -> Result<Ext<S>> {
        if !(tau.cmp_num(&S::zero()) == std::cmp::Ordering::Greater
            && tau.cmp_num(&S::one()) == std::cmp::Ordering::Less)
        {
            return Err(Error::QuantileOrderOutOfRange(tau.to_string()));
        }
        let mut atoms: Vec<(Ext<S>, S)> = self
            .space
            .positive_indices()
            .map(|i| (self.values[i].clone(), self.space.mass(i).clone()))
            .collect();
        atoms.sort_by(|a, b| a.0.cmp_ext(&b.0));
        let mut cum = S::zero();
        for (value, mass) in &atoms {
            cum = cum + mass.clone();
            if cum.ge_eps(tau) {
                return Ok(value.clone());
            }
        }
        // Mass sums to one, so the loop always returns; this is unreachable
        // short of accumulated rounding in the double backend.
        Ok(atoms.last().expect("nonempty support").0.clone())
    }

    /// Mass-weighted mean on each cell of `partition`, constant per cell.
    pub fn conditional_expectation(&self, partition: &Partition<S>) -> Result<ConditionalExpectation<S>> {
        same_space(&self.space, &partition.space)?;
        let mut values = vec![Ext::zero(); self.space.len()];
        let mut dropped = Vec::new();
        for (c, cell) in partition.cells.iter().enumerate() {
            let mut mass = S::zero();
            for &i in cell {
                mass = mass + self.space.mass(i).clone();
            }
            if mass.is_zero() || mass.is_negative() {
                dropped.push(c);
                continue;
            }
            let mut acc = Ext::zero();
            for &i in cell {
                if !self.space.mass(i).is_zero() {
                    acc = acc.add(&self.values[i].scale(self.space.mass(i)));
                }
            }
            let mean = acc.scale(&(S::one() / mass));
            for &i in cell {
                values[i] = mean.clone();
            }
        }
        Ok(ConditionalExpectation {
            rv: RandomVariable { space: Arc::clone(&self.space), values },
            dropped_cells: dropped,
        })
    }
}

/// Disjoint cover of the outcome set by nonempty cells, given as outcome
/// indices. Carries the conditioning structure generated by a data-dependent
/// level.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition<S> {
    space: Arc<FiniteSpace<S>>,
    cells: Vec<Vec<usize>>,
}

impl<S: Scalar> Partition<S> {
    pub fn new(space: &Arc<FiniteSpace<S>>, cells: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; space.len()];
        for cell in &cells {
            if cell.is_empty() {
                return Err(Error::InvalidPartition("empty cell".into()));
            }
            for &i in cell {
                if i >= space.len() {
                    return Err(Error::InvalidPartition(format!("index {i} out of range")));
                }
                if seen[i] {
                    return Err(Error::InvalidPartition(format!(
                        "outcome '{}' appears in two cells",
                        space.outcome(i)
                    )));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::InvalidPartition("cells do not cover the space".into()));
        }
        Ok(Partition { space: Arc::clone(space), cells })
    }

    pub fn trivial(space: &Arc<FiniteSpace<S>>) -> Self {
        Partition {
            space: Arc::clone(space),
            cells: vec![(0..space.len()).collect()],
        }
    }

    pub fn singletons(space: &Arc<FiniteSpace<S>>) -> Self {
        Partition {
            space: Arc::clone(space),
            cells: (0..space.len()).map(|i| vec![i]).collect(),
        }
    }

    pub fn space(&self) -> &Arc<FiniteSpace<S>> {
        &self.space
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn cell_mass(&self, cell: usize) -> S {
        self.cells[cell]
            .iter()
            .fold(S::zero(), |acc, &i| acc + self.space.mass(i).clone())
    }
}
