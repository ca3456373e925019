//! Exact, desk-scale audits of Type-I-error validity for hypothesis tests
//! with data-dependent significance levels.
//!
//! The crate models finite probability spaces exactly (rational or double
//! arithmetic), families of level-`a` tests with coupled randomization,
//! candidate notions of validity built from certainty equivalents, and the
//! three axioms — nesting, preservation, monotonicity — that single out the
//! expectation-of-normalized-loss notion. Audits are executable: each one
//! either passes or produces a concrete, re-checkable counterexample
//! scenario. On top of the test machinery sit e-values as multi-level
//! decisions, family closures and a post-hoc validity harness.
//!
//! Start with the runnable examples (`cargo run --example nesting_audit` and
//! friends); the `posthoc-lab` binary exposes the same audits as subcommands.

pub mod axioms;
pub mod cli;
pub mod error;
pub mod evalue;
pub mod evidence;
pub mod finprob;
pub mod scalar;
pub mod scenario;
pub mod testfam;
pub mod validity;

pub use error::{Error, Result};
pub use evidence::{Decision, EvidenceValue};
pub use finprob::{FiniteSpace, Partition, RandomVariable};
pub use scalar::{Backend, Ext, Scalar};
pub use testfam::{DataDependentLevel, FamilyForm, RandomizedDecisionProfile, TestFamily};
pub use validity::{CertaintyEquivalent, LossFunction, NormalizedLoss};
