//! Synthetic recruitment data from structural causal models, with
//! controllable bias injection and group-fairness audits of candidate
//! rankings.
//!
//! The crate is organised around a small pipeline:
//!
//! 1. [`graph`] — declare a DAG of typed variables (the causal graph).
//! 2. [`corpus`] — load an observational corpus, or synthesise the bundled
//!    reference corpus with documented ground-truth conditionals.
//! 3. [`mechanisms`] / [`scm`] — fit one structural equation per variable
//!    and assemble a structural model that supports ancestral sampling.
//! 4. [`scm::apply_tilt`] — shift a binary conditional by exponential
//!    tilting, turning one fitted model into a family of biased generators.
//! 5. [`recruitment`] / [`ranking`] — match generated job offers against
//!    generated candidate profiles, score them with a linear pointwise
//!    ranker, and measure demographic parity and rND of the rankings.
//! 6. [`experiment`] — sweep the tilt parameters over seeded runs and emit
//!    plot-ready CSV reports.
//!
//! Everything downstream of a seed is deterministic: the same configuration
//! and master seed reproduce byte-identical outputs.

pub mod corpus;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod mechanisms;
pub mod ranking;
pub mod recruitment;
pub mod rng;
pub mod scm;

pub use error::{Error, Result};

/// Default curriculum causal graph, as shipped in `graphs/curriculum.json`.
pub const DEFAULT_CURRICULUM_GRAPH: &str = include_str!("../../../graphs/curriculum.json");

/// Default job-offer causal graph, as shipped in `graphs/job_offer.json`.
pub const DEFAULT_JOB_OFFER_GRAPH: &str = include_str!("../../../graphs/job_offer.json");

/// Default seed-corpus parameters, as shipped in `configs/seed_corpus.json`.
pub const DEFAULT_SEED_CORPUS_PARAMS: &str = include_str!("../../../configs/seed_corpus.json");
