//! Multi-party data pricing.
//!
//! The pipeline values each seller's dataset for each buyer with exact Shapley
//! values, scores dataset quality, blends both into buyer satisfaction with
//! AHP-derived weights, and prices every (seller, buyer alliance) pair with an
//! incomplete-information alternating-offers bargaining equilibrium.
//!
//! Modules map onto the stages:
//!
//! * [`ahp`]: indicator weights from three-point pairwise judgments.
//! * [`quality`]: quality grades, composite score, quality-adjusted reserve.
//! * [`shapley`] and [`learners`]: buyer data utility against an evaluation oracle.
//! * [`satisfaction`]: satisfaction, logistic discount factors, alliance aggregates.
//! * [`bargain`]: stage payoffs, closed-form equilibrium and a fixed-point check.
//! * [`corpus`]: text corpora, hashing featurizer and seller partitions.
//! * [`market`]: scenario construction, seeded simulation, sweeps and summaries.
//! * [`config`] and [`report`]: strict TOML configuration and CSV/JSON output.

pub mod ahp;
pub mod bargain;
pub mod config;
pub mod corpus;
pub mod error;
pub mod learners;
pub mod market;
pub mod quality;
pub mod report;
pub mod satisfaction;
pub mod shapley;

pub use error::{Error, Result};
