//! Causal Bayesian networks with fairness-labeled edges: structural models,
//! path-specific and counterfactual effects, group fairness metrics and a
//! small scenario language.

pub mod counterfactual;
pub mod dataset;
pub mod dsl;
pub mod effects;
pub mod error;
pub mod expr;
pub mod graph;
pub mod metrics;
pub mod parallel;
pub mod presets;
pub mod report;
pub mod rng;
pub mod scm;
