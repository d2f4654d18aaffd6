//! Parallel generate, verify and refine inference with execution judging.
//!
//! A run launches `N` independent threads. Each thread generates a candidate,
//! collects `V` verdicts on it, and refines it with one negative verdict's
//! reasoning for up to `M` rounds, stopping early on a unanimous positive
//! score. The final answer is the highest-scoring round, earliest round first,
//! with a seeded draw among ties. Alongside the engine sit reward shaping
//! under length caps, per-turn advantage estimators, and analytics over the
//! resulting run store.

pub mod analytics;
pub mod backends;
pub mod config;
pub mod domain;
pub mod judge;
pub mod orchestrator;
pub mod rewards;
pub mod seed;
pub mod store;
pub mod sweep;
