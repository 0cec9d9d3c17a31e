//! Deterministic city resource-allocation simulation for cognitive LLM agents,
//! with belief verification, a turn harness, pluggable policies, and an
//! experiment runner.

pub mod belief;
pub mod config;
pub mod experiment;
pub mod harness;
pub mod policy;
pub mod sim;
pub mod verify;
