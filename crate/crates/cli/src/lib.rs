//! Replication harness and CLI plumbing for the profile sampler.

pub mod config;
pub mod study;
pub mod table;
