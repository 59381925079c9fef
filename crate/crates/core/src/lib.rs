//! Analytics for citizen-science challenge communities.
//!
//! The crate ingests observation and identification records, then derives
//! contribution statistics, k-means user classes, join-cohort retention,
//! spatial distributions and an interaction network with centrality scores.
//! [`synth`] builds communities with planted ground truth for testing.

pub mod attrition;
pub mod classify;
pub mod data;
pub mod geo;
pub mod ingest;
pub mod network;
pub mod report;
pub mod stats;
pub mod synth;
