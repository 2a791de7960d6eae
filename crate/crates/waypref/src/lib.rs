//! Std companion to `waypref-core`: file formats, the message bridge (session
//! engine, TCP server, transcripts and replay), the simulated-user experiment
//! harness and reporting.

pub mod bridge;
pub mod config;
pub mod harness;
pub mod protocol;
pub mod report;
pub mod session;
pub mod store;
