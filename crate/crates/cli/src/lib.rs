//! Batch front end: configuration, suite orchestration and report files.

pub mod config;
pub mod expr;
pub mod report;
pub mod run;
pub mod suites;
