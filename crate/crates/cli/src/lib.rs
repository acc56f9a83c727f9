//! Library surface of the experiment driver, exposed so integration tests
//! can run pipelines in-process.

pub mod catalog;
pub mod config;
pub mod experiments;
