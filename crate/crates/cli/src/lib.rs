//! Experiment harness and output plumbing behind the `metapop` binary.

pub mod config;
pub mod experiments;
pub mod output;
