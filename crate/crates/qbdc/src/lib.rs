//! File formats, sweeps and the command-line front end over `qbdc-core`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod export;
pub mod svg;
pub mod sweep;
