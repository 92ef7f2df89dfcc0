//! Component structure of the random bipartite graph `G(n, n, p)` near
//! `p = 1/n`: exact counts, a union-find sampler, and experiments.

pub mod census;
pub mod cli;
pub mod config;
pub mod enumeration;
pub mod error;
pub mod experiments;
pub mod logreal;
pub mod numeric;
pub mod sampler;
pub mod selftest;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
