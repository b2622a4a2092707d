//! Training of binary neural networks by compilation to a QUBO model that is
//! minimised with replica-parallel simulated annealing.
//!
//! The pipeline is: a [`dataset::Dataset`] and a [`topology::Topology`] are
//! compiled by [`builder::build`] into a [`qubo::QuboModel`], which
//! [`annealer::anneal`] minimises; [`evaluator::decode`] recovers the
//! network from the best state. [`oracle`] holds brute-force references and
//! [`trainer`] orchestrates experiments.

pub mod annealer;
pub mod builder;
pub mod dataset;
pub mod error;
pub mod evaluator;
pub mod neldermead;
pub mod oracle;
pub mod qubo;
pub mod topology;
pub mod trainer;

pub use error::{Error, Result};

/// Environment variable read by the command line for the worker count.
pub const THREADS_ENV: &str = "QBNN_THREADS";

/// Deterministic 64-bit hash of a sequence of words (SplitMix64 finaliser
/// applied after each word).
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x243f_6a88_85a3_08d3;
    for &p in parts {
        h = h.wrapping_add(p).wrapping_add(0x9e37_79b9_7f4a_7c15);
        h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
    }
    h
}
