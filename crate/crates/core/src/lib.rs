//! Hybrid intrusion detection: autoencoder compression, self-organizing map
//! anomaly scoring and deep-belief-network classification, tuned by particle
//! swarm optimization.
//!
//! The crate is organised by stage:
//!
//! * [`dataio`] parses flow tables, encodes categoricals, normalizes and splits.
//! * [`featsel`] offers correlation filtering, wrapper search and LASSO.
//! * [`autoenc`], [`som`] and [`dbn`] are the three learners.
//! * [`pso`] is the swarm optimizer plus the composite cost and learning-rate schedule.
//! * [`metrics`] computes confusion statistics, ROC and multiclass reports.
//! * [`pipeline`] wires everything together and persists trained bundles.
//!
//! Data-parallel loops go through [`exec`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iterators otherwise.

pub mod autoenc;
pub mod dataio;
pub mod dbn;
pub mod error;
pub mod exec;
pub mod featsel;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod pso;
pub mod som;
pub mod synth;

pub use error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic RNG used everywhere a seed is accepted.
pub type Rng = ChaCha8Rng;

/// Builds the crate RNG for `seed`, optionally on an independent stream.
pub fn seeded_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
