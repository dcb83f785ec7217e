//! Exact event-driven simulation of the flip-flop fluid queue with each of
//! the three level-zero behaviours.
//!
//! The flip-flop process has phase `(κ, φ)`: `κ` flips between up and down
//! at rate `λ`, `φ` evolves with `Q`, and the level moves linearly at rate
//! `μ_i + σ_i√λ` (up) or `μ_i − σ_i√λ` (down). Paths are piecewise linear,
//! so occupation times are accumulated exactly segment by segment.

mod engine;
mod stats;

use alloc::vec::Vec;

use crate::model::{BoundaryVariant, MmbmModel};
use crate::{Error, Result};

pub use engine::{run_replication, Tally};
pub use stats::{
    aggregate, ks_against, ks_distance, regen_stats_compare, EmpiricalLaw, KsReport, RegenReport, MIN_CYCLES,
};

/// Fraction of the horizon discarded before statistics are collected.
pub const WARM_UP_FRACTION: f64 = 0.01;
/// Time batches per replication used for batch-means standard errors.
pub const BATCHES: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub lambda: f64,
    pub variant: BoundaryVariant,
    /// Rate of the regeneration timer.
    pub q: f64,
    /// Simulated time per replication, warm-up included.
    pub horizon: f64,
    pub seed: u64,
    /// Sorted nonnegative levels at which occupation is reported.
    pub grid: Vec<f64>,
    pub replications: usize,
}

impl SimConfig {
    pub fn validate(&self, model: &MmbmModel) -> Result<()> {
        model.check_lambda(self.lambda)?;
        self.variant.check_against(model)?;
        if !(self.q.is_finite() && self.q > 0.0) {
            return Err(Error::domain("q", self.q));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::domain("horizon", self.horizon));
        }
        if self.replications == 0 {
            return Err(Error::malformed("replications", "must be at least 1"));
        }
        if self.grid.is_empty() {
            return Err(Error::malformed("grid", "must contain at least one level"));
        }
        for w in self.grid.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::malformed("grid", "levels must be strictly increasing"));
            }
        }
        if let Some(&x) = self.grid.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::domain("grid level", x));
        }
        Ok(())
    }
}

/// Runs every replication in order and pools them.
pub fn simulate(config: &SimConfig, model: &MmbmModel) -> Result<EmpiricalLaw> {
    config.validate(model)?;
    let tallies =
        (0..config.replications).map(|r| run_replication(config, model, r as u64)).collect::<Result<Vec<_>>>()?;
    aggregate(config, &tallies)
}
