//! The Rk-index and top-fraction counts.
//!
//! The Rk-index of an entity is computed from the global ranks of its ten
//! most cited papers:
//!
//! ```text
//! Rk = 1000 / GM(r_1 + 20, ..., r_10 + 20)
//! ```
//!
//! where GM is the geometric mean. An entity holding ranks 1..10 scores the
//! maximum, 39.47. Entities with fewer than ten papers have the missing slots
//! filled with the last rank of the world list.

use thiserror::Error;

use crate::ranking::PercentileCutoff;

/// Number of top papers that enter the index.
pub const RK_SLOTS: usize = 10;
/// Shift added to every rank before averaging.
pub const RANK_SHIFT: f64 = 20.0;
/// Scale of the inverted geometric mean.
pub const RK_SCALE: f64 = 1000.0;
/// Values below this render as `< 0.20`.
pub const RENDER_FLOOR: f64 = 0.20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no eligible papers")]
    NoEligiblePapers,
    #[error("rank {rank} exceeds world size {n_world}")]
    RankOutOfRange { rank: u64, n_world: u64 },
    #[error("ranks must be positive")]
    ZeroRank,
    #[error("rank {0} repeated")]
    DuplicateRank(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RkResult {
    pub value: f64,
    /// Real ranks used, ascending, at most ten.
    pub contributing_ranks: Vec<u64>,
    /// Slots filled with the virtual rank `n_world`.
    pub padded_slots: usize,
    /// Number of ranks supplied (the size of the selected subset).
    pub n_entity: usize,
    pub rendered: String,
}

impl RkResult {
    /// The full ten-slot rank vector, padding included.
    pub fn slot_ranks(&self, n_world: u64) -> Vec<u64> {
        let mut slots = self.contributing_ranks.clone();
        slots.resize(RK_SLOTS, n_world);
        slots
    }
}

/// Rk-index from global ranks. Input order does not matter.
pub fn rk_index(ranks: &[u64], n_world: u64) -> Result<RkResult, MetricsError> {
    if ranks.is_empty() {
        return Err(MetricsError::NoEligiblePapers);
    }
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable();
    if sorted[0] == 0 {
        return Err(MetricsError::ZeroRank);
    }
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(MetricsError::DuplicateRank(w[0]));
    }
    let max = *sorted.last().expect("non-empty");
    if max > n_world {
        return Err(MetricsError::RankOutOfRange { rank: max, n_world });
    }

    sorted.truncate(RK_SLOTS);
    let padded_slots = RK_SLOTS - sorted.len();
    let log_sum: f64 = sorted
        .iter()
        .map(|&r| (r as f64 + RANK_SHIFT).ln())
        .sum::<f64>()
        + padded_slots as f64 * (n_world as f64 + RANK_SHIFT).ln();
    let value = RK_SCALE * (-log_sum / RK_SLOTS as f64).exp();

    Ok(RkResult {
        value,
        contributing_ranks: sorted,
        padded_slots,
        n_entity: ranks.len(),
        rendered: render_rk(value),
    })
}

/// How many ranks fall inside the cutoff (inclusive).
pub fn top_fraction_count(ranks: &[u64], cutoff: PercentileCutoff) -> usize {
    ranks.iter().filter(|&&r| r <= cutoff.cutoff_count).count()
}

/// Two decimals, half away from zero; `< 0.20` below the floor.
pub fn render_rk(value: f64) -> String {
    if value < RENDER_FLOOR {
        "< 0.20".to_string()
    } else {
        format_2dp(value)
    }
}

/// Two-decimal formatting with half-away-from-zero rounding.
pub fn format_2dp(value: f64) -> String {
    let rounded = (value * 100.0).round() / 100.0;
    format!("{rounded:.2}")
}

/// Report number formatting: two decimals, or the shortest round-trip form when `precise`.
pub fn format_value(value: f64, precise: bool) -> String {
    if precise {
        format!("{value}")
    } else {
        format_2dp(value)
    }
}
