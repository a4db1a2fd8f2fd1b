//! Creation/deletion process shared by both engines.
//!
//! Initial posts exist at t = 0. On each day d = 1..H−1 the batch at
//! `d · 86400` first deletes posts chosen uniformly from the alive set, then
//! creates the day's new posts.

use rand::Rng;

use super::SimulationConfig;
use crate::schedule::rng_stream;

pub const DAY: u64 = 86_400;

/// Stream reserved for the global victim draw of the exact engine.
const VICTIM_STREAM: u64 = u64::MAX;

/// Contiguous run of posts created in the same batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Block {
    pub day: u64,
    pub first: u64,
    pub len: u64,
}

pub(crate) fn total_posts(cfg: &SimulationConfig) -> u64 {
    cfg.initial_posts + cfg.horizon_days.saturating_sub(1) * cfg.creations_per_day
}

/// Splits the population into same-cohort blocks of at most `max_len` posts.
pub(crate) fn blocks(cfg: &SimulationConfig, max_len: u64) -> Vec<Block> {
    let mut out = Vec::new();
    let mut push_cohort = |day: u64, first: u64, len: u64| {
        let mut off = 0;
        while off < len {
            let n = max_len.min(len - off);
            out.push(Block {
                day,
                first: first + off,
                len: n,
            });
            off += n;
        }
    };
    push_cohort(0, 0, cfg.initial_posts);
    for day in 1..cfg.horizon_days {
        push_cohort(
            day,
            cfg.initial_posts + (day - 1) * cfg.creations_per_day,
            cfg.creations_per_day,
        );
    }
    out
}

/// Alive count just before the deletions of day `d ≥ 1`.
pub(crate) fn alive_before(cfg: &SimulationConfig, d: u64) -> f64 {
    cfg.initial_posts as f64
        + (d - 1) as f64 * (cfg.creations_per_day as f64 - cfg.deletions_per_day as f64)
}

/// `ln_survival[d] = Σ_{j=1..d} ln(1 − D/N_j)`: log-probability that a post
/// alive since day 0 survives the deletion batches of days 1..d.
pub(crate) fn ln_survival(cfg: &SimulationConfig) -> Vec<f64> {
    let mut out = Vec::with_capacity(cfg.horizon_days as usize);
    out.push(0.0);
    let del = cfg.deletions_per_day as f64;
    let mut acc = 0.0;
    for d in 1..cfg.horizon_days {
        acc += (-del / alive_before(cfg, d)).ln_1p();
        out.push(acc);
    }
    out
}

/// Deletion day drawn from the marginal per-day hazard D/N_d, or `None`.
pub(crate) fn marginal_deletion_day<R: Rng + ?Sized>(
    ln_surv: &[f64],
    created: u64,
    rng: &mut R,
) -> Option<u64> {
    let u: f64 = 1.0 - rng.gen::<f64>();
    let target = ln_surv[created as usize] + u.ln();
    let first = created as usize + 1;
    if first >= ln_surv.len() {
        return None;
    }
    let pos = first + ln_surv[first..].partition_point(|&v| v >= target);
    (pos < ln_surv.len()).then_some(pos as u64)
}

/// Deletion instants for every post, with victims drawn uniformly from the
/// alive set of each day. `u64::MAX` marks posts alive at the horizon.
pub(crate) fn exact_deletions(cfg: &SimulationConfig) -> Vec<u64> {
    let total = total_posts(cfg) as usize;
    let mut t_del = vec![u64::MAX; total];
    let mut alive: Vec<u64> = (0..cfg.initial_posts).collect();
    let mut rng = rng_stream(cfg.seed, VICTIM_STREAM);
    let mut next = cfg.initial_posts;
    for day in 1..cfg.horizon_days {
        for _ in 0..cfg.deletions_per_day {
            let i = rng.gen_range(0..alive.len());
            let victim = alive.swap_remove(i);
            t_del[victim as usize] = day * DAY;
        }
        alive.extend(next..next + cfg.creations_per_day);
        next += cfg.creations_per_day;
    }
    t_del
}
