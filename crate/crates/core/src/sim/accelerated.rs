//! Renewal-approximation engine.
//!
//! Cycles (one up phase then one down phase) whose down phase is shorter than
//! θ cannot produce a flag, so between two long downs only the elapsed time
//! matters. The number of short cycles before the next long one is geometric
//! with success probability F̄_d(θ − 1); long runs of short cycles are
//! collapsed into one normally distributed span, short runs are drawn
//! phase by phase. Each post's deletion day is drawn from the marginal
//! per-day hazard D/N_d.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::flags::{FlagTracker, PostTally};
use super::population::{ln_survival, marginal_deletion_day, DAY};
use super::{run_blocks, CellPlan, CellStats, SimulationConfig};
use crate::distributions::{DistributionKind, DurationDistribution};
use crate::schedule::rng_stream;
use crate::tuning::Mechanism;

/// Below this many short cycles the span is drawn phase by phase.
const EXACT_SPAN_LIMIT: u64 = 16;

pub(crate) struct ShortCycles {
    /// P(T_d ≥ θ)
    q: f64,
    ln_1mq: f64,
    mean: f64,
    sd: f64,
    /// E[T_d | T_d < θ]
    mean_down: f64,
    /// Mixture weight and the shape-plus-one component of the length-biased
    /// negative binomial.
    biased: Option<(f64, DurationDistribution)>,
}

impl ShortCycles {
    pub fn new(m: &Mechanism, theta: u64) -> Self {
        let q = m.down.survival_at_least(theta);
        let (p_below, e1, e2) = m.down.moments_below(theta);
        let mean_down = e1 / p_below;
        let var_down = (e2 / p_below - mean_down * mean_down).max(0.0);
        let biased = match (m.down.kind(), m.down.shape()) {
            (DistributionKind::NegativeBinomial, Some(n)) => {
                let mean0 = m.down.mean() - 1.0;
                DurationDistribution::negative_binomial(1.0 + (n + 1.0) * mean0 / n, n + 1.0)
                    .ok()
                    .map(|d| (mean0 / m.down.mean(), d))
            }
            _ => None,
        };
        ShortCycles {
            q,
            ln_1mq: (-q).ln_1p(),
            mean: m.up.mean() + mean_down,
            sd: (m.up.variance() + var_down).sqrt(),
            mean_down,
            biased,
        }
    }

    fn count(&self, rng: &mut ChaCha8Rng) -> u64 {
        if self.q >= 1.0 {
            return 0;
        }
        let u: f64 = 1.0 - rng.gen::<f64>();
        let g = u.ln() / self.ln_1mq;
        if g >= u64::MAX as f64 {
            u64::MAX
        } else {
            g as u64
        }
    }

    fn span(&self, g: u64, rng: &mut ChaCha8Rng) -> u64 {
        let z: f64 = rng.sample(StandardNormal);
        let gf = g as f64;
        let s = (gf * self.mean + gf.sqrt() * self.sd * z).round();
        (s.max(2.0 * gf)).min(u64::MAX as f64 / 2.0) as u64
    }
}

fn short_down(down: &DurationDistribution, theta: u64, rng: &mut ChaCha8Rng) -> u64 {
    loop {
        let d = down.sample(rng);
        if d < theta {
            return d;
        }
    }
}

/// Length of a short down phase that straddles a uniformly placed instant.
fn straddled_down(
    s: &ShortCycles,
    down: &DurationDistribution,
    theta: u64,
    rng: &mut ChaCha8Rng,
) -> u64 {
    loop {
        let d = match &s.biased {
            // (X+1) f(X) = X f(X) + f(X), and X f(X; n) ∝ f(X−1; n+1)
            Some((w, plus)) => {
                if rng.gen::<f64>() < *w {
                    plus.sample(rng) + 1
                } else {
                    down.sample(rng)
                }
            }
            None => {
                let d = short_down(down, theta, rng);
                if rng.gen::<f64>() * (theta as f64) < d as f64 {
                    d
                } else {
                    continue;
                }
            }
        };
        if d < theta {
            return d;
        }
    }
}

pub(super) fn run(cfg: &SimulationConfig, cells: &[CellPlan]) -> Vec<CellStats> {
    let ln_surv = ln_survival(cfg);
    let end = cfg.horizon_seconds();
    run_blocks(cfg, cells, |idx, day, cell| {
        let mut del_rng = rng_stream(cfg.seed, 2 * idx);
        let t_del =
            marginal_deletion_day(&ln_surv, day, &mut del_rng).map_or(u64::MAX, |d| d * DAY);
        walk(cfg.seed, idx, day * DAY, end, t_del, cell)
    })
}

fn walk(seed: u64, idx: u64, created: u64, end: u64, t_del: u64, cell: &CellPlan) -> PostTally {
    let up = &cell.mechanism.up;
    let down = &cell.mechanism.down;
    let s = &cell.short;
    let theta = cell.theta;
    let mut rng = rng_stream(seed, 2 * idx + 1);
    let mut f = FlagTracker::new(theta, end, t_del);
    let mut t = created;
    'post: loop {
        let g = s.count(&mut rng);
        if g <= EXACT_SPAN_LIMIT {
            for _ in 0..g {
                let u = t + up.sample(&mut rng);
                if t_del <= u {
                    f.terminal(t_del);
                    break 'post;
                }
                if u >= end {
                    break 'post;
                }
                let len = short_down(down, theta, &mut rng);
                if t_del <= u + len {
                    f.terminal(u);
                    break 'post;
                }
                t = u + len;
                if t >= end {
                    break 'post;
                }
            }
        } else {
            let span = s.span(g, &mut rng);
            if t_del <= t.saturating_add(span) {
                let in_down = rng.gen::<f64>() * s.mean < s.mean_down;
                let tau = if in_down {
                    let len = straddled_down(s, down, theta, &mut rng);
                    let elapsed = rng.gen_range(1..=len);
                    t_del.saturating_sub(elapsed).max(t)
                } else {
                    t_del
                };
                f.terminal(tau);
                break;
            }
            t += span;
            if t >= end {
                break;
            }
        }

        let u = t + up.sample(&mut rng);
        if t_del <= u {
            f.terminal(t_del);
            break;
        }
        if u >= end {
            break;
        }
        let len = down.sample_at_least(theta, &mut rng);
        if t_del <= u + len {
            f.terminal(u);
            break;
        }
        f.long_down(u, len);
        t = u + len;
        if t >= end {
            break;
        }
    }
    f.out
}
