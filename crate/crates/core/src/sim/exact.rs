//! Event-level engine: every up and down phase of every post is drawn.

use super::flags::{FlagTracker, PostTally};
use super::population::{exact_deletions, DAY};
use super::{run_blocks, CellPlan, CellStats, SimulationConfig};
use crate::schedule::rng_stream;

pub(super) fn run(cfg: &SimulationConfig, cells: &[CellPlan]) -> Vec<CellStats> {
    let t_del = exact_deletions(cfg);
    let end = cfg.horizon_seconds();
    run_blocks(cfg, cells, |idx, day, cell| {
        walk(cfg.seed, idx, day * DAY, end, t_del[idx as usize], cell)
    })
}

pub(super) fn walk(
    seed: u64,
    idx: u64,
    created: u64,
    end: u64,
    t_del: u64,
    cell: &CellPlan,
) -> PostTally {
    let up = &cell.mechanism.up;
    let down = &cell.mechanism.down;
    let mut rng = rng_stream(seed, 2 * idx + 1);
    let mut f = FlagTracker::new(cell.theta, end, t_del);
    let mut t = created;
    loop {
        let u = t + up.sample(&mut rng);
        if t_del <= u {
            f.terminal(t_del);
            break;
        }
        if u >= end {
            break;
        }
        let len = down.sample(&mut rng);
        if t_del <= u + len {
            f.terminal(u);
            break;
        }
        if len >= cell.theta {
            f.long_down(u, len);
        }
        t = u + len;
        if t >= end {
            break;
        }
    }
    f.out
}
