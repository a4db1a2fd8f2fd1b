//! Deterministic expectations used to check the engines.

use super::population::{ln_survival, DAY};
use super::{SimError, SimulationConfig};
use crate::distributions::DurationDistribution;
use crate::tuning::Mechanism;

/// Deletions times the window in which a detection can still land: D·(H − θ).
pub fn true_positive_closed_form(cfg: &SimulationConfig, theta: u64) -> f64 {
    let days = cfg.horizon_days as f64 - theta as f64 / DAY as f64;
    cfg.deletions_per_day as f64 * days.max(0.0)
}

/// Expected flag-multi false positives.
///
/// A down phase starting at `u` yields a false flag at `u + mθ` when it lasts
/// at least `mθ` and the post is still alive then. Down starts are counted
/// with the renewal density measured from each post's creation (solved on a
/// one-day lattice), so the warm-up of a freshly created schedule is included.
pub fn analytic_expected_fp(cfg: &SimulationConfig, theta: u64) -> Result<f64, SimError> {
    cfg.validate()?;
    let m = cfg.mechanism_for(theta)?;
    Ok(expected_fp(
        cfg,
        &m,
        theta,
        &down_start_density(&m, cfg.horizon_days as usize),
    ))
}

/// Same sum with down starts at the stationary rate 1/(μu + μd) from creation on.
pub fn stationary_expected_fp(cfg: &SimulationConfig, theta: u64) -> Result<f64, SimError> {
    cfg.validate()?;
    let m = cfg.mechanism_for(theta)?;
    let rate = DAY as f64 / (m.mean_up() + m.mean_down());
    let h = vec![rate; cfg.horizon_days as usize + 1];
    Ok(expected_fp(cfg, &m, theta, &h))
}

/// Mass of `d` on the day lattice `0..=len`, each bin's mass split between
/// its two end points so that the mean is preserved.
fn lattice(d: &DurationDistribution, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len + 2];
    let day = DAY as f64;
    let (mut p_prev, mut e_prev) = (0.0, 0.0);
    for j in 0..=len {
        let (p, e, _) = d.moments_below((j as u64 + 1) * DAY);
        let mass = p - p_prev;
        if mass > 0.0 {
            let frac = ((e - e_prev) / mass / day - j as f64).clamp(0.0, 1.0);
            out[j] += mass * (1.0 - frac);
            out[j + 1] += mass * frac;
        }
        p_prev = p;
        e_prev = e;
    }
    // whatever lies beyond the lattice never matters inside the horizon
    out[len + 1] += (1.0 - p_prev).max(0.0);
    out
}

/// Expected number of down starts per lattice day after creation.
pub(crate) fn down_start_density(m: &Mechanism, horizon_days: usize) -> Vec<f64> {
    let up = lattice(&m.up, horizon_days);
    let down = lattice(&m.down, horizon_days);
    let n = horizon_days + 1;
    let mut cycle = vec![0.0; n];
    for (i, &a) in up.iter().enumerate().take(n) {
        if a < 1e-300 {
            continue;
        }
        for (j, &b) in down.iter().enumerate().take(n - i) {
            cycle[i + j] += a * b;
        }
    }
    // h = up + cycle * h, solved forward with the zero-lag term moved left
    let mut h = vec![0.0; n];
    for t in 0..n {
        let mut acc = up[t];
        for s in 1..=t {
            acc += cycle[s] * h[t - s];
        }
        h[t] = acc / (1.0 - cycle[0]);
    }
    h
}

fn expected_fp(cfg: &SimulationConfig, m: &Mechanism, theta: u64, h: &[f64]) -> f64 {
    let days = cfg.horizon_days as usize;
    let ln_s = ln_survival(cfg);
    // survival weight at lattice point j, smoothed over the deletion instant
    // at j and halved at the horizon itself
    let mut weight = vec![0.0; days + 1];
    weight[0] = 1.0;
    for (j, w) in weight.iter_mut().enumerate().skip(1) {
        let after = ln_s[j.min(days - 1)].exp();
        let before = ln_s[(j - 1).min(days - 1)].exp();
        *w = 0.5 * (before + after);
    }
    weight[days] *= 0.5;
    // corr[s] = Σ_t h[t] weight[s + t]
    let corr: Vec<f64> = (0..=days)
        .map(|s| (0..=days - s).map(|t| h[t] * weight[s + t]).sum())
        .collect();
    let at = |x: f64| -> f64 {
        let i = x.floor() as usize;
        if i >= days {
            return if i == days { corr[days] } else { 0.0 };
        }
        let f = x - i as f64;
        corr[i] * (1.0 - f) + corr[i + 1] * f
    };

    let cohorts: Vec<(usize, f64)> = std::iter::once((0, cfg.initial_posts as f64))
        .chain((1..days).map(|d| (d, cfg.creations_per_day as f64)))
        .collect();
    let end = cfg.horizon_seconds();
    let mut total = 0.0;
    let mut k = 1u64;
    while k * theta <= end {
        let lag = (k * theta) as f64 / DAY as f64;
        let p_long = m.down.survival_at_least(k * theta);
        let exposure: f64 = cohorts
            .iter()
            .map(|&(c, n)| n * (-ln_s[c]).exp() * at(c as f64 + lag))
            .sum();
        total += p_long * exposure;
        k += 1;
    }
    total
}
