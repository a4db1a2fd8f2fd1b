//! Snapshot-adversary simulation over a scheduled post population.

mod accelerated;
mod analytic;
mod exact;
mod fft;
mod flags;
mod population;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tuning::{build_mechanism, Mechanism, TuningError, TuningSpec};
use flags::PostTally;
use population::Block;

pub use analytic::{analytic_expected_fp, stationary_expected_fp, true_positive_closed_form};
pub use fft::{fft_table, write_fft_csv, FftCell, FftGrid};
pub use population::DAY;

const BLOCK_LEN: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    #[serde(alias = "flag-once")]
    Once,
    #[serde(alias = "flag-multi")]
    Multi,
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "once" | "flag-once" => Ok(Scenario::Once),
            "multi" | "flag-multi" => Ok(Scenario::Multi),
            _ => Err(format!("unknown scenario {s:?} (expected once or multi)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Exact,
    #[default]
    Accelerated,
}

impl std::str::FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(Engine::Exact),
            "accelerated" => Ok(Engine::Accelerated),
            _ => Err(format!(
                "unknown engine {s:?} (expected exact or accelerated)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("deletions per day ({deletions}) must stay below creations per day plus initial posts over the horizon ({limit})")]
    TooManyDeletions { deletions: u64, limit: f64 },
    #[error("population cannot supply {deletions} deletions on day {day}")]
    PopulationExhausted { deletions: u64, day: u64 },
    #[error("no thresholds to evaluate")]
    NoThresholds,
    #[error("threshold {theta} s is not below the horizon of {horizon} s")]
    ThresholdBeyondHorizon { theta: u64, horizon: u64 },
    #[error("scale factor must lie in (0, 1], got {0}")]
    InvalidScale(f64),
    #[error(transparent)]
    Tuning(#[from] TuningError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub initial_posts: u64,
    pub creations_per_day: u64,
    pub deletions_per_day: u64,
    pub horizon_days: u64,
    pub availability_target: f64,
    /// Seconds.
    pub mean_down: f64,
    /// Seconds. When absent each threshold is evaluated against a mechanism
    /// tuned for that same threshold.
    #[serde(default)]
    pub theta_star_for_tuning: Option<f64>,
    /// Seconds.
    pub thresholds: Vec<u64>,
    pub scenario: Scenario,
    pub scale_factor: f64,
    pub seed: u64,
    #[serde(default)]
    pub engine: Engine,
}

impl SimulationConfig {
    /// The 0.01% platform sample: 100M posts, 32k created and 10k deleted per day, ten years.
    pub fn platform_sample(
        availability: f64,
        thresholds_days: &[u64],
        scenario: Scenario,
        seed: u64,
    ) -> Self {
        SimulationConfig {
            initial_posts: 100_000_000,
            creations_per_day: 32_000,
            deletions_per_day: 10_000,
            horizon_days: 3650,
            availability_target: availability,
            mean_down: 3600.0,
            theta_star_for_tuning: None,
            thresholds: thresholds_days.iter().map(|d| d * DAY).collect(),
            scenario,
            scale_factor: 1e-4,
            seed,
            engine: Engine::Accelerated,
        }
    }

    /// Divides every population count by `factor` and the scale factor with it.
    pub fn scaled_down(mut self, factor: u64) -> Self {
        self.initial_posts /= factor;
        self.creations_per_day /= factor;
        self.deletions_per_day /= factor;
        self.scale_factor /= factor as f64;
        self
    }

    pub fn horizon_seconds(&self) -> u64 {
        self.horizon_days * DAY
    }

    pub fn total_posts(&self) -> u64 {
        population::total_posts(self)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for (name, v) in [
            ("initial_posts", self.initial_posts),
            ("creations_per_day", self.creations_per_day),
            ("deletions_per_day", self.deletions_per_day),
            ("horizon_days", self.horizon_days),
        ] {
            if v == 0 {
                return Err(SimError::NonPositive(name));
            }
        }
        let limit =
            self.creations_per_day as f64 + self.initial_posts as f64 / self.horizon_days as f64;
        if self.deletions_per_day as f64 >= limit {
            return Err(SimError::TooManyDeletions {
                deletions: self.deletions_per_day,
                limit,
            });
        }
        // the alive count is linear in the day, so checking the ends suffices
        for day in [1, self.horizon_days.saturating_sub(1).max(1)] {
            if population::alive_before(self, day) < self.deletions_per_day as f64 {
                return Err(SimError::PopulationExhausted {
                    deletions: self.deletions_per_day,
                    day,
                });
            }
        }
        if self.thresholds.is_empty() {
            return Err(SimError::NoThresholds);
        }
        for &theta in &self.thresholds {
            if theta == 0 {
                return Err(SimError::NonPositive("threshold"));
            }
            if theta >= self.horizon_seconds() {
                return Err(SimError::ThresholdBeyondHorizon {
                    theta,
                    horizon: self.horizon_seconds(),
                });
            }
        }
        if !(self.scale_factor > 0.0 && self.scale_factor <= 1.0) {
            return Err(SimError::InvalidScale(self.scale_factor));
        }
        Ok(())
    }

    /// Mechanism evaluated at threshold `theta`.
    pub fn mechanism_for(&self, theta: u64) -> Result<Mechanism, SimError> {
        Ok(build_mechanism(TuningSpec {
            availability_target: self.availability_target,
            mean_down: self.mean_down,
            decision_threshold_estimate: self.theta_star_for_tuning.unwrap_or(theta as f64),
        })?)
    }
}

/// Counts for one scenario at one threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tp_sigma: f64,
    pub fp_sigma: f64,
}

impl Counts {
    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub theta_seconds: u64,
    pub shape_n: f64,
    pub mean_up_seconds: f64,
    pub deletions: u64,
    pub censored: u64,
    pub multi: Counts,
    pub once: Counts,
}

impl CellOutcome {
    pub fn counts(&self, scenario: Scenario) -> &Counts {
        match scenario {
            Scenario::Once => &self.once,
            Scenario::Multi => &self.multi,
        }
    }
}

/// Both scenarios from one pass over the population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutcome {
    pub engine: Engine,
    pub total_posts: u64,
    pub cells: Vec<CellOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub theta_seconds: u64,
    pub theta_days: f64,
    pub shape_n: f64,
    pub mean_up_seconds: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub fp_full_scale: f64,
    pub tp_full_scale: f64,
    pub fp_sigma: f64,
    pub tp_sigma: f64,
    pub tp_closed_form: f64,
    pub analytic_expected_fp: Option<f64>,
    pub deletions: u64,
    pub censored: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryReport {
    pub scenario: Scenario,
    pub engine: Engine,
    pub seed: u64,
    pub scale_factor: f64,
    pub total_posts: u64,
    pub thresholds: Vec<ThresholdReport>,
}

impl AdversaryReport {
    pub fn threshold(&self, theta_seconds: u64) -> Option<&ThresholdReport> {
        self.thresholds
            .iter()
            .find(|t| t.theta_seconds == theta_seconds)
    }
}

/// Per-threshold parameters prepared once per run.
pub(crate) struct CellPlan {
    pub theta: u64,
    pub mechanism: Mechanism,
    pub short: accelerated::ShortCycles,
}

fn plan(cfg: &SimulationConfig) -> Result<Vec<CellPlan>, SimError> {
    cfg.thresholds
        .iter()
        .map(|&theta| {
            let mechanism = cfg.mechanism_for(theta)?;
            let short = accelerated::ShortCycles::new(&mechanism, theta);
            Ok(CellPlan {
                theta,
                mechanism,
                short,
            })
        })
        .collect()
}

/// Integer sums for one block, plus the within-block sum of squared
/// deviations used for the stratified variance.
#[derive(Debug, Clone, Default)]
struct CellSums {
    total: PostTally,
    fp_multi_sq: u128,
}

#[derive(Debug, Clone, Default)]
struct CellStats {
    total: PostTally,
    var: [f64; 5],
}

fn within(sum: u64, sum_sq: u128, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (sum_sq as f64 - (sum as f64) * (sum as f64) / n as f64).max(0.0)
}

fn run_blocks<F>(cfg: &SimulationConfig, cells: &[CellPlan], per_post: F) -> Vec<CellStats>
where
    F: Fn(u64, u64, &CellPlan) -> PostTally + Sync,
{
    let blocks = population::blocks(cfg, BLOCK_LEN);
    let sums: Vec<Vec<CellSums>> = blocks
        .par_iter()
        .map(|b: &Block| {
            let mut acc = vec![CellSums::default(); cells.len()];
            for idx in b.first..b.first + b.len {
                for (cell, a) in cells.iter().zip(acc.iter_mut()) {
                    let t = per_post(idx, b.day, cell);
                    add(&mut a.total, &t);
                    a.fp_multi_sq += u128::from(t.fp_multi) * u128::from(t.fp_multi);
                }
            }
            acc
        })
        .collect();

    // sequential merge in block order keeps float sums thread-count independent
    let mut stats = vec![CellStats::default(); cells.len()];
    for (b, block_sums) in blocks.iter().zip(&sums) {
        for (s, cs) in stats.iter_mut().zip(block_sums) {
            add(&mut s.total, &cs.total);
            let t = &cs.total;
            s.var[0] += within(t.fp_multi, cs.fp_multi_sq, b.len);
            for (v, x) in s.var[1..]
                .iter_mut()
                .zip([t.tp_multi, t.fp_once, t.tp_once, t.fn_once])
            {
                // indicator sums equal their squares
                *v += within(x, u128::from(x), b.len);
            }
        }
    }
    stats
}

fn add(a: &mut PostTally, b: &PostTally) {
    a.fp_multi += b.fp_multi;
    a.tp_multi += b.tp_multi;
    a.fp_once += b.fp_once;
    a.tp_once += b.tp_once;
    a.fn_once += b.fn_once;
    a.deleted += b.deleted;
    a.censored += b.censored;
}

/// Runs both scenarios with the configured engine.
pub fn simulate(cfg: &SimulationConfig) -> Result<SimulationOutcome, SimError> {
    cfg.validate()?;
    let cells = plan(cfg)?;
    let stats = match cfg.engine {
        Engine::Exact => exact::run(cfg, &cells),
        Engine::Accelerated => accelerated::run(cfg, &cells),
    };
    Ok(SimulationOutcome {
        engine: cfg.engine,
        total_posts: cfg.total_posts(),
        cells: cells
            .iter()
            .zip(stats)
            .map(|(c, s)| CellOutcome {
                theta_seconds: c.theta,
                shape_n: c.mechanism.shape(),
                mean_up_seconds: c.mechanism.mean_up(),
                deletions: s.total.deleted,
                censored: s.total.censored,
                multi: Counts {
                    tp: s.total.tp_multi,
                    fp: s.total.fp_multi,
                    fn_: 0,
                    fp_sigma: s.var[0].sqrt(),
                    tp_sigma: s.var[1].sqrt(),
                },
                once: Counts {
                    tp: s.total.tp_once,
                    fp: s.total.fp_once,
                    fn_: s.total.fn_once,
                    fp_sigma: s.var[2].sqrt(),
                    tp_sigma: s.var[3].sqrt(),
                },
            })
            .collect(),
    })
}

/// Report for the configured scenario.
pub fn run_simulation(cfg: &SimulationConfig) -> Result<AdversaryReport, SimError> {
    let outcome = simulate(cfg)?;
    report(cfg, &outcome, cfg.scenario)
}

pub fn report(
    cfg: &SimulationConfig,
    outcome: &SimulationOutcome,
    scenario: Scenario,
) -> Result<AdversaryReport, SimError> {
    let thresholds = outcome
        .cells
        .iter()
        .map(|cell| {
            let c = cell.counts(scenario);
            let analytic = match scenario {
                Scenario::Multi => Some(analytic_expected_fp(cfg, cell.theta_seconds)?),
                Scenario::Once => None,
            };
            Ok(ThresholdReport {
                theta_seconds: cell.theta_seconds,
                theta_days: cell.theta_seconds as f64 / DAY as f64,
                shape_n: cell.shape_n,
                mean_up_seconds: cell.mean_up_seconds,
                tp: c.tp,
                fp: c.fp,
                fn_: c.fn_,
                precision: c.precision(),
                recall: c.recall(),
                fp_full_scale: c.fp as f64 / cfg.scale_factor,
                tp_full_scale: c.tp as f64 / cfg.scale_factor,
                fp_sigma: c.fp_sigma,
                tp_sigma: c.tp_sigma,
                tp_closed_form: true_positive_closed_form(cfg, cell.theta_seconds),
                analytic_expected_fp: analytic,
                deletions: cell.deletions,
                censored: cell.censored,
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(AdversaryReport {
        scenario,
        engine: outcome.engine,
        seed: cfg.seed,
        scale_factor: cfg.scale_factor,
        total_posts: outcome.total_posts,
        thresholds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small(engine: Engine) -> SimulationConfig {
        SimulationConfig {
            initial_posts: 2_000,
            creations_per_day: 8,
            deletions_per_day: 3,
            horizon_days: 200,
            availability_target: 0.9,
            mean_down: 3600.0,
            theta_star_for_tuning: None,
            thresholds: vec![20 * DAY, 60 * DAY],
            scenario: Scenario::Multi,
            scale_factor: 1e-6,
            seed: 11,
            engine,
        }
    }

    #[test]
    fn validation() {
        let mut c = small(Engine::Exact);
        c.thresholds = vec![200 * DAY];
        assert!(matches!(
            c.validate(),
            Err(SimError::ThresholdBeyondHorizon { .. })
        ));
        let mut c = small(Engine::Exact);
        c.deletions_per_day = 30;
        assert!(matches!(
            c.validate(),
            Err(SimError::TooManyDeletions { .. })
        ));
        let mut c = small(Engine::Exact);
        c.thresholds.clear();
        assert_eq!(c.validate(), Err(SimError::NoThresholds));
        let mut c = small(Engine::Exact);
        c.scale_factor = 0.0;
        assert!(c.validate().is_err());
        assert!(small(Engine::Exact).validate().is_ok());
    }

    #[test]
    fn multi_recall_is_one_and_tp_near_closed_form() {
        for engine in [Engine::Exact, Engine::Accelerated] {
            let cfg = small(engine);
            let r = run_simulation(&cfg).unwrap();
            for t in &r.thresholds {
                assert_eq!(t.fn_, 0);
                assert_eq!(t.recall, Some(1.0));
                let rel = (t.tp as f64 - t.tp_closed_form).abs() / t.tp_closed_form;
                assert!(
                    rel < 0.05,
                    "{engine:?} θ={} tp={} closed={}",
                    t.theta_days,
                    t.tp,
                    t.tp_closed_form
                );
            }
        }
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let cfg = small(Engine::Accelerated);
        let a = simulate(&cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let b = pool.install(|| simulate(&cfg).unwrap());
        assert_eq!(a, b);
    }
}
