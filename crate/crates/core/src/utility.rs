//! Fraction of interactions that land while their post is visible.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::DurationDistribution;
use crate::schedule::{generate_schedule, rng_stream};
use crate::sim::DAY;
use crate::tuning::{build_mechanism, TuningError, TuningSpec};

/// Default offset mean: 1 − e^{−3600/3930} ≈ 0.60 of interactions in the first hour.
pub const DEFAULT_DECAY_MEAN: f64 = 3930.0;

#[derive(Debug, Error)]
pub enum UtilityError {
    #[error("line {line}: {msg}")]
    Malformed { line: u64, msg: String },
    #[error("line {line}: negative offset {offset}")]
    NegativeOffset { line: u64, offset: i64 },
    #[error("line {line}: post {key} was created at {first}, not {found}")]
    InconsistentCreation {
        line: u64,
        key: String,
        first: u64,
        found: u64,
    },
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Tuning(#[from] TuningError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TracePost {
    pub post_key: String,
    pub creation_time: u64,
    /// Seconds after creation, sorted.
    pub offsets: Vec<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionTrace {
    pub posts: Vec<TracePost>,
}

impl InteractionTrace {
    pub fn interaction_count(&self) -> u64 {
        self.posts.iter().map(|p| p.offsets.len() as u64).sum()
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    post_key: String,
    creation_epoch_seconds: u64,
    offset_seconds: i64,
}

/// Reads `post_key,creation_epoch_seconds,offset_seconds` rows. Posts keep
/// the order of their first row; offsets are sorted.
pub fn load_trace(path: &Path) -> Result<InteractionTrace, UtilityError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut posts: Vec<TracePost> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| UtilityError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let row: Row = rec.deserialize(None).map_err(|e| UtilityError::Malformed {
            line,
            msg: e.to_string(),
        })?;
        if row.offset_seconds < 0 {
            return Err(UtilityError::NegativeOffset {
                line,
                offset: row.offset_seconds,
            });
        }
        let i = *index.entry(row.post_key.clone()).or_insert_with(|| {
            posts.push(TracePost {
                post_key: row.post_key.clone(),
                creation_time: row.creation_epoch_seconds,
                offsets: Vec::new(),
            });
            posts.len() - 1
        });
        let post = &mut posts[i];
        if post.creation_time != row.creation_epoch_seconds {
            return Err(UtilityError::InconsistentCreation {
                line,
                key: row.post_key,
                first: post.creation_time,
                found: row.creation_epoch_seconds,
            });
        }
        post.offsets.push(row.offset_seconds as u64);
    }
    for p in &mut posts {
        p.offsets.sort_unstable();
    }
    Ok(InteractionTrace { posts })
}

/// One row per interaction; posts without interactions are not written.
pub fn save_trace(path: &Path, trace: &InteractionTrace) -> Result<(), UtilityError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["post_key", "creation_epoch_seconds", "offset_seconds"])?;
    for p in &trace.posts {
        for o in &p.offsets {
            w.write_record([
                p.post_key.as_str(),
                &p.creation_time.to_string(),
                &o.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Poisson interaction counts with exponential offsets (floored to whole seconds).
pub fn generate_synthetic_trace<R: Rng + ?Sized>(
    n_posts: usize,
    interactions_per_post_mean: f64,
    decay_mean: f64,
    rng: &mut R,
) -> Result<InteractionTrace, UtilityError> {
    if n_posts == 0 {
        return Err(UtilityError::NonPositive("n_posts"));
    }
    if interactions_per_post_mean.is_nan() || interactions_per_post_mean <= 0.0 {
        return Err(UtilityError::NonPositive("interactions_per_post_mean"));
    }
    if decay_mean.is_nan() || decay_mean <= 0.0 {
        return Err(UtilityError::NonPositive("decay_mean"));
    }
    let count = Poisson::new(interactions_per_post_mean).expect("positive mean");
    let offset = Exp::new(1.0 / decay_mean).expect("positive rate");
    let posts = (0..n_posts)
        .map(|i| {
            let k = count.sample(rng) as usize;
            let mut offsets: Vec<u64> = (0..k).map(|_| offset.sample(rng).floor() as u64).collect();
            offsets.sort_unstable();
            TracePost {
                post_key: format!("p{i}"),
                creation_time: 0,
                offsets,
            }
        })
        .collect();
    Ok(InteractionTrace { posts })
}

/// Offsets uniform over `[0, window)`, a fixed number per post.
pub fn generate_uniform_trace<R: Rng + ?Sized>(
    n_posts: usize,
    interactions_per_post: usize,
    window: u64,
    rng: &mut R,
) -> InteractionTrace {
    let posts = (0..n_posts)
        .map(|i| {
            let mut offsets: Vec<u64> = (0..interactions_per_post)
                .map(|_| rng.gen_range(0..window))
                .collect();
            offsets.sort_unstable();
            TracePost {
                post_key: format!("p{i}"),
                creation_time: 0,
                offsets,
            }
        })
        .collect();
    InteractionTrace { posts }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Utility {
    Measured { allowed: u64, missed: u64 },
    NoInteractions,
}

impl Utility {
    pub fn fraction(&self) -> Option<f64> {
        match *self {
            Utility::Measured { allowed, missed } => {
                Some(allowed as f64 / (allowed + missed) as f64)
            }
            Utility::NoInteractions => None,
        }
    }
}

/// Draws one schedule per post (stream = post index) and counts the
/// interactions that fall in an up phase.
pub fn evaluate_utility(
    trace: &InteractionTrace,
    up: &DurationDistribution,
    down: &DurationDistribution,
    seed: u64,
) -> Utility {
    let (allowed, missed) = trace
        .posts
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let Some(&last) = p.offsets.last() else {
                return (0, 0);
            };
            let s = generate_schedule(
                up,
                down,
                p.creation_time,
                last + 1,
                rng_stream(seed, i as u64),
            )
            .expect("non-empty horizon");
            let up_hits = p
                .offsets
                .iter()
                .filter(|&&o| s.is_up(p.creation_time + o).expect("covered"))
                .count() as u64;
            (up_hits, p.offsets.len() as u64 - up_hits)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    if allowed + missed == 0 {
        Utility::NoInteractions
    } else {
        Utility::Measured { allowed, missed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityCell {
    pub availability: f64,
    pub theta_days: u64,
    pub shape_n: f64,
    pub utility: Utility,
}

/// Availability × threshold grid, each cell with the mechanism tuned for that threshold.
pub fn utility_grid(
    trace: &InteractionTrace,
    availabilities: &[f64],
    thresholds_days: &[u64],
    mean_down: f64,
    seed: u64,
) -> Result<Vec<UtilityCell>, UtilityError> {
    let mut out = Vec::new();
    for &a in availabilities {
        for &d in thresholds_days {
            let m = build_mechanism(TuningSpec {
                availability_target: a,
                mean_down,
                decision_threshold_estimate: (d * DAY) as f64,
            })?;
            out.push(UtilityCell {
                availability: a,
                theta_days: d,
                shape_n: m.shape(),
                utility: evaluate_utility(trace, &m.up, &m.down, seed),
            });
        }
    }
    Ok(out)
}
