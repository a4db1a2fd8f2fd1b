//! Per-post visibility schedules: alternating up/down phases stored as
//! absolute toggle timestamps, with lazy prefix-stable extension.
//!
//! A boundary instant belongs to the phase that begins there, so the state at
//! `t` is up iff an even number of toggles are `<= t`.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::distributions::DurationDistribution;
use crate::privacy::ObservationSummary;

pub const YEAR_SECONDS: u64 = 365 * 86_400;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("time {t} precedes creation at {created_at}")]
    BeforeCreation { t: u64, created_at: u64 },
    #[error("time {t} lies beyond schedule coverage {covered_until}")]
    BeyondCoverage { t: u64, covered_until: u64 },
    #[error("post already deleted at {0}")]
    AlreadyDeleted(u64),
    #[error("horizon must be at least one second")]
    EmptyHorizon,
}

/// Generator for one post: ChaCha8 keyed by the global seed (expanded with
/// `seed_from_u64`), stream number = post index.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone)]
pub struct Schedule {
    created_at: u64,
    toggles: Vec<u64>,
    covered_until: u64,
    rng: ChaCha8Rng,
}

impl PartialEq for Schedule {
    fn eq(&self, other: &Self) -> bool {
        self.created_at == other.created_at
            && self.toggles == other.toggles
            && self.covered_until == other.covered_until
    }
}

/// Draws up-first alternating phases from `t0` until coverage reaches `t0 + horizon`.
pub fn generate_schedule(
    up: &DurationDistribution,
    down: &DurationDistribution,
    t0: u64,
    horizon: u64,
    rng: ChaCha8Rng,
) -> Result<Schedule, ScheduleError> {
    if horizon == 0 {
        return Err(ScheduleError::EmptyHorizon);
    }
    let mut s = Schedule {
        created_at: t0,
        toggles: Vec::new(),
        covered_until: t0,
        rng,
    };
    s.extend_until(up, down, t0.saturating_add(horizon));
    Ok(s)
}

/// Snapshot-producing extension; the original schedule is untouched.
pub fn extend_schedule(
    s: &Schedule,
    up: &DurationDistribution,
    down: &DurationDistribution,
    until: u64,
) -> Schedule {
    let mut next = s.clone();
    next.extend_until(up, down, until);
    next
}

impl Schedule {
    pub fn created_at(&self) -> u64 {
        self.created_at
    }

    pub fn toggles(&self) -> &[u64] {
        &self.toggles
    }

    pub fn covered_until(&self) -> u64 {
        self.covered_until
    }

    /// Appends phases from the embedded stream until the last toggle reaches
    /// `until`. Existing toggles are never modified.
    pub fn extend_until(
        &mut self,
        up: &DurationDistribution,
        down: &DurationDistribution,
        until: u64,
    ) -> usize {
        let before = self.toggles.len();
        let mut t = self.toggles.last().copied().unwrap_or(self.created_at);
        while t < until {
            let d = if self.toggles.len().is_multiple_of(2) {
                up
            } else {
                down
            };
            t = t.saturating_add(d.sample(&mut self.rng));
            self.toggles.push(t);
        }
        self.covered_until = self.covered_until.max(t);
        self.toggles.len() - before
    }

    fn check(&self, t: u64) -> Result<(), ScheduleError> {
        if t < self.created_at {
            return Err(ScheduleError::BeforeCreation {
                t,
                created_at: self.created_at,
            });
        }
        if t > self.covered_until {
            return Err(ScheduleError::BeyondCoverage {
                t,
                covered_until: self.covered_until,
            });
        }
        Ok(())
    }

    /// Number of toggles at or before `t`.
    fn toggles_through(&self, t: u64) -> usize {
        self.toggles.partition_point(|&x| x <= t)
    }

    /// Scheduled state, ignoring deletion.
    pub fn is_up(&self, t: u64) -> Result<bool, ScheduleError> {
        self.check(t)?;
        Ok(self.toggles_through(t).is_multiple_of(2))
    }

    /// Start of the phase containing `t`.
    fn phase_start(&self, count: usize) -> u64 {
        if count == 0 {
            self.created_at
        } else {
            self.toggles[count - 1]
        }
    }

    /// Seconds in `[a, b)` during which the schedule is up.
    pub fn up_time(&self, a: u64, b: u64) -> Result<u64, ScheduleError> {
        self.check(a)?;
        self.check(b)?;
        if b <= a {
            return Ok(0);
        }
        let mut total = 0;
        let mut idx = self.toggles_through(a);
        let mut cursor = a;
        while cursor < b {
            let end = self.toggles.get(idx).copied().unwrap_or(u64::MAX).min(b);
            if idx.is_multiple_of(2) {
                total += end - cursor;
            }
            cursor = end;
            idx += 1;
        }
        Ok(total)
    }

    /// Completed down phases of length ≥ `theta` starting in `[a, b]`.
    pub fn down_period_count_exceeding(&self, theta: u64, a: u64, b: u64) -> usize {
        self.toggles
            .chunks_exact(2)
            .filter(|pair| pair[0] >= a && pair[0] <= b && pair[1] - pair[0] >= theta)
            .count()
    }

    /// Debug dump, `toggle_index,timestamp_seconds`.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "toggle_index,timestamp_seconds")?;
        for (i, t) in self.toggles.iter().enumerate() {
            writeln!(out, "{i},{t}")?;
        }
        out.flush()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostRecord {
    pub post_id: String,
    pub owner_token: String,
    /// Erased on deletion.
    pub content: Option<Vec<u8>>,
    pub schedule: Schedule,
    deleted_at: Option<u64>,
}

impl PostRecord {
    pub fn new(post_id: String, owner_token: String, content: Vec<u8>, schedule: Schedule) -> Self {
        PostRecord {
            post_id,
            owner_token,
            content: Some(content),
            schedule,
            deleted_at: None,
        }
    }

    pub fn deleted_at(&self) -> Option<u64> {
        self.deleted_at
    }

    /// S(t): true until the deletion instant.
    pub fn real_state(&self, t: u64) -> bool {
        self.deleted_at.is_none_or(|d| t < d)
    }

    pub fn mark_deleted(&mut self, t: u64) -> Result<(), ScheduleError> {
        if let Some(d) = self.deleted_at {
            return Err(ScheduleError::AlreadyDeleted(d));
        }
        self.deleted_at = Some(t);
        self.content = None;
        Ok(())
    }
}

/// O(t): the schedule gated by the real state.
pub fn observable(post: &PostRecord, t: u64) -> Result<bool, ScheduleError> {
    if !post.real_state(t) {
        if t < post.schedule.created_at {
            return Err(ScheduleError::BeforeCreation {
                t,
                created_at: post.schedule.created_at,
            });
        }
        return Ok(false);
    }
    post.schedule.is_up(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observation {
    CurrentlyUp,
    Hidden(ObservationSummary),
    /// Deleted at its creation instant, so no up phase was ever seen.
    NeverVisible,
}

fn summary(last_up: u64, down_start: u64, t_c: u64) -> ObservationSummary {
    ObservationSummary {
        last_up,
        // at the toggle instant itself the down phase has been seen for one second
        down_elapsed: (t_c - down_start).max(1),
        as_of: t_c,
    }
}

/// The adversary's view of `post` at `t_c`.
pub fn observation_summary(post: &PostRecord, t_c: u64) -> Result<Observation, ScheduleError> {
    let s = &post.schedule;
    match post.deleted_at {
        Some(t_del) if t_c >= t_del => {
            s.check(t_del)?;
            let count = s.toggles_through(t_del);
            if count.is_multiple_of(2) {
                let up_start = s.phase_start(count);
                if t_del > up_start {
                    return Ok(Observation::Hidden(summary(t_del - up_start, t_del, t_c)));
                }
                if count == 0 {
                    return Ok(Observation::NeverVisible);
                }
                // deleted exactly as an up phase began: the previous down never ended
                let down_start = s.phase_start(count - 1);
                let last_up = down_start - s.phase_start(count - 2);
                Ok(Observation::Hidden(summary(last_up, down_start, t_c)))
            } else {
                let down_start = s.phase_start(count);
                let last_up = down_start - s.phase_start(count - 1);
                Ok(Observation::Hidden(summary(last_up, down_start, t_c)))
            }
        }
        _ => {
            s.check(t_c)?;
            let count = s.toggles_through(t_c);
            if count.is_multiple_of(2) {
                return Ok(Observation::CurrentlyUp);
            }
            let down_start = s.phase_start(count);
            let last_up = down_start - s.phase_start(count - 1);
            Ok(Observation::Hidden(summary(last_up, down_start, t_c)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: u64 = 3600;

    fn straw_man() -> (DurationDistribution, DurationDistribution) {
        (
            DurationDistribution::degenerate(9 * H).unwrap(),
            DurationDistribution::degenerate(H).unwrap(),
        )
    }

    fn straw_post(t0: u64) -> PostRecord {
        let (up, down) = straw_man();
        let s = generate_schedule(&up, &down, t0, 100 * H, rng_stream(1, 0)).unwrap();
        PostRecord::new("p".into(), "tok".into(), b"x".to_vec(), s)
    }

    #[test]
    fn degenerate_pattern() {
        let p = straw_post(1000);
        assert_eq!(
            &p.schedule.toggles()[..4],
            &[1000 + 9 * H, 1000 + 10 * H, 1000 + 19 * H, 1000 + 20 * H]
        );
        assert!(p.schedule.covered_until() >= 1000 + 100 * H);
    }

    #[test]
    fn observable_states() {
        let mut p = straw_post(0);
        assert!(observable(&p, 0).unwrap());
        assert!(observable(&p, 9 * H - 1).unwrap());
        assert!(!observable(&p, 9 * H).unwrap());
        assert!(!observable(&p, 10 * H - 1).unwrap());
        assert!(observable(&p, 10 * H).unwrap());
        p.mark_deleted(5 * H).unwrap();
        assert!(observable(&p, 5 * H - 1).unwrap());
        assert!(!observable(&p, 5 * H).unwrap());
        assert!(!observable(&p, 10 * H + 1).unwrap());
        assert_eq!(
            p.mark_deleted(6 * H),
            Err(ScheduleError::AlreadyDeleted(5 * H))
        );
        assert!(p.content.is_none());
        assert!(matches!(
            p.schedule.is_up(10_000 * H),
            Err(ScheduleError::BeyondCoverage { .. })
        ));
    }

    #[test]
    fn summaries() {
        let mut p = straw_post(0);
        assert_eq!(
            observation_summary(&p, H).unwrap(),
            Observation::CurrentlyUp
        );
        let Observation::Hidden(o) = observation_summary(&p, 9 * H + 100).unwrap() else {
            panic!()
        };
        assert_eq!(
            (o.last_up, o.down_elapsed, o.as_of),
            (9 * H, 100, 9 * H + 100)
        );

        p.mark_deleted(12 * H).unwrap();
        let Observation::Hidden(o) = observation_summary(&p, 20 * H).unwrap() else {
            panic!()
        };
        assert_eq!((o.last_up, o.down_elapsed), (2 * H, 8 * H));
    }

    #[test]
    fn deletion_at_phase_boundaries() {
        // deleted in a down phase: the whole down counts
        let mut p = straw_post(0);
        p.mark_deleted(9 * H + 10).unwrap();
        let Observation::Hidden(o) = observation_summary(&p, 11 * H).unwrap() else {
            panic!()
        };
        assert_eq!((o.last_up, o.down_elapsed), (9 * H, 2 * H));

        // deleted at the instant an up phase would begin
        let mut p = straw_post(0);
        p.mark_deleted(10 * H).unwrap();
        let Observation::Hidden(o) = observation_summary(&p, 11 * H).unwrap() else {
            panic!()
        };
        assert_eq!((o.last_up, o.down_elapsed), (9 * H, 2 * H));

        let mut p = straw_post(0);
        p.mark_deleted(0).unwrap();
        assert_eq!(
            observation_summary(&p, 5).unwrap(),
            Observation::NeverVisible
        );
    }

    #[test]
    fn extension_is_prefix_stable() {
        let up = DurationDistribution::geometric(32_400.0).unwrap();
        let down = DurationDistribution::negative_binomial(3600.0, 6e-4).unwrap();
        let s = generate_schedule(&up, &down, 0, YEAR_SECONDS, rng_stream(9, 4)).unwrap();
        let one = extend_schedule(&s, &up, &down, 3 * YEAR_SECONDS);
        let two = extend_schedule(
            &extend_schedule(&s, &up, &down, 2 * YEAR_SECONDS),
            &up,
            &down,
            3 * YEAR_SECONDS,
        );
        assert_eq!(one, two);
        assert_eq!(&one.toggles()[..s.toggles().len()], s.toggles());
        assert!(one.covered_until() >= 3 * YEAR_SECONDS);
        let again = generate_schedule(&up, &down, 0, YEAR_SECONDS, rng_stream(9, 4)).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn down_period_counts() {
        let (up, down) = straw_man();
        let s = generate_schedule(&up, &down, 0, 100 * H, rng_stream(0, 0)).unwrap();
        assert_eq!(s.down_period_count_exceeding(2 * H, 0, 100 * H), 0);
        // downs start at 9h, 19h, 29h
        assert_eq!(s.down_period_count_exceeding(H / 2, 0, 30 * H), 3);
    }

    #[test]
    fn up_time_counts_seconds() {
        let (up, down) = straw_man();
        let s = generate_schedule(&up, &down, 0, 100 * H, rng_stream(0, 0)).unwrap();
        assert_eq!(s.up_time(0, 20 * H).unwrap(), 18 * H);
        assert_eq!(s.up_time(9 * H - 5, 9 * H + 5).unwrap(), 5);
    }
}
