//! Likelihood-ratio deletion privacy, availability, and the curve generators
//! used to compare candidate distributions.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{DistributionKind, DurationDistribution};

#[derive(Debug, Error)]
pub enum PrivacyError {
    #[error("observation durations must be at least one second (last_up {last_up}, down_elapsed {down_elapsed})")]
    EmptyPhase { last_up: u64, down_elapsed: u64 },
    #[error("as_of {as_of} precedes down_elapsed {down_elapsed}")]
    BeforeEpoch { as_of: u64, down_elapsed: u64 },
    #[error("curve step must be at least one second")]
    ZeroStep,
    #[error("writing curve: {0}")]
    Io(#[from] std::io::Error),
}

/// What a snapshot adversary has seen of a currently hidden post.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationSummary {
    /// Δt_u, seconds.
    pub last_up: u64,
    /// Δt_d, seconds.
    pub down_elapsed: u64,
    pub as_of: u64,
}

impl ObservationSummary {
    pub fn new(last_up: u64, down_elapsed: u64, as_of: u64) -> Result<Self, PrivacyError> {
        if last_up == 0 || down_elapsed == 0 {
            return Err(PrivacyError::EmptyPhase {
                last_up,
                down_elapsed,
            });
        }
        if as_of < down_elapsed {
            return Err(PrivacyError::BeforeEpoch {
                as_of,
                down_elapsed,
            });
        }
        Ok(ObservationSummary {
            last_up,
            down_elapsed,
            as_of,
        })
    }

    pub fn down_started_at(&self) -> u64 {
        self.as_of - self.down_elapsed
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LikelihoodRatio {
    /// Linear scale; `+inf` once the down phase outlasts the down support.
    Ratio(f64),
    /// The last up phase cannot occur under the mechanism, so the hidden
    /// state can only be a deletion.
    Certain,
}

impl LikelihoodRatio {
    pub fn value(self) -> f64 {
        match self {
            LikelihoodRatio::Ratio(v) => v,
            LikelihoodRatio::Certain => f64::INFINITY,
        }
    }

    pub fn log10(self) -> f64 {
        self.value().log10()
    }

    pub fn is_infinite(self) -> bool {
        self.value().is_infinite()
    }
}

/// Probability of the observation given the post is not deleted:
/// f_up(Δt_u) · F̄_down(Δt_d − 1).
pub fn likelihood_not_deleted(
    up: &DurationDistribution,
    down: &DurationDistribution,
    obs: &ObservationSummary,
) -> f64 {
    up.pmf(obs.last_up) * down.ccdf(obs.down_elapsed - 1)
}

/// Supremum over deletion times of the observation probability given a
/// deletion: F̄_up(Δt_u) + f_up(Δt_u).
pub fn likelihood_deleted(up: &DurationDistribution, obs: &ObservationSummary) -> f64 {
    up.ccdf(obs.last_up) + up.pmf(obs.last_up)
}

pub fn likelihood_ratio(
    up: &DurationDistribution,
    down: &DurationDistribution,
    obs: &ObservationSummary,
) -> LikelihoodRatio {
    let ln_f = up.ln_pmf(obs.last_up);
    if ln_f == f64::NEG_INFINITY {
        return LikelihoodRatio::Certain;
    }
    let ih = match up.inverse_hazard(obs.last_up) {
        Ok(v) => v,
        Err(_) => return LikelihoodRatio::Certain,
    };
    LikelihoodRatio::Ratio(((1.0 + ih).ln() - down.ln_ccdf(obs.down_elapsed - 1)).exp())
}

/// Long-run visible fraction μu / (μu + μd).
pub fn availability(mean_up: f64, mean_down: f64) -> f64 {
    mean_up / (mean_up + mean_down)
}

/// A sampled curve, `(t_seconds, value)`.
pub type Curve = Vec<(u64, f64)>;

fn grid(t_max: u64, step: u64) -> Result<impl Iterator<Item = u64>, PrivacyError> {
    if step == 0 {
        return Err(PrivacyError::ZeroStep);
    }
    Ok((1..=t_max / step).map(move |i| i * step))
}

/// F̄(t)/f(t) at t = step, 2·step, … ≤ t_max; infinity where f(t) = 0.
pub fn inverse_hazard_curve(
    d: &DurationDistribution,
    t_max: u64,
    step: u64,
) -> Result<Curve, PrivacyError> {
    Ok(grid(t_max, step)?
        .map(|t| (t, d.inverse_hazard(t).unwrap_or(f64::INFINITY)))
        .collect())
}

/// 1/F̄(t − 1) at t = step, 2·step, … ≤ t_max.
pub fn inverse_ccdf_curve(
    d: &DurationDistribution,
    t_max: u64,
    step: u64,
) -> Result<Curve, PrivacyError> {
    Ok(grid(t_max, step)?
        .map(|t| (t, (-d.ln_ccdf(t - 1)).exp()))
        .collect())
}

/// LR against Δt_d for each candidate down distribution, with a geometric
/// up time whose inverse hazard is constant.
pub fn lr_curve(
    up: &DurationDistribution,
    downs: &[DurationDistribution],
    t_max: u64,
    step: u64,
) -> Result<Vec<Curve>, PrivacyError> {
    let c = up.inverse_hazard(1).unwrap_or(f64::INFINITY);
    let ts: Vec<u64> = grid(t_max, step)?.collect();
    Ok(downs
        .iter()
        .map(|d| {
            ts.iter()
                .map(|&t| (t, ((c + 1.0).ln() - d.ln_ccdf(t - 1)).exp()))
                .collect()
        })
        .collect())
}

/// `<figure>_<kind>[_n<shape>].csv`
pub fn curve_file_name(figure: &str, d: &DurationDistribution) -> String {
    match d.shape() {
        Some(n) => format!("{figure}_{}_n{n:e}.csv", d.kind()),
        None => format!("{figure}_{}.csv", d.kind()),
    }
}

fn format_value(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v:e}")
    }
}

/// Writes `t_seconds,value` rows, optionally as log10(value).
pub fn write_curve_csv(path: &Path, curve: &Curve, log10: bool) -> Result<(), PrivacyError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "t_seconds,value")?;
    for &(t, v) in curve {
        let v = if log10 { v.log10() } else { v };
        writeln!(out, "{t},{}", format_value(v))?;
    }
    out.flush()?;
    Ok(())
}

/// The candidates compared in the inverse-hazard and inverse-CCDF figures.
pub fn figure_candidates(mean: f64, nb_shape: f64) -> Vec<DurationDistribution> {
    use crate::distributions::make_distribution;
    DistributionKind::ALL[..4]
        .iter()
        .filter_map(|&kind| {
            let shape = (kind == DistributionKind::NegativeBinomial).then_some(nb_shape);
            make_distribution(kind, mean, shape).ok()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::make_distribution;

    const HOUR: u64 = 3600;
    const DAY: u64 = 86_400;

    fn obs(last_up: u64, down_elapsed: u64) -> ObservationSummary {
        ObservationSummary::new(last_up, down_elapsed, last_up + down_elapsed).unwrap()
    }

    #[test]
    fn geometric_up_at_first_down_second() {
        let up = DurationDistribution::geometric(32_400.0).unwrap();
        let down = DurationDistribution::negative_binomial(3600.0, 6e-4).unwrap();
        let lr = likelihood_ratio(&up, &down, &obs(77, 1)).value();
        assert!((lr - 32_400.0).abs() / 32_400.0 < 1e-12);
    }

    #[test]
    fn straw_man_one_is_certain_after_an_hour() {
        let up = DurationDistribution::degenerate(9 * HOUR).unwrap();
        let down = DurationDistribution::degenerate(HOUR).unwrap();
        assert!(likelihood_ratio(&up, &down, &obs(9 * HOUR, 3601)).is_infinite());
        assert!(!likelihood_ratio(&up, &down, &obs(9 * HOUR, 3600)).is_infinite());
        // an up phase shorter than nine hours never happens without a deletion
        assert_eq!(
            likelihood_ratio(&up, &down, &obs(HOUR, 10)),
            LikelihoodRatio::Certain
        );
    }

    #[test]
    fn composed_half_year_ratio() {
        let up = DurationDistribution::geometric(32_400.0).unwrap();
        let down = DurationDistribution::negative_binomial(3600.0, 1e-4).unwrap();
        let lr = likelihood_ratio(&up, &down, &obs(10, 180 * DAY)).value();
        let expected = 32_400.0 / down.ccdf(180 * DAY - 1);
        assert!((lr - expected).abs() / expected < 1e-10);
    }

    #[test]
    fn availability_examples() {
        assert!((availability(9.0, 1.0) - 0.9).abs() < 1e-15);
        assert_eq!(availability(7.0, 7.0), 0.5);
        assert!((availability(19.0, 1.0) - 0.95).abs() < 1e-15);
    }

    #[test]
    fn observation_validation() {
        assert!(ObservationSummary::new(0, 5, 10).is_err());
        assert!(ObservationSummary::new(5, 0, 10).is_err());
        assert!(ObservationSummary::new(5, 11, 10).is_err());
        assert_eq!(obs(4, 6).down_started_at(), 4);
    }

    #[test]
    fn hazard_curve_shapes() {
        let g = DurationDistribution::geometric(9.0 * 3600.0).unwrap();
        let c = inverse_hazard_curve(&g, DAY, 600).unwrap();
        assert_eq!(c.len(), 144);
        assert!(c.iter().all(|&(_, v)| (v - 32_399.0).abs() < 1e-6));

        let d = DurationDistribution::degenerate(3600).unwrap();
        let c = inverse_hazard_curve(&d, 7200, 1200).unwrap();
        assert_eq!(c[2], (3600, 0.0));
        assert!(c[1].1.is_infinite() && c[3].1.is_infinite());

        let nb = DurationDistribution::negative_binomial(9.0 * 3600.0, 0.15).unwrap();
        let c = inverse_hazard_curve(&nb, DAY, 3600).unwrap();
        assert!((c[0].1 - c[20].1).abs() > 1.0);
        assert!(inverse_hazard_curve(&nb, DAY, 0).is_err());
    }

    #[test]
    fn ccdf_curve_shapes() {
        let p = make_distribution(DistributionKind::Poisson, 3600.0, None).unwrap();
        let c = inverse_ccdf_curve(&p, 2 * HOUR, 60).unwrap();
        assert!(c[9].1 < 1.0 + 1e-9);
        assert!(c.last().unwrap().1 > 1e50);

        let g = DurationDistribution::geometric(3600.0).unwrap();
        let z = make_distribution(DistributionKind::Zeta, 3600.0, None).unwrap();
        let small = 60;
        let large = 30 * DAY;
        assert!(1.0 / g.ccdf(small - 1) < 1.0 / z.ccdf(small - 1));
        assert!(1.0 / g.ccdf(large - 1) > 1.0 / z.ccdf(large - 1));
        for d in figure_candidates(3600.0, 6e-4) {
            assert!(inverse_ccdf_curve(&d, 1, 1).unwrap()[0].1 >= 1.0);
        }
    }

    #[test]
    fn file_names() {
        let nb = DurationDistribution::negative_binomial(3600.0, 6e-4).unwrap();
        assert_eq!(curve_file_name("lr", &nb), "lr_negative-binomial_n6e-4.csv");
        let g = DurationDistribution::geometric(9.0).unwrap();
        assert_eq!(curve_file_name("hazard", &g), "hazard_geometric.csv");
    }

    #[test]
    fn csv_writes_infinity_marker() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        write_curve_csv(&path, &vec![(1, 10.0), (2, f64::INFINITY)], true).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "t_seconds,value\n1,1e0\n2,inf\n");
    }
}
