//! Mechanism parameter selection: mean up time from an availability target
//! and the negative-binomial shape that keeps the down tail heaviest at the
//! estimated adversary threshold.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{DistributionError, DurationDistribution};
use crate::privacy::availability;

const SHAPE_LO: f64 = 1e-8;
const SHAPE_HI: f64 = 1.0;
const STATIONARITY_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TuningError {
    #[error("availability must lie strictly between 0 and 1, got {0}")]
    InvalidAvailability(f64),
    #[error("mean down time must be at least one second, got {0}")]
    InvalidMeanDown(f64),
    #[error("threshold estimate {theta_star} s must exceed the mean down time {mean_down} s")]
    ThresholdNotAboveMean { theta_star: f64, mean_down: f64 },
    #[error("tail probability is monotone in the shape over [{SHAPE_LO}, {SHAPE_HI}]; optimum at bracket edge {0}")]
    MonotoneObjective(f64),
    #[error("stationarity check failed at n = {shape}: d ln F / d ln n = {elasticity}")]
    NotStationary { shape: f64, elasticity: f64 },
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningSpec {
    pub availability_target: f64,
    /// Seconds.
    pub mean_down: f64,
    /// θ*, seconds.
    pub decision_threshold_estimate: f64,
}

impl TuningSpec {
    pub fn validate(&self) -> Result<(), TuningError> {
        check_availability(self.availability_target)?;
        if !(self.mean_down >= 1.0 && self.mean_down.is_finite()) {
            return Err(TuningError::InvalidMeanDown(self.mean_down));
        }
        if self.decision_threshold_estimate.is_nan()
            || self.decision_threshold_estimate <= self.mean_down
            || !self.decision_threshold_estimate.is_finite()
        {
            return Err(TuningError::ThresholdNotAboveMean {
                theta_star: self.decision_threshold_estimate,
                mean_down: self.mean_down,
            });
        }
        Ok(())
    }
}

fn check_availability(a: f64) -> Result<(), TuningError> {
    if a > 0.0 && a < 1.0 {
        Ok(())
    } else {
        Err(TuningError::InvalidAvailability(a))
    }
}

/// Inverts availability = μu / (μu + μd) for μu.
pub fn mean_up_for_availability(availability: f64, mean_down: f64) -> Result<f64, TuningError> {
    check_availability(availability)?;
    Ok(mean_down * availability / (1.0 - availability))
}

fn ln_tail(mean_down: f64, theta_star: f64, ln_n: f64) -> Result<f64, TuningError> {
    let d = DurationDistribution::negative_binomial(mean_down, ln_n.exp())?;
    Ok(d.ln_ccdf(theta_star as u64 - 1))
}

/// Shape n maximizing P(T_d > θ* − 1) for a negative-binomial down time with
/// the given mean. Golden-section search on ln n over [1e-8, 1].
pub fn optimal_shape(mean_down: f64, theta_star: f64) -> Result<f64, TuningError> {
    if !(mean_down > 1.0 && mean_down.is_finite()) {
        return Err(TuningError::InvalidMeanDown(mean_down));
    }
    if !(theta_star > mean_down && theta_star.is_finite()) {
        return Err(TuningError::ThresholdNotAboveMean {
            theta_star,
            mean_down,
        });
    }
    let theta = theta_star.round();
    let f = |x: f64| ln_tail(mean_down, theta, x);

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (SHAPE_LO.ln(), SHAPE_HI.ln());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > 1e-9 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    let edge = 1e-3;
    if x - SHAPE_LO.ln() < edge || SHAPE_HI.ln() - x < edge {
        return Err(TuningError::MonotoneObjective(x.exp()));
    }

    let elasticity = shape_elasticity(mean_down, theta, x.exp())?;
    if elasticity.abs() >= STATIONARITY_TOL {
        return Err(TuningError::NotStationary {
            shape: x.exp(),
            elasticity,
        });
    }
    Ok(x.exp())
}

/// Central finite difference of ln P(T_d > θ − 1) with respect to ln n.
pub fn shape_elasticity(mean_down: f64, theta: f64, shape: f64) -> Result<f64, TuningError> {
    let h = 1e-4;
    let x = shape.ln();
    Ok((ln_tail(mean_down, theta, x + h)? - ln_tail(mean_down, theta, x - h)?) / (2.0 * h))
}

/// Up and down distributions for one deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct Mechanism {
    pub up: DurationDistribution,
    pub down: DurationDistribution,
    pub spec: TuningSpec,
}

impl Mechanism {
    pub fn mean_up(&self) -> f64 {
        self.up.mean()
    }

    pub fn mean_down(&self) -> f64 {
        self.down.mean()
    }

    pub fn shape(&self) -> f64 {
        self.down.shape().unwrap_or(f64::NAN)
    }

    pub fn availability(&self) -> f64 {
        availability(self.mean_up(), self.mean_down())
    }

    pub fn report(&self) -> TuneReport {
        TuneReport {
            mean_up_seconds: self.mean_up(),
            mean_down_seconds: self.mean_down(),
            shape_n: self.shape(),
            availability: self.availability(),
            theta_star_seconds: self.spec.decision_threshold_estimate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub mean_up_seconds: f64,
    pub mean_down_seconds: f64,
    pub shape_n: f64,
    pub availability: f64,
    pub theta_star_seconds: f64,
}

/// Geometric up time for the availability target, negative-binomial down
/// time with the tuned shape.
pub fn build_mechanism(spec: TuningSpec) -> Result<Mechanism, TuningError> {
    spec.validate()?;
    let mean_up = mean_up_for_availability(spec.availability_target, spec.mean_down)?;
    let shape = optimal_shape(spec.mean_down, spec.decision_threshold_estimate)?;
    Ok(Mechanism {
        up: DurationDistribution::geometric(mean_up)?,
        down: DurationDistribution::negative_binomial(spec.mean_down, shape)?,
        spec,
    })
}
