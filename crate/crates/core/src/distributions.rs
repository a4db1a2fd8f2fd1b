//! Discrete duration distributions over positive integer seconds.
//!
//! Negative-binomial and Poisson durations are shifted by one second so the
//! support starts at 1; the constructor's `mean` is the mean after the shift.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson, Zeta};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::{hurwitz_zeta, ln_gamma, ln_gamma_p, ln_gamma_ratio, ln_ibeta, riemann_zeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionKind {
    Geometric,
    NegativeBinomial,
    Zeta,
    Poisson,
    Degenerate,
    DiscreteUniform,
}

impl DistributionKind {
    pub const ALL: [DistributionKind; 6] = [
        DistributionKind::Geometric,
        DistributionKind::NegativeBinomial,
        DistributionKind::Zeta,
        DistributionKind::Poisson,
        DistributionKind::Degenerate,
        DistributionKind::DiscreteUniform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistributionKind::Geometric => "geometric",
            DistributionKind::NegativeBinomial => "negative-binomial",
            DistributionKind::Zeta => "zeta",
            DistributionKind::Poisson => "poisson",
            DistributionKind::Degenerate => "degenerate",
            DistributionKind::DiscreteUniform => "discrete-uniform",
        }
    }
}

impl fmt::Display for DistributionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistributionKind {
    type Err = DistributionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DistributionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| DistributionError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("unknown distribution kind `{0}`")]
    UnknownKind(String),
    #[error("mean must be positive and finite, got {0}")]
    NonPositiveMean(f64),
    #[error("{kind} requires a mean above {min}, got {mean}")]
    MeanTooSmall {
        kind: DistributionKind,
        min: f64,
        mean: f64,
    },
    #[error("{kind} with mean {mean} has no integer support")]
    NonIntegralSupport { kind: DistributionKind, mean: f64 },
    #[error("negative-binomial requires a positive shape parameter")]
    ShapeRequired,
    #[error("{0} takes no shape parameter")]
    UnexpectedShape(DistributionKind),
    #[error("shape parameter must be positive and finite, got {0}")]
    InvalidShape(f64),
    #[error("no zeta exponent s > 2 yields mean {0}")]
    ZetaMeanUnreachable(f64),
    #[error("duration {0} lies outside the support")]
    OutsideSupport(u64),
}

#[derive(Debug, Clone)]
enum Params {
    Geometric {
        p: f64,
        ln_p: f64,
        ln_q: f64,
    },
    NegativeBinomial {
        n: f64,
        mean0: f64,
        p: f64,
        q: f64,
        ln_p: f64,
        ln_q: f64,
        gamma: Gamma<f64>,
    },
    Zeta {
        s: f64,
        ln_zeta_s: f64,
        zeta_s: f64,
        sampler: Zeta<f64>,
    },
    Poisson {
        lambda: f64,
        sampler: Poisson<f64>,
    },
    Degenerate {
        at: u64,
    },
    Uniform {
        upper: u64,
    },
}

/// A distribution over positive integer durations, in seconds.
///
/// Immutable after construction; sampling takes a caller-owned generator.
#[derive(Debug, Clone)]
pub struct DurationDistribution {
    kind: DistributionKind,
    mean: f64,
    params: Params,
}

impl PartialEq for DurationDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.mean == other.mean && self.shape() == other.shape()
    }
}

/// Builds a distribution of the given kind whose mean is `mean` seconds.
pub fn make_distribution(
    kind: DistributionKind,
    mean: f64,
    shape: Option<f64>,
) -> Result<DurationDistribution, DistributionError> {
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(DistributionError::NonPositiveMean(mean));
    }
    match (kind, shape) {
        (DistributionKind::NegativeBinomial, None) => return Err(DistributionError::ShapeRequired),
        (DistributionKind::NegativeBinomial, Some(n)) if !(n > 0.0 && n.is_finite()) => {
            return Err(DistributionError::InvalidShape(n))
        }
        (DistributionKind::NegativeBinomial, Some(_)) => {}
        (other, Some(_)) => return Err(DistributionError::UnexpectedShape(other)),
        (_, None) => {}
    }
    let too_small = |min: f64| DistributionError::MeanTooSmall { kind, min, mean };
    let params = match kind {
        DistributionKind::Geometric => {
            if mean < 1.0 {
                return Err(too_small(1.0));
            }
            let p = 1.0 / mean;
            Params::Geometric {
                p,
                ln_p: p.ln(),
                ln_q: (-p).ln_1p(),
            }
        }
        DistributionKind::NegativeBinomial => {
            if mean <= 1.0 {
                return Err(too_small(1.0));
            }
            let n = shape.unwrap_or_default();
            let mean0 = mean - 1.0;
            let p = n / (n + mean0);
            let q = mean0 / (n + mean0);
            let gamma = Gamma::new(n, mean0 / n).map_err(|_| DistributionError::InvalidShape(n))?;
            Params::NegativeBinomial {
                n,
                mean0,
                p,
                q,
                ln_p: n.ln() - (n + mean0).ln(),
                ln_q: mean0.ln() - (n + mean0).ln(),
                gamma,
            }
        }
        DistributionKind::Zeta => {
            if mean <= 1.0 {
                return Err(DistributionError::ZetaMeanUnreachable(mean));
            }
            let s = solve_zeta_exponent(mean)?;
            let zeta_s = riemann_zeta(s);
            let sampler = Zeta::new(s).map_err(|_| DistributionError::ZetaMeanUnreachable(mean))?;
            Params::Zeta {
                s,
                ln_zeta_s: zeta_s.ln(),
                zeta_s,
                sampler,
            }
        }
        DistributionKind::Poisson => {
            if mean <= 1.0 {
                return Err(too_small(1.0));
            }
            let lambda = mean - 1.0;
            let sampler = Poisson::new(lambda).map_err(|_| too_small(1.0))?;
            Params::Poisson { lambda, sampler }
        }
        DistributionKind::Degenerate => {
            if mean < 1.0 {
                return Err(too_small(1.0));
            }
            if mean.fract() != 0.0 {
                return Err(DistributionError::NonIntegralSupport { kind, mean });
            }
            Params::Degenerate { at: mean as u64 }
        }
        DistributionKind::DiscreteUniform => {
            if mean < 1.0 {
                return Err(too_small(1.0));
            }
            let upper = 2.0 * mean - 1.0;
            if upper.fract() != 0.0 {
                return Err(DistributionError::NonIntegralSupport { kind, mean });
            }
            Params::Uniform {
                upper: upper as u64,
            }
        }
    };
    let mut dist = DurationDistribution { kind, mean, params };
    dist.mean = dist.analytic_mean();
    Ok(dist)
}

fn zeta_mean(s: f64) -> f64 {
    riemann_zeta(s - 1.0) / riemann_zeta(s)
}

/// Bisection on mean(s) = ζ(s−1)/ζ(s), decreasing in s on (2, ∞).
fn solve_zeta_exponent(mean: f64) -> Result<f64, DistributionError> {
    let mut lo = 2.0 + 1e-12;
    let mut hi = 64.0;
    if zeta_mean(lo) < mean || zeta_mean(hi) > mean {
        return Err(DistributionError::ZetaMeanUnreachable(mean));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if zeta_mean(mid) > mean {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

impl DurationDistribution {
    pub fn geometric(mean: f64) -> Result<Self, DistributionError> {
        make_distribution(DistributionKind::Geometric, mean, None)
    }

    pub fn negative_binomial(mean: f64, shape: f64) -> Result<Self, DistributionError> {
        make_distribution(DistributionKind::NegativeBinomial, mean, Some(shape))
    }

    pub fn degenerate(at: u64) -> Result<Self, DistributionError> {
        make_distribution(DistributionKind::Degenerate, at as f64, None)
    }

    /// Uniform over `{1, …, upper}`.
    pub fn uniform_up_to(upper: u64) -> Result<Self, DistributionError> {
        make_distribution(
            DistributionKind::DiscreteUniform,
            (upper as f64 + 1.0) / 2.0,
            None,
        )
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    /// Analytic mean in seconds (after the support shift).
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Negative-binomial shape `n`; `None` for the other kinds.
    pub fn shape(&self) -> Option<f64> {
        match self.params {
            Params::NegativeBinomial { n, .. } => Some(n),
            _ => None,
        }
    }

    /// Geometric success probability, negative-binomial `p`.
    pub fn success_probability(&self) -> Option<f64> {
        match self.params {
            Params::Geometric { p, .. } | Params::NegativeBinomial { p, .. } => Some(p),
            _ => None,
        }
    }

    /// Solved tail exponent for zeta distributions.
    pub fn zeta_exponent(&self) -> Option<f64> {
        match self.params {
            Params::Zeta { s, .. } => Some(s),
            _ => None,
        }
    }

    fn analytic_mean(&self) -> f64 {
        match &self.params {
            Params::Geometric { p, .. } => 1.0 / p,
            Params::NegativeBinomial { n, p, q, .. } => n * q / p + 1.0,
            Params::Zeta { s, .. } => zeta_mean(*s),
            Params::Poisson { lambda, .. } => lambda + 1.0,
            Params::Degenerate { at } => *at as f64,
            Params::Uniform { upper } => (*upper as f64 + 1.0) / 2.0,
        }
    }

    /// Variance, infinite for zeta with s ≤ 3.
    pub fn variance(&self) -> f64 {
        match &self.params {
            Params::Geometric { p, .. } => (1.0 - p) / (p * p),
            Params::NegativeBinomial { mean0, p, .. } => mean0 / p,
            Params::Zeta { s, zeta_s, .. } => {
                if *s <= 3.0 {
                    f64::INFINITY
                } else {
                    riemann_zeta(s - 2.0) / zeta_s - self.mean * self.mean
                }
            }
            Params::Poisson { lambda, .. } => *lambda,
            Params::Degenerate { .. } => 0.0,
            Params::Uniform { upper } => {
                let h = *upper as f64;
                (h * h - 1.0) / 12.0
            }
        }
    }

    /// ln f(k); negative infinity outside the support.
    pub fn ln_pmf(&self, k: u64) -> f64 {
        if k == 0 {
            return f64::NEG_INFINITY;
        }
        let kf = k as f64;
        match &self.params {
            Params::Geometric { ln_p, ln_q, .. } => {
                if k == 1 {
                    *ln_p
                } else {
                    ln_p + (kf - 1.0) * ln_q
                }
            }
            Params::NegativeBinomial { n, ln_p, ln_q, .. } => {
                let j = kf - 1.0;
                if k == 1 {
                    n * ln_p
                } else {
                    // lnΓ(j+n) − lnΓ(j+1) − lnΓ(n)
                    ln_gamma_ratio(j + 1.0, n - 1.0) - ln_gamma(*n) + n * ln_p + j * ln_q
                }
            }
            Params::Zeta { s, ln_zeta_s, .. } => -s * kf.ln() - ln_zeta_s,
            Params::Poisson { lambda, .. } => {
                let j = kf - 1.0;
                j * lambda.ln() - lambda - ln_gamma(j + 1.0)
            }
            Params::Degenerate { at } => {
                if k == *at {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Params::Uniform { upper } => {
                if k <= *upper {
                    -(*upper as f64).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// f(k) = P(X = k).
    pub fn pmf(&self, k: u64) -> f64 {
        self.ln_pmf(k).exp()
    }

    /// ln P(X > k).
    pub fn ln_ccdf(&self, k: u64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let kf = k as f64;
        match &self.params {
            Params::Geometric { ln_q, .. } => kf * ln_q,
            // P(D > k) = P(X ≥ k) = I_{1−p}(k, n)
            Params::NegativeBinomial { n, p, q, .. } => ln_ibeta(*q, *p, kf, *n),
            Params::Zeta { s, zeta_s, .. } => (hurwitz_zeta(*s, kf + 1.0) / zeta_s).ln(),
            // P(X ≥ k) for X ~ Poisson(λ) is the regularized lower gamma P(k, λ)
            Params::Poisson { lambda, .. } => ln_gamma_p(kf, *lambda),
            Params::Degenerate { at } => {
                if k < *at {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Params::Uniform { upper } => {
                if k >= *upper {
                    f64::NEG_INFINITY
                } else {
                    ((*upper - k) as f64).ln() - (*upper as f64).ln()
                }
            }
        }
    }

    /// F̄(k) = P(X > k).
    pub fn ccdf(&self, k: u64) -> f64 {
        self.ln_ccdf(k).exp()
    }

    /// P(X ≥ k) = F̄(k − 1), with P(X ≥ 0) = 1.
    pub fn survival_at_least(&self, k: u64) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.ccdf(k - 1)
        }
    }

    /// F̄(k) / f(k), the inverse hazard rate.
    pub fn inverse_hazard(&self, k: u64) -> Result<f64, DistributionError> {
        let ln_f = self.ln_pmf(k);
        if ln_f == f64::NEG_INFINITY {
            return Err(DistributionError::OutsideSupport(k));
        }
        match &self.params {
            // memoryless: q^k / (p q^{k−1}) = (1 − p) / p
            Params::Geometric { p, .. } => Ok((1.0 - p) / p),
            _ => Ok((self.ln_ccdf(k) - ln_f).exp()),
        }
    }

    /// Draws one duration (≥ 1).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match &self.params {
            Params::Geometric { p, ln_q, .. } => {
                if *p >= 1.0 {
                    return 1;
                }
                let u: f64 = 1.0 - rng.gen::<f64>();
                1 + to_count(u.ln() / ln_q)
            }
            Params::NegativeBinomial { gamma, .. } => 1 + poisson_count(gamma.sample(rng), rng),
            Params::Zeta { sampler, .. } => to_count(sampler.sample(rng)).max(1),
            Params::Poisson { sampler, .. } => 1 + to_count(sampler.sample(rng)),
            Params::Degenerate { at } => *at,
            Params::Uniform { upper } => rng.gen_range(1..=*upper),
        }
    }

    /// Draws a duration conditioned on being at least `min`.
    ///
    /// The caller must only ask for tails with positive probability.
    pub fn sample_at_least<R: Rng + ?Sized>(&self, min: u64, rng: &mut R) -> u64 {
        if min <= 1 {
            return self.sample(rng);
        }
        match &self.params {
            Params::Geometric { .. } => min - 1 + self.sample(rng),
            Params::Degenerate { at } => *at,
            Params::Uniform { upper } => rng.gen_range(min.min(*upper)..=*upper),
            Params::NegativeBinomial { n, mean0, .. } if *n <= 1.0 && min >= 1_000 => {
                1 + nb_tail_sample(*n, mean0 / n, min - 1, rng)
            }
            _ => {
                let ln_tail = self.ln_ccdf(min - 1);
                if ln_tail > (0.25f64).ln() {
                    loop {
                        let d = self.sample(rng);
                        if d >= min {
                            return d;
                        }
                    }
                }
                self.inverse_tail_sample(min, ln_tail, rng)
            }
        }
    }

    /// Smallest k ≥ min with F̄(k) ≤ u·F̄(min − 1).
    fn inverse_tail_sample<R: Rng + ?Sized>(&self, min: u64, ln_tail: f64, rng: &mut R) -> u64 {
        let u: f64 = 1.0 - rng.gen::<f64>();
        let target = u.ln() + ln_tail;
        let mut lo = min - 1;
        let mut hi = min;
        let mut width = 1u64;
        while self.ln_ccdf(hi) > target {
            lo = hi;
            width = width.saturating_mul(2);
            match hi.checked_add(width) {
                Some(next) => hi = next,
                None => return u64::MAX,
            }
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.ln_ccdf(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// (P(X < k), E[X; X < k], E[X²; X < k]).
    pub fn moments_below(&self, k: u64) -> (f64, f64, f64) {
        if k <= 1 {
            return (0.0, 0.0, 0.0);
        }
        let kf = k as f64;
        match &self.params {
            Params::Geometric { p, .. } => {
                let above = self.survival_at_least(k);
                let m = kf - 1.0;
                let total1 = 1.0 / p;
                let total2 = (2.0 - p) / (p * p);
                let a1 = above * (m + 1.0 / p);
                let a2 = above * (m * m + 2.0 * m / p + (2.0 - p) / (p * p));
                (1.0 - above, total1 - a1, total2 - a2)
            }
            Params::NegativeBinomial { n, mean0, p, q, .. } => {
                // D = X + 1 and D ≥ k ⇔ X ≥ m with m = k − 1.
                // k f(k; n) = mean0 f(k−1; n+1) and k(k−1) f(k; n) = mean0 (n+1) q/p f(k−2; n+2)
                let m = kf - 1.0;
                let tail = |shape: f64, from: f64| -> f64 {
                    if from <= 0.0 {
                        1.0
                    } else {
                        ln_ibeta(*q, *p, from, shape).exp()
                    }
                };
                let p_above = tail(*n, m);
                let e1_above = mean0 * tail(n + 1.0, m - 1.0);
                let ff_total = mean0 * (n + 1.0) * q / p;
                let e2f_above = ff_total * tail(n + 2.0, m - 2.0);
                let d1_total = mean0 + 1.0;
                let d2_total = ff_total + 3.0 * mean0 + 1.0;
                let d1_above = e1_above + p_above;
                let d2_above = e2f_above + 3.0 * e1_above + p_above;
                (1.0 - p_above, d1_total - d1_above, d2_total - d2_above)
            }
            Params::Degenerate { at } => {
                if *at < k {
                    let a = *at as f64;
                    (1.0, a, a * a)
                } else {
                    (0.0, 0.0, 0.0)
                }
            }
            _ => {
                let mut acc = (0.0, 0.0, 0.0);
                let (cap, mode) = match &self.params {
                    Params::Poisson { lambda, .. } => {
                        (1.0 + lambda + 40.0 * lambda.sqrt() + 100.0, 1.0 + lambda)
                    }
                    Params::Uniform { upper } => (*upper as f64, 1.0),
                    _ => (f64::INFINITY, 1.0),
                };
                let last = (k - 1).min(cap.min(u64::MAX as f64) as u64);
                for j in 1..=last {
                    let jf = j as f64;
                    let f = self.pmf(j);
                    if f == 0.0 && jf > mode {
                        break;
                    }
                    acc.0 += f;
                    acc.1 += f * jf;
                    acc.2 += f * jf * jf;
                }
                acc
            }
        }
    }
}

fn to_count(x: f64) -> u64 {
    if x.is_finite() && x >= 0.0 {
        if x >= u64::MAX as f64 {
            u64::MAX
        } else {
            x as u64
        }
    } else if x.is_nan() || x < 0.0 {
        0
    } else {
        u64::MAX
    }
}

fn poisson_count<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda.is_nan() || lambda <= 0.0 {
        return 0;
    }
    if lambda < 1e-9 {
        // P(N ≥ 1) ≈ λ; avoids the sampler's e^{−λ} loop at vanishing rates
        return u64::from(rng.gen::<f64>() < lambda);
    }
    match Poisson::new(lambda) {
        Ok(dist) => to_count(dist.sample(rng)),
        Err(_) => to_count(lambda),
    }
}

/// Negative-binomial X = Poisson(Λ), Λ ~ Gamma(n, scale), conditioned on X ≥ m.
///
/// Λ is drawn from the gamma truncated to [λ_min, ∞) with an exponential
/// proposal (exact for n ≤ 1), then X is accepted when it clears m. λ_min sits
/// twelve standard deviations below m, so the discarded region carries no
/// representable mass.
fn nb_tail_sample<R: Rng + ?Sized>(n: f64, scale: f64, m: u64, rng: &mut R) -> u64 {
    let mf = m as f64;
    let lambda_min = (mf - 12.0 * mf.sqrt() - 20.0).max(1.0);
    loop {
        let e: f64 = Exp1.sample(rng);
        let lambda = lambda_min + scale * e;
        let accept = (lambda / lambda_min).powf(n - 1.0);
        if rng.gen::<f64>() >= accept {
            continue;
        }
        let x = poisson_count(lambda, rng);
        if x >= m {
            return x;
        }
    }
}
