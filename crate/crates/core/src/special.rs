//! Special functions behind the duration distributions.
//!
//! Everything here works in log space where it matters: the negative-binomial
//! tails we care about combine shape parameters near 1e-4 with arguments near
//! 1e7, and naive evaluation either underflows or cancels.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SpecialError {
    #[error("argument outside the function domain: {0}")]
    Domain(&'static str),
}

const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Stirling remainder lnΓ(z) − [(z − ½)ln z − z + ½ln 2π], valid for z ≥ 15.
fn stirling_tail(z: f64) -> f64 {
    // B_{2k} / (2k (2k-1)) for k = 1..8
    const C: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360360.0,
        1.0 / 156.0,
        -3617.0 / 122400.0,
    ];
    let zi = 1.0 / z;
    let zi2 = zi * zi;
    let mut acc = 0.0;
    for c in C.iter().rev() {
        acc = acc * zi2 + c;
    }
    acc * zi
}

/// lnΓ(a + b) − lnΓ(a), accurate when `a` is large and `b` is small.
pub fn ln_gamma_ratio(a: f64, b: f64) -> f64 {
    if a >= 15.0 && a + b >= 15.0 {
        let s = a + b;
        (a - 0.5) * (b / a).ln_1p() + b * s.ln() - b + stirling_tail(s) - stirling_tail(a)
    } else {
        ln_gamma(a + b) - ln_gamma(a)
    }
}

/// ln B(a, b).
pub fn ln_beta(a: f64, b: f64) -> f64 {
    let (small, large) = if a < b { (a, b) } else { (b, a) };
    ln_gamma(small) - ln_gamma_ratio(large, small)
}

/// Regularized incomplete beta function I_x(a, b).
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> Result<f64, SpecialError> {
    if !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b.is_finite()) {
        return Err(SpecialError::Domain(
            "shape arguments must be positive and finite",
        ));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(SpecialError::Domain("x must lie in [0, 1]"));
    }
    Ok(ln_ibeta(x, 1.0 - x, a, b).exp())
}

/// ln I_x(a, b) where `y = 1 − x` is supplied separately so callers holding
/// a tiny complement keep its precision.
pub(crate) fn ln_ibeta(x: f64, y: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if y <= 0.0 {
        return 0.0;
    }
    if x <= (a + 1.0) / (a + b + 2.0) {
        ln_ibeta_cf(x, y, a, b)
    } else {
        ln_one_minus_exp(ln_ibeta_cf(y, x, b, a))
    }
}

/// ln(1 − e^v) for v ≤ 0.
pub(crate) fn ln_one_minus_exp(v: f64) -> f64 {
    if v > -std::f64::consts::LN_2 {
        (-v.exp_m1()).ln()
    } else {
        (-v.exp()).ln_1p()
    }
}

fn ln_ibeta_cf(x: f64, y: f64, a: f64, b: f64) -> f64 {
    ln_beta_front(x, y, a, b) - a.ln() + betacf(x, a, b).ln()
}

/// ln[x^a y^b / B(a, b)].
fn ln_beta_front(x: f64, y: f64, a: f64, b: f64) -> f64 {
    if a < 15.0 || b < 15.0 {
        // take each logarithm from the smaller of the two complements
        let (ln_x, ln_y) = if x > 0.5 {
            ((-y).ln_1p(), y.ln())
        } else {
            (x.ln(), (-x).ln_1p())
        };
        return a * ln_x + b * ln_y - ln_beta(a, b);
    }
    // Expand around the mode x0 = a/(a+b) so the O(a+b) terms cancel analytically.
    let s = a + b;
    let (x0, y0) = (a / s, b / s);
    let dev = a * ((x - x0) / x0).ln_1p() + b * ((y - y0) / y0).ln_1p();
    dev + 0.5 * (a * b / (2.0 * std::f64::consts::PI * s)).ln()
        - (stirling_tail(a) + stirling_tail(b) - stirling_tail(s))
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn betacf(x: f64, a: f64, b: f64) -> f64 {
    let max_iter = 10_000 + (20.0 * a.max(b).sqrt()) as usize;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=max_iter {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// ln P(a, x), the log of the regularized lower incomplete gamma function.
pub(crate) fn ln_gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if x < a + 1.0 {
        ln_gamma_series(a, x)
    } else {
        ln_one_minus_exp(ln_gamma_cf(a, x))
    }
}

/// ln Q(a, x), the log of the regularized upper incomplete gamma function.
#[cfg(test)]
pub(crate) fn ln_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        ln_one_minus_exp(ln_gamma_series(a, x))
    } else {
        ln_gamma_cf(a, x)
    }
}

fn ln_gamma_series(a: f64, x: f64) -> f64 {
    let max_iter = 10_000 + (20.0 * a.max(x).sqrt()) as usize;
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..max_iter {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * CF_EPS {
            break;
        }
    }
    sum.ln() - x + a * x.ln() - ln_gamma(a)
}

fn ln_gamma_cf(a: f64, x: f64) -> f64 {
    let max_iter = 10_000 + (20.0 * a.max(x).sqrt()) as usize;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / CF_TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=max_iter {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = b + an / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h.ln() - x + a * x.ln() - ln_gamma(a)
}

/// Hurwitz zeta ζ(s, q) = Σ_{k≥0} (q + k)^{−s} for s > 1, q > 0.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    // B_{2k} / (2k)!
    const B2K_FACT: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
        1.0 / 74724249600.0,
        -3617.0 / 10670622842880000.0,
    ];
    let cutoff = 16.0_f64.max(s);
    let mut head = 0.0;
    let mut w = q;
    while w < cutoff {
        head += w.powf(-s);
        w += 1.0;
    }
    let ws = w.powf(-s);
    let mut tail = w * ws / (s - 1.0) + 0.5 * ws;
    // Pochhammer (s)_{2k-1} · w^{-s-2k+1}
    let mut poch = s;
    let mut wp = ws / w;
    let w2 = 1.0 / (w * w);
    for (k, coeff) in B2K_FACT.iter().enumerate() {
        let term = coeff * poch * wp;
        tail += term;
        if term.abs() < tail.abs() * 1e-17 {
            break;
        }
        let k = k as f64 + 1.0;
        poch *= (s + 2.0 * k - 1.0) * (s + 2.0 * k);
        wp *= w2;
    }
    head + tail
}

/// Riemann zeta ζ(s) for s > 1.
pub fn riemann_zeta(s: f64) -> f64 {
    hurwitz_zeta(s, 1.0)
}
