//! Pearson correlation with a two-sided Student-t p-value, and line
//! rankings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest p-value reported for |r| < 1.
pub const P_FLOOR: f64 = 1e-300;

const CF_MAX_ITER: usize = 300;
const CF_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub r: f64,
    pub p: f64,
    pub n: usize,
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::invalid(format!("length mismatch: {} vs {}", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::Degenerate("correlation needs at least two samples".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite sample"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Two-sided p-value of the t-test for a Pearson coefficient `r` over `n`
/// samples, with `n - 2` degrees of freedom.
pub fn p_value(r: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::Degenerate(format!("p-value needs at least 3 samples, got {n}")));
    }
    if !r.is_finite() || r.abs() > 1.0 + 1e-12 {
        return Err(Error::invalid(format!("correlation {r} outside [-1, 1]")));
    }
    let r = r.abs().min(1.0);
    if r == 1.0 {
        return Ok(0.0);
    }
    if r == 0.0 {
        return Ok(1.0);
    }
    let dof = (n - 2) as f64;
    // dof / (dof + t^2) == 1 - r^2
    let x = (1.0 - r) * (1.0 + r);
    let p = regularized_incomplete_beta(dof / 2.0, 0.5, x)?;
    Ok(p.clamp(P_FLOOR, 1.0))
}

pub fn correlate(xs: &[f64], ys: &[f64]) -> Result<CorrelationReport> {
    let r = pearson(xs, ys)?;
    let p = p_value(r, xs.len())?;
    Ok(CorrelationReport { r, p, n: xs.len() })
}

/// Descending by value, ties by line id ascending.
pub fn rank_lines<I, S>(scores: I) -> Vec<(String, f64)>
where
    I: IntoIterator<Item = (S, f64)>,
    S: Into<String>,
{
    let mut ranked: Vec<(String, f64)> = scores.into_iter().map(|(k, v)| (k.into(), v)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked
}

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut sum = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

/// Regularized incomplete beta `I_x(a, b)`. The prefactor is kept in log
/// space so results down to the smallest normal double stay representable.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::invalid("incomplete beta needs a, b > 0"));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::invalid(format!("incomplete beta argument {x} outside [0, 1]")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (-x).ln_1p();
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok((ln_front + beta_fraction(a, b, x)?.ln() - a.ln()).exp())
    } else {
        let y = 1.0 - x;
        Ok(1.0 - (ln_front + beta_fraction(b, a, y)?.ln() - b.ln()).exp())
    }
}

/// Continued fraction for the incomplete beta, modified Lentz method.
fn beta_fraction(a: f64, b: f64, x: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let guard = |v: f64| if v.abs() < TINY { TINY } else { v };
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 / guard(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let even = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / guard(1.0 + even * d);
        c = guard(1.0 + even / c);
        h *= d * c;
        let odd = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / guard(1.0 + odd * d);
        c = guard(1.0 + odd / c);
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < CF_TOLERANCE {
            return Ok(h);
        }
    }
    Err(Error::Internal(format!(
        "incomplete beta continued fraction did not converge for a={a}, b={b}, x={x}"
    )))
}
