//! Bessel functions of the first kind and the principal/remainder split.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Nonnegative order of a Bessel function.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct BesselOrder(f64);

impl BesselOrder {
    pub fn new(nu: f64) -> Result<Self> {
        if nu >= 0.0 && nu.is_finite() {
            Ok(Self(nu))
        } else {
            Err(invalid(format!("bessel order must be finite and nonnegative, got {nu}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for BesselOrder {
    type Error = crate::error::LabError;
    fn try_from(nu: f64) -> Result<Self> {
        Self::new(nu)
    }
}

impl From<BesselOrder> for f64 {
    fn from(o: BesselOrder) -> f64 {
        o.0
    }
}

/// `J_nu(r) = principal + remainder`, where the principal part is the
/// oscillatory leading term switched on for `r >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BesselSplit {
    pub principal: Complex64,
    pub remainder: f64,
    pub amplitude: Complex64,
}

/// Arguments below this use the power series.
pub fn series_cutoff(nu: f64) -> f64 {
    12.0f64.max(2.0 * nu)
}

pub fn bessel_j(order: BesselOrder, r: f64) -> Result<f64> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(invalid(format!("bessel argument must be finite and nonnegative, got {r}")));
    }
    Ok(j_unchecked(order.value(), r))
}

/// Evaluator shared by all callers that have already validated `nu` and `r`.
pub(crate) fn j_unchecked(nu: f64, r: f64) -> f64 {
    if r < series_cutoff(nu) {
        j_series(nu, r)
    } else {
        j_large(nu, r)
    }
}

/// Power series `sum (-1)^j (r/2)^{2j+nu} / (j! Gamma(nu+j+1))`.
pub(crate) fn j_series(nu: f64, r: f64) -> f64 {
    if r == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    let half = 0.5 * r;
    let lead = (nu * half.ln() - libm::lgamma(nu + 1.0)).exp();
    lead * scaled_series(nu, half * half)
}

/// `sum_j (-x)^j Gamma(nu+1) / (j! Gamma(nu+j+1))` with `x = (r/2)^2`.
fn scaled_series(nu: f64, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..400 {
        let jf = j as f64;
        term *= -x / (jf * (nu + jf));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() && jf > x.sqrt() {
            break;
        }
    }
    sum
}

/// Hankel asymptotic expansion for the fractional part of the order,
/// followed by upward recurrence (stable while the order stays below `r`).
fn j_large(nu: f64, r: f64) -> f64 {
    let base = nu.floor();
    let nu0 = nu - base;
    let steps = base as usize;
    let j0 = hankel(nu0, r);
    if steps == 0 {
        return j0;
    }
    let mut prev = j0;
    let mut cur = hankel(nu0 + 1.0, r);
    for i in 1..steps {
        let mu = nu0 + i as f64;
        let next = 2.0 * mu / r * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

fn hankel(nu: f64, r: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let z8 = 8.0 * r;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term *= (mu - odd * odd) / (kf * z8);
        if term.abs() > last {
            break;
        }
        last = term.abs();
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = r - (0.5 * nu + 0.25) * PI;
    (2.0 / (PI * r)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// `r^{-nu} J_nu(r)`, entire in `r`, with value `1/(2^nu Gamma(nu+1))` at 0.
pub(crate) fn j_scaled(nu: f64, r: f64) -> f64 {
    if r < series_cutoff(nu) {
        let half = 0.5 * r;
        let lead = (-nu * std::f64::consts::LN_2 - libm::lgamma(nu + 1.0)).exp();
        lead * scaled_series(nu, half * half)
    } else {
        j_large(nu, r) * r.powf(-nu)
    }
}

/// `d J_nu / dr` through `J_nu' = (nu/r) J_nu - J_{nu+1}`.
pub(crate) fn j_derivative(nu: f64, r: f64) -> f64 {
    if r == 0.0 {
        return if nu == 1.0 {
            0.5
        } else if nu == 0.0 || nu > 1.0 {
            0.0
        } else {
            f64::INFINITY
        };
    }
    nu / r * j_unchecked(nu, r) - j_unchecked(nu + 1.0, r)
}

pub fn amplitude(nu: f64) -> Complex64 {
    Complex64::from_polar((2.0 * PI).powf(-0.5), -(0.5 * nu * PI + FRAC_PI_4))
}

pub fn bessel_split(order: BesselOrder, r: f64) -> Result<BesselSplit> {
    let j = bessel_j(order, r)?;
    let a = amplitude(order.value());
    let principal = principal_part(a, r);
    Ok(BesselSplit {
        principal,
        remainder: j - principal.re,
        amplitude: a,
    })
}

fn principal_part(a: Complex64, r: f64) -> Complex64 {
    if r < 1.0 {
        return Complex64::new(0.0, 0.0);
    }
    let e = Complex64::from_polar(1.0, r);
    (a * e + a.conj() * e.conj()) / r.sqrt()
}

/// Real principal part `(2/(pi r))^{1/2} cos(r - nu pi/2 - pi/4)` on `r >= 1`.
pub(crate) fn principal_real(nu: f64, r: f64) -> f64 {
    if r < 1.0 {
        0.0
    } else {
        (2.0 / (PI * r)).sqrt() * (r - FRAC_PI_2 * nu - FRAC_PI_4).cos()
    }
}

/// Sup of `|R_nu(r)| / (r^nu (1+r)^{-nu-3/2})` over a log grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub nu: f64,
    pub points: usize,
    pub sup: f64,
    pub argmax: f64,
}

/// Remainder envelope ratio over `points` log-spaced radii in `[1e-3, r_max]`.
pub fn remainder_envelope(order: BesselOrder, r_max: f64, points: usize) -> Result<EnvelopeReport> {
    if !(r_max > 1e-3 && r_max.is_finite()) || points < 2 {
        return Err(invalid("envelope sweep needs r_max > 1e-3 and at least two points"));
    }
    let nu = order.value();
    let step = (r_max / 1e-3).ln() / (points - 1) as f64;
    let mut best = EnvelopeReport { nu, points, sup: 0.0, argmax: 0.0 };
    for i in 0..points {
        let r = 1e-3 * (step * i as f64).exp();
        let s = bessel_split(order, r)?;
        let ratio = s.remainder.abs() / (r.powf(nu) * (1.0 + r).powf(-nu - 1.5));
        if ratio > best.sup {
            best.sup = ratio;
            best.argmax = r;
        }
    }
    Ok(best)
}

/// Fourier transform of surface measure on the unit sphere of `R^n`,
/// evaluated at radius `r`. Also valid for `n = 1` (`2 cos r`).
pub(crate) fn sigma_hat_n(n: usize, r: f64) -> f64 {
    if n == 1 {
        return 2.0 * r.cos();
    }
    let nf = n as f64;
    let nu = 0.5 * (nf - 2.0);
    (2.0 * PI).powf(0.5 * nf) * j_scaled(nu, r)
}

pub fn sigma_hat(d: usize, r: f64) -> Result<f64> {
    if d < 2 {
        return Err(invalid(format!("sigma_hat needs d >= 2, got {d}")));
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(invalid(format!("sigma_hat argument must be nonnegative, got {r}")));
    }
    Ok(sigma_hat_n(d, r))
}

/// The first `count` positive local maxima of `J_nu`, located by
/// derivative sign changes on a grid of spacing `pi/16` and refined by
/// bisection.
pub fn bessel_maxima(nu: f64, count: usize) -> Result<Vec<f64>> {
    BesselOrder::new(nu)?;
    let mut out = Vec::with_capacity(count);
    let h = PI / 16.0;
    let mut a = h;
    let mut da = j_derivative(nu, a);
    while out.len() < count {
        let b = a + h;
        let db = j_derivative(nu, b);
        if da > 0.0 && db <= 0.0 {
            let (mut lo, mut hi) = (a, b);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if j_derivative(nu, mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        a = b;
        da = db;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ord(nu: f64) -> BesselOrder {
        BesselOrder::new(nu).unwrap()
    }

    #[test]
    fn fixed_values() {
        assert_eq!(bessel_j(ord(0.0), 0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(bessel_j(ord(0.5), PI).unwrap(), 0.0, epsilon = 1e-15);
        // J_1 at its first maximum, reference from tables
        assert_abs_diff_eq!(bessel_j(ord(1.0), 1.841_183_781_340_659).unwrap(), 0.581_865_224_281_596_4, epsilon = 1e-13);
        assert_abs_diff_eq!(bessel_j(ord(0.0), 2.404_825_557_695_773).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn half_integer_closed_forms() {
        for &r in &[0.3, 1.0, 5.0, 11.9, 12.0, 12.1, 40.0, 333.3, 1000.0] {
            let j12 = (2.0 / (PI * r)).sqrt() * r.sin();
            let j32 = (2.0 / (PI * r)).sqrt() * (r.sin() / r - r.cos());
            let env = (2.0 / (PI * r)).sqrt().min(1.0);
            assert_abs_diff_eq!(bessel_j(ord(0.5), r).unwrap(), j12, epsilon = 1e-11 * env);
            assert_abs_diff_eq!(bessel_j(ord(1.5), r).unwrap(), j32, epsilon = 1e-11 * env);
        }
    }

    #[test]
    fn branches_agree_in_overlap() {
        for &nu in &[0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0] {
            for i in 0..40 {
                let r = 12.0 + 0.05 * i as f64;
                let s = j_series(nu, r);
                let a = j_large(nu, r);
                assert_abs_diff_eq!(s, a, epsilon = 1e-10 * (2.0 / (PI * r)).sqrt());
            }
        }
    }

    #[test]
    fn rejects_negative_inputs() {
        assert!(bessel_j(ord(1.0), -1.0).is_err());
        assert!(BesselOrder::new(-0.5).is_err());
        assert!(sigma_hat(1, 1.0).is_err());
    }

    #[test]
    fn split_below_one_is_pure_remainder() {
        let s = bessel_split(ord(1.0), 0.5).unwrap();
        assert_eq!(s.principal, Complex64::new(0.0, 0.0));
        assert_abs_diff_eq!(s.remainder, bessel_j(ord(1.0), 0.5).unwrap(), epsilon = 1e-16);
    }

    #[test]
    fn split_half_integer_remainder_vanishes() {
        let s = bessel_split(ord(0.5), 2.0).unwrap();
        let expected = (2.0 / PI).sqrt() * 2f64.powf(-0.5) * (2.0 - FRAC_PI_2).cos();
        assert_abs_diff_eq!(s.principal.re, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(s.principal.im, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.remainder, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn sigma_hat_values() {
        assert_abs_diff_eq!(sigma_hat(4, 0.0).unwrap(), 2.0 * PI * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(sigma_hat(3, PI).unwrap(), 0.0, epsilon = 1e-13);
        for &r in &[0.1, 1.0, 7.0, 30.0] {
            assert_abs_diff_eq!(sigma_hat(3, r).unwrap(), 4.0 * PI * r.sin() / r, epsilon = 1e-11);
            assert_abs_diff_eq!(sigma_hat(2, r).unwrap(), 2.0 * PI * j_unchecked(0.0, r), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(sigma_hat_n(1, 0.3), 2.0 * 0.3f64.cos(), epsilon = 1e-15);
    }

    #[test]
    fn maxima_are_spaced_by_two_pi() {
        let m = bessel_maxima(0.0, 20).unwrap();
        assert_abs_diff_eq!(m[0], 7.015_586_669_815_619, epsilon = 1e-9);
        for w in m.windows(2) {
            assert!((w[1] - w[0] - 2.0 * PI).abs() < 0.05);
        }
    }
}
