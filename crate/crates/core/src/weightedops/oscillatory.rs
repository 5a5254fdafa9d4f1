use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::quadrature::{gauss_legendre, GaussRule};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Which half of the bound applies: `gamma < 1` is controlled by
/// `|lambda|^{gamma-1}`, `gamma > 1` by `a^{1-gamma}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OscillatoryBranch {
    SlowDecay,
    FastDecay,
}

/// `int_X^inf s^{-gamma} e^{i lambda s} ds` from the asymptotic series
/// `-e^{i lambda X} X^{-gamma} / (i lambda) sum_n (gamma)_n / (i lambda X)^n`,
/// truncated at its smallest term.
fn tail(gamma: f64, x: f64, lambda: f64) -> Complex64 {
    let z = I * lambda * x;
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut last = 1.0;
    for n in 0..60 {
        term *= (gamma + n as f64) / z;
        let m = term.norm();
        if m > last {
            break;
        }
        sum += term;
        last = m;
        if m < 1e-17 {
            break;
        }
    }
    -Complex64::from_polar(x.powf(-gamma), lambda * x) / (I * lambda) * sum
}

/// Panels from `a` to `b` whose width never exceeds the local scale `s`
/// of `s^{-gamma}` nor one period of the oscillation.
fn panels(gamma: f64, a: f64, b: f64, lambda: f64, rule: &GaussRule) -> Complex64 {
    let period = if lambda == 0.0 { f64::INFINITY } else { 2.0 * PI / lambda.abs() };
    let mut acc = Complex64::new(0.0, 0.0);
    let mut lo = a;
    while lo < b {
        let hi = (lo + period.min(lo.max(1e-300))).min(b);
        let (xs, ws) = rule.mapped(lo, hi);
        for (&s, &w) in xs.iter().zip(&ws) {
            acc += Complex64::from_polar(w * s.powf(-gamma), lambda * s);
        }
        lo = hi;
    }
    acc
}

/// `int_a^inf s^{-gamma} e^{i lambda s} ds = e^{i lambda a} a^{1-gamma} h`
/// where `e^{-x} x^{1-gamma} h = Gamma(1-gamma, x)` at `x = -i lambda a`,
/// with `h` from the Lentz continued fraction. `None` if it stalls.
fn upper_gamma_tail(gamma: f64, a: f64, lambda: f64) -> Option<Complex64> {
    const TINY: f64 = 1e-300;
    let s = 1.0 - gamma;
    let x = Complex64::new(0.0, -lambda * a);
    let mut b = x + 1.0 - s;
    let mut c = Complex64::new(1.0 / TINY, 0.0);
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..2000 {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.norm() < TINY {
            d = Complex64::new(TINY, 0.0);
        }
        c = b + an / c;
        if c.norm() < TINY {
            c = Complex64::new(TINY, 0.0);
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).norm() < 1e-15 {
            return Some(Complex64::from_polar(a.powf(s), lambda * a) * h);
        }
    }
    None
}

/// `int_a^inf s^{-gamma} e^{i lambda s} ds` for `lambda != 0`: quadrature up
/// to `2 / |lambda|`, then the continued fraction (asymptotic series as a
/// fallback).
fn upper(gamma: f64, a: f64, lambda: f64, rule: &GaussRule) -> Complex64 {
    let x = a.max(2.0 / lambda.abs());
    let head = if x > a { panels(gamma, a, x, lambda, rule) } else { Complex64::new(0.0, 0.0) };
    match upper_gamma_tail(gamma, x, lambda) {
        Some(t) => head + t,
        None => {
            let far = x.max(40.0 / lambda.abs());
            head + panels(gamma, x, far, lambda, rule) + tail(gamma, far, lambda)
        }
    }
}

/// `int_a^b s^{-gamma} e^{i lambda s} ds` for `0 < a < b <= inf`, any real
/// `lambda`; `b = inf` needs `gamma > 1` or `lambda != 0`.
pub(crate) fn oscillatory_between(gamma: f64, a: f64, b: f64, lambda: f64) -> Complex64 {
    if b <= a {
        return Complex64::new(0.0, 0.0);
    }
    if lambda == 0.0 {
        let v = if (gamma - 1.0).abs() < 1e-14 {
            (b / a).ln()
        } else if b.is_infinite() {
            a.powf(1.0 - gamma) / (gamma - 1.0)
        } else {
            (b.powf(1.0 - gamma) - a.powf(1.0 - gamma)) / (1.0 - gamma)
        };
        return Complex64::new(v, 0.0);
    }
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    let rule = RULE.get_or_init(|| gauss_legendre(16));
    if b <= 2.0 / lambda.abs() {
        return panels(gamma, a, b, lambda, rule);
    }
    let far = if b.is_infinite() { Complex64::new(0.0, 0.0) } else { upper(gamma, b, lambda, rule) };
    upper(gamma, a, lambda, rule) - far
}

/// `int_a^inf s^{-gamma} e^{i lambda s} ds` for `0 < gamma != 1`, `a >= 1`
/// and `lambda in [-2, 2] \ {0}`.
pub fn oscillatory_integral(gamma: f64, a: f64, lambda: f64) -> Result<Complex64> {
    if !(gamma > 0.0) || (gamma - 1.0).abs() < 1e-12 || !gamma.is_finite() {
        return Err(invalid(format!("gamma must be positive and different from 1, got {gamma}")));
    }
    if !(a >= 1.0 && a.is_finite()) {
        return Err(invalid(format!("lower limit must be at least 1, got {a}")));
    }
    if lambda == 0.0 || !(lambda.abs() <= 2.0) {
        return Err(invalid(format!("lambda must lie in [-2, 2] without 0, got {lambda}")));
    }
    Ok(oscillatory_between(gamma, a, f64::INFINITY, lambda))
}

/// The value together with its size relative to the bound of its branch.
pub fn oscillatory_bound_ratio(
    gamma: f64,
    a: f64,
    lambda: f64,
) -> Result<(Complex64, f64, OscillatoryBranch)> {
    let v = oscillatory_integral(gamma, a, lambda)?;
    Ok(if gamma < 1.0 {
        (v, v.norm() / lambda.abs().powf(gamma - 1.0), OscillatoryBranch::SlowDecay)
    } else {
        (v, v.norm() / a.powf(1.0 - gamma), OscillatoryBranch::FastDecay)
    })
}
