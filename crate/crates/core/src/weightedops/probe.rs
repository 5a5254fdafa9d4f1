use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::rop::{r_adjoint_l2_norm, CircleSamples, GramSettings};
use super::{DiscreteOps, Mesh, WeightedOpParams};
use crate::error::{invalid, Result};

/// Relative change of a ratio under resolution doubling still counted as stable.
pub const STABILITY_TOL: f64 = 0.05;

/// The operator under test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeOperator {
    T { a: f64, b: f64 },
    S { a: f64, b: f64, ell: f64 },
    R { alpha: f64, beta: f64, radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stability {
    Stable,
    Growing,
    Unstable,
}

#[derive(Debug, Clone, Serialize)]
pub struct Exponents {
    pub p: f64,
    pub q: f64,
}

/// Empirical ratios `||op f|| / ||f||` at two resolutions per trial.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub operator: ProbeOperator,
    pub params: Option<WeightedOpParams>,
    pub exponents: Exponents,
    pub trials: usize,
    pub hypotheses_hold: bool,
    pub ratios: Vec<[f64; 2]>,
    pub max_ratio: f64,
    pub stability: Stability,
    pub note: &'static str,
}

const NOTE: &str = "boundedness is judged by resolution stability of the empirical sup; it is not a proof";

/// `sum_k c_k x^{s_k} (1 - x/L)^2` with seeded random `c_k in [-1,1]`, `s_k in [0,2]`.
fn random_profile(rng: &mut ChaCha8Rng, len: f64) -> impl Fn(f64) -> Complex64 + Sync {
    let terms: Vec<(Complex64, f64)> = (0..3)
        .map(|_| {
            let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            (c, rng.random_range(0.0..2.0))
        })
        .collect();
    move |x: f64| {
        if x <= 0.0 || x >= len {
            return Complex64::new(0.0, 0.0);
        }
        let cut = (1.0 - x / len).powi(2);
        terms.iter().map(|(c, s)| c * x.powf(*s) * cut).sum()
    }
}

fn ratio_t(params: &WeightedOpParams, p: f64, q: f64, f: &(dyn Fn(f64) -> Complex64 + Sync), n: usize) -> Result<f64> {
    let len = params.ell;
    let mesh = Mesh::graded(len, n, 2.0 / (1.0 - params.b))?;
    let fv: Vec<Complex64> = mesh.nodes().iter().map(|&x| f(x)).collect();
    let tf = DiscreteOps { params: *params, mesh: &mesh }.apply_t(&fv)?;
    let head = mesh.lp_norm(&tf, q).powf(q);
    // beyond the support T f(x) = C x^{-a} with C the full moment
    let c = tf[tf.len() - 1] * len.powf(params.a);
    let aq = params.a * q;
    if aq <= 1.0 {
        return Err(invalid("T probe needs a q > 1 for a finite tail"));
    }
    let tail = c.norm().powf(q) * len.powf(1.0 - aq) / (aq - 1.0);
    let den = mesh.lp_norm(&fv, p);
    Ok((head + tail).powf(1.0 / q) / den)
}

fn ratio_s(params: &WeightedOpParams, p: f64, q: f64, f: &(dyn Fn(f64) -> Complex64 + Sync), n: usize) -> Result<f64> {
    let mesh = Mesh::graded(params.ell, n, 2.0 / (1.0 - params.b))?;
    let fv: Vec<Complex64> = mesh.nodes().iter().map(|&x| f(x)).collect();
    let sf = DiscreteOps { params: *params, mesh: &mesh }.apply_s(&fv)?;
    Ok(mesh.lp_norm(&sf, q) / mesh.lp_norm(&fv, p))
}

fn classify(ratios: &[[f64; 2]]) -> Stability {
    let worst = ratios
        .iter()
        .map(|r| r[1] / r[0] - 1.0)
        .fold(0.0f64, |m, c| if c.abs() > m.abs() { c } else { m });
    if worst.abs() <= STABILITY_TOL {
        Stability::Stable
    } else if worst > 0.0 {
        Stability::Growing
    } else {
        Stability::Unstable
    }
}

/// Ratios of `||op f||_q / ||f||_p` over `trials` seeded random test
/// functions, each at base resolution and doubled resolution. For `R`
/// only `q = 2` is supported (the target norm is `L^2` of the plane) and
/// doubling refers to the truncation radius; the circle norm is `L^{p'}`
/// with `p` the dual exponent passed in.
pub fn norm_probe(op: ProbeOperator, p: f64, q: f64, trials: usize, seed: u64) -> Result<ProbeReport> {
    if !(p > 1.0 && q >= 1.0) {
        return Err(invalid("probe exponents need p > 1 and q >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (params, hyp, ratios): (Option<WeightedOpParams>, bool, Vec<[f64; 2]>) = match op {
        ProbeOperator::T { a, b } => {
            let params = WeightedOpParams::new(a, b, 4.0)?;
            let fs: Vec<_> = (0..trials).map(|_| random_profile(&mut rng, params.ell)).collect();
            let r: Result<Vec<[f64; 2]>> = fs
                .par_iter()
                .map(|f| Ok([ratio_t(&params, p, q, f, 256)?, ratio_t(&params, p, q, f, 512)?]))
                .collect();
            (Some(params), params.t_hypotheses(p, q), r?)
        }
        ProbeOperator::S { a, b, ell } => {
            let params = WeightedOpParams::new(a, b, ell)?;
            let fs: Vec<_> = (0..trials).map(|_| random_profile(&mut rng, params.ell)).collect();
            let r: Result<Vec<[f64; 2]>> = fs
                .par_iter()
                .map(|f| Ok([ratio_s(&params, p, q, f, 256)?, ratio_s(&params, p, q, f, 512)?]))
                .collect();
            (Some(params), params.s_hypotheses(p, q), r?)
        }
        ProbeOperator::R { alpha, beta, radius } => {
            if (q - 2.0).abs() > 1e-12 {
                return Err(invalid("the R probe measures L^2 of the plane only (q = 2)"));
            }
            let circle_exp = crate::symgeom::dual(p);
            let mut r = Vec::with_capacity(trials);
            for _ in 0..trials {
                let coef: Vec<Complex64> = (0..4)
                    .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect();
                let f = CircleSamples::from_fn(256, |t| {
                    coef.iter()
                        .enumerate()
                        .map(|(m, c)| c * (2.0 * m as f64 * t).cos())
                        .sum()
                })?;
                let den = f.lp_norm(circle_exp);
                let s = GramSettings::default();
                let lo = r_adjoint_l2_norm(&f, alpha, beta, radius, s)?;
                let hi = r_adjoint_l2_norm(&f, alpha, beta, 2.0 * radius, s)?;
                r.push([lo / den, hi / den]);
            }
            let hyp = 2.0 * (alpha + beta) >= 1.0 && circle_exp <= 2.0;
            (None, hyp, r)
        }
    };
    let max_ratio = ratios.iter().map(|r| r[1]).fold(0.0, f64::max);
    Ok(ProbeReport {
        operator: op,
        params,
        exponents: Exponents { p, q },
        trials,
        hypotheses_hold: hyp,
        stability: classify(&ratios),
        ratios,
        max_ratio,
        note: NOTE,
    })
}

/// Ratios of `||S f_eps||_q / ||f_eps||_p` for the logarithmic family
/// `f_eps(x) = x^{-1/p} |log x|^{-(1+eps)/p}` on `[tau, 1/2]`, as the cutoff
/// `tau` shrinks.
#[derive(Debug, Clone, Serialize)]
pub struct RemarkReport {
    pub params: WeightedOpParams,
    pub exponents: Exponents,
    pub eps: f64,
    pub taus: Vec<f64>,
    pub ratios: Vec<f64>,
    pub growth: f64,
    pub monotone: bool,
}

pub fn remark_family_probe(params: WeightedOpParams, p: f64, q: f64, eps: f64, taus: &[f64]) -> Result<RemarkReport> {
    if !(eps > 0.0) || taus.iter().any(|&t| !(t > 0.0 && t < 0.5)) {
        return Err(invalid("family needs eps > 0 and cutoffs in (0, 1/2)"));
    }
    let ratios: Result<Vec<f64>> = taus
        .iter()
        .map(|&tau| {
            let mut t = Mesh::geometric(tau, 0.5, 24)?.nodes().to_vec();
            let tail = 32;
            for j in 1..=tail {
                t.push(0.5 + 0.5 * j as f64 / tail as f64);
            }
            let mesh = Mesh::new(t)?;
            let fv: Vec<Complex64> = mesh
                .nodes()
                .iter()
                .map(|&x| {
                    if x <= 0.5 {
                        Complex64::new(x.powf(-1.0 / p) * x.ln().abs().powf(-(1.0 + eps) / p), 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect();
            let sf = DiscreteOps { params, mesh: &mesh }.apply_s(&fv)?;
            Ok(mesh.lp_norm(&sf, q) / mesh.lp_norm(&fv, p))
        })
        .collect();
    let ratios = ratios?;
    let monotone = ratios.windows(2).all(|w| w[1] >= w[0]);
    let growth = ratios.last().unwrap_or(&0.0) / ratios.first().unwrap_or(&1.0);
    Ok(RemarkReport {
        params,
        exponents: Exponents { p, q },
        eps,
        taus: taus.to_vec(),
        ratios,
        growth,
        monotone,
    })
}
