//! Knapp-type counterexamples: extensions of indicators of thin caps
//! around the `zeta`-sphere, their blow-up rates in `delta`, and the
//! integrability threshold of `sigma_hat` itself.

use std::f64::consts::{FRAC_PI_4, PI};
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Checked, NumericWarning, Result};
use crate::quadrature::gauss_legendre;
use crate::specfun::{bessel_maxima, sigma_hat_n};
use crate::symgeom::{dual, CapRule, SymmetryParams};
use crate::transforms::block_basis;

/// Half-width of the shells around each Bessel maximum, and the factor in
/// the shell count `floor(c delta^{-2})`.
pub const KNAPP_C: f64 = FRAC_PI_4;

/// First shell index used by the lower-bound diagnostics.
pub const FIRST_SHELL: usize = 3;

/// Largest allowed gap between a fitted and a predicted slope.
pub const SLOPE_TOL: f64 = 0.1;

/// The default sweep: 8 geometric points in `[0.005, 0.16]`.
pub fn default_deltas() -> Vec<f64> {
    geometric(0.005, 0.16, 8)
}

pub fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi / lo).ln() / (n.max(2) - 1) as f64;
    (0..n).map(|i| lo * (step * i as f64).exp()).collect()
}

/// `Block` is the construction for `2 <= k <= d-2` with shells at the
/// maxima of `J_{(k-2)/2}`; `G1` takes `k = 1` and shells at `2 pi j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KnappFamily {
    Block,
    G1,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnappConfig {
    pub params: SymmetryParams,
    pub family: KnappFamily,
    pub delta: f64,
    pub p: f64,
    pub q: f64,
    pub c: f64,
    pub j_range: (usize, usize),
    /// Upper end of the `|z|` truncation; `None` covers every shell.
    pub z_limit: Option<f64>,
}

fn check_exponent(name: &str, v: f64) -> Result<()> {
    if v >= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("exponent {name} must lie in [1, inf], got {v}")))
    }
}

impl KnappConfig {
    /// Caps `|eta| < delta` with `eta` in the block of dimension `d - m`;
    /// when `k != m` the blocks are swapped first.
    pub fn new(params: SymmetryParams, delta: f64, p: f64, q: f64) -> Result<Self> {
        params.require_theorem_range()?;
        let params = if params.k == params.m { params } else { params.swapped() };
        Self::build(params, KnappFamily::Block, delta, p, q)
    }

    pub fn g1(d: usize, delta: f64, p: f64, q: f64) -> Result<Self> {
        if d < 3 {
            return Err(invalid(format!("the G1 construction needs d >= 3, got {d}")));
        }
        Self::build(SymmetryParams::new(d, 1)?, KnappFamily::G1, delta, p, q)
    }

    fn build(params: SymmetryParams, family: KnappFamily, delta: f64, p: f64, q: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(invalid(format!("delta must lie in (0, 1/2), got {delta}")));
        }
        check_exponent("p", p)?;
        check_exponent("q", q)?;
        let c = KNAPP_C;
        let last = match family {
            KnappFamily::Block => (c / (delta * delta)).floor() as usize,
            KnappFamily::G1 => (0.25 / (delta * delta)).floor() as usize,
        };
        Ok(Self {
            params,
            family,
            delta,
            p,
            q,
            c,
            j_range: (FIRST_SHELL.min(last.max(1)), last.max(1)),
            z_limit: None,
        })
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        let mut out = Self::build(self.params, self.family, delta, self.p, self.q)?;
        out.z_limit = self.z_limit;
        Ok(out)
    }

    pub fn with_exponents(&self, p: f64, q: f64) -> Result<Self> {
        check_exponent("p", p)?;
        check_exponent("q", q)?;
        Ok(Self { p, q, ..self.clone() })
    }

    pub fn with_z_limit(self, z: f64) -> Self {
        Self { z_limit: Some(z), ..self }
    }

    fn nu(&self) -> f64 {
        0.5 * (self.params.k as f64 - 2.0)
    }

    /// The first `count` shell centres.
    pub fn shell_centres(&self, count: usize) -> Result<Vec<f64>> {
        match self.family {
            KnappFamily::Block => bessel_maxima(self.nu(), count),
            KnappFamily::G1 => Ok((1..=count).map(|j| 2.0 * PI * j as f64).collect()),
        }
    }

    pub fn regime(&self) -> Regime {
        match self.family {
            KnappFamily::G1 => Regime::I,
            KnappFamily::Block => {
                let k = self.params.k as f64;
                let edge = (k + 1.0) / (2.0 * k);
                let inv = 1.0 / self.p;
                if (inv - edge).abs() < 1e-12 {
                    Regime::II
                } else if inv < edge {
                    Regime::I
                } else {
                    Regime::III
                }
            }
        }
    }

    /// Exponent of `delta` in the lower bound for the quotient.
    pub fn predicted_slope(&self) -> f64 {
        let (d, k) = (self.params.d as f64, self.params.k as f64);
        let (ip, iq) = (1.0 / self.p, 1.0 / self.q);
        match self.regime() {
            Regime::I | Regime::II => (d + k) * ip + (d - k) * iq - d - 1.0,
            Regime::III => (d - k) * ip + (d - k) * iq - d + k,
        }
    }
}

/// Position of `1/p` relative to `(k+1)/(2k)`: below, equal, above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    I,
    II,
    III,
}

/// Resolution of the cap and of the truncated `(|y|, |z|)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KnappGrid {
    pub cap_nodes: usize,
    /// `|y|` runs up to `y_reach / delta`.
    pub y_reach: f64,
    pub y_panels: usize,
    /// Gauss-Legendre nodes per panel; `z` panels have width `pi`.
    pub per_panel: usize,
}

impl Default for KnappGrid {
    fn default() -> Self {
        Self {
            cap_nodes: 20,
            y_reach: 8.0,
            y_panels: 6,
            per_panel: 8,
        }
    }
}

impl KnappGrid {
    pub fn doubled(&self) -> Self {
        Self {
            cap_nodes: 2 * self.cap_nodes,
            y_panels: 2 * self.y_panels,
            ..*self
        }
    }

    fn validate(&self) -> Result<()> {
        if self.cap_nodes < 2 || self.y_panels == 0 || self.per_panel < 2 || !(self.y_reach > 0.0) {
            return Err(invalid("knapp grid needs cap_nodes >= 2, per_panel >= 2 and positive y extent"));
        }
        Ok(())
    }
}

/// `sigma(C_delta)^{1/q'}`.
pub fn cap_measure(cfg: &KnappConfig) -> Result<f64> {
    cap_measure_with(cfg, KnappGrid::default().cap_nodes)
}

fn cap_measure_with(cfg: &KnappConfig, nodes: usize) -> Result<f64> {
    let rule = CapRule::polar_cap(cfg.params, cfg.delta, nodes)?;
    let area: f64 = rule.weights().iter().sum();
    let qd = dual(cfg.q);
    Ok(if qd.is_infinite() { 1.0 } else { area.powf(1.0 / qd) })
}

fn abs_pow(x: f64, e: f64) -> f64 {
    let a = x.abs();
    if e == e.round() && e <= 32.0 {
        a.powi(e as i32)
    } else {
        a.powf(e)
    }
}

/// `int |1_delta sigma hat|^{p'}` over the truncated plane for each `p'`
/// (the sup when `p' = inf`), and the number of shells covered.
fn extension_powers(cfg: &KnappConfig, grid: &KnappGrid, p_primes: &[f64]) -> Result<Checked<Vec<f64>>> {
    grid.validate()?;
    let params = cfg.params;
    let rule = CapRule::polar_cap(params, cfg.delta, grid.cap_nodes)?;
    let last = cfg.j_range.1;
    let centres = cfg.shell_centres(last)?;
    let full = centres[last - 1] + cfg.c;
    let z_max = cfg.z_limit.map_or(full, |z| z.min(full));
    let mut warnings = Vec::new();
    let covered = centres.iter().take_while(|&&z| z + cfg.c <= z_max).count();
    if covered < last {
        warnings.push(NumericWarning::ShellCoverage {
            covered,
            requested: last,
        });
    }

    let gl = gauss_legendre(grid.per_panel);
    let y_max = grid.y_reach / cfg.delta;
    let mut ys = Vec::new();
    let mut wy = Vec::new();
    let width = y_max / grid.y_panels as f64;
    let (n1, n2) = (params.n1(), params.k);
    for j in 0..grid.y_panels {
        let (x, w) = gl.mapped(j as f64 * width, (j + 1) as f64 * width);
        for (x, w) in x.into_iter().zip(w) {
            wy.push(w * x.powi(n1 as i32 - 1));
            ys.push(x);
        }
    }
    let u = block_basis(rule.r(), n1, &ys);
    let coef: Vec<Vec<f64>> = (0..ys.len())
        .map(|a| rule.weights().iter().zip(&u).map(|(w, ui)| w * ui[a]).collect())
        .collect();
    let area = params.area_product();

    let panels = (z_max / PI).ceil() as usize;
    let z_width = z_max / panels as f64;
    const CHUNK: usize = 256;
    let chunks = panels.div_ceil(CHUNK);
    let zero = vec![0.0; p_primes.len()];
    let sums = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut zs = Vec::new();
            let mut wz = Vec::new();
            for j in ci * CHUNK..((ci + 1) * CHUNK).min(panels) {
                let (x, w) = gl.mapped(j as f64 * z_width, (j + 1) as f64 * z_width);
                for (x, w) in x.into_iter().zip(w) {
                    wz.push(w * x.powi(n2 as i32 - 1));
                    zs.push(x);
                }
            }
            let v = block_basis(rule.s(), n2, &zs);
            let mut acc = zero.clone();
            let mut row = vec![0.0; zs.len()];
            for (ca, wa) in coef.iter().zip(&wy) {
                row.iter_mut().for_each(|r| *r = 0.0);
                for (c, vi) in ca.iter().zip(&v) {
                    for (r, x) in row.iter_mut().zip(vi) {
                        *r += c * x;
                    }
                }
                for (s, &pd) in acc.iter_mut().zip(p_primes) {
                    if pd.is_infinite() {
                        *s = row.iter().fold(*s, |m: f64, r| m.max(r.abs()));
                    } else {
                        *s += wa * row.iter().zip(&wz).map(|(r, w)| w * abs_pow(*r, pd)).sum::<f64>();
                    }
                }
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(zero.clone(), |a, b| {
            a.iter()
                .zip(&b)
                .zip(p_primes)
                .map(|((x, y), pd)| if pd.is_infinite() { x.max(*y) } else { x + y })
                .collect()
        });
    let norms = sums
        .iter()
        .zip(p_primes)
        .map(|(s, &pd)| if pd.is_infinite() { *s } else { (area * s).powf(1.0 / pd) })
        .collect();
    Ok(Checked::with(norms, warnings))
}

/// One point of a `delta` sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub delta: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub quotient: f64,
}

/// `||(1_delta sigma)^||_{p'} / ||1_delta||_{q'}` with the numerator
/// integrated over `|y| <= y_reach/delta`, `|z| <= z_J + c`.
pub fn knapp_quotient(cfg: &KnappConfig, grid: &KnappGrid) -> Result<Checked<SweepPoint>> {
    let num = extension_powers(cfg, grid, &[dual(cfg.p)])?;
    let den = cap_measure_with(cfg, grid.cap_nodes)?;
    Ok(num.map(|n| SweepPoint {
        delta: cfg.delta,
        numerator: n[0],
        denominator: den,
        quotient: n[0] / den,
    }))
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeFit {
    pub family: KnappFamily,
    pub params: SymmetryParams,
    pub p: f64,
    pub q: f64,
    pub regime: Regime,
    pub predicted: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Whether `(1/p') log|log delta|` was removed before fitting.
    pub log_correction: bool,
    pub matches: bool,
    pub points: Vec<SweepPoint>,
}

impl SlopeFit {
    /// CSV rows `(delta, numerator, denominator, quotient)`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["delta", "numerator", "denominator", "quotient"])?;
        for p in &self.points {
            w.serialize((p.delta, p.numerator, p.denominator, p.quotient))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Least-squares slope and intercept of `ys` against `xs`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn fit(cfg: &KnappConfig, points: Vec<SweepPoint>) -> SlopeFit {
    let regime = cfg.regime();
    let pd = dual(cfg.p);
    let log_correction = regime == Regime::II && pd.is_finite();
    let xs: Vec<f64> = points.iter().map(|p| p.delta.ln()).collect();
    let ys: Vec<f64> = points
        .iter()
        .map(|p| {
            let corr = if log_correction { p.delta.ln().abs().ln() / pd } else { 0.0 };
            p.quotient.ln() - corr
        })
        .collect();
    let (slope, intercept) = least_squares(&xs, &ys);
    let predicted = cfg.predicted_slope();
    SlopeFit {
        family: cfg.family,
        params: cfg.params,
        p: cfg.p,
        q: cfg.q,
        regime,
        predicted,
        slope,
        intercept,
        log_correction,
        matches: (slope - predicted).abs() <= SLOPE_TOL,
        points,
    }
}

/// Slope fits for several `(p, q)` pairs sharing one construction; each
/// `delta` is evaluated once for all pairs.
pub fn slope_fits(
    base: &KnappConfig,
    exponents: &[(f64, f64)],
    deltas: &[f64],
    grid: &KnappGrid,
) -> Result<Vec<Checked<SlopeFit>>> {
    if deltas.len() < 2 || deltas.iter().any(|&d| !(d > 0.0 && d < 0.5)) {
        return Err(invalid("slope fits need at least two deltas in (0, 1/2)"));
    }
    let cfgs: Vec<KnappConfig> = exponents
        .iter()
        .map(|&(p, q)| base.with_exponents(p, q))
        .collect::<Result<_>>()?;
    let p_primes: Vec<f64> = cfgs.iter().map(|c| dual(c.p)).collect();
    let rows: Vec<(Vec<SweepPoint>, Vec<NumericWarning>)> = deltas
        .par_iter()
        .map(|&delta| {
            let cfg = base.with_delta(delta)?;
            let num = extension_powers(&cfg, grid, &p_primes)?;
            let pts = cfgs
                .iter()
                .zip(&num.value)
                .map(|(c, &n)| {
                    let den = cap_measure_with(&c.with_delta(delta)?, grid.cap_nodes)?;
                    Ok(SweepPoint {
                        delta,
                        numerator: n,
                        denominator: den,
                        quotient: n / den,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((pts, num.warnings))
        })
        .collect::<Result<_>>()?;
    let mut warnings: Vec<NumericWarning> = rows.iter().flat_map(|r| r.1.clone()).collect();
    if deltas.len() < 6 {
        warnings.push(NumericWarning::IllConditionedFit { points: deltas.len() });
    }
    Ok(cfgs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let points = rows.iter().map(|r| r.0[i]).collect();
            Checked::with(fit(c, points), warnings.clone())
        })
        .collect())
}

pub fn slope_fit(cfg: &KnappConfig, deltas: &[f64], grid: &KnappGrid) -> Result<Checked<SlopeFit>> {
    let mut out = slope_fits(cfg, &[(cfg.p, cfg.q)], deltas, grid)?;
    Ok(out.remove(0))
}

/// The `k = 1` construction with shells at `2 pi j`.
pub fn g1_knapp(deltas: &[f64], d: usize, p: f64, q: f64, grid: &KnappGrid) -> Result<Checked<SlopeFit>> {
    let cfg = KnappConfig::g1(d, deltas.first().copied().unwrap_or(0.1), p, q)?;
    slope_fit(&cfg, deltas, grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailVerdict {
    Converges,
    Diverges,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct RadialTailReport {
    pub d: usize,
    pub p_prime: f64,
    pub threshold: f64,
    pub radii: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// Fitted growth exponent of the increments between consecutive radii.
    pub exponent: f64,
    pub verdict: TailVerdict,
}

/// Radii `pi * round(1000 * 2^i / pi)`, `i < n`, so each increment spans
/// whole periods of `|sigma_hat|`.
pub fn default_radii(n: usize) -> Vec<f64> {
    (0..n).map(|i| PI * (1000.0 * 2f64.powi(i as i32) / PI).round()).collect()
}

/// `int_{|x| <= R} |sigma_hat|^{p'}` on a growing grid of radii. The
/// increments grow like `R^e` with `e = d - (d-1) p'/2`; `e < -0.01 d`
/// counts as convergent, `e > -0.0005 d` as divergent.
pub fn radial_tail(d: usize, p_prime: f64, radii: &[f64]) -> Result<RadialTailReport> {
    if d < 2 {
        return Err(invalid(format!("radial tail needs d >= 2, got {d}")));
    }
    if !(p_prime > 1.0 && p_prime.is_finite()) {
        return Err(invalid(format!("p' must lie in (1, inf), got {p_prime}")));
    }
    if radii.len() < 3 || radii.windows(2).any(|w| !(w[1] > w[0])) || !(radii[0] > 0.0) {
        return Err(invalid("radial tail needs at least three increasing positive radii"));
    }
    let gl = gauss_legendre(8);
    let area = crate::symgeom::sphere_area(d)?;
    let piece = |a: f64, b: f64| -> f64 {
        let n = ((b - a) / PI).ceil().max(1.0) as usize;
        let h = (b - a) / n as f64;
        (0..n)
            .into_par_iter()
            .map(|j| {
                let lo = a + j as f64 * h;
                gl.integrate(|t| {
                    let r = lo + 0.5 * h * (t + 1.0);
                    abs_pow(sigma_hat_n(d, r), p_prime) * r.powi(d as i32 - 1)
                }) * 0.5
                    * h
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum::<f64>()
            * area
    };
    let mut cumulative = Vec::with_capacity(radii.len());
    let mut total = piece(0.0, radii[0]);
    cumulative.push(total);
    for w in radii.windows(2) {
        total += piece(w[0], w[1]);
        cumulative.push(total);
    }
    let xs: Vec<f64> = radii.windows(2).map(|w| (w[0] * w[1]).sqrt().ln()).collect();
    let ys: Vec<f64> = cumulative
        .windows(2)
        .zip(radii.windows(2))
        .map(|(c, r)| ((c[1] - c[0]) / (r[1] - r[0])).ln())
        .collect();
    // increments per unit length decay one power faster than the increments
    let exponent = least_squares(&xs, &ys).0 + 1.0;
    let df = d as f64;
    let verdict = if exponent < -0.01 * df {
        TailVerdict::Converges
    } else if exponent > -0.0005 * df {
        TailVerdict::Diverges
    } else {
        TailVerdict::Inconclusive
    };
    Ok(RadialTailReport {
        d,
        p_prime,
        threshold: 2.0 * df / (df - 1.0),
        radii: radii.to_vec(),
        cumulative,
        exponent,
        verdict,
    })
}
