//! Search for maximizers of `||F hat sigma||_{p'} / ||F||_2` over
//! block-symmetric `F`, by generalized power iteration on the discretized
//! extension operator, and the restriction/extension duality check.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Checked, NumericWarning, Result};
use crate::quadrature::{barycentric_weights, lagrange_basis, QuadratureSpec, RadialGrid};
use crate::symgeom::{CapProfile, CapRule, LorentzExponent, RadialProfile2D, SymmetryParams};
use crate::transforms::{block_basis, extension_field, restrict_to_sphere};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Consecutive small-gain steps that end a run.
const PATIENCE: usize = 5;

/// The extension operator from cap nodes to a tensor grid in `(|y|, |z|)`,
/// with the measure of `R^d` folded into `meas`.
struct Discretization {
    cap_weights: Vec<f64>,
    u: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    n2: usize,
    meas: Vec<f64>,
    outer: Vec<bool>,
    undersampled: Option<NumericWarning>,
}

impl Discretization {
    fn new(rule: &CapRule, quad: &QuadratureSpec) -> Result<Self> {
        quad.validate()?;
        let params = rule.params();
        let grid = RadialGrid::default_for(quad.space_radius, quad.space_nodes)?;
        let xs = grid.nodes();
        let u = block_basis(rule.r(), params.n1(), xs);
        let v = block_basis(rule.s(), params.k, xs);
        let a = params.area_product();
        let (e1, e2) = (params.n1() as i32 - 1, params.k as i32 - 1);
        let half = 0.5 * quad.space_radius;
        let mut meas = Vec::with_capacity(xs.len() * xs.len());
        let mut outer = Vec::with_capacity(xs.len() * xs.len());
        for (x, wx) in xs.iter().zip(grid.weights()) {
            for (y, wy) in xs.iter().zip(grid.weights()) {
                meas.push(a * wx * wy * x.powi(e1) * y.powi(e2));
                outer.push(x.hypot(*y) > half);
            }
        }
        Ok(Self {
            cap_weights: rule.weights().to_vec(),
            u,
            v,
            n2: xs.len(),
            meas,
            outer,
            undersampled: (quad.space_radius > 2.0 * quad.cap_nodes as f64).then(|| NumericWarning::Undersampled {
                detail: format!(
                    "{} cap nodes do not resolve oscillations out to radius {}",
                    quad.cap_nodes, quad.space_radius
                ),
            }),
        })
    }

    fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        let coef: Vec<Complex64> = f.iter().zip(&self.cap_weights).map(|(v, w)| v * w).collect();
        let n1 = self.u.first().map_or(0, |r| r.len());
        (0..n1)
            .into_par_iter()
            .flat_map_iter(|a| {
                let mut row = vec![ZERO; self.n2];
                for (i, c) in coef.iter().enumerate() {
                    let ca = c * self.u[i][a];
                    for (o, vb) in row.iter_mut().zip(&self.v[i]) {
                        *o += ca * vb;
                    }
                }
                row
            })
            .collect()
    }

    /// `F hat sigma (0)`, which the grid does not contain.
    fn at_origin(&self, f: &[Complex64]) -> Complex64 {
        f.iter().zip(&self.cap_weights).map(|(v, w)| v * w).sum()
    }

    /// Exact adjoint of [`apply`] for the cap and space pairings.
    fn adjoint(&self, g: &[Complex64]) -> Vec<Complex64> {
        let n2 = self.n2;
        self.u
            .par_iter()
            .zip(&self.v)
            .map(|(ui, vi)| {
                let mut acc = ZERO;
                for (a, &ua) in ui.iter().enumerate() {
                    let row = &g[a * n2..(a + 1) * n2];
                    let m = &self.meas[a * n2..(a + 1) * n2];
                    let s: Complex64 = row.iter().zip(m).zip(vi).map(|((gv, w), vb)| gv * (w * vb)).sum();
                    acc += s * ua;
                }
                acc
            })
            .collect()
    }

    fn cap_norm(&self, f: &[Complex64]) -> f64 {
        f.iter().zip(&self.cap_weights).map(|(v, w)| w * v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `(||AF||_{p'}^{p'}` or the sup, fraction of the integral outside `R/2`).
    fn space_norm(&self, field: &[Complex64], origin: Complex64, pd: f64) -> (f64, f64) {
        if pd.is_infinite() {
            let m = field.iter().map(|z| z.norm()).fold(origin.norm(), f64::max);
            return (m, 0.0);
        }
        let (mut tot, mut out) = (0.0, 0.0);
        for ((z, w), o) in field.iter().zip(&self.meas).zip(&self.outer) {
            let c = w * z.norm().powf(pd);
            tot += c;
            if *o {
                out += c;
            }
        }
        (tot.powf(1.0 / pd), if tot > 0.0 { out / tot } else { 0.0 })
    }
}

/// Estimated share of `int |F hat sigma|^{p'}` beyond the truncation radius,
/// extrapolating the outer dyadic shell with the generic decay `|x|^{-(d-1)/2}`.
fn tail_estimate(shell_fraction: f64, d: usize, pd: f64) -> f64 {
    let e = d as f64 - 0.5 * (d as f64 - 1.0) * pd;
    if e >= 0.0 {
        return f64::INFINITY;
    }
    shell_fraction / (2f64.powf(-e) - 1.0)
}

fn check_exponent(p: LorentzExponent) -> Result<f64> {
    if !p.is_lebesgue() {
        return Err(invalid("the maximizer search takes a Lebesgue exponent"));
    }
    if !(p.p >= 1.0 && p.p <= 2.0) {
        return Err(invalid(format!("restriction exponent must lie in [1, 2], got {}", p.p)));
    }
    Ok(p.p_dual())
}

fn evaluate(disc: &Discretization, f: &[Complex64], pd: f64, params: SymmetryParams, tol: f64) -> Result<Checked<f64>> {
    let n = disc.cap_norm(f);
    if n == 0.0 {
        return Err(invalid("objective of the zero profile is undefined"));
    }
    let field = disc.apply(f);
    let (num, shell) = disc.space_norm(&field, disc.at_origin(f), pd);
    let mut warnings: Vec<NumericWarning> = disc.undersampled.iter().cloned().collect();
    if pd.is_finite() {
        let est = tail_estimate(shell, params.d, pd);
        if est > tol {
            warnings.push(NumericWarning::TailTruncation { estimate: est, tol });
        }
    }
    Ok(Checked::with(num / n, warnings))
}

/// `||F hat sigma||_{L^{p'}(R^d)} / ||F||_{L^2(S^{d-1})}` on the grid of `quad`.
pub fn objective(f: &CapProfile, p: LorentzExponent, params: SymmetryParams, quad: &QuadratureSpec) -> Result<Checked<f64>> {
    let pd = check_exponent(p)?;
    if f.params() != params {
        return Err(invalid("cap profile was built for different symmetry parameters"));
    }
    let disc = Discretization::new(f.rule(), quad)?;
    evaluate(&disc, f.values(), pd, params, quad.tol)
}

fn step(disc: &Discretization, f: &[Complex64], pd: f64) -> Result<Vec<Complex64>> {
    let field = disc.apply(f);
    let g: Vec<Complex64> = if pd.is_infinite() {
        // the adjoint of a point evaluation; the origin competes with the grid
        let origin = disc.at_origin(f);
        let (idx, best) = field
            .iter()
            .enumerate()
            .fold((None, origin.norm()), |(bi, bv), (i, z)| if z.norm() > bv { (Some(i), z.norm()) } else { (bi, bv) });
        if best == 0.0 {
            return Err(invalid("power step of a profile with vanishing extension"));
        }
        match idx {
            None => {
                let ph = origin / origin.norm();
                vec![ph; f.len()]
            }
            Some(i) => {
                let (a, b) = (i / disc.n2, i % disc.n2);
                let ph = field[i] / field[i].norm();
                (0..f.len()).map(|j| ph * disc.u[j][a] * disc.v[j][b]).collect()
            }
        }
    } else {
        let g: Vec<Complex64> = field.iter().map(|z| if *z == ZERO { ZERO } else { z * z.norm().powf(pd - 2.0) }).collect();
        disc.adjoint(&g)
    };
    let n = disc.cap_norm(&g);
    if !(n > 0.0) {
        return Err(invalid("power step produced the zero profile"));
    }
    Ok(g.into_iter().map(|z| z / n).collect())
}

/// One ascent step `F+ ∝ A*(|AF|^{p'-2} AF)`, normalized in `L^2` of the sphere.
pub fn power_step(f: &CapProfile, p: LorentzExponent, params: SymmetryParams, quad: &QuadratureSpec) -> Result<CapProfile> {
    let pd = check_exponent(p)?;
    if f.params() != params {
        return Err(invalid("cap profile was built for different symmetry parameters"));
    }
    if f.l2_norm() == 0.0 {
        return Err(invalid("power step of the zero profile"));
    }
    if (pd - 1.0).abs() < 1e-15 {
        return Err(invalid("power step needs p' > 1"));
    }
    let disc = Discretization::new(f.rule(), quad)?;
    f.with_values(step(&disc, f.values(), pd)?)
}

/// Whether a maximizer is known to exist at this exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExistenceLabel {
    MaximizerExists,
    SupremumEstimateOnly,
}

pub fn existence_label(params: SymmetryParams, p: f64) -> ExistenceLabel {
    let m = params.m as f64;
    let d = params.d as f64;
    if params.in_theorem_range() && p >= 1.0 && p < 2.0 * (d + m) / (d + m + 2.0) {
        ExistenceLabel::MaximizerExists
    } else {
        ExistenceLabel::SupremumEstimateOnly
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MaximizerRun {
    pub params: SymmetryParams,
    pub p: LorentzExponent,
    pub grid: QuadratureSpec,
    #[serde(skip)]
    pub iterate: CapProfile,
    pub objective: f64,
    pub objective_history: Vec<f64>,
    pub converged: bool,
    pub warnings: Vec<NumericWarning>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaximizeOptions {
    pub max_iters: usize,
    /// Random starts in addition to the constant start.
    pub restarts: usize,
    pub seed: u64,
    /// Relative gain below which a step counts as no progress.
    pub gain_tol: f64,
    /// Re-run on the doubled grid from the interpolated best profile.
    pub check_doubling: bool,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            restarts: 8,
            seed: 0,
            gain_tol: 1e-9,
            check_doubling: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MaximizeReport {
    pub best: MaximizerRun,
    pub label: ExistenceLabel,
    pub constant_objective: f64,
    pub restart_objectives: Vec<f64>,
    pub doubled_objective: Option<f64>,
    pub grid_change: Option<f64>,
}

fn run_from(disc: &Discretization, start: Vec<Complex64>, pd: f64, params: SymmetryParams, opts: &MaximizeOptions, tol: f64) -> Result<(Vec<Complex64>, Vec<f64>, bool, Vec<NumericWarning>)> {
    let n = disc.cap_norm(&start);
    if n == 0.0 {
        return Err(invalid("start profile is zero"));
    }
    let mut f: Vec<Complex64> = start.into_iter().map(|z| z / n).collect();
    let first = evaluate(disc, &f, pd, params, tol)?;
    let mut hist = vec![first.value];
    let mut quiet = 0;
    let mut converged = false;
    for _ in 0..opts.max_iters {
        let next = step(disc, &f, pd)?;
        let val = evaluate(disc, &next, pd, params, tol)?.value;
        let prev = *hist.last().unwrap();
        if val < prev {
            // a finite-precision dip; keep the better iterate
            if (prev - val) > 1e-8 * prev {
                hist.push(val);
                f = next;
                quiet = 0;
                continue;
            }
            quiet += 1;
        } else if (val - prev) <= opts.gain_tol * prev {
            quiet += 1;
        } else {
            quiet = 0;
        }
        hist.push(val);
        f = next;
        if quiet >= PATIENCE {
            converged = true;
            break;
        }
    }
    let mut warnings = evaluate(disc, &f, pd, params, tol)?.warnings;
    if !converged {
        warnings.push(NumericWarning::Stagnation { steps: opts.max_iters, tol: opts.gain_tol });
    }
    Ok((f, hist, converged, warnings))
}

fn random_start(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// Values of `f` transferred to the nodes of `rule` by polynomial
/// interpolation in `u = 2 r^2 - 1`.
pub fn transfer(f: &CapProfile, rule: &CapRule) -> Result<CapProfile> {
    let src: Vec<f64> = f.nodes().iter().map(|r| 2.0 * r * r - 1.0).collect();
    let bary = barycentric_weights(&src);
    let mut basis = vec![0.0; src.len()];
    let vals = rule
        .r()
        .iter()
        .map(|r| {
            lagrange_basis(&src, &bary, 2.0 * r * r - 1.0, &mut basis);
            basis.iter().zip(f.values()).map(|(b, v)| v * *b).sum()
        })
        .collect();
    CapProfile::new(rule.clone(), vals)
}

/// Best of a constant start and `restarts` seeded random starts.
pub fn maximize(params: SymmetryParams, p: LorentzExponent, quad: &QuadratureSpec, opts: &MaximizeOptions) -> Result<MaximizeReport> {
    let pd = check_exponent(p)?;
    if (pd - 1.0).abs() < 1e-15 {
        return Err(invalid("maximize needs p' > 1"));
    }
    if opts.max_iters == 0 {
        return Err(invalid("maximize needs at least one iteration"));
    }
    let rule = CapRule::gauss_jacobi(params, quad.cap_nodes)?;
    let disc = Discretization::new(&rule, quad)?;
    let n = rule.len();
    let constant = vec![Complex64::new(1.0, 0.0); n];
    let constant_objective = evaluate(&disc, &constant, pd, params, quad.tol)?.value;
    let starts: Vec<Vec<Complex64>> = std::iter::once(constant)
        .chain((0..opts.restarts).map(|j| random_start(n, opts.seed.wrapping_add(j as u64))))
        .collect();
    let runs: Result<Vec<_>> = starts
        .into_par_iter()
        .map(|s| run_from(&disc, s, pd, params, opts, quad.tol))
        .collect();
    let runs = runs?;
    let restart_objectives: Vec<f64> = runs.iter().map(|r| *r.1.last().unwrap()).collect();
    let (bi, _) = restart_objectives
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    let (f, hist, converged, warnings) = runs.into_iter().nth(bi).unwrap();
    let iterate = CapProfile::new(rule, f)?;
    let objective = *hist.last().unwrap();
    let (doubled_objective, grid_change) = if opts.check_doubling {
        let q2 = quad.doubled();
        let rule2 = CapRule::gauss_jacobi(params, q2.cap_nodes)?;
        let disc2 = Discretization::new(&rule2, &q2)?;
        let start = transfer(&iterate, &rule2)?;
        let fine = run_from(&disc2, start.values().to_vec(), pd, params, opts, q2.tol)?;
        let v = *fine.1.last().unwrap();
        (Some(v), Some((v - objective).abs() / objective))
    } else {
        (None, None)
    };
    Ok(MaximizeReport {
        best: MaximizerRun {
            params,
            p,
            grid: *quad,
            iterate,
            objective,
            objective_history: hist,
            converged,
            warnings,
        },
        label: existence_label(params, p.p),
        constant_objective,
        restart_objectives,
        doubled_objective,
        grid_change,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DualityReport {
    /// `int f conj(F hat sigma) dx`.
    pub space_pairing: Complex64,
    /// `int f hat conj(F) dsigma`.
    pub sphere_pairing: Complex64,
    pub residual: f64,
    /// `||f hat||_{L^2(S)} / ||f||_p`.
    pub restriction_quotient: f64,
    /// `||F hat sigma||_{p'} / ||F||_2` for the normalized restriction `F = f hat / ||f hat||`.
    pub extension_quotient: f64,
    /// Restriction quotient minus the pairing reconstruction `<f, F hat sigma> / ||f||_p`.
    pub reconstruction_gap: f64,
    /// Hoelder chain `restriction_quotient <= extension_quotient`.
    pub chain_holds: bool,
}

/// Discrete check of `<f, F hat sigma> = <f hat, F>` and of the chain
/// linking the restriction quotient to the extension quotient of the
/// normalized restriction of `f hat`.
pub fn duality_check(params: SymmetryParams, p: LorentzExponent, f: &RadialProfile2D, big_f: &CapProfile, quad: &QuadratureSpec) -> Result<DualityReport> {
    let pd = check_exponent(p)?;
    if big_f.params() != params {
        return Err(invalid("cap profile was built for different symmetry parameters"));
    }
    let rule = big_f.rule();
    let ext = extension_field(big_f, f.grid1().nodes(), f.grid2().nodes(), params)?;
    let mu = f.measure(params);
    let space_pairing: Complex64 = f.values().iter().zip(&ext.values).zip(&mu).map(|((a, b), w)| a * b.conj() * *w).sum();
    let restricted = restrict_to_sphere(f, rule, quad)?.value;
    let sphere_pairing: Complex64 = restricted
        .values()
        .iter()
        .zip(big_f.values())
        .zip(rule.weights())
        .map(|((a, b), w)| a * b.conj() * *w)
        .sum();
    let scale = space_pairing.norm().max(sphere_pairing.norm()).max(1e-300);
    let residual = (space_pairing - sphere_pairing).norm() / scale;

    let fp = crate::symgeom::lp_norm_2d(f, LorentzExponent::lebesgue(p.p)?, params)?.value;
    let rn = restricted.l2_norm();
    let (restriction_quotient, extension_quotient, reconstruction_gap) = if rn > 0.0 && fp > 0.0 {
        let unit = restricted.normalized()?;
        let ext2 = extension_field(&unit, f.grid1().nodes(), f.grid2().nodes(), params)?;
        let pair: Complex64 = f.values().iter().zip(&ext2.values).zip(&mu).map(|((a, b), w)| a * b.conj() * *w).sum();
        let disc = Discretization::new(rule, quad)?;
        let eq = evaluate(&disc, unit.values(), pd, params, quad.tol)?.value;
        (rn / fp, eq, (rn - pair.re).abs() / fp)
    } else {
        (0.0, 0.0, 0.0)
    };
    Ok(DualityReport {
        space_pairing,
        sphere_pairing,
        residual,
        restriction_quotient,
        extension_quotient,
        reconstruction_gap,
        chain_holds: restriction_quotient <= extension_quotient * (1.0 + 1e-6),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn small() -> QuadratureSpec {
        QuadratureSpec {
            cap_nodes: 16,
            space_radius: 24.0,
            space_nodes: 96,
            tol: 1e-3,
        }
    }

    #[test]
    fn discrete_adjoint_is_exact() {
        let params = SymmetryParams::new(4, 2).unwrap();
        let rule = CapRule::gauss_jacobi(params, 12).unwrap();
        let disc = Discretization::new(&rule, &small()).unwrap();
        let f = random_start(12, 3);
        let g = random_start(disc.meas.len(), 4);
        let af = disc.apply(&f);
        let lhs: Complex64 = af.iter().zip(&g).zip(&disc.meas).map(|((a, b), w)| a * b.conj() * *w).sum();
        let ag = disc.adjoint(&g);
        let rhs: Complex64 = f.iter().zip(&ag).zip(&disc.cap_weights).map(|((a, b), w)| a * b.conj() * *w).sum();
        assert!((lhs - rhs).norm() < 1e-10 * lhs.norm());
    }

    #[test]
    fn constant_at_p_one_gives_sphere_area_root() {
        let params = SymmetryParams::new(4, 2).unwrap();
        let rule = CapRule::gauss_jacobi(params, 16).unwrap();
        let f = CapProfile::constant(rule, Complex64::new(3.0, 0.0)).unwrap();
        let v = objective(&f, LorentzExponent::lebesgue(1.0).unwrap(), params, &small()).unwrap();
        assert!((v.value - (2.0 * PI * PI).sqrt()).abs() < 1e-10);
        let g = f.scaled(Complex64::new(0.0, -2.0));
        let w = objective(&g, LorentzExponent::lebesgue(1.0).unwrap(), params, &small()).unwrap();
        assert!((v.value - w.value).abs() < 1e-12);
    }

    #[test]
    fn ascent_is_monotone_and_zero_is_rejected() {
        let params = SymmetryParams::new(4, 2).unwrap();
        let p = LorentzExponent::lebesgue(10.0 / 7.0).unwrap();
        let rule = CapRule::gauss_jacobi(params, 16).unwrap();
        let disc = Discretization::new(&rule, &small()).unwrap();
        let opts = MaximizeOptions { max_iters: 50, ..Default::default() };
        let (_, hist, _, _) = run_from(&disc, random_start(16, 9), p.p_dual(), params, &opts, 1e-3).unwrap();
        assert!(hist.windows(2).all(|w| w[1] >= w[0] - 1e-8 * w[0]), "{hist:?}");
        let zero = CapProfile::constant(rule, ZERO).unwrap();
        assert!(power_step(&zero, p, params, &small()).is_err());
    }

    #[test]
    fn transfer_reproduces_polynomials() {
        let params = SymmetryParams::new(5, 2).unwrap();
        let a = CapRule::gauss_jacobi(params, 10).unwrap();
        let b = CapRule::gauss_jacobi(params, 17).unwrap();
        let f = CapProfile::from_fn(a, |r| Complex64::new(1.0 + r * r - 2.0 * r.powi(4), r * r)).unwrap();
        let g = transfer(&f, &b).unwrap();
        for (r, v) in g.nodes().iter().zip(g.values()) {
            assert!((v - Complex64::new(1.0 + r * r - 2.0 * r.powi(4), r * r)).norm() < 1e-12);
        }
    }

    #[test]
    fn gaussian_duality_residual() {
        let params = SymmetryParams::new(4, 2).unwrap();
        let f = RadialProfile2D::gaussian(10.0, 64).unwrap();
        let rule = CapRule::gauss_jacobi(params, 24).unwrap();
        let one = CapProfile::constant(rule, Complex64::new(1.0, 0.0)).unwrap();
        let r = duality_check(params, LorentzExponent::lebesgue(10.0 / 7.0).unwrap(), &f, &one, &small()).unwrap();
        assert!(r.residual < 1e-6, "{r:?}");
        assert!(r.reconstruction_gap < 1e-6, "{r:?}");
        assert!(r.chain_holds);
    }
}
