use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::oscillatory::oscillatory_between;
use super::WeightedOpParams;
use crate::error::{invalid, Result};
use crate::quadrature::{gauss_legendre, GaussRule, RadialGrid};
use crate::specfun::amplitude;
use crate::symgeom::{RadialProfile2D, SymmetryParams};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Samples of a function on the unit circle at the angles `2 pi j / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleSamples {
    values: Vec<Complex64>,
}

impl CircleSamples {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        if values.len() < 8 {
            return Err(invalid("circle samples need at least 8 angles"));
        }
        Ok(Self { values })
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        Self::new((0..n).map(|j| f(2.0 * PI * j as f64 / n as f64)).collect())
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn angle(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.values.len() as f64
    }

    /// Periodic cubic (four-point Lagrange) interpolation.
    pub fn eval(&self, theta: f64) -> Complex64 {
        let n = self.values.len();
        let h = 2.0 * PI / n as f64;
        let u = theta.rem_euclid(2.0 * PI) / h;
        let j = u.floor() as isize;
        let t = u - j as f64;
        let v = |k: isize| self.values[(j + k).rem_euclid(n as isize) as usize];
        let w = [
            -t * (t - 1.0) * (t - 2.0) / 6.0,
            (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
            -(t + 1.0) * t * (t - 2.0) / 2.0,
            (t + 1.0) * t * (t - 1.0) / 6.0,
        ];
        v(-1) * w[0] + v(0) * w[1] + v(1) * w[2] + v(2) * w[3]
    }

    /// `F` summed over the four points sharing `(|cos|, |sin|)` with `phi`.
    fn folded(&self, phi: f64) -> Complex64 {
        self.eval(phi) + self.eval(PI - phi) + self.eval(PI + phi) + self.eval(2.0 * PI - phi)
    }

    /// `(int |F|^r d theta)^{1/r}` by the trapezoid rule.
    pub fn lp_norm(&self, r: f64) -> f64 {
        let h = 2.0 * PI / self.values.len() as f64;
        if r.is_infinite() {
            return self.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        }
        (h * self.values.iter().map(|z| z.norm().powf(r)).sum::<f64>()).powf(1.0 / r)
    }
}

fn weight(x: [f64; 2], alpha: f64, beta: f64) -> f64 {
    (1.0 + x[0].abs()).powf(-alpha) * (1.0 + x[1].abs()).powf(-beta)
}

/// Folded angles `phi in [0, pi/2]` with `cos(phi)|x1| >= 1` and
/// `sin(phi)|x2| >= 1`, or `None` when the set is empty.
fn active_interval(x: [f64; 2]) -> Option<(f64, f64)> {
    let (a1, a2) = (x[0].abs(), x[1].abs());
    if a1 < 1.0 || a2 < 1.0 {
        return None;
    }
    let (lo, hi) = ((1.0 / a2).asin(), (1.0 / a1).acos());
    (hi > lo).then_some((lo, hi))
}

/// `R*_{alpha,beta}(F)(x)`: the weight `(1+|x1|)^{-alpha}(1+|x2|)^{-beta}`
/// times the integral of `F(omega) e^{i x.(|omega1|, |omega2|)}` over the
/// part of the circle where `|omega_i||x_i| >= 1`.
pub fn op_r_adjoint(
    f: &CircleSamples,
    alpha: f64,
    beta: f64,
    x: [f64; 2],
    per_panel: usize,
) -> Result<Complex64> {
    if !(alpha >= 0.0 && beta >= 0.0) {
        return Err(invalid("alpha and beta must be nonnegative"));
    }
    let Some((lo, hi)) = active_interval(x) else {
        return Ok(ZERO);
    };
    let rule = gauss_legendre(per_panel.max(4));
    let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
    let h_data = 2.0 * PI / f.len() as f64;
    let panels = (((hi - lo) * r / PI).max((hi - lo) / h_data)).ceil().max(1.0) as usize;
    let h = (hi - lo) / panels as f64;
    let (a1, a2) = (x[0].abs(), x[1].abs());
    let mut acc = ZERO;
    for q in 0..panels {
        let (ps, ws) = rule.mapped(lo + h * q as f64, lo + h * (q + 1) as f64);
        for (&phi, &w) in ps.iter().zip(&ws) {
            acc += f.folded(phi) * Complex64::from_polar(w, a1 * phi.cos() + a2 * phi.sin());
        }
    }
    Ok(acc * weight(x, alpha, beta))
}

/// Symmetric Gauss-Legendre nodes on `[-extent, extent]` for one axis.
fn axis_nodes(extent: f64, cut: f64, width: f64, rule: &GaussRule) -> (Vec<f64>, Vec<f64>) {
    let mut breaks = vec![0.0];
    if cut > 0.0 && cut < extent {
        breaks.push(cut);
    }
    breaks.push(extent);
    let (mut xs, mut ws) = (Vec::new(), Vec::new());
    for seg in breaks.windows(2) {
        let n = ((seg[1] - seg[0]) / width).ceil().max(1.0) as usize;
        let h = (seg[1] - seg[0]) / n as f64;
        for q in 0..n {
            let (p, w) = rule.mapped(seg[0] + h * q as f64, seg[0] + h * (q + 1) as f64);
            for (&x, &wt) in p.iter().zip(&w) {
                xs.push(x);
                ws.push(wt);
                xs.push(-x);
                ws.push(wt);
            }
        }
    }
    (xs, ws)
}

/// `R_{alpha,beta}(h)(omega)` for `h` supported in `[-extent, extent]^2`:
/// the integral of `h(x) (1+|x1|)^{-alpha}(1+|x2|)^{-beta} e^{-i x.(|omega1|,|omega2|)}`
/// over `|omega_i||x_i| >= 1`.
pub fn op_r(
    h: impl Fn([f64; 2]) -> Complex64 + Sync,
    extent: f64,
    alpha: f64,
    beta: f64,
    omega: [f64; 2],
) -> Result<Complex64> {
    if !(alpha >= 0.0 && beta >= 0.0) {
        return Err(invalid("alpha and beta must be nonnegative"));
    }
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(invalid("support extent must be positive"));
    }
    let (o1, o2) = (omega[0].abs(), omega[1].abs());
    if o1 * extent < 1.0 || o2 * extent < 1.0 {
        return Ok(ZERO);
    }
    let rule = gauss_legendre(16);
    let width = |o: f64| (PI / o).min(1.0);
    let (x1, w1) = axis_nodes(extent, 1.0 / o1, width(o1), &rule);
    let (x2, w2) = axis_nodes(extent, 1.0 / o2, width(o2), &rule);
    Ok(x1
        .par_iter()
        .zip(&w1)
        .filter(|(a, _)| a.abs() * o1 >= 1.0)
        .map(|(&a, &wa)| {
            x2.iter()
                .zip(&w2)
                .filter(|(b, _)| b.abs() * o2 >= 1.0)
                .map(|(&b, &wb)| {
                    let x = [a, b];
                    h(x) * Complex64::from_polar(wa * wb * weight(x, alpha, beta), -(a.abs() * o1 + b.abs() * o2))
                })
                .sum::<Complex64>()
        })
        .sum())
}

/// `R` and `R*` discretized on `N` uniform angles (weights `2 pi / N`) and
/// a planar point set with weights, as exact adjoints of each other.
#[derive(Debug, Clone)]
pub struct DiscreteR {
    pub alpha: f64,
    pub beta: f64,
    pub angles: usize,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl DiscreteR {
    pub fn new(alpha: f64, beta: f64, angles: usize, points: Vec<[f64; 2]>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() || angles < 8 {
            return Err(invalid("discrete R needs matching points and weights and >= 8 angles"));
        }
        if !(alpha >= 0.0 && beta >= 0.0) {
            return Err(invalid("alpha and beta must be nonnegative"));
        }
        Ok(Self { alpha, beta, angles, points, weights })
    }

    /// Tensor Gauss-Legendre points on `[-extent, extent]^2`.
    pub fn tensor(alpha: f64, beta: f64, angles: usize, extent: f64, panels: usize) -> Result<Self> {
        let rule = gauss_legendre(8);
        let (xs, ws) = axis_nodes(extent, 0.0, extent / panels.max(1) as f64, &rule);
        let mut pts = Vec::with_capacity(xs.len() * xs.len());
        let mut wts = Vec::with_capacity(xs.len() * xs.len());
        for (&a, &wa) in xs.iter().zip(&ws) {
            for (&b, &wb) in xs.iter().zip(&ws) {
                pts.push([a, b]);
                wts.push(wa * wb);
            }
        }
        Self::new(alpha, beta, angles, pts, wts)
    }

    fn kernel(&self, x: [f64; 2], j: usize) -> Complex64 {
        let th = 2.0 * PI * j as f64 / self.angles as f64;
        let (c, s) = (th.cos().abs(), th.sin().abs());
        if c * x[0].abs() < 1.0 || s * x[1].abs() < 1.0 {
            return ZERO;
        }
        Complex64::from_polar(weight(x, self.alpha, self.beta), x[0].abs() * c + x[1].abs() * s)
    }

    pub fn apply_adjoint(&self, f: &[Complex64]) -> Vec<Complex64> {
        let h = 2.0 * PI / self.angles as f64;
        self.points
            .par_iter()
            .map(|&x| (0..self.angles).map(|j| self.kernel(x, j) * f[j] * h).sum())
            .collect()
    }

    pub fn apply(&self, g: &[Complex64]) -> Vec<Complex64> {
        (0..self.angles)
            .into_par_iter()
            .map(|j| {
                self.points
                    .iter()
                    .zip(&self.weights)
                    .zip(g)
                    .map(|((&x, &w), gx)| self.kernel(x, j).conj() * gx * w)
                    .sum()
            })
            .collect()
    }

    pub fn circle_pairing(&self, u: &[Complex64], v: &[Complex64]) -> Complex64 {
        let h = 2.0 * PI / self.angles as f64;
        u.iter().zip(v).map(|(a, b)| a * b.conj() * h).sum()
    }

    pub fn plane_pairing(&self, u: &[Complex64], v: &[Complex64]) -> Complex64 {
        self.weights.iter().zip(u.iter().zip(v)).map(|(w, (a, b))| a * b.conj() * *w).sum()
    }
}

/// Resolution of the angular double integral in [`r_adjoint_l2_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GramSettings {
    /// Gauss-Legendre nodes per panel.
    pub per_panel: usize,
    /// Panels per oscillation period `2 pi / radius`.
    pub panels_per_period: f64,
}

impl Default for GramSettings {
    fn default() -> Self {
        Self {
            per_panel: 8,
            panels_per_period: 0.5,
        }
    }
}

/// `2 int_m^R (1+t)^{-g} e^{i t delta} dt`; both signs of the coordinate
/// contribute the same phase since only `|x_i|` enters.
fn gram_axis(g: f64, m: f64, radius: f64, delta: f64) -> Complex64 {
    if m >= radius {
        return ZERO;
    }
    2.0 * Complex64::from_polar(1.0, -delta) * oscillatory_between(g, 1.0 + m, 1.0 + radius, delta)
}

/// `||R*_{alpha,beta} F||_{L^2([-R,R]^2)}` from the Gram form
/// `int int G(theta) conj(G(phi)) K_alpha K_beta d theta d phi`, where the
/// planar integrals `K` are one-dimensional oscillatory integrals done in
/// closed form per axis.
pub fn r_adjoint_l2_norm(
    f: &CircleSamples,
    alpha: f64,
    beta: f64,
    radius: f64,
    settings: GramSettings,
) -> Result<f64> {
    if !(alpha >= 0.0 && beta >= 0.0) {
        return Err(invalid("alpha and beta must be nonnegative"));
    }
    if !(radius > 1.0 && radius.is_finite()) {
        return Err(invalid("truncation radius must exceed 1"));
    }
    let (lo, hi) = ((1.0 / radius).asin(), (1.0 / radius).acos());
    let rule = gauss_legendre(settings.per_panel.max(2));
    let width = 2.0 * PI / radius / settings.panels_per_period.max(0.25);
    let n = ((hi - lo) / width).ceil().max(1.0) as usize;
    let h = (hi - lo) / n as f64;
    let (mut th, mut wt) = (Vec::new(), Vec::new());
    for q in 0..n {
        let (p, w) = rule.mapped(lo + h * q as f64, lo + h * (q + 1) as f64);
        th.extend(p);
        wt.extend(w);
    }
    let g: Vec<Complex64> = th.iter().zip(&wt).map(|(&t, &w)| f.folded(t) * w).collect();
    let cs: Vec<(f64, f64)> = th.iter().map(|&t| (t.cos(), t.sin())).collect();
    let (ga, gb) = (2.0 * alpha, 2.0 * beta);
    let total: f64 = (0..th.len())
        .into_par_iter()
        .map(|i| {
            let (ci, si) = cs[i];
            let mut acc = ZERO;
            for j in 0..th.len() {
                let (cj, sj) = cs[j];
                let m1 = 1.0 / ci.min(cj);
                let m2 = 1.0 / si.min(sj);
                let k1 = gram_axis(ga, m1, radius, ci - cj);
                if k1 == ZERO {
                    continue;
                }
                let k2 = gram_axis(gb, m2, radius, si - sj);
                acc += g[j].conj() * (k1 * k2);
            }
            (g[i] * acc).re
        })
        .sum();
    Ok(total.max(0.0).sqrt())
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 && p < 2.0 {
        Ok(())
    } else {
        Err(invalid(format!("f4 reduction needs 1 <= p < 2, got {p}")))
    }
}

/// `R_{alpha,beta}(h)` evaluated with the conjugated phase `e^{+i x.omega}`
/// on the positive quadrant, for `h` sampled on the tensor grid of `f`.
fn r_on_profile(
    grid1: &RadialGrid,
    grid2: &RadialGrid,
    h: &[Complex64],
    alpha: f64,
    beta: f64,
    omega: [f64; 2],
) -> Complex64 {
    let axis = |grid: &RadialGrid, o: f64, w: f64| {
        let cut = 1.0 / o;
        grid.product_weights(
            |rho| {
                if rho * o < 1.0 || rho < 1.0 {
                    ZERO
                } else {
                    Complex64::from_polar((1.0 + rho).powf(-w), rho * o)
                }
            },
            PI / o.max(1.0),
            &[1.0, cut],
        )
    };
    let w1 = axis(grid1, omega[0], alpha);
    let w2 = axis(grid2, omega[1], beta);
    let n2 = grid2.len();
    h.chunks(n2)
        .zip(&w1)
        .map(|(row, a)| a * row.iter().zip(&w2).map(|(v, b)| v * b).sum::<Complex64>())
        .sum()
}

/// The principal-principal piece of the split transform at `(eta, zeta)`,
/// computed through `R_{alpha_p, beta_p}` applied to
/// `h = rho1^{(d-k-1)/2} rho2^{(k-1)/2} (1+rho1)^{alpha_p} (1+rho2)^{beta_p} f`
/// restricted to `[1, inf)^2`. Agrees with the direct piece whenever `f`
/// vanishes where some `rho_i < 1` or both magnitudes are at most 1.
pub fn f4_via_r(
    f: &RadialProfile2D,
    p: f64,
    eta_mag: f64,
    zeta_mag: f64,
    params: SymmetryParams,
) -> Result<Complex64> {
    params.require_theorem_range()?;
    check_p(p)?;
    if !(eta_mag > 0.0 && zeta_mag > 0.0) {
        return Err(invalid("f4 reduction needs nonzero frequency magnitudes"));
    }
    let (alpha, beta) = WeightedOpParams::weights_for(params.d, params.k, p)?;
    let (n1, n2) = (params.n1() as f64, params.k as f64);
    let (e1, e2) = (0.5 * (n1 - 1.0), 0.5 * (n2 - 1.0));
    let g2 = f.grid2().nodes();
    let h: Vec<Complex64> = f
        .values()
        .iter()
        .enumerate()
        .map(|(idx, v)| {
            let r1 = f.grid1().nodes()[idx / g2.len()];
            let r2 = g2[idx % g2.len()];
            if r1 < 1.0 || r2 < 1.0 {
                return ZERO;
            }
            v * (r1.powf(e1) * r2.powf(e2) * (1.0 + r1).powf(alpha) * (1.0 + r2).powf(beta))
        })
        .collect();
    let r = r_on_profile(f.grid1(), f.grid2(), &h, alpha, beta, [eta_mag, zeta_mag]);
    let a1 = amplitude(0.5 * (n1 - 2.0));
    let a2 = amplitude(0.5 * (n2 - 2.0));
    Ok(a1 * a2 * eta_mag.powf(-e1) * zeta_mag.powf(-e2) * r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::QuadratureSpec;
    use crate::transforms::split_transform;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn smooth_circle(n: usize) -> CircleSamples {
        CircleSamples::from_fn(n, |t| Complex64::new(1.0 + 0.5 * (2.0 * t).cos(), 0.3 * (4.0 * t).sin())).unwrap()
    }

    #[test]
    fn indicator_kills_small_coordinates() {
        let f = smooth_circle(64);
        assert_eq!(op_r_adjoint(&f, 0.3, 0.3, [0.9, 50.0], 16).unwrap(), ZERO);
        let zero = CircleSamples::new(vec![ZERO; 64]).unwrap();
        assert_eq!(op_r_adjoint(&zero, 0.3, 0.3, [5.0, 7.0], 16).unwrap(), ZERO);
    }

    #[test]
    fn discrete_pair_is_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r = DiscreteR::tensor(1.0 / 3.0, 0.25, 64, 6.0, 6).unwrap();
        let mut c = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let f: Vec<Complex64> = (0..64).map(|_| c()).collect();
        let g: Vec<Complex64> = (0..r.points.len()).map(|_| c()).collect();
        let lhs = r.plane_pairing(&r.apply_adjoint(&f), &g);
        let rhs = r.circle_pairing(&f, &r.apply(&g));
        assert!((lhs - rhs).norm() < 1e-8 * lhs.norm().max(1.0));
    }

    #[test]
    fn pointwise_adjoint_matches_fine_discrete_sum() {
        let n = 4096;
        let f = smooth_circle(n);
        let x = [4.3, -2.7];
        let pw = op_r_adjoint(&f, 0.2, 0.4, x, 16).unwrap();
        let r = DiscreteR::new(0.2, 0.4, n, vec![x], vec![1.0]).unwrap();
        let disc = r.apply_adjoint(f.values())[0];
        assert!((pw - disc).norm() < 5e-3, "{pw} vs {disc}");
    }

    #[test]
    fn gram_norm_matches_direct_quadrature() {
        let f = smooth_circle(256);
        let (alpha, beta, radius) = (1.0 / 3.0, 1.0 / 3.0, 8.0);
        let gram = r_adjoint_l2_norm(&f, alpha, beta, radius, GramSettings { per_panel: 8, panels_per_period: 4.0 }).unwrap();
        let rule = gauss_legendre(8);
        let (xs, ws) = axis_nodes(radius, 1.0, 0.5, &rule);
        let direct: f64 = xs
            .par_iter()
            .zip(&ws)
            .map(|(&a, &wa)| {
                xs.iter()
                    .zip(&ws)
                    .map(|(&b, &wb)| wa * wb * op_r_adjoint(&f, alpha, beta, [a, b], 16).unwrap().norm_sqr())
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt();
        assert!((gram - direct).abs() < 1e-2 * direct, "{gram} vs {direct}");
    }

    #[test]
    fn r_adjoint_l2_norm_converges_in_radius() {
        let f = CircleSamples::from_fn(4096, |_| Complex64::new(1.0, 0.0)).unwrap();
        let s = GramSettings::default();
        let sq: Vec<f64> = [250.0, 500.0, 1000.0]
            .iter()
            .map(|&r| r_adjoint_l2_norm(&f, 1.0 / 3.0, 1.0 / 3.0, r, s).unwrap().powi(2))
            .collect();
        assert!(sq.iter().all(|v| v.is_finite() && *v > 0.0));
        let (d1, d2) = (sq[1] - sq[0], sq[2] - sq[1]);
        assert!(d1 > 0.0 && d2 > 0.0 && d2 < 0.9 * d1, "{sq:?}");
    }

    fn bump(g: &RadialGrid) -> RadialProfile2D {
        let w = |r: f64| if (1.0..=4.0).contains(&r) { (r - 1.0).powi(2) * (4.0 - r).powi(2) } else { 0.0 };
        RadialProfile2D::from_fn(g.clone(), g.clone(), |a, b| Complex64::new(w(a) * w(b), 0.1 * w(a) * w(b))).unwrap()
    }

    #[test]
    fn f4_reduction_matches_split_piece() {
        let g = RadialGrid::from_breaks(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], 16).unwrap();
        let f = bump(&g);
        let params = SymmetryParams::new(4, 2).unwrap();
        let via_r = f4_via_r(&f, 1.5, 3.0, 4.0, params).unwrap();
        let split = split_transform(&f, 3.0, 4.0, params, &QuadratureSpec::default()).unwrap().value;
        assert!((via_r - split.pieces[3]).norm() < 1e-5, "{via_r} vs {}", split.pieces[3]);
    }

    #[test]
    fn f4_reduction_vanishes_inside_unit_square() {
        let g = RadialGrid::from_breaks(&[0.0, 0.5, 1.0, 2.0], 8).unwrap();
        let f = RadialProfile2D::from_fn(g.clone(), g, |a, b| {
            Complex64::new(if a < 1.0 && b < 1.0 { 1.0 } else { 0.0 }, 0.0)
        })
        .unwrap();
        let params = SymmetryParams::new(4, 2).unwrap();
        assert_eq!(f4_via_r(&f, 1.5, 3.0, 4.0, params).unwrap(), ZERO);
    }
}
