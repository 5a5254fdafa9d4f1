//! Weighted one-dimensional integral operators, the two-dimensional
//! restriction-type operator with indicator cutoffs, oscillatory tails,
//! and empirical boundedness probes.

mod oscillatory;
mod probe;
mod rop;

pub use oscillatory::{oscillatory_integral, oscillatory_bound_ratio, OscillatoryBranch};
pub use probe::{
    norm_probe, remark_family_probe, ProbeOperator, ProbeReport, RemarkReport, Stability,
};
pub use rop::{
    f4_via_r, op_r, op_r_adjoint, r_adjoint_l2_norm, CircleSamples, DiscreteR, GramSettings,
};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::quadrature::{gauss_jacobi, gauss_legendre, lagrange_basis, barycentric_weights, GaussRule, RadialGrid};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Parameters of the weighted operators: `T_{a,b}`, `S_{a,b}` on `[0, ell]`,
/// and the weights `alpha`, `beta` of the two-dimensional operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedOpParams {
    pub a: f64,
    pub b: f64,
    pub ell: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl WeightedOpParams {
    pub fn new(a: f64, b: f64, ell: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(invalid("operator exponents must be finite"));
        }
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(invalid(format!("domain length must be positive, got {ell}")));
        }
        Ok(Self {
            a,
            b,
            ell,
            alpha: 0.0,
            beta: 0.0,
        })
    }

    /// `alpha_p = (d-k-1)(1/p - 1/2)`, `beta_p = (k-1)(1/p - 1/2)`.
    pub fn weights_for(d: usize, k: usize, p: f64) -> Result<(f64, f64)> {
        if k > d || d < 2 || !(p >= 1.0) {
            return Err(invalid("weights need k <= d, d >= 2 and p >= 1"));
        }
        let t = 1.0 / p - 0.5;
        Ok(((d as f64 - k as f64 - 1.0) * t, (k as f64 - 1.0) * t))
    }

    pub fn with_weights(mut self, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && beta >= 0.0) {
            return Err(invalid("alpha and beta must be nonnegative"));
        }
        self.alpha = alpha;
        self.beta = beta;
        Ok(self)
    }

    /// Hypotheses under which `T_{a,b}: L^p -> L^q` is bounded.
    pub fn t_hypotheses(&self, p: f64, q: f64) -> bool {
        let pd = crate::symgeom::dual(p);
        1.0 < p && p <= q && q.is_finite() && self.b * pd < 1.0
            && (1.0 / pd + 1.0 / q - self.a - self.b).abs() < 1e-12
    }

    /// Hypotheses under which `S_{a,b}: L^p[0,ell] -> L^q[0,ell]` is bounded.
    pub fn s_hypotheses(&self, p: f64, q: f64) -> bool {
        let pd = crate::symgeom::dual(p);
        1.0 < p && p <= q && q.is_finite() && self.a >= 0.0 && self.b > 0.0 && self.b < 1.0
            && 1.0 / pd + 1.0 / q >= self.a + self.b - 1e-12
    }
}

/// A function on `[0, extent]` given by samples on a panel grid and
/// interpolated by polynomials panel by panel; zero beyond the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    grid: RadialGrid,
    values: Vec<Complex64>,
}

impl SampledFunction {
    pub fn new(grid: RadialGrid, values: Vec<Complex64>) -> Result<Self> {
        if grid.breaks().is_empty() {
            return Err(invalid("sampled functions need a panel grid"));
        }
        if values.len() != grid.len() {
            return Err(invalid("sample count does not match the grid"));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    fn per_panel(&self) -> usize {
        self.grid.len() / (self.grid.breaks().len() - 1)
    }

    fn panel(&self, i: usize) -> (f64, f64, &[f64], &[Complex64]) {
        let np = self.per_panel();
        let br = self.grid.breaks();
        (
            br[i],
            br[i + 1],
            &self.grid.nodes()[i * np..(i + 1) * np],
            &self.values[i * np..(i + 1) * np],
        )
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let br = self.grid.breaks();
        if x < br[0] || x > *br.last().unwrap() {
            return ZERO;
        }
        let i = br.partition_point(|&b| b <= x).saturating_sub(1).min(br.len() - 2);
        let (_, _, nodes, vals) = self.panel(i);
        let bary = barycentric_weights(nodes);
        let mut basis = vec![0.0; nodes.len()];
        lagrange_basis(nodes, &bary, x, &mut basis);
        basis.iter().zip(vals).map(|(b, v)| v * *b).sum()
    }

    /// Sum of `piece(a, b, interpolant)` over the parts of the panels
    /// inside `[lo, hi]`.
    fn integrate_pieces(
        &self,
        lo: f64,
        hi: f64,
        mut piece: impl FnMut(f64, f64, &dyn Fn(f64) -> Complex64) -> Complex64,
    ) -> Complex64 {
        let br = self.grid.breaks().to_vec();
        let mut acc = ZERO;
        for i in 0..br.len() - 1 {
            let (a, b) = (br[i].max(lo), br[i + 1].min(hi));
            if b <= a {
                continue;
            }
            let (_, _, nodes, vals) = self.panel(i);
            let bary = barycentric_weights(nodes);
            let interp = |x: f64| {
                let mut basis = vec![0.0; nodes.len()];
                lagrange_basis(nodes, &bary, x, &mut basis);
                basis.iter().zip(vals).map(|(b, v)| v * *b).sum::<Complex64>()
            };
            acc += piece(a, b, &interp);
        }
        acc
    }
}

fn gl16() -> GaussRule {
    gauss_legendre(16)
}

/// GL on `[a, b]` subdivided geometrically toward a singular point `s`
/// outside `(a, b)`: every piece is no longer than its distance to `s`.
fn graded_toward(a: f64, b: f64, s: f64, rule: &GaussRule, g: &dyn Fn(f64) -> Complex64) -> Complex64 {
    let mut acc = ZERO;
    let toward_right = s >= b;
    let (mut lo, mut hi) = (a, b);
    while hi > lo {
        let (p0, p1) = if toward_right {
            let dist = s - hi;
            let len = dist.max(1e-300).min(hi - lo);
            let start = if hi - len <= lo { lo } else { hi - len };
            let piece = (start, hi);
            hi = start;
            piece
        } else {
            let dist = lo - s;
            let len = dist.max(1e-300).min(hi - lo);
            let end = if lo + len >= hi { hi } else { lo + len };
            let piece = (lo, end);
            lo = end;
            piece
        };
        let (xs, ws) = rule.mapped(p0, p1);
        acc += xs.iter().zip(&ws).map(|(&x, &w)| g(x) * w).sum::<Complex64>();
    }
    acc
}

/// `T_{a,b}(f)(x) = x^{-a} int_0^x y^{-b} f(y) dy`.
pub fn op_t(params: &WeightedOpParams, f: &SampledFunction, x: f64) -> Result<Complex64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(invalid(format!("op_T needs x > 0, got {x}")));
    }
    let b = params.b;
    if b >= 1.0 && f.eval(0.0).norm() > 0.0 {
        return Err(LabError::Divergent(format!(
            "y^(-{b}) is not integrable at 0 against f(0) != 0"
        )));
    }
    let gl = gl16();
    let gj = if b < 1.0 { Some(gauss_jacobi(16, 0.0, -b)?) } else { None };
    let integral = f.integrate_pieces(0.0, x, |lo, hi, g| match (&gj, lo == 0.0) {
        (Some(rule), true) => {
            let h = 0.5 * hi;
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&u, &w)| g(h * (1.0 + u)) * (w * h.powf(1.0 - b)))
                .sum()
        }
        _ => graded_toward(lo, hi, 0.0, &gl, &|y| g(y) * y.powf(-b)),
    });
    Ok(integral * x.powf(-params.a))
}

fn require_s_kernel(params: &WeightedOpParams) -> Result<()> {
    if params.b > 0.0 && params.b < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("S needs 0 < b < 1, got b = {}", params.b)))
    }
}

/// `S_{a,b}(f)(x) = x^{-a} int_0^x (x-y)^{-b} f(y) dy` for `x in (0, ell]`.
pub fn op_s(params: &WeightedOpParams, f: &SampledFunction, x: f64) -> Result<Complex64> {
    require_s_kernel(params)?;
    if !(x > 0.0 && x <= params.ell) {
        return Err(invalid(format!("op_S needs x in (0, ell], got {x}")));
    }
    let b = params.b;
    let gl = gl16();
    let gj = gauss_jacobi(16, -b, 0.0)?;
    let integral = f.integrate_pieces(0.0, x, |lo, hi, g| {
        if hi >= x {
            let h = 0.5 * (x - lo);
            gj.nodes
                .iter()
                .zip(&gj.weights)
                .map(|(&u, &w)| g(lo + h * (1.0 + u)) * (w * h.powf(1.0 - b)))
                .sum()
        } else {
            graded_toward(lo, hi, x, &gl, &|y| g(y) * (x - y).powf(-b))
        }
    });
    Ok(integral * x.powf(-params.a))
}

/// `S*_{a,b}(g)(y) = int_y^ell (x-y)^{-b} x^{-a} g(x) dx` for `y in (0, ell)`.
pub fn op_s_adjoint(params: &WeightedOpParams, g: &SampledFunction, y: f64) -> Result<Complex64> {
    require_s_kernel(params)?;
    if !(y > 0.0 && y < params.ell) {
        return Err(invalid(format!("op_S* needs y in (0, ell), got {y}")));
    }
    let (a, b) = (params.a, params.b);
    let gl = gl16();
    let gj = gauss_jacobi(16, 0.0, -b)?;
    Ok(g.integrate_pieces(y, params.ell, |lo, hi, f| {
        if lo <= y {
            let h = 0.5 * (hi - y);
            gj.nodes
                .iter()
                .zip(&gj.weights)
                .map(|(&u, &w)| {
                    let x = y + h * (1.0 + u);
                    f(x) * (w * h.powf(1.0 - b) * x.powf(-a))
                })
                .sum()
        } else {
            graded_toward(lo, hi, y, &gl, &|x| f(x) * ((x - y).powf(-b) * x.powf(-a)))
        }
    }))
}

/// A mesh `0 <= t_0 < ... < t_N` carrying continuous piecewise-linear
/// functions, with trapezoid weights for discrete `L^p` norms.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    t: Vec<f64>,
    c: Vec<f64>,
}

impl Mesh {
    pub fn new(t: Vec<f64>) -> Result<Self> {
        if t.len() < 2 || t[0] < 0.0 || t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("mesh must be nonnegative and strictly increasing"));
        }
        let n = t.len();
        let mut c = vec![0.0; n];
        for i in 0..n - 1 {
            let h = t[i + 1] - t[i];
            c[i] += 0.5 * h;
            c[i + 1] += 0.5 * h;
        }
        Ok(Self { t, c })
    }

    /// `t_j = ell (j/n)^grade`, refined toward 0.
    pub fn graded(ell: f64, n: usize, grade: f64) -> Result<Self> {
        if n < 1 || !(grade >= 1.0) {
            return Err(invalid("graded mesh needs n >= 1 and grade >= 1"));
        }
        Self::new((0..=n).map(|j| ell * (j as f64 / n as f64).powf(grade)).collect())
    }

    /// Geometric nodes from `lo` to `hi` with about `per_decade` nodes per decade.
    pub fn geometric(lo: f64, hi: f64, per_decade: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo) || per_decade == 0 {
            return Err(invalid("geometric mesh needs 0 < lo < hi"));
        }
        let n = ((hi / lo).log10() * per_decade as f64).ceil().max(1.0) as usize;
        let ratio = (hi / lo).ln() / n as f64;
        Self::new((0..=n).map(|j| lo * (ratio * j as f64).exp()).collect())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.t
    }

    pub fn weights(&self) -> &[f64] {
        &self.c
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn lp_norm(&self, v: &[Complex64], p: f64) -> f64 {
        if p.is_infinite() {
            return v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        }
        self.c
            .iter()
            .zip(v)
            .map(|(c, z)| c * z.norm().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }

    /// `sum_i c_i u_i conj(v_i)`.
    pub fn pairing(&self, u: &[Complex64], v: &[Complex64]) -> Complex64 {
        self.c
            .iter()
            .zip(u.iter().zip(v))
            .map(|(c, (a, b))| a * b.conj() * *c)
            .sum()
    }
}

/// `(1+x)^c - 1` without cancellation for small `x`.
fn pow1p_m1(x: f64, c: f64) -> f64 {
    (c * x.ln_1p()).exp_m1()
}

/// Hat-function weights of `int_{t_j}^{t_{j+1}} K(y) phi(y) dy` for the
/// kernel `K(y) = |y - pole|^{-b}` with the pole outside the element,
/// returned as (weight of `phi_j`, weight of `phi_{j+1}`). Elements close
/// to the pole use exact moments; far elements use 8-point Gauss-Legendre.
fn hat_moments(tj: f64, tj1: f64, pole: f64, b: f64, gl8: &GaussRule) -> (f64, f64) {
    let h = tj1 - tj;
    // distance from the pole to the near and far ends of the element
    let (near, far, pole_left) = if pole <= tj {
        (tj - pole, tj1 - pole, true)
    } else {
        (pole - tj1, pole - tj, false)
    };
    if near > 2.0 * h {
        let (xs, ws) = gl8.mapped(tj, tj1);
        let (mut wl, mut wr) = (0.0, 0.0);
        for (&y, &w) in xs.iter().zip(&ws) {
            let k = (y - pole).abs().powf(-b) * w;
            wl += k * (tj1 - y) / h;
            wr += k * (y - tj) / h;
        }
        return (wl, wr);
    }
    // m0 = int_near^far s^{-b} ds, m1 = int_near^far s^{1-b} ds
    let (m0, m1) = if near == 0.0 {
        (far.powf(1.0 - b) / (1.0 - b), far.powf(2.0 - b) / (2.0 - b))
    } else {
        let x = h / near;
        (
            near.powf(1.0 - b) * pow1p_m1(x, 1.0 - b) / (1.0 - b),
            near.powf(2.0 - b) * pow1p_m1(x, 2.0 - b) / (2.0 - b),
        )
    };
    // with s the distance from the pole, the hat peaking at the near end is (far - s)/h
    let w_near_end = (far * m0 - m1) / h;
    let w_far_end = (m1 - near * m0) / h;
    if pole_left {
        (w_near_end, w_far_end)
    } else {
        (w_far_end, w_near_end)
    }
}

/// Discretized weighted operators on a [`Mesh`] (collocation at the nodes,
/// product integration of the kernels against the hat basis).
pub struct DiscreteOps<'a> {
    pub params: WeightedOpParams,
    pub mesh: &'a Mesh,
}

impl DiscreteOps<'_> {
    /// Row `i` of the collocated `S_{a,b}` matrix as `(column, weight)` pairs.
    fn s_row(&self, i: usize, gl8: &GaussRule) -> Vec<(usize, f64)> {
        let t = self.mesh.nodes();
        let x = t[i];
        if x == 0.0 {
            return Vec::new();
        }
        let scale = x.powf(-self.params.a);
        let mut row = vec![0.0; i + 1];
        for j in 0..i {
            let (wl, wr) = hat_moments(t[j], t[j + 1], x, self.params.b, gl8);
            row[j] += wl;
            row[j + 1] += wr;
        }
        row.into_iter().enumerate().map(|(j, w)| (j, w * scale)).collect()
    }

    pub fn apply_s(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        require_s_kernel(&self.params)?;
        let gl8 = gauss_legendre(8);
        Ok((0..self.mesh.len())
            .into_par_iter()
            .map(|i| self.s_row(i, &gl8).iter().map(|&(j, w)| f[j] * w).sum())
            .collect())
    }

    /// Dense collocation matrix of `S_{a,b}`, row-major.
    pub fn s_matrix(&self) -> Result<Vec<Vec<f64>>> {
        require_s_kernel(&self.params)?;
        let n = self.mesh.len();
        let gl8 = gauss_legendre(8);
        Ok((0..n)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![0.0; n];
                for (j, w) in self.s_row(i, &gl8) {
                    row[j] = w;
                }
                row
            })
            .collect())
    }

    /// Discrete adjoint `C^{-1} M^T C` of the collocated `S`, so that
    /// `pairing(S f, g) = pairing(f, S* g)` holds exactly in exact arithmetic.
    pub fn apply_s_adjoint(&self, g: &[Complex64]) -> Result<Vec<Complex64>> {
        let m = self.s_matrix()?;
        let c = self.mesh.weights();
        let n = self.mesh.len();
        let mut out = vec![ZERO; n];
        for (i, row) in m.iter().enumerate() {
            let gi = g[i] * c[i];
            for (o, &w) in out.iter_mut().zip(row) {
                *o += gi * w;
            }
        }
        for (o, &cj) in out.iter_mut().zip(c) {
            *o /= cj;
        }
        Ok(out)
    }

    /// Collocated `T_{a,b}` by cumulative product integration, `O(N)`.
    pub fn apply_t(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        let b = self.params.b;
        if b >= 1.0 {
            return Err(invalid(format!("T needs b < 1 on meshes through 0, got {b}")));
        }
        let t = self.mesh.nodes();
        let gl8 = gauss_legendre(8);
        let mut out = vec![ZERO; t.len()];
        let mut acc = ZERO;
        for i in 0..t.len() - 1 {
            let (wl, wr) = hat_moments(t[i], t[i + 1], 0.0, b, &gl8);
            acc += f[i] * wl + f[i + 1] * wr;
            let x = t[i + 1];
            out[i + 1] = acc * x.powf(-self.params.a);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[test]
    fn t_closed_forms() {
        let g = RadialGrid::panels(8.0, 4, 8, 2).unwrap();
        let f = SampledFunction::from_fn(g.clone(), |_| one()).unwrap();
        let p = WeightedOpParams::new(0.5, 0.5, 8.0).unwrap();
        assert_relative_eq!(op_t(&p, &f, 4.0).unwrap().re, 2.0, max_relative = 1e-12);
        let lin = SampledFunction::from_fn(g, |y| Complex64::new(y, 0.0)).unwrap();
        let p0 = WeightedOpParams::new(0.0, 0.0, 8.0).unwrap();
        assert_relative_eq!(op_t(&p0, &lin, 1.0).unwrap().re, 0.5, max_relative = 1e-13);
        let bad = WeightedOpParams::new(0.0, 1.0, 8.0).unwrap();
        assert!(matches!(op_t(&bad, &f, 1.0), Err(LabError::Divergent(_))));
    }

    #[test]
    fn s_closed_form() {
        let g = RadialGrid::panels(1.0, 3, 8, 0).unwrap();
        let f = SampledFunction::from_fn(g, |_| one()).unwrap();
        let p = WeightedOpParams::new(0.0, 0.5, 1.0).unwrap();
        assert_relative_eq!(op_s(&p, &f, 1.0).unwrap().re, 2.0, max_relative = 1e-12);
        assert_relative_eq!(op_s(&p, &f, 0.37).unwrap().re, 2.0 * 0.37f64.sqrt(), max_relative = 1e-12);
        // S* of 1 with a = 0: int_y^1 (x-y)^{-1/2} dx = 2 sqrt(1-y)
        assert_relative_eq!(op_s_adjoint(&p, &f, 0.2).unwrap().re, 2.0 * 0.8f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn hat_moments_integrate_linear_functions() {
        let gl8 = gauss_legendre(8);
        for &(tj, tj1, pole) in &[(0.0, 0.1, 0.1), (0.2, 0.3, 0.35), (0.5, 0.6, 0.2), (0.5, 0.6, 0.6), (0.1, 0.2, 5.0)] {
            let b = 0.3;
            let (wl, wr) = hat_moments(tj, tj1, pole, b, &gl8);
            // integrate 1 = phi_j + phi_{j+1} against |y - pole|^{-b}
            let exact = {
                let prim = |y: f64| -(pole - y).signum() * (pole - y).abs().powf(1.0 - b) / (1.0 - b);
                prim(tj1) - prim(tj)
            };
            assert_relative_eq!(wl + wr, exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn discrete_s_converges_to_pointwise() {
        let p = WeightedOpParams::new(0.25, 0.5, 1.0).unwrap();
        let mesh = Mesh::graded(1.0, 400, 4.0).unwrap();
        let f: Vec<Complex64> = mesh.nodes().iter().map(|&x| Complex64::new(1.0 + x, 0.0)).collect();
        let ops = DiscreteOps { params: p, mesh: &mesh };
        let sf = ops.apply_s(&f).unwrap();
        let g = RadialGrid::panels(1.0, 2, 8, 0).unwrap();
        let fs = SampledFunction::from_fn(g, |x| Complex64::new(1.0 + x, 0.0)).unwrap();
        let i = mesh.len() - 1;
        let exact = op_s(&p, &fs, 1.0).unwrap();
        assert!((sf[i] - exact).norm() < 1e-4);
    }

    #[test]
    fn discrete_t_matches_pointwise() {
        let p = WeightedOpParams::new(0.75, 0.25, 4.0).unwrap();
        let mesh = Mesh::graded(4.0, 800, 2.0).unwrap();
        let f: Vec<Complex64> = mesh.nodes().iter().map(|&x| Complex64::new((-x).exp(), 0.0)).collect();
        let tf = DiscreteOps { params: p, mesh: &mesh }.apply_t(&f).unwrap();
        let g = RadialGrid::panels(4.0, 4, 16, 0).unwrap();
        let fs = SampledFunction::from_fn(g, |x| Complex64::new((-x).exp(), 0.0)).unwrap();
        assert!((tf[mesh.len() - 1] - op_t(&p, &fs, 4.0).unwrap()).norm() < 1e-5);
    }

    #[test]
    fn hypotheses() {
        let t = WeightedOpParams::new(0.75, 0.25, 1.0).unwrap();
        assert!(t.t_hypotheses(2.0, 2.0));
        let s = WeightedOpParams::new(5.0 / 6.0, 0.5, 1.0).unwrap();
        assert!(!s.s_hypotheses(6.0, 2.0));
        let (a, b) = WeightedOpParams::weights_for(4, 2, 1.5).unwrap();
        assert_relative_eq!(a, 1.0 / 6.0);
        assert_relative_eq!(b, 1.0 / 6.0);
    }
}
