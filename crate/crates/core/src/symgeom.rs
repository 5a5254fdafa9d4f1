//! Block-symmetric profiles, slice integration on the sphere, and norms.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Checked, LabError, NumericWarning, Result};
use crate::quadrature::{gauss_jacobi, gauss_legendre, GridSpec, RadialGrid};

/// Surface area of the unit sphere in `R^n`, i.e. of `S^{n-1}`.
pub fn sphere_area(n: usize) -> Result<f64> {
    if n < 1 {
        return Err(invalid("sphere_area needs n >= 1"));
    }
    Ok(area(n))
}

pub(crate) fn area(n: usize) -> f64 {
    let h = 0.5 * n as f64;
    2.0 * std::f64::consts::PI.powf(h) / libm::tgamma(h)
}

/// Area factor for a block of dimension `n`; an empty block contributes 1.
pub(crate) fn block_area(n: usize) -> f64 {
    if n == 0 {
        1.0
    } else {
        area(n)
    }
}

/// `R^d = R^{d-k} x R^k` with `m = min(k, d-k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct SymmetryParams {
    pub d: usize,
    pub k: usize,
    pub m: usize,
}

#[derive(Deserialize)]
struct RawParams {
    d: usize,
    k: usize,
}

impl TryFrom<RawParams> for SymmetryParams {
    type Error = LabError;
    fn try_from(raw: RawParams) -> Result<Self> {
        Self::new(raw.d, raw.k)
    }
}

impl SymmetryParams {
    pub fn new(d: usize, k: usize) -> Result<Self> {
        if d < 2 {
            return Err(invalid(format!("dimension must be at least 2, got {d}")));
        }
        if k > d {
            return Err(invalid(format!("block index k={k} exceeds d={d}")));
        }
        Ok(Self {
            d,
            k,
            m: k.min(d - k),
        })
    }

    /// The range `d >= 4`, `2 <= k <= d-2` where the main theorems live.
    pub fn in_theorem_range(&self) -> bool {
        self.d >= 4 && self.k >= 2 && self.k + 2 <= self.d
    }

    pub fn require_theorem_range(&self) -> Result<()> {
        if self.in_theorem_range() {
            Ok(())
        } else {
            Err(invalid(format!(
                "needs d >= 4 and 2 <= k <= d-2, got d={}, k={}",
                self.d, self.k
            )))
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.k == 0 || self.k == self.d
    }

    /// Dimension of the first block, `d - k`.
    pub fn n1(&self) -> usize {
        self.d - self.k
    }

    pub fn swapped(&self) -> Self {
        Self {
            d: self.d,
            k: self.d - self.k,
            m: self.m,
        }
    }

    /// `sigma(S^{d-k-1}) sigma(S^{k-1})`.
    pub fn area_product(&self) -> f64 {
        block_area(self.n1()) * block_area(self.k)
    }
}

/// Lorentz exponent pair `(p, s)`; `s = p` is Lebesgue. Infinity is allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzExponent {
    pub p: f64,
    pub s: f64,
}

pub fn dual(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

impl LorentzExponent {
    pub fn new(p: f64, s: f64) -> Result<Self> {
        for (name, v) in [("p", p), ("s", s)] {
            if !(v >= 1.0) || v.is_nan() {
                return Err(invalid(format!("exponent {name} must lie in [1, inf], got {v}")));
            }
        }
        Ok(Self { p, s })
    }

    pub fn lebesgue(p: f64) -> Result<Self> {
        Self::new(p, p)
    }

    pub fn p_dual(&self) -> f64 {
        dual(self.p)
    }

    pub fn is_lebesgue(&self) -> bool {
        self.p == self.s
    }
}

/// Quadrature on the sphere for block-symmetric integrands: nodes `r`
/// (the radius of the first block), `s = sqrt(1 - r^2)`, and weights that
/// already include the surface measure, so `sum w_i F(r_i)` is the sphere
/// integral of `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct CapRule {
    params: SymmetryParams,
    r: Vec<f64>,
    s: Vec<f64>,
    weights: Vec<f64>,
}

impl CapRule {
    /// Gauss-Jacobi in `u = 2r^2 - 1`, exact for polynomials in `r^2`
    /// against the slice weight `r^{d-k-1}(1-r^2)^{(k-2)/2}`.
    pub fn gauss_jacobi(params: SymmetryParams, nodes: usize) -> Result<Self> {
        let d = params.d;
        if params.is_degenerate() {
            let r = if params.k == 0 { 1.0 } else { 0.0 };
            return Ok(Self {
                params,
                r: vec![r],
                s: vec![(1.0 - r * r).sqrt()],
                weights: vec![area(d)],
            });
        }
        let alpha = 0.5 * (params.k as f64 - 2.0);
        let beta = 0.5 * (params.n1() as f64 - 2.0);
        let rule = gauss_jacobi(nodes, alpha, beta)?;
        let scale = params.area_product() * 2f64.powf(-0.5 * d as f64);
        let mut r = Vec::with_capacity(nodes);
        let mut s = Vec::with_capacity(nodes);
        for &u in &rule.nodes {
            r.push((0.5 * (1.0 + u)).sqrt());
            s.push((0.5 * (1.0 - u)).sqrt());
        }
        let weights = rule.weights.iter().map(|w| w * scale).collect();
        Ok(Self {
            params,
            r,
            s,
            weights,
        })
    }

    /// Gauss-Legendre on `r in [0, delta]` with the slice weight applied
    /// pointwise; used for small polar caps.
    pub fn polar_cap(params: SymmetryParams, delta: f64, nodes: usize) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid(format!("cap radius must lie in (0, 1), got {delta}")));
        }
        if params.is_degenerate() {
            return Err(invalid("polar caps need 1 <= k <= d-1"));
        }
        let (nodes_r, w) = gauss_legendre(nodes).mapped(0.0, delta);
        let a = params.area_product();
        let e1 = params.n1() as f64 - 1.0;
        let e2 = 0.5 * (params.k as f64 - 2.0);
        let s: Vec<f64> = nodes_r.iter().map(|r| (1.0 - r * r).sqrt()).collect();
        let weights = nodes_r
            .iter()
            .zip(&w)
            .map(|(r, w)| a * w * r.powf(e1) * (1.0 - r * r).powf(e2))
            .collect();
        Ok(Self {
            params,
            r: nodes_r,
            s,
            weights,
        })
    }

    pub fn params(&self) -> SymmetryParams {
        self.params
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

/// Samples `F_0(r)` of a block-symmetric function on the sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct CapProfile {
    rule: CapRule,
    values: Vec<Complex64>,
}

impl CapProfile {
    pub fn new(rule: CapRule, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != rule.len() {
            return Err(invalid(format!(
                "cap profile has {} values for {} nodes",
                values.len(),
                rule.len()
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(invalid("cap profile values must be finite"));
        }
        Ok(Self { rule, values })
    }

    pub fn from_fn(rule: CapRule, mut f: impl FnMut(f64) -> Complex64) -> Result<Self> {
        let values = rule.r.iter().map(|&r| f(r)).collect();
        Self::new(rule, values)
    }

    pub fn constant(rule: CapRule, c: Complex64) -> Result<Self> {
        let n = rule.len();
        Self::new(rule, vec![c; n])
    }

    pub fn rule(&self) -> &CapRule {
        &self.rule
    }

    pub fn params(&self) -> SymmetryParams {
        self.rule.params
    }

    pub fn nodes(&self) -> &[f64] {
        &self.rule.r
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn with_values(&self, values: Vec<Complex64>) -> Result<Self> {
        Self::new(self.rule.clone(), values)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            rule: self.rule.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// `||F||_{L^2(S^{d-1})}` by slice integration.
    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.rule.weights)
            .map(|(v, w)| w * v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.l2_norm();
        if n == 0.0 {
            return Err(invalid("cannot normalize the zero profile"));
        }
        Ok(self.scaled(Complex64::new(1.0 / n, 0.0)))
    }

    /// `(r, re, im)` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "re", "im"])?;
        for (r, v) in self.rule.r.iter().zip(&self.values) {
            w.serialize((r, v.re, v.im))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `int_{S^{d-1}} F dsigma` for a block-symmetric `F`.
pub fn slice_integrate(f: &CapProfile, params: SymmetryParams) -> Result<Complex64> {
    if f.params() != params {
        return Err(invalid("cap profile was built for different symmetry parameters"));
    }
    Ok(f.values
        .iter()
        .zip(&f.rule.weights)
        .map(|(v, w)| v * w)
        .sum())
}

/// Samples `f_0(rho_1, rho_2)` on a tensor grid, stored row-major in `rho_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile2D {
    grid1: RadialGrid,
    grid2: RadialGrid,
    values: Vec<Complex64>,
}

/// Sidecar metadata for a serialized [`RadialProfile2D`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileMeta {
    pub d: usize,
    pub k: usize,
    pub grid1: GridSpec,
    pub grid2: GridSpec,
}

impl RadialProfile2D {
    pub fn new(grid1: RadialGrid, grid2: RadialGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid1.len() * grid2.len() {
            return Err(invalid(format!(
                "profile has {} values for a {}x{} grid",
                values.len(),
                grid1.len(),
                grid2.len()
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(invalid("profile values must be finite"));
        }
        Ok(Self {
            grid1,
            grid2,
            values,
        })
    }

    pub fn from_fn(
        grid1: RadialGrid,
        grid2: RadialGrid,
        mut f: impl FnMut(f64, f64) -> Complex64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(grid1.len() * grid2.len());
        for &a in grid1.nodes() {
            for &b in grid2.nodes() {
                values.push(f(a, b));
            }
        }
        Self::new(grid1, grid2, values)
    }

    /// `exp(-(rho_1^2 + rho_2^2)/2)` on `[0, radius]^2`.
    pub fn gaussian(radius: f64, nodes: usize) -> Result<Self> {
        let g = RadialGrid::default_for(radius, nodes)?;
        Self::from_fn(g.clone(), g, |a, b| Complex64::new((-0.5 * (a * a + b * b)).exp(), 0.0))
    }

    pub fn grid1(&self) -> &RadialGrid {
        &self.grid1
    }

    pub fn grid2(&self) -> &RadialGrid {
        &self.grid2
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn at(&self, i1: usize, i2: usize) -> Complex64 {
        self.values[i1 * self.grid2.len() + i2]
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            grid1: self.grid1.clone(),
            grid2: self.grid2.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// Exchanges the roles of the two radii.
    pub fn transposed(&self) -> Self {
        let (n1, n2) = (self.grid1.len(), self.grid2.len());
        let mut values = Vec::with_capacity(n1 * n2);
        for j in 0..n2 {
            for i in 0..n1 {
                values.push(self.values[i * n2 + j]);
            }
        }
        Self {
            grid1: self.grid2.clone(),
            grid2: self.grid1.clone(),
            values,
        }
    }

    /// Measure weights `sigma(S^{d-k-1}) sigma(S^{k-1}) rho_1^{d-k-1} rho_2^{k-1} w_1 w_2`.
    pub fn measure(&self, params: SymmetryParams) -> Vec<f64> {
        let a = params.area_product();
        let e1 = params.n1() as i32 - 1;
        let e2 = params.k as i32 - 1;
        let mut out = Vec::with_capacity(self.values.len());
        for (x, w1) in self.grid1.nodes().iter().zip(self.grid1.weights()) {
            let f1 = a * w1 * x.powi(e1);
            for (y, w2) in self.grid2.nodes().iter().zip(self.grid2.weights()) {
                out.push(f1 * w2 * y.powi(e2));
            }
        }
        out
    }

    pub fn meta(&self, params: SymmetryParams) -> ProfileMeta {
        ProfileMeta {
            d: params.d,
            k: params.k,
            grid1: self.grid1.spec().clone(),
            grid2: self.grid2.spec().clone(),
        }
    }

    /// CSV rows `(rho1, rho2, re, im)`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rho1", "rho2", "re", "im"])?;
        let n2 = self.grid2.len();
        for (idx, v) in self.values.iter().enumerate() {
            let a = self.grid1.nodes()[idx / n2];
            let b = self.grid2.nodes()[idx % n2];
            w.serialize((a, b, v.re, v.im))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Rebuilds the grids from `meta` and reads values in row order;
    /// the node columns must match the rebuilt grids.
    pub fn read_csv<R: Read>(input: R, meta: &ProfileMeta) -> Result<(Self, SymmetryParams)> {
        let params = SymmetryParams::new(meta.d, meta.k)?;
        let g1 = RadialGrid::from_spec(&meta.grid1)?;
        let g2 = RadialGrid::from_spec(&meta.grid2)?;
        let mut rdr = csv::Reader::from_reader(input);
        let mut values = Vec::with_capacity(g1.len() * g2.len());
        for (idx, rec) in rdr.deserialize::<(f64, f64, f64, f64)>().enumerate() {
            let (a, b, re, im) = rec?;
            let (i, j) = (idx / g2.len(), idx % g2.len());
            let ok = i < g1.len()
                && (a - g1.nodes()[i]).abs() <= 1e-12 * a.abs().max(1.0)
                && (b - g2.nodes()[j]).abs() <= 1e-12 * b.abs().max(1.0);
            if !ok {
                return Err(invalid(format!("row {idx} does not match the grid in the metadata")));
            }
            values.push(Complex64::new(re, im));
        }
        Ok((Self::new(g1, g2, values)?, params))
    }

    pub fn save(&self, params: SymmetryParams, csv_path: &Path, meta_path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(csv_path)?)?;
        let meta = serde_json::to_string_pretty(&self.meta(params))?;
        std::fs::write(meta_path, meta)?;
        Ok(())
    }

    pub fn load(csv_path: &Path, meta_path: &Path) -> Result<(Self, SymmetryParams)> {
        let meta: ProfileMeta = serde_json::from_str(&std::fs::read_to_string(meta_path)?)?;
        Self::read_csv(std::fs::File::open(csv_path)?, &meta)
    }
}

/// Default relative tolerance for the outer-shell tail check in [`lp_norm_2d`].
pub const TAIL_TOL: f64 = 1e-6;

/// `||f||_{L^p(R^d)}` of the symmetric function with profile `f`.
///
/// The mass in the outermost tenth of either axis is reported as a
/// tail-truncation warning when it exceeds [`TAIL_TOL`] relative to the total.
pub fn lp_norm_2d(
    f: &RadialProfile2D,
    exp: LorentzExponent,
    params: SymmetryParams,
) -> Result<Checked<f64>> {
    if !exp.is_lebesgue() {
        return Err(invalid("lp_norm_2d takes a Lebesgue exponent (s = p)"));
    }
    if params.is_degenerate() {
        return Err(invalid("two-radius profiles need 1 <= k <= d-1"));
    }
    let p = exp.p;
    if p.is_infinite() {
        let m = f.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        return Ok(Checked::clean(m));
    }
    let mu = f.measure(params);
    let edge1 = 0.9 * f.grid1.extent();
    let edge2 = 0.9 * f.grid2.extent();
    let n2 = f.grid2.len();
    let (mut total, mut tail) = (0.0, 0.0);
    for (idx, (v, w)) in f.values.iter().zip(&mu).enumerate() {
        let c = w * v.norm().powf(p);
        total += c;
        if f.grid1.nodes()[idx / n2] > edge1 || f.grid2.nodes()[idx % n2] > edge2 {
            tail += c;
        }
    }
    let mut warnings = Vec::new();
    if total > 0.0 && tail > TAIL_TOL * total {
        warnings.push(NumericWarning::TailTruncation {
            estimate: tail / total,
            tol: TAIL_TOL,
        });
    }
    Ok(Checked::with(total.powf(1.0 / p), warnings))
}

/// Lorentz quasi-norm of a function given as `(value, measure)` atoms:
/// `(sum_i v_i^s (T_i^{s/p} - T_{i-1}^{s/p}))^{1/s}` over the decreasing
/// rearrangement, with `T_i` the cumulative measure; `s = inf` gives
/// `max_i v_i T_i^{1/p}`.
pub fn lorentz_norm(samples: &[(f64, f64)], exp: LorentzExponent) -> Result<f64> {
    if !(exp.p >= 1.0 && exp.s >= 1.0) {
        return Err(invalid("lorentz exponents must be at least 1"));
    }
    if samples.iter().any(|(v, w)| !(v.is_finite() && w.is_finite() && *w >= 0.0)) {
        return Err(invalid("lorentz samples need finite values and nonnegative weights"));
    }
    let mut atoms: Vec<(f64, f64)> = samples
        .iter()
        .map(|&(v, w)| (v.abs(), w))
        .filter(|&(v, w)| v > 0.0 && w > 0.0)
        .collect();
    atoms.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let (p, s) = (exp.p, exp.s);
    if p.is_infinite() {
        return Ok(atoms.first().map_or(0.0, |a| a.0));
    }
    let mut t = 0.0;
    if s.is_infinite() {
        let mut best: f64 = 0.0;
        for (v, w) in atoms {
            t += w;
            best = best.max(v * t.powf(1.0 / p));
        }
        return Ok(best);
    }
    let mut sum = 0.0;
    let mut prev = 0.0;
    for (v, w) in atoms {
        t += w;
        let cur = t.powf(s / p);
        sum += v.powf(s) * (cur - prev);
        prev = cur;
    }
    Ok(sum.powf(1.0 / s))
}

/// `(|f|, measure)` atoms of a radial profile for [`lorentz_norm`].
pub fn profile_atoms(f: &RadialProfile2D, params: SymmetryParams) -> Vec<(f64, f64)> {
    f.values
        .iter()
        .zip(f.measure(params))
        .map(|(v, w)| (v.norm(), w))
        .collect()
}

/// `(|F|, measure)` atoms of a cap profile.
pub fn cap_atoms(f: &CapProfile) -> Vec<(f64, f64)> {
    f.values
        .iter()
        .zip(&f.rule.weights)
        .map(|(v, w)| (v.norm(), *w))
        .collect()
}
