//! Reduced Fourier transforms of block-symmetric functions and the
//! extension operator of block-symmetric functions on the sphere.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Checked, NumericWarning, Result};
use crate::quadrature::{QuadratureSpec, RadialGrid};
use crate::specfun::{amplitude, j_scaled, principal_real};
use crate::symgeom::{block_area, CapProfile, CapRule, RadialProfile2D, SymmetryParams};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `sigma_hat_n(t) / (2 pi)^{n/2}`, the entire function `t^{-nu} J_nu(t)`
/// with `nu = (n-2)/2`; `n = 1` gives `(2/pi)^{1/2} cos t` and an empty
/// block gives 1.
pub(crate) fn block_kernel(n: usize, t: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => (2.0 / PI).sqrt() * t.cos(),
        _ => j_scaled(0.5 * (n as f64 - 2.0), t),
    }
}

/// `sigma_hat_n(t) / sigma(S^{n-1})`, equal to 1 at `t = 0`.
pub(crate) fn normalized_sigma_hat(n: usize, t: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    (2.0 * PI).powf(0.5 * n as f64) * block_kernel(n, t) / block_area(n)
}

/// Which side of the duality an [`ExtensionField`] lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldSide {
    FrequencySphere,
    Space,
}

/// Samples of a block-symmetric function on a `(|y|, |z|)` tensor grid,
/// row-major in the first magnitude.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtensionField {
    pub eta_nodes: Vec<f64>,
    pub zeta_nodes: Vec<f64>,
    pub values: Vec<Complex64>,
    pub side: FieldSide,
}

impl ExtensionField {
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.zeta_nodes.len() + j]
    }

    /// CSV rows `(y, z, re, im)`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["y", "z", "re", "im"])?;
        let nz = self.zeta_nodes.len();
        for (idx, v) in self.values.iter().enumerate() {
            w.serialize((self.eta_nodes[idx / nz], self.zeta_nodes[idx % nz], v.re, v.im))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_magnitudes(a: f64, b: f64) -> Result<()> {
    if a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("magnitudes must be finite and nonnegative, got ({a}, {b})")))
    }
}

fn check_profile_params(f: &CapProfile, params: SymmetryParams) -> Result<()> {
    if f.params() != params {
        return Err(invalid("cap profile was built for different symmetry parameters"));
    }
    Ok(())
}

/// `F hat sigma (y, z)` for a block-symmetric `F` on the sphere.
pub fn extension_operator(
    f: &CapProfile,
    y_mag: f64,
    z_mag: f64,
    params: SymmetryParams,
) -> Result<Complex64> {
    check_magnitudes(y_mag, z_mag)?;
    check_profile_params(f, params)?;
    let rule = f.rule();
    let (n1, n2) = (params.n1(), params.k);
    Ok(rule
        .r()
        .iter()
        .zip(rule.s())
        .zip(rule.weights())
        .zip(f.values())
        .map(|(((&r, &s), &w), &v)| {
            v * w * normalized_sigma_hat(n1, r * y_mag) * normalized_sigma_hat(n2, s * z_mag)
        })
        .sum())
}

/// Per-node basis values `sigma_hat(r_i t)/area` of one block on a list of magnitudes,
/// laid out `[node][point]`.
pub(crate) fn block_basis(rule_nodes: &[f64], n: usize, mags: &[f64]) -> Vec<Vec<f64>> {
    rule_nodes
        .par_iter()
        .map(|&r| mags.iter().map(|&t| normalized_sigma_hat(n, r * t)).collect())
        .collect()
}

/// Extension of `F` on the tensor grid `ys x zs`.
pub fn extension_field(
    f: &CapProfile,
    ys: &[f64],
    zs: &[f64],
    params: SymmetryParams,
) -> Result<ExtensionField> {
    check_profile_params(f, params)?;
    for (&a, &b) in ys.iter().zip(zs) {
        check_magnitudes(a, b)?;
    }
    let rule = f.rule();
    let u = block_basis(rule.r(), params.n1(), ys);
    let v = block_basis(rule.s(), params.k, zs);
    let coef: Vec<Complex64> = f
        .values()
        .iter()
        .zip(rule.weights())
        .map(|(v, w)| v * w)
        .collect();
    let values: Vec<Complex64> = (0..ys.len())
        .into_par_iter()
        .flat_map_iter(|a| {
            let mut row = vec![ZERO; zs.len()];
            for (i, c) in coef.iter().enumerate() {
                let ca = c * u[i][a];
                for (o, vb) in row.iter_mut().zip(&v[i]) {
                    *o += ca * vb;
                }
            }
            row
        })
        .collect();
    Ok(ExtensionField {
        eta_nodes: ys.to_vec(),
        zeta_nodes: zs.to_vec(),
        values,
        side: FieldSide::Space,
    })
}

/// One radial axis of a reduced transform: product-integration weights of
/// `rho^{n-1} K(rho t)` on `grid`, honoring the jump of the split kernels
/// at `rho t = 1`.
fn axis_weights(
    grid: &RadialGrid,
    n: usize,
    freq: f64,
    kernel: impl Fn(f64) -> Complex64,
) -> Vec<Complex64> {
    let width = PI / freq.max(1.0);
    let cuts: Vec<f64> = if freq > 0.0 { vec![1.0 / freq] } else { Vec::new() };
    let e = n as i32 - 1;
    grid.product_weights(|rho| kernel(rho * freq) * rho.powi(e), width, &cuts)
}

fn contract(f: &RadialProfile2D, w1: &[Complex64], w2: &[Complex64]) -> Complex64 {
    let n2 = f.grid2().len();
    f.values()
        .chunks(n2)
        .zip(w1)
        .map(|(row, a)| a * row.iter().zip(w2).map(|(v, b)| v * b).sum::<Complex64>())
        .sum()
}

/// Relative `L^1`-mass of the profile in the outer tenth of either axis.
fn outer_mass(f: &RadialProfile2D, params: SymmetryParams) -> f64 {
    let mu = f.measure(params);
    let (e1, e2) = (0.9 * f.grid1().extent(), 0.9 * f.grid2().extent());
    let n2 = f.grid2().len();
    let (mut tot, mut tail) = (0.0, 0.0);
    for (idx, (v, w)) in f.values().iter().zip(&mu).enumerate() {
        let c = w * v.norm();
        tot += c;
        if f.grid1().nodes()[idx / n2] > e1 || f.grid2().nodes()[idx % n2] > e2 {
            tail += c;
        }
    }
    if tot > 0.0 {
        tail / tot
    } else {
        0.0
    }
}

fn tail_warnings(f: &RadialProfile2D, params: SymmetryParams, tol: f64) -> Vec<NumericWarning> {
    let est = outer_mass(f, params);
    if est > tol {
        vec![NumericWarning::TailTruncation { estimate: est, tol }]
    } else {
        Vec::new()
    }
}

fn require_two_blocks(params: SymmetryParams) -> Result<()> {
    if params.is_degenerate() {
        Err(invalid("reduced transforms need 1 <= k <= d-1"))
    } else {
        Ok(())
    }
}

/// `f hat (eta, zeta)` of the block-symmetric function with profile `f`,
/// normalized as `int f(x) e^{-i x . xi} dx`.
pub fn symmetric_fourier(
    f: &RadialProfile2D,
    eta_mag: f64,
    zeta_mag: f64,
    params: SymmetryParams,
    quad: &QuadratureSpec,
) -> Result<Checked<Complex64>> {
    require_two_blocks(params)?;
    check_magnitudes(eta_mag, zeta_mag)?;
    let (n1, n2) = (params.n1(), params.k);
    let w1 = axis_weights(f.grid1(), n1, eta_mag, |t| Complex64::new(block_kernel(n1, t), 0.0));
    let w2 = axis_weights(f.grid2(), n2, zeta_mag, |t| Complex64::new(block_kernel(n2, t), 0.0));
    let value = (2.0 * PI).powf(0.5 * params.d as f64) * contract(f, &w1, &w2);
    Ok(Checked::with(value, tail_warnings(f, params, quad.tol)))
}

/// Restriction of `f hat` to the sphere, sampled at the nodes of `rule`.
pub fn restrict_to_sphere(
    f: &RadialProfile2D,
    rule: &CapRule,
    quad: &QuadratureSpec,
) -> Result<Checked<CapProfile>> {
    let params = rule.params();
    let vals: Result<Vec<Checked<Complex64>>> = rule
        .r()
        .par_iter()
        .zip(rule.s())
        .map(|(&r, &s)| symmetric_fourier(f, r, s, params, quad))
        .collect();
    let vals = vals?;
    let warnings = vals.first().map(|c| c.warnings.clone()).unwrap_or_default();
    let profile = CapProfile::new(rule.clone(), vals.into_iter().map(|c| c.value).collect())?;
    Ok(Checked::with(profile, warnings))
}

/// The five pieces of the principal/remainder splitting at one point,
/// together with their partners (the same integrals with every principal
/// factor `A e^{it}` replaced by `conj(A) e^{-it}`). For real profiles the
/// partners are the complex conjugates of the pieces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitTransform {
    pub pieces: [Complex64; 5],
    pub partners: [Complex64; 5],
    pub d: usize,
}

impl SplitTransform {
    /// `(2 pi)^{d/2} (f_1 + sum_j (f_j + partner_j))`.
    pub fn reconstruct(&self) -> Complex64 {
        let s: Complex64 = self.pieces[0]
            + self.pieces[1..]
                .iter()
                .zip(&self.partners[1..])
                .map(|(a, b)| a + b)
                .sum::<Complex64>();
        (2.0 * PI).powf(0.5 * self.d as f64) * s
    }

    /// The same sum with partners replaced by conjugates of the pieces.
    pub fn reconstruct_real(&self) -> Complex64 {
        let s: Complex64 =
            self.pieces[0] + self.pieces[1..].iter().map(|a| a + a.conj()).sum::<Complex64>();
        (2.0 * PI).powf(0.5 * self.d as f64) * s
    }
}

/// `t^{-nu} R_nu(t)`: the remainder kernel in the scaled normalization.
fn remainder_kernel(n: usize, t: f64) -> f64 {
    let nu = 0.5 * (n as f64 - 2.0);
    if t < 1.0 {
        return block_kernel(n, t);
    }
    block_kernel(n, t) - t.powf(-nu) * principal_real(nu, t)
}

/// `A_nu t^{-nu-1/2} e^{it}` on `t >= 1`, and its partner with `conj(A) e^{-it}`.
fn principal_kernel(n: usize, t: f64, partner: bool) -> Complex64 {
    if t < 1.0 {
        return ZERO;
    }
    let nu = 0.5 * (n as f64 - 2.0);
    let a = amplitude(nu);
    let mag = t.powf(-nu - 0.5);
    if partner {
        a.conj() * Complex64::from_polar(mag, -t)
    } else {
        a * Complex64::from_polar(mag, t)
    }
}

pub fn split_transform(
    f: &RadialProfile2D,
    eta_mag: f64,
    zeta_mag: f64,
    params: SymmetryParams,
    quad: &QuadratureSpec,
) -> Result<Checked<SplitTransform>> {
    params.require_theorem_range()?;
    check_magnitudes(eta_mag, zeta_mag)?;
    let (n1, n2) = (params.n1(), params.k);
    let axis = |grid: &RadialGrid, n: usize, freq: f64| {
        let r = axis_weights(grid, n, freq, |t| Complex64::new(remainder_kernel(n, t), 0.0));
        let p = axis_weights(grid, n, freq, |t| principal_kernel(n, t, false));
        let q = axis_weights(grid, n, freq, |t| principal_kernel(n, t, true));
        (r, p, q)
    };
    let (r1, p1, q1) = axis(f.grid1(), n1, eta_mag);
    let (r2, p2, q2) = axis(f.grid2(), n2, zeta_mag);
    let c = |a: &[Complex64], b: &[Complex64]| contract(f, a, b);
    let pieces = [c(&r1, &r2), c(&r1, &p2), c(&p1, &r2), c(&p1, &p2), c(&p1, &q2)];
    let partners = [ZERO, c(&r1, &q2), c(&q1, &r2), c(&q1, &q2), c(&q1, &p2)];
    Ok(Checked::with(
        SplitTransform {
            pieces,
            partners,
            d: params.d,
        },
        tail_warnings(f, params, quad.tol),
    ))
}

/// Result of a pointwise-decay sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    /// `sup |F hat sigma| (1+|y|)^{(d-k-1)/2} (1+|z|)^{(k-1)/2}` over the grid.
    pub ratio: f64,
    pub argmax: (f64, f64),
}

/// Pointwise-decay ratio over the tensor grid `ys x zs` for a unit-norm `F`.
pub fn decay_ratio(
    f: &CapProfile,
    ys: &[f64],
    zs: &[f64],
    params: SymmetryParams,
) -> Result<DecayReport> {
    let norm = f.l2_norm();
    if norm != 0.0 && (norm - 1.0).abs() > 1e-8 {
        return Err(invalid(format!("decay ratio expects a unit-norm profile, got norm {norm}")));
    }
    let field = extension_field(f, ys, zs, params)?;
    let (e1, e2) = (0.5 * (params.n1() as f64 - 1.0), 0.5 * (params.k as f64 - 1.0));
    let mut best = DecayReport {
        ratio: 0.0,
        argmax: (0.0, 0.0),
    };
    for (i, &y) in ys.iter().enumerate() {
        for (j, &z) in zs.iter().enumerate() {
            let v = field.at(i, j).norm() * (1.0 + y).powf(e1) * (1.0 + z).powf(e2);
            if v > best.ratio {
                best = DecayReport {
                    ratio: v,
                    argmax: (y, z),
                };
            }
        }
    }
    Ok(best)
}

/// Smallest radius `R` among the grid radii such that `|F hat sigma| < eps`
/// at every grid point with `|x| > R`. A warning is attached when only the
/// outermost radius qualifies, since the grid then does not resolve `R`.
pub fn decay_radius(
    f: &CapProfile,
    eps: f64,
    ys: &[f64],
    zs: &[f64],
    params: SymmetryParams,
) -> Result<Checked<f64>> {
    if !(eps > 0.0) {
        return Err(invalid("decay threshold must be positive"));
    }
    let field = extension_field(f, ys, zs, params)?;
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(field.values.len());
    for (i, &y) in ys.iter().enumerate() {
        for (j, &z) in zs.iter().enumerate() {
            pts.push((y.hypot(z), field.at(i, j).norm()));
        }
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut radius = pts.last().map_or(0.0, |p| p.0);
    let mut tail_max: f64 = 0.0;
    let mut idx = pts.len();
    while idx > 0 {
        let r = pts[idx - 1].0;
        if tail_max >= eps {
            break;
        }
        radius = r;
        let mut j = idx;
        while j > 0 && pts[j - 1].0 == r {
            tail_max = tail_max.max(pts[j - 1].1);
            j -= 1;
        }
        idx = j;
    }
    let outer = pts.last().map_or(0.0, |p| p.0);
    let warnings = if radius >= outer && !pts.is_empty() {
        vec![NumericWarning::Undersampled {
            detail: "decay radius reaches the grid boundary".into(),
        }]
    } else {
        Vec::new()
    };
    Ok(Checked::with(radius, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::sigma_hat;
    use crate::symgeom::{sphere_area, CapRule};
    use approx::assert_relative_eq;

    fn quad() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn constant_cap_reproduces_sigma_hat() {
        let params = SymmetryParams::new(5, 2).unwrap();
        let rule = CapRule::gauss_jacobi(params, 40).unwrap();
        let f = CapProfile::constant(rule, Complex64::new(1.0, 0.0)).unwrap();
        for &(y, z) in &[(0.0, 0.0), (1.0, 2.0), (10.0, 3.0), (0.0, 25.0)] {
            let v = extension_operator(&f, y, z, params).unwrap();
            assert_relative_eq!(v.re, sigma_hat(5, f64::hypot(y, z)).unwrap(), epsilon = 1e-10);
        }
        let at0 = extension_operator(&f, 0.0, 0.0, params).unwrap();
        assert_relative_eq!(at0.re, sphere_area(5).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn field_matches_pointwise() {
        let params = SymmetryParams::new(4, 2).unwrap();
        let rule = CapRule::gauss_jacobi(params, 16).unwrap();
        let f = CapProfile::from_fn(rule, |r| Complex64::new(r, 1.0 - r)).unwrap();
        let ys = [0.0, 0.5, 3.0];
        let zs = [0.0, 7.0];
        let field = extension_field(&f, &ys, &zs, params).unwrap();
        for (i, &y) in ys.iter().enumerate() {
            for (j, &z) in zs.iter().enumerate() {
                let p = extension_operator(&f, y, z, params).unwrap();
                assert!((field.at(i, j) - p).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn gaussian_transform() {
        let params = SymmetryParams::new(4, 2).unwrap();
        let f = RadialProfile2D::gaussian(12.0, 256).unwrap();
        for &(a, b) in &[(0.0, 0.0), (0.3, 1.7), (2.0, 0.0), (3.0, 4.0)] {
            let v = symmetric_fourier(&f, a, b, params, &quad()).unwrap();
            let exact = (2.0 * PI).powi(2) * (-0.5 * (a * a + b * b)).exp();
            assert!((v.value.re - exact).abs() < 1e-9, "{a} {b}");
            assert!(v.value.im.abs() < 1e-14);
        }
    }

    #[test]
    fn split_of_zero_profile_is_zero() {
        let params = SymmetryParams::new(4, 2).unwrap();
        let g = RadialGrid::panels(3.0, 3, 8, 0).unwrap();
        let f = RadialProfile2D::from_fn(g.clone(), g, |_, _| ZERO).unwrap();
        let s = split_transform(&f, 2.0, 0.5, params, &quad()).unwrap().value;
        assert!(s.pieces.iter().chain(&s.partners).all(|v| v.norm() == 0.0));
    }

    #[test]
    fn split_small_frequency_has_only_remainder_piece() {
        let params = SymmetryParams::new(4, 2).unwrap();
        let g = RadialGrid::panels(1.9, 2, 12, 0).unwrap();
        let f = RadialProfile2D::from_fn(g.clone(), g, |a, b| {
            Complex64::new((-(a * a) - b).exp(), 0.0)
        })
        .unwrap();
        let s = split_transform(&f, 0.5, 0.5, params, &quad()).unwrap().value;
        for v in &s.pieces[1..] {
            assert_eq!(v.norm(), 0.0);
        }
    }

    #[test]
    fn decay_radius_is_monotone_in_eps() {
        let params = SymmetryParams::new(4, 2).unwrap();
        let rule = CapRule::gauss_jacobi(params, 48).unwrap();
        let f = CapProfile::constant(rule, Complex64::new(1.0, 0.0)).unwrap().normalized().unwrap();
        let ys: Vec<f64> = (0..41).map(|i| i as f64 * 2.5).collect();
        let r1 = decay_radius(&f, 0.1, &ys, &ys, params).unwrap().value;
        let r2 = decay_radius(&f, 0.05, &ys, &ys, params).unwrap().value;
        assert!(r2 >= r1);
    }
}
