//! Gaussian rules and composite radial grids.
//!
//! Gauss-Jacobi nodes are seeded with the Golub-Welsch eigenvalues of the
//! Jacobi matrix and then polished by Newton iteration on the three-term
//! recurrence; weights come from the closed-form derivative formula, which
//! keeps them accurate near the endpoints where eigenvector-based weights
//! lose relative precision.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};

/// Nodes and weights on `[-1, 1]` for the weight `(1-x)^alpha (1+x)^beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `(1-x)^alpha (1+x)^beta f(x)` over `[-1, 1]`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Affine image on `[a, b]` for a plain (alpha = beta = 0) rule.
    pub fn mapped(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let nodes = self.nodes.iter().map(|&x| mid + half * x).collect();
        let weights = self.weights.iter().map(|&w| half * w).collect();
        (nodes, weights)
    }
}

/// Gauss-Legendre rule with `n` nodes, memoized per `n`.
pub fn gauss_legendre(n: usize) -> GaussRule {
    static CACHE: OnceLock<Mutex<HashMap<usize, GaussRule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&n) {
        return rule.clone();
    }
    let rule = gauss_jacobi(n, 0.0, 0.0).expect("legendre parameters are always valid");
    cache.lock().unwrap().insert(n, rule.clone());
    rule
}

pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> Result<GaussRule> {
    if n == 0 {
        return Err(invalid("gauss rule needs at least one node"));
    }
    if !(alpha > -1.0 && beta > -1.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(invalid(format!(
            "jacobi exponents must exceed -1, got alpha={alpha}, beta={beta}"
        )));
    }
    let ab = alpha + beta;

    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    diag[0] = (beta - alpha) / (ab + 2.0);
    for (k, d) in diag.iter_mut().enumerate().skip(1) {
        let s = 2.0 * k as f64 + ab;
        *d = (beta * beta - alpha * alpha) / (s * (s + 2.0));
    }
    if n > 1 {
        off[1] = 2.0 / (ab + 2.0) * ((alpha + 1.0) * (beta + 1.0) / (ab + 3.0)).sqrt();
        for k in 1..n - 1 {
            let kf = k as f64 + 1.0;
            let s = 2.0 * kf + ab;
            off[k + 1] = 2.0 / s
                * (kf * (kf + alpha) * (kf + beta) * (kf + ab) / ((s + 1.0) * (s - 1.0))).sqrt();
        }
    }
    tridiagonal_eigenvalues(&mut diag, &mut off)?;
    diag.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let log_const = (ab + 1.0) * std::f64::consts::LN_2 + libm::lgamma(n as f64 + alpha + 1.0)
        + libm::lgamma(n as f64 + beta + 1.0)
        - libm::lgamma(n as f64 + ab + 1.0)
        - libm::lgamma(n as f64 + 1.0);

    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for &seed in &diag {
        let mut x = seed.clamp(-1.0 + 1e-300, 1.0 - 1e-300);
        let mut dp = 0.0;
        for _ in 0..50 {
            let (p, d) = jacobi_with_derivative(n, alpha, beta, x);
            dp = d;
            let step = p / d;
            let next = x - step;
            x = if next <= -1.0 || next >= 1.0 { x - 0.5 * step } else { next };
            if step.abs() <= 1e-16 * x.abs().max(1e-3) {
                break;
            }
        }
        let (_, d) = jacobi_with_derivative(n, alpha, beta, x);
        if d.is_finite() && d != 0.0 {
            dp = d;
        }
        nodes.push(x);
        weights.push((log_const - (1.0 - x * x).ln() - 2.0 * dp.abs().ln()).exp());
    }
    if nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::Numerical(format!(
            "gauss-jacobi nodes collapsed for n={n}, alpha={alpha}, beta={beta}"
        )));
    }
    Ok(GaussRule {
        nodes,
        weights,
        alpha,
        beta,
    })
}

/// `P_n^{(alpha,beta)}(x)` and its derivative by the three-term recurrence.
fn jacobi_with_derivative(n: usize, alpha: f64, beta: f64, x: f64) -> (f64, f64) {
    let ab = alpha + beta;
    let mut p_prev = 1.0;
    let mut p = 0.5 * (alpha - beta) + 0.5 * (ab + 2.0) * x;
    if n == 1 {
        return (p, 0.5 * (ab + 2.0));
    }
    for k in 1..n {
        let kf = k as f64;
        let s = 2.0 * kf + ab;
        let a1 = 2.0 * (kf + 1.0) * (kf + ab + 1.0) * s;
        let a2 = (s + 1.0) * (alpha * alpha - beta * beta);
        let a3 = s * (s + 1.0) * (s + 2.0);
        let a4 = 2.0 * (kf + alpha) * (kf + beta) * (s + 2.0);
        let next = ((a2 + a3 * x) * p - a4 * p_prev) / a1;
        p_prev = p;
        p = next;
    }
    let nf = n as f64;
    let s = 2.0 * nf + ab;
    let dp = (nf * (alpha - beta - s * x) * p + 2.0 * (nf + alpha) * (nf + beta) * p_prev)
        / (s * (1.0 - x * x));
    (p, dp)
}

/// Implicit QL on a symmetric tridiagonal matrix; eigenvalues land in `diag`.
/// `off[i]` couples rows `i-1` and `i` (`off[0]` is ignored).
fn tridiagonal_eigenvalues(diag: &mut [f64], off: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if n == 1 {
        return Ok(());
    }
    for i in 1..n {
        off[i - 1] = off[i];
    }
    off[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(LabError::Numerical("tridiagonal QL did not converge".into()));
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Ok(())
}

/// Node counts, truncation radius and tolerance shared by the reduced
/// integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub cap_nodes: usize,
    pub space_radius: f64,
    pub space_nodes: usize,
    pub tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            cap_nodes: 128,
            space_radius: 200.0,
            space_nodes: 1024,
            tol: 1e-3,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.cap_nodes == 0 || self.space_nodes == 0 {
            return Err(invalid("node counts must be positive"));
        }
        if !(self.space_radius > 0.0 && self.space_radius.is_finite()) {
            return Err(invalid("space radius must be positive"));
        }
        if !(self.tol > 0.0 && self.tol <= 1e-3) {
            return Err(invalid(format!("tolerance must lie in (0, 1e-3], got {}", self.tol)));
        }
        Ok(())
    }

    /// Same spec with cap and space node counts doubled.
    pub fn doubled(&self) -> Self {
        Self {
            cap_nodes: 2 * self.cap_nodes,
            space_nodes: 2 * self.space_nodes,
            ..*self
        }
    }
}

/// How a [`RadialGrid`] was built; serialized as profile metadata so a
/// grid can be reconstructed exactly from a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GridSpec {
    /// Uniform panels on `[0, radius]` with the first panel split
    /// geometrically `refine` times toward 0.
    Panels {
        radius: f64,
        panels: usize,
        per_panel: usize,
        refine: usize,
    },
    /// Composite Gauss-Legendre on explicit breakpoints.
    Breaks { breaks: Vec<f64>, per_panel: usize },
    /// Nodes and weights supplied directly.
    Explicit,
}

/// A strictly increasing set of nonnegative nodes with quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    spec: GridSpec,
    breaks: Vec<f64>,
    per_panel: usize,
}

impl RadialGrid {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::validated(nodes, weights, GridSpec::Explicit)
    }

    fn validated(nodes: Vec<f64>, weights: Vec<f64>, spec: GridSpec) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(invalid("grid needs matching, nonempty nodes and weights"));
        }
        if nodes[0] < 0.0 || nodes.iter().any(|x| !x.is_finite()) {
            return Err(invalid("grid nodes must be finite and nonnegative"));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("grid nodes must be strictly increasing"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("grid weights must be finite and nonnegative"));
        }
        Ok(Self {
            nodes,
            weights,
            spec,
            breaks: Vec::new(),
            per_panel: 0,
        })
    }

    pub fn from_breaks(breaks: &[f64], per_panel: usize) -> Result<Self> {
        if breaks.len() < 2 || breaks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("breakpoints must be strictly increasing"));
        }
        let rule = gauss_legendre(per_panel.max(1));
        let mut nodes = Vec::with_capacity((breaks.len() - 1) * rule.len());
        let mut weights = Vec::with_capacity(nodes.capacity());
        for w in breaks.windows(2) {
            let (n, wt) = rule.mapped(w[0], w[1]);
            nodes.extend(n);
            weights.extend(wt);
        }
        let mut grid = Self::validated(
            nodes,
            weights,
            GridSpec::Breaks {
                breaks: breaks.to_vec(),
                per_panel,
            },
        )?;
        grid.breaks = breaks.to_vec();
        grid.per_panel = per_panel.max(1);
        Ok(grid)
    }

    /// Uniform panels on `[0, radius]`; the first panel is split
    /// geometrically `refine` times toward the origin.
    pub fn panels(radius: f64, panels: usize, per_panel: usize, refine: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || panels == 0 || per_panel == 0 {
            return Err(invalid("panel grid needs positive radius and counts"));
        }
        let h = radius / panels as f64;
        let mut breaks = vec![0.0];
        let mut inner: Vec<f64> = (0..refine).map(|i| h * 0.5f64.powi((refine - i) as i32)).collect();
        breaks.append(&mut inner);
        breaks.extend((1..=panels).map(|i| h * i as f64));
        let mut grid = Self::from_breaks(&breaks, per_panel)?;
        grid.spec = GridSpec::Panels {
            radius,
            panels,
            per_panel,
            refine,
        };
        Ok(grid)
    }

    /// Default profile grid: about `nodes` points, panels of 16 nodes,
    /// three geometric refinements toward 0.
    pub fn default_for(radius: f64, nodes: usize) -> Result<Self> {
        let per_panel = 16;
        let panels = (nodes / per_panel).max(1);
        Self::panels(radius, panels, per_panel, 3)
    }

    pub fn from_spec(spec: &GridSpec) -> Result<Self> {
        match spec {
            GridSpec::Panels {
                radius,
                panels,
                per_panel,
                refine,
            } => Self::panels(*radius, *panels, *per_panel, *refine),
            GridSpec::Breaks { breaks, per_panel } => Self::from_breaks(breaks, *per_panel),
            GridSpec::Explicit => Err(invalid("explicit grids cannot be rebuilt from metadata")),
        }
    }

    /// Same construction with every panel count doubled.
    pub fn refined(&self) -> Result<Self> {
        match &self.spec {
            GridSpec::Panels {
                radius,
                panels,
                per_panel,
                refine,
            } => Self::panels(*radius, panels * 2, *per_panel, *refine),
            GridSpec::Breaks { breaks, per_panel } => {
                let mut fine = Vec::with_capacity(2 * breaks.len());
                for w in breaks.windows(2) {
                    fine.push(w[0]);
                    fine.push(0.5 * (w[0] + w[1]));
                }
                fine.push(*breaks.last().unwrap());
                Self::from_breaks(&fine, *per_panel)
            }
            GridSpec::Explicit => Err(invalid("explicit grids have no refinement rule")),
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Panel breakpoints, empty for explicit grids.
    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    /// Weights `v_a` with `sum_a v_a f(x_a)` approximating
    /// `int kernel(x) f(x) dx` over the grid range, where `f` is the
    /// piecewise polynomial interpolant of its samples on each panel.
    /// The kernel is integrated with 16-point Gauss-Legendre on sub-panels
    /// of width at most `max_width`, additionally split at every point of
    /// `cuts` so that kernel jumps there are integrated exactly.
    pub fn product_weights(
        &self,
        kernel: impl Fn(f64) -> Complex64,
        max_width: f64,
        cuts: &[f64],
    ) -> Vec<Complex64> {
        if self.breaks.is_empty() {
            return self
                .nodes
                .iter()
                .zip(&self.weights)
                .map(|(&x, &w)| kernel(x) * w)
                .collect();
        }
        let sub = gauss_legendre(16);
        let np = self.per_panel;
        let mut out = vec![Complex64::new(0.0, 0.0); self.nodes.len()];
        for (pi, w) in self.breaks.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let local = &self.nodes[pi * np..(pi + 1) * np];
            let bary = barycentric_weights(local);
            let mut pts = vec![a];
            pts.extend(cuts.iter().copied().filter(|&c| c > a && c < b));
            pts.push(b);
            pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let mut basis = vec![0.0; np];
            for seg in pts.windows(2) {
                let len = seg[1] - seg[0];
                let pieces = ((len / max_width).ceil() as usize).max(1);
                let h = len / pieces as f64;
                for q in 0..pieces {
                    let lo = seg[0] + h * q as f64;
                    let (xs, ws) = sub.mapped(lo, lo + h);
                    for (&x, &wt) in xs.iter().zip(&ws) {
                        let kv = kernel(x) * wt;
                        lagrange_basis(local, &bary, x, &mut basis);
                        for (o, l) in out[pi * np..(pi + 1) * np].iter_mut().zip(&basis) {
                            *o += kv * *l;
                        }
                    }
                }
            }
        }
        out
    }

    /// Right end of the integration range.
    pub fn extent(&self) -> f64 {
        match &self.spec {
            GridSpec::Panels { radius, .. } => *radius,
            GridSpec::Breaks { breaks, .. } => *breaks.last().unwrap(),
            GridSpec::Explicit => *self.nodes.last().unwrap(),
        }
    }
}

pub fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![1.0; n];
    for j in 0..n {
        for k in 0..n {
            if k != j {
                w[j] /= nodes[j] - nodes[k];
            }
        }
    }
    let scale = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    w.iter().map(|v| v / scale).collect()
}

/// Values at `x` of the Lagrange basis on `nodes`, written into `out`.
pub fn lagrange_basis(nodes: &[f64], bary: &[f64], x: f64, out: &mut [f64]) {
    if let Some(j) = nodes.iter().position(|&t| t == x) {
        out.iter_mut().for_each(|v| *v = 0.0);
        out[j] = 1.0;
        return;
    }
    let mut denom = 0.0;
    for ((o, &t), &b) in out.iter_mut().zip(nodes).zip(bary) {
        *o = b / (x - t);
        denom += *o;
    }
    out.iter_mut().for_each(|v| *v /= denom);
}

/// Barycentric interpolation of `values` given on `nodes`.
pub fn interpolate(nodes: &[f64], bary: &[f64], values: &[f64], x: f64) -> f64 {
    let mut basis = vec![0.0; nodes.len()];
    lagrange_basis(nodes, bary, x, &mut basis);
    basis.iter().zip(values).map(|(b, v)| b * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_matches_known_low_order() {
        let r = gauss_legendre(3);
        let x = (0.6f64).sqrt();
        assert_relative_eq!(r.nodes[0], -x, epsilon = 1e-15);
        assert!(r.nodes[1].abs() < 1e-15);
        assert_relative_eq!(r.weights[0], 5.0 / 9.0, epsilon = 1e-14);
        assert_relative_eq!(r.weights[1], 8.0 / 9.0, epsilon = 1e-14);
    }

    #[test]
    fn jacobi_integrates_weighted_moments() {
        // int_{-1}^{1} (1-x)^a (1+x)^b dx = 2^{a+b+1} B(a+1, b+1)
        for &(a, b) in &[(-0.5, 0.0), (0.0, 0.5), (1.5, -0.5), (-0.5, -0.5), (2.0, 1.0)] {
            let rule = gauss_jacobi(17, a, b).unwrap();
            let exact = 2f64.powf(a + b + 1.0)
                * libm::tgamma(a + 1.0)
                * libm::tgamma(b + 1.0)
                / libm::tgamma(a + b + 2.0);
            assert_relative_eq!(rule.integrate(|_| 1.0), exact, max_relative = 1e-13);
            // (1+x) raises beta by one
            let exact1 = 2f64.powf(a + b + 2.0)
                * libm::tgamma(a + 1.0)
                * libm::tgamma(b + 2.0)
                / libm::tgamma(a + b + 3.0);
            assert_relative_eq!(rule.integrate(|x| 1.0 + x), exact1, max_relative = 1e-13);
        }
    }

    #[test]
    fn large_rules_stay_sorted_and_positive() {
        let rule = gauss_jacobi(256, 0.5, -0.5).unwrap();
        assert!(rule.weights.iter().all(|&w| w > 0.0));
        let total: f64 = rule.weights.iter().sum();
        assert_relative_eq!(total, std::f64::consts::PI, max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(gauss_jacobi(4, -1.0, 0.0).is_err());
        assert!(gauss_jacobi(0, 0.0, 0.0).is_err());
    }

    #[test]
    fn panel_grid_integrates_polynomials() {
        let g = RadialGrid::panels(3.0, 4, 8, 2).unwrap();
        let s: f64 = g.nodes().iter().zip(g.weights()).map(|(x, w)| w * x * x).sum();
        assert_relative_eq!(s, 9.0, max_relative = 1e-13);
        assert_relative_eq!(g.extent(), 3.0);
        let fine = g.refined().unwrap();
        assert_eq!(fine.len(), (8 + 2) * 8);
    }

    #[test]
    fn product_weights_integrate_oscillatory_kernels() {
        // int_0^3 cos(20x) x^2 dx with x^2 sampled on a coarse grid
        let g = RadialGrid::panels(3.0, 2, 8, 0).unwrap();
        let v = g.product_weights(|x| Complex64::new((20.0 * x).cos(), 0.0), 0.1, &[1.3]);
        let s: f64 = v.iter().zip(g.nodes()).map(|(w, x)| w.re * x * x).sum();
        let exact = (9.0 * 60f64.sin()) / 20.0 + 2.0 * 3.0 * 60f64.cos() / 400.0
            - 2.0 * 60f64.sin() / 8000.0;
        assert_relative_eq!(s, exact, max_relative = 1e-12);
        // a jump at 1.3 is honored exactly
        let v = g.product_weights(|x| Complex64::new(if x >= 1.3 { 1.0 } else { 0.0 }, 0.0), 1.0, &[1.3]);
        let s: f64 = v.iter().zip(g.nodes()).map(|(w, x)| w.re * x).sum();
        assert_relative_eq!(s, 0.5 * (9.0 - 1.69), max_relative = 1e-13);
    }

    #[test]
    fn grid_validation() {
        assert!(RadialGrid::new(vec![1.0, 0.5], vec![1.0, 1.0]).is_err());
        assert!(RadialGrid::new(vec![-1.0, 0.5], vec![1.0, 1.0]).is_err());
        assert!(RadialGrid::new(vec![0.0, 0.5], vec![1.0]).is_err());
    }
}
