//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints its own pass/fail line.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::time::Instant;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use restrict_lab::optimize::{duality_check, maximize, MaximizeOptions};
use restrict_lab::quadrature::{QuadratureSpec, RadialGrid};
use restrict_lab::rieszmap::{classify, verdicts_conflict, Landmarks, RegionStatus};
use restrict_lab::sharpness::{
    default_deltas, default_radii, g1_knapp, radial_tail, slope_fit, KnappConfig, KnappGrid, TailVerdict,
};
use restrict_lab::specfun::{bessel_j, bessel_split, remainder_envelope, sigma_hat, BesselOrder};
use restrict_lab::symgeom::{
    cap_atoms, lorentz_norm, profile_atoms, sphere_area, CapProfile, CapRule, LorentzExponent, RadialProfile2D,
    SymmetryParams,
};
use restrict_lab::transforms::{extension_field, restrict_to_sphere, split_transform, symmetric_fourier};
use restrict_lab::weightedops::{
    norm_probe, oscillatory_bound_ratio, oscillatory_integral, remark_family_probe, ProbeOperator, Stability,
    WeightedOpParams,
};

type Outcome = Result<String, String>;

const BLOCKS: [(usize, usize); 4] = [(4, 2), (5, 2), (6, 3), (7, 3)];

fn params(d: usize, k: usize) -> SymmetryParams {
    SymmetryParams::new(d, k).unwrap()
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn bochner_hecke_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for (d, k) in BLOCKS {
        let p = params(d, k);
        let f = CapProfile::constant(CapRule::gauss_jacobi(p, 128).unwrap(), Complex64::new(1.0, 0.0)).unwrap();
        let axis: Vec<f64> = (0..50).map(|i| 40.0 * i as f64 / 49.0).collect();
        let field = extension_field(&f, &axis, &axis, p).unwrap();
        let scale = sphere_area(d).unwrap();
        for (i, &y) in axis.iter().enumerate() {
            for (j, &z) in axis.iter().enumerate() {
                let r = y.hypot(z);
                let exact = sigma_hat(d, r).unwrap();
                let envelope = scale * (1.0 + r).powf(-0.5 * (d as f64 - 1.0));
                worst = worst.max((field.at(i, j) - exact).norm() / envelope.max(exact.abs()));
            }
        }
    }
    verdict(worst < 1e-6, format!("max envelope-relative error {worst:.2e} (tol 1e-6)"))
}

fn gaussian_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let f = RadialProfile2D::gaussian(12.0, 256).unwrap();
    let quad = QuadratureSpec::default();
    let mut worst: f64 = 0.0;
    for (d, k) in BLOCKS {
        let p = params(d, k);
        for _ in 0..100 {
            let (a, b) = (rng.random_range(0.0..6.0), rng.random_range(0.0..6.0));
            let v = symmetric_fourier(&f, a, b, p, &quad).unwrap().value;
            let exact = (2.0 * PI).powf(0.5 * d as f64) * (-0.5 * (a * a + b * b)).exp();
            worst = worst.max((v - exact).norm());
        }
    }
    verdict(worst < 1e-6, format!("max abs error {worst:.2e} over 400 points (tol 1e-6)"))
}

fn decomposition_reconstruction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = params(4, 2);
    let quad = QuadratureSpec::default();
    let g = RadialGrid::from_breaks(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 16).unwrap();
    let (mut split_err, mut f4_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..10 {
        let (lo, hi) = (rng.random_range(1.0..2.0), rng.random_range(3.5..6.0));
        let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let tilt = rng.random_range(-0.5..0.5);
        let bump = move |r: f64| if r > lo && r < hi { (r - lo).powi(2) * (hi - r).powi(2) } else { 0.0 };
        let f = RadialProfile2D::from_fn(g.clone(), g.clone(), |a, b| c * bump(a) * bump(b) * (1.0 + tilt * a)).unwrap();
        let (eta, zeta) = (rng.random_range(1.5..6.0), rng.random_range(1.5..6.0));
        let direct = symmetric_fourier(&f, eta, zeta, p, &quad).unwrap().value;
        let s = split_transform(&f, eta, zeta, p, &quad).unwrap().value;
        split_err = split_err.max((s.reconstruct() - direct).norm());
        let via_r = restrict_lab::weightedops::f4_via_r(&f, 1.5, eta, zeta, p).unwrap();
        f4_err = f4_err.max((via_r - s.pieces[3]).norm());
    }
    verdict(
        split_err < 1e-6 && f4_err < 1e-5,
        format!("reconstruction error {split_err:.2e} (tol 1e-6), fourth-piece error {f4_err:.2e} (tol 1e-5)"),
    )
}

fn knapp_slopes() -> Outcome {
    let grid = KnappGrid::default();
    let deltas = default_deltas();
    let fixtures = [(4, 2, 1.5, 2.0), (4, 2, 1.25, 2.0), (6, 3, 18.0 / 11.0, 2.0), (4, 2, 2.0, 2.0), (4, 2, 4.0 / 3.0, 2.0)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (d, k, p, q) in fixtures {
        let cfg = KnappConfig::new(params(d, k), deltas[0], p, q).unwrap();
        let fit = slope_fit(&cfg, &deltas, &grid).unwrap().value;
        ok &= (fit.slope - fit.predicted).abs() <= 0.1;
        parts.push(format!("({d},{k},{p:.3},{q}) {:.3}/{:.3}", fit.slope, fit.predicted));
    }
    verdict(ok, format!("fitted/predicted: {}", parts.join(", ")))
}

fn g1_slopes() -> Outcome {
    let grid = KnappGrid::default();
    let deltas = default_deltas();
    let a = g1_knapp(&deltas, 4, 10.0 / 7.0, 2.0, &grid).unwrap().value.slope;
    let b = g1_knapp(&deltas, 4, 2.0, 2.0, &grid).unwrap().value.slope;
    verdict(
        a.abs() <= 0.1 && (b + 1.0).abs() <= 0.1,
        format!("p=10/7 slope {a:.3} (want 0), p=2 slope {b:.3} (want -1)"),
    )
}

fn radial_threshold() -> Outcome {
    let radii = default_radii(5);
    let mut ok = true;
    let mut widest: f64 = 0.0;
    for d in 3..=8 {
        let t = 2.0 * d as f64 / (d as f64 - 1.0);
        let scan: Vec<(f64, TailVerdict)> = (-30..=30)
            .map(|i| {
                let x = 1.0 + 0.001 * i as f64;
                (x, radial_tail(d, x * t, &radii).unwrap().verdict)
            })
            .collect();
        let last_div = scan.iter().rev().find(|s| s.1 == TailVerdict::Diverges).map(|s| s.0);
        let first_conv = scan.iter().find(|s| s.1 == TailVerdict::Converges).map(|s| s.0);
        let (Some(lo), Some(hi)) = (last_div, first_conv) else {
            ok = false;
            continue;
        };
        let ordered = scan.iter().all(|s| match s.1 {
            TailVerdict::Diverges => s.0 <= lo && s.0 < hi,
            TailVerdict::Converges => s.0 >= hi && s.0 > lo,
            TailVerdict::Inconclusive => s.0 > lo && s.0 < hi,
        });
        ok &= ordered && lo < 1.0 + 1e-9 && hi > 1.0 - 1e-9;
        widest = widest.max(hi - lo);
    }
    ok &= widest <= 0.02;
    verdict(ok, format!("verdict flips at 2d/(d-1) for d=3..8, widest inconclusive band {:.1}% of threshold (tol 2%)", 100.0 * widest))
}

fn maximizer_search() -> Outcome {
    let p = params(4, 2);
    let quad = QuadratureSpec {
        cap_nodes: 32,
        space_radius: 48.0,
        space_nodes: 192,
        tol: 1e-3,
    };
    let opts = MaximizeOptions::default();
    let one = maximize(p, LorentzExponent::lebesgue(1.0).unwrap(), &quad, &opts).unwrap();
    let target = (2.0 * PI * PI).sqrt();
    let vals = one.best.iterate.values();
    let mean = vals.iter().map(|v| v.norm()).sum::<f64>() / vals.len() as f64;
    let flat = vals.iter().map(|v| (v.norm() / mean - 1.0).abs()).fold(0.0, f64::max);
    let p1_ok = (one.best.objective - target).abs() < 1e-3 && flat < 1e-3;

    let st = maximize(p, LorentzExponent::lebesgue(10.0 / 7.0).unwrap(), &quad, &opts).unwrap();
    let hist = &st.best.objective_history;
    let monotone = hist.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12));
    let above = st.best.objective >= st.constant_objective;
    let change = st.grid_change.unwrap_or(f64::INFINITY);

    let f = RadialProfile2D::gaussian(12.0, 96).unwrap();
    let big_f = CapProfile::constant(CapRule::gauss_jacobi(p, quad.cap_nodes).unwrap(), Complex64::new(1.0, 0.0)).unwrap();
    let dual = duality_check(p, LorentzExponent::lebesgue(10.0 / 7.0).unwrap(), &f, &big_f, &quad).unwrap();
    verdict(
        p1_ok && monotone && above && change < 0.01 && dual.residual < 1e-6,
        format!(
            "p=1 objective {:.6} vs {target:.6}, flatness {flat:.1e}; p=10/7 monotone={monotone}, {:.5} >= constant {:.5}, doubling change {:.2}%; duality residual {:.1e}",
            one.best.objective,
            st.best.objective,
            st.constant_objective,
            100.0 * change,
            dual.residual
        ),
    )
}

/// `J_n(r) = (1/pi) int_0^pi cos(n t - r sin t) dt` for integer `n`, and the
/// elementary closed forms for half-integer orders.
fn bessel_oracle(nu: f64, r: f64) -> f64 {
    if nu.fract() == 0.0 {
        let rule = GaussLegendre::new(NonZeroUsize::new(40).unwrap());
        let panels = 8 + (r as usize) / 2;
        let h = PI / panels as f64;
        (0..panels)
            .map(|i| rule.integrate(i as f64 * h, (i + 1) as f64 * h, |t| (nu * t - r * t.sin()).cos()))
            .sum::<f64>()
            / PI
    } else {
        let pre = (2.0 / (PI * r)).sqrt();
        let (s, c) = r.sin_cos();
        match (2.0 * nu) as usize {
            1 => pre * s,
            3 => pre * (s / r - c),
            5 => pre * ((3.0 / (r * r) - 1.0) * s - 3.0 * c / r),
            _ => unreachable!(),
        }
    }
}

fn bessel_split_check() -> Outcome {
    let orders = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5];
    let mut worst: f64 = 0.0;
    let mut sups = Vec::new();
    let mut ok = true;
    for &nu in &orders {
        let o = BesselOrder::new(nu).unwrap();
        for i in 1..=400 {
            let r = 0.25 * i as f64;
            let s = bessel_split(o, r).unwrap();
            let exact = bessel_oracle(nu, r);
            worst = worst.max((s.principal.re + s.remainder - exact).abs());
            worst = worst.max((bessel_j(o, r).unwrap() - exact).abs());
        }
        let base = remainder_envelope(o, 1000.0, 400).unwrap().sup;
        let fine = remainder_envelope(o, 1000.0, 800).unwrap().sup;
        let longer = remainder_envelope(o, 2000.0, 880).unwrap().sup;
        let change = ((fine - base).abs()).max((longer - fine).abs()) / fine;
        ok &= fine.is_finite() && change < 0.01;
        sups.push(format!("{nu}:{fine:.3}"));
    }
    verdict(
        ok && worst < 1e-9,
        format!("max |principal+remainder-J| {worst:.1e} (tol 1e-9); envelope sups {}", sups.join(" ")),
    )
}

/// `int_a^inf s^-g e^{i l s} ds` along the ray `s = a + i sgn(l) t`, where the
/// integrand decays like `e^{-|l| t}`; composite Gauss-Legendre on panels.
fn rotated_contour(gamma: f64, a: f64, lambda: f64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    let dir = i * lambda.signum();
    let rule = GaussLegendre::new(NonZeroUsize::new(30).unwrap());
    let scale = 1.0 / lambda.abs();
    let mut total = Complex64::new(0.0, 0.0);
    let mut lo = 0.0;
    let mut h = 0.25 * a.min(scale);
    while lo < 45.0 * scale {
        let hi = lo + h;
        let f = |t: f64| (Complex64::new(a, 0.0) + dir * t).powf(-gamma) * (-lambda.abs() * t).exp();
        let re = rule.integrate(lo, hi, |t| f(t).re);
        let im = rule.integrate(lo, hi, |t| f(t).im);
        total += Complex64::new(re, im);
        lo = hi;
        h *= 1.5;
    }
    dir * (i * lambda * a).exp() * total
}

fn oscillatory_bounds() -> Outcome {
    let mut sup_slow: f64 = 0.0;
    let mut sup_fast: f64 = 0.0;
    for i in 0..20 {
        for j in 0..20 {
            let lambda = 0.01 * (200.0f64).powf(j as f64 / 19.0) * if j % 2 == 0 { 1.0 } else { -1.0 };
            let slow = 0.05 + 0.9 * i as f64 / 19.0;
            let fast = 1.05 + 1.95 * i as f64 / 19.0;
            sup_slow = sup_slow.max(oscillatory_bound_ratio(slow, 1.0, lambda).unwrap().1);
            sup_fast = sup_fast.max(oscillatory_bound_ratio(fast, 1.0, lambda).unwrap().1);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let mut gamma = rng.random_range(0.1..3.0);
        if (gamma - 1.0f64).abs() < 0.02 {
            gamma += 0.05;
        }
        let a = rng.random_range(1.0..10.0);
        let lambda = rng.random_range(0.05..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let v = oscillatory_integral(gamma, a, lambda).unwrap();
        let w = rotated_contour(gamma, a, lambda);
        worst = worst.max((v - w).norm() / w.norm().max(1e-3));
    }
    verdict(
        sup_slow.is_finite() && sup_fast.is_finite() && worst < 1e-6,
        format!("bound-ratio sups {sup_slow:.3} (slow) {sup_fast:.3} (fast); max relative error vs contour quadrature {worst:.1e} (tol 1e-6)"),
    )
}

fn operator_probes() -> Outcome {
    let t = norm_probe(ProbeOperator::T { a: 0.75, b: 0.25 }, 2.0, 2.0, 10, 11).unwrap();
    let s = norm_probe(ProbeOperator::S { a: 0.25, b: 0.5, ell: 1.0 }, 2.0, 2.0, 10, 12).unwrap();
    let params = WeightedOpParams::new(5.0 / 6.0, 0.5, 1.0).unwrap();
    let taus = [1e-5, 1e-10, 1e-20, 1e-40, 1e-80, 1e-160];
    let r = remark_family_probe(params, 6.0, 2.0, 0.1, &taus).unwrap();
    let drift = |rep: &restrict_lab::weightedops::ProbeReport| {
        rep.ratios.iter().map(|x| (x[1] / x[0] - 1.0).abs()).fold(0.0, f64::max)
    };
    verdict(
        t.stability == Stability::Stable && s.stability == Stability::Stable && r.growth >= 2.0,
        format!(
            "T drift {:.2}%, S drift {:.2}% (tol 5%); counterexample growth x{:.2} (need >= 2)",
            100.0 * drift(&t),
            100.0 * drift(&s),
            r.growth
        ),
    )
}

fn riesz_classifier() -> Outcome {
    let p = params(4, 2);
    let fixtures = [
        (1.5, 2.0, RegionStatus::BoundedSufficientI),
        (2.0, 2.0, RegionStatus::UnboundedNecessary),
        (4.0 / 3.0, 4.0, RegionStatus::UnboundedNecessary),
    ];
    let mut ok = fixtures.iter().all(|&(a, b, s)| classify(p, a, b).unwrap().status == s);
    let l = Landmarks::new(p).abscissas();
    ok &= l == [5.0 / 8.0, 2.0 / 3.0, 3.0 / 4.0, 7.0 / 10.0];
    let mut conflicts = 0;
    for (d, k) in [(4, 2), (6, 2), (6, 3), (8, 4)] {
        let q = params(d, k);
        for i in 0..256 {
            for j in 0..256 {
                conflicts += verdicts_conflict(q, i as f64 / 255.0, j as f64 / 255.0) as usize;
            }
        }
    }
    ok &= conflicts == 0;
    verdict(ok, format!("fixtures and landmarks {:?}; {conflicts} conflicting cells on 4 x 256^2 lattices", l))
}

/// `f_delta(y, z) = e^{-delta^2 |y|^2 / 2} J_0(|z|) e^{-delta^4 |z|^2 / 2}`:
/// its transform concentrates on the cap `|eta| < delta` of the sphere.
fn knapp_profile(delta: f64, refine: bool) -> RadialProfile2D {
    let r1 = 8.0 / delta;
    let r2 = 7.0 / (delta * delta);
    let g1 = RadialGrid::panels(r1, (r1 / 2.0).ceil() as usize, 16, 0).unwrap();
    let g2 = RadialGrid::panels(r2, (r2 / 2.5).ceil() as usize, 16, 0).unwrap();
    let (g1, g2) = if refine { (g1.refined().unwrap(), g2.refined().unwrap()) } else { (g1, g2) };
    let j0 = BesselOrder::new(0.0).unwrap();
    let d2 = delta * delta;
    RadialProfile2D::from_fn(g1, g2, |a, b| {
        Complex64::new((-0.5 * d2 * a * a - 0.5 * d2 * d2 * b * b).exp() * bessel_j(j0, b).unwrap(), 0.0)
    })
    .unwrap()
}

fn lorentz_quotient(f: &RadialProfile2D, p: SymmetryParams, cap_nodes: usize) -> f64 {
    let quad = QuadratureSpec::default();
    let rule = CapRule::gauss_jacobi(p, cap_nodes).unwrap();
    let hat = restrict_to_sphere(f, &rule, &quad).unwrap().value;
    let top = lorentz_norm(&cap_atoms(&hat), LorentzExponent::new(4.0, f64::INFINITY).unwrap()).unwrap();
    let bottom = lorentz_norm(&profile_atoms(f, p), LorentzExponent::new(4.0 / 3.0, 1.0).unwrap()).unwrap();
    top / bottom
}

fn lorentz_endpoint() -> Outcome {
    let p = params(4, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut drift: f64 = 0.0;
    let mut random_max: f64 = 0.0;
    let base_grid = RadialGrid::default_for(12.0, 96).unwrap();
    let fine_grid = base_grid.refined().unwrap();
    for _ in 0..20 {
        let terms: Vec<(Complex64, f64, f64)> = (0..3)
            .map(|_| {
                let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                (c, rng.random_range(0.3..2.0), rng.random_range(0.3..2.0))
            })
            .collect();
        let eval = |a: f64, b: f64| terms.iter().map(|&(c, s, t)| c * (-s * a * a - t * b * b).exp()).sum();
        let coarse = RadialProfile2D::from_fn(base_grid.clone(), base_grid.clone(), eval).unwrap();
        let fine = RadialProfile2D::from_fn(fine_grid.clone(), fine_grid.clone(), eval).unwrap();
        let q0 = lorentz_quotient(&coarse, p, 48);
        let q1 = lorentz_quotient(&fine, p, 96);
        drift = drift.max((q1 / q0 - 1.0).abs());
        random_max = random_max.max(q1);
    }
    let mut knapp = Vec::new();
    for delta in [0.5, 0.35, 0.25] {
        let q0 = lorentz_quotient(&knapp_profile(delta, false), p, 64);
        let q1 = lorentz_quotient(&knapp_profile(delta, true), p, 128);
        drift = drift.max((q1 / q0 - 1.0).abs());
        knapp.push(q1);
    }
    let spread = knapp.iter().copied().fold(0.0, f64::max) / knapp.iter().copied().fold(f64::INFINITY, f64::min);
    verdict(
        drift <= 0.1,
        format!(
            "max refinement drift {:.2}% (tol 10%); random max quotient {random_max:.4}; knapp quotients {} (spread x{spread:.2})",
            100.0 * drift,
            knapp.iter().map(|q| format!("{q:.4}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("bochner-hecke-identity", bochner_hecke_identity),
        ("gaussian-oracle", gaussian_oracle),
        ("decomposition-reconstruction", decomposition_reconstruction),
        ("knapp-slopes", knapp_slopes),
        ("g1-knapp-slopes", g1_slopes),
        ("radial-threshold", radial_threshold),
        ("maximizer-search", maximizer_search),
        ("bessel-split", bessel_split_check),
        ("oscillatory-bounds", oscillatory_bounds),
        ("operator-probes", operator_probes),
        ("riesz-classifier", riesz_classifier),
        ("lorentz-endpoint", lorentz_endpoint),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.iter().any(|o| name.contains(o.as_str())) {
            continue;
        }
        let start = Instant::now();
        let res = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({secs:.1}s) {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({secs:.1}s) {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
