//! Command-line front end: argument and config resolution, dispatch, and
//! artifact output.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{invalid, LabError, NumericWarning, Result};
use crate::optimize::{duality_check, existence_label, maximize, ExistenceLabel, MaximizeOptions};
use crate::plot::{heatmap_svg, line_svg, loglog_svg};
use crate::quadrature::QuadratureSpec;
use crate::rieszmap::{classify, diagram, Landmarks, RegionStatus};
use crate::sharpness::{geometric, g1_knapp, radial_tail, slope_fit, KnappConfig, KnappGrid, SlopeFit};
use crate::specfun::{bessel_j, bessel_split, remainder_envelope, BesselOrder};
use crate::symgeom::{lorentz_norm, lp_norm_2d, profile_atoms, CapProfile, CapRule, LorentzExponent, RadialProfile2D, SymmetryParams};
use crate::transforms::{extension_field, extension_operator, split_transform, symmetric_fourier};
use crate::weightedops::{
    f4_via_r, norm_probe, oscillatory_bound_ratio, remark_family_probe, ProbeOperator, WeightedOpParams,
};

pub const JOBS_ENV: &str = "RESTRICT_LAB_JOBS";

#[derive(Parser, Debug)]
#[command(name = "restrict-lab", version, about = "Numerical experiments on block-symmetric Fourier restriction")]
struct Cli {
    /// JSON config; flags take precedence over it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (also RESTRICT_LAB_JOBS)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Turn numerical warnings into errors (exit 3)
    #[arg(long, global = true)]
    strict: bool,
    /// Directory receiving JSON, CSV and SVG artifacts
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bessel values, principal/remainder split and remainder envelope
    BesselCheck(BesselArgs),
    /// Extension of a block-symmetric function on the sphere
    Extend(ExtendArgs),
    /// Reduced Fourier transform of a block-symmetric profile
    Transform(TransformArgs),
    /// Lebesgue and Lorentz norms of a profile
    Norm(NormArgs),
    /// Maximizer search for the extension quotient
    Maximize(MaximizeArgs),
    /// Restriction/extension duality pairing
    Duality(DualityArgs),
    /// Knapp quotient sweep and slope fit
    KnappSweep(KnappArgs),
    /// The k = 1 Knapp construction
    G1Knapp(G1Args),
    /// Integrability of sigma_hat in L^{p'}
    RadialTail(TailArgs),
    /// Empirical operator-norm probes
    OpProbe(ProbeArgs),
    /// Oscillatory tail integral and its bound
    Oscillatory(OscArgs),
    /// Riesz-diagram classification
    Riesz(RieszArgs),
}

#[derive(Args, Debug, Default)]
struct Dims {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct QuadArgs {
    #[arg(long)]
    cap_nodes: Option<usize>,
    #[arg(long)]
    space_radius: Option<f64>,
    #[arg(long)]
    space_nodes: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct ProfileArgs {
    /// Profile CSV (rho1, rho2, re, im); needs --meta
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long)]
    meta: Option<PathBuf>,
    /// Extent of the default Gaussian profile
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    nodes: Option<usize>,
}

#[derive(Args, Debug)]
struct BesselArgs {
    #[arg(long, value_delimiter = ',')]
    nu: Option<Vec<f64>>,
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// Also report J, principal and remainder at this radius
    #[arg(long)]
    at: Option<f64>,
}

#[derive(Args, Debug)]
struct ExtendArgs {
    #[command(flatten)]
    dims: Dims,
    /// F = 1 (the default profile)
    #[arg(long = "const")]
    constant: bool,
    /// F(r) = r^e instead of a constant
    #[arg(long)]
    power: Option<f64>,
    #[arg(long)]
    cap_nodes: Option<usize>,
    /// Single point |y| |z|
    #[arg(long, num_args = 2, allow_negative_numbers = true)]
    at: Option<Vec<f64>>,
    #[arg(long)]
    y_max: Option<f64>,
    #[arg(long)]
    z_max: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
}

#[derive(Args, Debug)]
struct TransformArgs {
    #[command(flatten)]
    dims: Dims,
    #[command(flatten)]
    profile: ProfileArgs,
    #[command(flatten)]
    quad: QuadArgs,
    /// Frequency point |eta| |zeta|
    #[arg(long, num_args = 2, allow_negative_numbers = true)]
    at: Option<Vec<f64>>,
    /// Report the five principal/remainder pieces
    #[arg(long)]
    split: bool,
    /// Report the fourth piece through the two-dimensional operator at this p
    #[arg(long)]
    f4_p: Option<f64>,
}

#[derive(Args, Debug)]
struct NormArgs {
    #[command(flatten)]
    dims: Dims,
    #[command(flatten)]
    profile: ProfileArgs,
    #[arg(long)]
    p: Option<f64>,
    /// Lorentz second index (defaults to p)
    #[arg(long)]
    s: Option<f64>,
}

#[derive(Args, Debug)]
struct MaximizeArgs {
    #[command(flatten)]
    dims: Dims,
    #[command(flatten)]
    quad: QuadArgs,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_doubling: bool,
}

#[derive(Args, Debug)]
struct DualityArgs {
    #[command(flatten)]
    dims: Dims,
    #[command(flatten)]
    profile: ProfileArgs,
    #[command(flatten)]
    quad: QuadArgs,
    #[arg(long)]
    p: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    #[arg(long)]
    delta_min: Option<f64>,
    #[arg(long)]
    delta_max: Option<f64>,
    #[arg(long)]
    delta_count: Option<usize>,
    #[arg(long)]
    knapp_cap_nodes: Option<usize>,
    #[arg(long)]
    y_reach: Option<f64>,
    #[arg(long)]
    y_panels: Option<usize>,
    #[arg(long)]
    per_panel: Option<usize>,
    /// Cut the |z| range below the last shell
    #[arg(long)]
    z_limit: Option<f64>,
}

#[derive(Args, Debug)]
struct KnappArgs {
    #[command(flatten)]
    dims: Dims,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[command(flatten)]
    sweep: SweepArgs,
}

#[derive(Args, Debug)]
struct G1Args {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[command(flatten)]
    sweep: SweepArgs,
}

#[derive(Args, Debug)]
struct TailArgs {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    p_prime: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    #[arg(long)]
    count: Option<usize>,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    /// t, s, r or remark
    #[arg(long)]
    op: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    #[arg(long)]
    ell: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    taus: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct OscArgs {
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
}

#[derive(Args, Debug)]
struct RieszArgs {
    #[command(flatten)]
    dims: Dims,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    /// Also rasterize the diagram at this resolution
    #[arg(long)]
    diagram: Option<usize>,
}

/// Config values: the section named after the command, then top-level keys.
struct Layers {
    section: Map<String, Value>,
    root: Map<String, Value>,
}

impl Layers {
    fn load(path: Option<&Path>, command: &str) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self {
                section: Map::new(),
                root: Map::new(),
            });
        };
        let text = std::fs::read_to_string(path)?;
        let root: Map<String, Value> = serde_json::from_str(&text)
            .map_err(|e| invalid(format!("config {}: {e}", path.display())))?;
        let section = match root.get(command) {
            Some(Value::Object(m)) => m.clone(),
            _ => Map::new(),
        };
        Ok(Self { section, root })
    }

    fn lookup(&self, key: &str) -> Option<&Value> {
        let snake = key.replace('-', "_");
        let kebab = key.replace('_', "-");
        [&self.section, &self.root]
            .into_iter()
            .find_map(|m| m.get(&snake).or_else(|| m.get(&kebab)))
    }

    fn opt<T: DeserializeOwned>(&self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.lookup(key)
            .map(|v| serde_json::from_value(v.clone()).map_err(|e| invalid(format!("config key {key}: {e}"))))
            .transpose()
    }

    fn get<T: DeserializeOwned>(&self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        Ok(self.opt(key, flag)?.unwrap_or(default))
    }

    fn flag(&self, key: &str, set: bool) -> Result<bool> {
        self.get(key, set.then_some(true), false)
    }
}

/// What a command produced.
struct Outcome {
    inputs: Value,
    result: Value,
    citations: Vec<String>,
    warnings: Vec<NumericWarning>,
    artifacts: Vec<(String, String)>,
}

impl Outcome {
    fn new(inputs: Value, result: impl Serialize, citations: &[&str]) -> Result<Self> {
        Ok(Self {
            inputs,
            result: serde_json::to_value(result)?,
            citations: citations.iter().map(|s| s.to_string()).collect(),
            warnings: Vec::new(),
            artifacts: Vec::new(),
        })
    }

    fn warn(mut self, w: impl IntoIterator<Item = NumericWarning>) -> Self {
        self.warnings.extend(w);
        self
    }

    fn artifact(mut self, name: &str, body: String) -> Self {
        self.artifacts.push((name.to_string(), body));
        self
    }
}

fn complex(v: Complex64) -> Value {
    json!({ "re": v.re, "im": v.im, "abs": v.norm() })
}

fn params(l: &Layers, dims: &Dims, d: usize, k: usize) -> Result<SymmetryParams> {
    SymmetryParams::new(l.get("d", dims.d, d)?, l.get("k", dims.k, k)?)
}

fn quad_spec(l: &Layers, q: &QuadArgs, base: QuadratureSpec) -> Result<QuadratureSpec> {
    let spec = QuadratureSpec {
        cap_nodes: l.get("cap_nodes", q.cap_nodes, base.cap_nodes)?,
        space_radius: l.get("space_radius", q.space_radius, base.space_radius)?,
        space_nodes: l.get("space_nodes", q.space_nodes, base.space_nodes)?,
        tol: l.get("tol", q.tol, base.tol)?,
    };
    spec.validate()?;
    Ok(spec)
}

/// Grid used by `maximize` and `duality` unless overridden.
fn search_spec() -> QuadratureSpec {
    QuadratureSpec {
        cap_nodes: 24,
        space_radius: 48.0,
        space_nodes: 192,
        tol: 1e-3,
    }
}

fn load_profile(l: &Layers, a: &ProfileArgs, params: SymmetryParams) -> Result<(RadialProfile2D, Value)> {
    let csv = l.opt::<PathBuf>("profile", a.profile.clone())?;
    match csv {
        Some(csv) => {
            let meta = l
                .opt::<PathBuf>("meta", a.meta.clone())?
                .ok_or_else(|| invalid("--profile needs --meta"))?;
            let (f, p) = RadialProfile2D::load(&csv, &meta)?;
            if p != params {
                return Err(invalid(format!(
                    "profile metadata has d={}, k={} but d={}, k={} was requested",
                    p.d, p.k, params.d, params.k
                )));
            }
            Ok((f, json!({ "profile": csv, "meta": meta })))
        }
        None => {
            let radius = l.get("radius", a.radius, 12.0)?;
            let nodes = l.get("nodes", a.nodes, 96)?;
            Ok((
                RadialProfile2D::gaussian(radius, nodes)?,
                json!({ "profile": "gaussian", "radius": radius, "nodes": nodes }),
            ))
        }
    }
}

fn bessel_check(l: &Layers, a: &BesselArgs) -> Result<Outcome> {
    let nus = l.get("nu", a.nu.clone(), vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5])?;
    let r_max = l.get("r_max", a.r_max, 1000.0)?;
    let points = l.get("points", a.points, 400)?;
    let at = l.opt("at", a.at)?;
    let mut rows = Vec::new();
    for &nu in &nus {
        let order = BesselOrder::new(nu)?;
        let base = remainder_envelope(order, r_max, points)?;
        let fine = remainder_envelope(order, r_max, 2 * points)?;
        let mut row = json!({
            "nu": nu,
            "envelope_sup": base.sup,
            "envelope_sup_refined": fine.sup,
            "relative_change": (fine.sup - base.sup).abs() / base.sup.max(f64::MIN_POSITIVE),
            "argmax": fine.argmax,
        });
        if let Some(r) = at {
            let s = bessel_split(order, r)?;
            row["at"] = json!({
                "r": r,
                "j": bessel_j(order, r)?,
                "principal": complex(s.principal),
                "remainder": s.remainder,
                "amplitude": complex(s.amplitude),
            });
        }
        rows.push(row);
    }
    let inputs = json!({ "nu": nus, "r_max": r_max, "points": points, "at": at });
    Outcome::new(inputs, rows, &["bessel-power-series", "bessel-principal-remainder-split"])
}

fn cap_profile(rule: CapRule, power: Option<f64>) -> Result<CapProfile> {
    match power {
        Some(e) => CapProfile::from_fn(rule, |r| Complex64::new(r.powf(e), 0.0)),
        None => CapProfile::constant(rule, Complex64::new(1.0, 0.0)),
    }
}

fn extend(l: &Layers, a: &ExtendArgs) -> Result<Outcome> {
    let params = params(l, &a.dims, 4, 2)?;
    let power = l.opt("power", a.power)?;
    let constant = l.flag("const", a.constant)?;
    if constant && power.is_some() {
        return Err(invalid("--const and --power are exclusive"));
    }
    let nodes = l.get("cap_nodes", a.cap_nodes, 128)?;
    let f = cap_profile(CapRule::gauss_jacobi(params, nodes)?, power)?;
    let cites = ["extension-operator", "slice-integration", "bochner-hecke-formula"];
    let profile = power.map_or(json!("constant"), |e| json!({ "power": e }));
    if let Some(at) = l.opt::<Vec<f64>>("at", a.at.clone())? {
        if at.len() != 2 {
            return Err(invalid("--at takes |y| and |z|"));
        }
        let v = extension_operator(&f, at[0], at[1], params)?;
        let inputs = json!({ "params": params, "profile": profile, "cap_nodes": nodes, "at": at });
        return Outcome::new(inputs, json!({ "value": complex(v) }), &cites);
    }
    let y_max = l.get("y_max", a.y_max, 20.0)?;
    let z_max = l.get("z_max", a.z_max, 20.0)?;
    let n = l.get("grid_points", a.grid_points, 41)?;
    if n < 2 {
        return Err(invalid("grid needs at least two points per axis"));
    }
    let axis = |m: f64| (0..n).map(|i| m * i as f64 / (n - 1) as f64).collect::<Vec<_>>();
    let field = extension_field(&f, &axis(y_max), &axis(z_max), params)?;
    let mut csv = Vec::new();
    field.write_csv(&mut csv)?;
    let peak = field.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let inputs = json!({ "params": params, "profile": profile, "cap_nodes": nodes, "y_max": y_max, "z_max": z_max, "grid_points": n });
    let svg = heatmap_svg(&format!("|F hat sigma|, d = {}, k = {}", params.d, params.k), &field);
    Ok(Outcome::new(inputs, json!({ "points": n * n, "max_abs": peak, "origin": complex(field.values[0]) }), &cites)?
        .artifact("extension.csv", String::from_utf8_lossy(&csv).into_owned())
        .artifact("extension.svg", svg))
}

fn transform(l: &Layers, a: &TransformArgs) -> Result<Outcome> {
    let params = params(l, &a.dims, 4, 2)?;
    let quad = quad_spec(l, &a.quad, QuadratureSpec::default())?;
    let (f, source) = load_profile(l, &a.profile, params)?;
    let at = l.get("at", a.at.clone(), vec![1.0, 1.0])?;
    if at.len() != 2 {
        return Err(invalid("--at takes |eta| and |zeta|"));
    }
    let (eta, zeta) = (at[0], at[1]);
    let v = symmetric_fourier(&f, eta, zeta, params, &quad)?;
    let mut result = json!({ "value": complex(v.value) });
    if source["profile"] == "gaussian" {
        let exact = (2.0 * std::f64::consts::PI).powf(0.5 * params.d as f64) * (-0.5 * (eta * eta + zeta * zeta)).exp();
        result["gaussian_exact"] = json!(exact);
        result["relative_error"] = json!((v.value - exact).norm() / exact);
    }
    let mut cites = vec!["block-symmetric-fourier-transform"];
    let mut warnings = v.warnings;
    if l.flag("split", a.split)? {
        let s = split_transform(&f, eta, zeta, params, &quad)?;
        warnings.extend(s.warnings);
        result["split"] = json!({
            "pieces": s.value.pieces.iter().map(|z| complex(*z)).collect::<Vec<_>>(),
            "partners": s.value.partners.iter().map(|z| complex(*z)).collect::<Vec<_>>(),
            "reconstruction": complex(s.value.reconstruct()),
        });
        cites.push("principal-remainder-decomposition");
    }
    if let Some(p) = l.opt("f4_p", a.f4_p)? {
        result["f4_via_r"] = complex(f4_via_r(&f, p, eta, zeta, params)?);
        cites.push("weighted-two-dimensional-operator");
    }
    let inputs = json!({ "params": params, "source": source, "quad": quad, "at": at });
    Ok(Outcome::new(inputs, result, &cites)?.warn(warnings))
}

fn norm(l: &Layers, a: &NormArgs) -> Result<Outcome> {
    let params = params(l, &a.dims, 4, 2)?;
    let (f, source) = load_profile(l, &a.profile, params)?;
    let p = l.get("p", a.p, 2.0)?;
    let s = l.get("s", a.s, p)?;
    let exp = LorentzExponent::new(p, s)?;
    let lorentz = lorentz_norm(&profile_atoms(&f, params), exp)?;
    let mut result = json!({ "lorentz": lorentz });
    let mut warnings = Vec::new();
    if exp.is_lebesgue() && p.is_finite() {
        let lp = lp_norm_2d(&f, exp, params)?;
        result["lebesgue"] = json!(lp.value);
        warnings = lp.warnings;
    }
    let inputs = json!({ "params": params, "source": source, "p": p, "s": s });
    Ok(Outcome::new(inputs, result, &["lebesgue-norm-polar-coordinates", "lorentz-norm-rearrangement"])?.warn(warnings))
}

fn maximize_cmd(l: &Layers, a: &MaximizeArgs) -> Result<Outcome> {
    let params = params(l, &a.dims, 4, 2)?;
    let quad = quad_spec(l, &a.quad, search_spec())?;
    let p = l.get("p", a.p, 1.0)?;
    let defaults = MaximizeOptions::default();
    let opts = MaximizeOptions {
        max_iters: l.get("max_iters", a.max_iters, defaults.max_iters)?,
        restarts: l.get("restarts", a.restarts, defaults.restarts)?,
        seed: l.get("seed", a.seed, defaults.seed)?,
        check_doubling: !l.flag("no_doubling", a.no_doubling)?,
        ..defaults
    };
    let report = maximize(params, LorentzExponent::lebesgue(p)?, &quad, &opts)?;
    let best = &report.best;
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["iteration", "objective"])?;
    for (i, v) in best.objective_history.iter().enumerate() {
        csv.serialize((i, v))?;
    }
    let history = String::from_utf8_lossy(&csv.into_inner().map_err(|e| LabError::Io(e.into_error()))?).into_owned();
    let mut profile = Vec::new();
    best.iterate.write_csv(&mut profile)?;
    let rs = best.iterate.nodes().to_vec();
    let vals: Vec<f64> = best.iterate.values().iter().map(|v| v.norm()).collect();
    let svg = line_svg(&format!("|F_0(r)|, d = {}, k = {}, p = {p}", params.d, params.k), "r", "|F_0|", &rs, &vals);
    let mut cites = vec!["extension-restriction-duality"];
    if existence_label(params, p) == ExistenceLabel::MaximizerExists {
        cites.push("existence-of-maximizers");
    }
    let inputs = json!({ "params": params, "p": p, "quad": quad, "options": opts });
    let warnings = best.warnings.clone();
    Ok(Outcome::new(inputs, &report, &cites)?
        .warn(warnings)
        .artifact("maximizer_profile.csv", String::from_utf8_lossy(&profile).into_owned())
        .artifact("maximizer_history.csv", history)
        .artifact("maximizer_profile.svg", svg))
}

fn duality(l: &Layers, a: &DualityArgs) -> Result<Outcome> {
    let params = params(l, &a.dims, 4, 2)?;
    let quad = quad_spec(l, &a.quad, search_spec())?;
    let p = l.get("p", a.p, 10.0 / 7.0)?;
    let (f, source) = load_profile(l, &a.profile, params)?;
    let big_f = CapProfile::constant(CapRule::gauss_jacobi(params, quad.cap_nodes)?, Complex64::new(1.0, 0.0))?;
    let report = duality_check(params, LorentzExponent::lebesgue(p)?, &f, &big_f, &quad)?;
    let inputs = json!({ "params": params, "p": p, "quad": quad, "source": source, "sphere_profile": "constant" });
    Outcome::new(inputs, report, &["extension-restriction-duality"])
}

fn sweep_setup(l: &Layers, a: &SweepArgs) -> Result<(Vec<f64>, KnappGrid, Option<f64>)> {
    let deltas = match l.opt::<Vec<f64>>("deltas", a.deltas.clone())? {
        Some(d) => d,
        None => geometric(
            l.get("delta_min", a.delta_min, 0.005)?,
            l.get("delta_max", a.delta_max, 0.16)?,
            l.get("delta_count", a.delta_count, 8)?,
        ),
    };
    let g = KnappGrid::default();
    let grid = KnappGrid {
        cap_nodes: l.get("knapp_cap_nodes", a.knapp_cap_nodes, g.cap_nodes)?,
        y_reach: l.get("y_reach", a.y_reach, g.y_reach)?,
        y_panels: l.get("y_panels", a.y_panels, g.y_panels)?,
        per_panel: l.get("per_panel", a.per_panel, g.per_panel)?,
    };
    Ok((deltas, grid, l.opt("z_limit", a.z_limit)?))
}

fn sweep_outcome(inputs: Value, fit: crate::error::Checked<SlopeFit>, cites: &[&str], stem: &str) -> Result<Outcome> {
    let mut csv = Vec::new();
    fit.value.write_csv(&mut csv)?;
    let xs: Vec<f64> = fit.value.points.iter().map(|p| p.delta).collect();
    let ys: Vec<f64> = fit.value.points.iter().map(|p| p.quotient).collect();
    let title = format!("quotient vs delta, slope {:.3} (predicted {:.3})", fit.value.slope, fit.value.predicted);
    let line = (!fit.value.log_correction).then_some((fit.value.slope, fit.value.intercept));
    let svg = loglog_svg(&title, &xs, &ys, line);
    Ok(Outcome::new(inputs, &fit.value, cites)?
        .warn(fit.warnings)
        .artifact(&format!("{stem}.csv"), String::from_utf8_lossy(&csv).into_owned())
        .artifact(&format!("{stem}.svg"), svg))
}

fn knapp_sweep(l: &Layers, a: &KnappArgs) -> Result<Outcome> {
    let params = params(l, &a.dims, 4, 2)?;
    let p = l.get("p", a.p, 1.5)?;
    let q = l.get("q", a.q, 2.0)?;
    let (deltas, grid, z_limit) = sweep_setup(l, &a.sweep)?;
    let mut cfg = KnappConfig::new(params, deltas.first().copied().unwrap_or(0.1), p, q)?;
    if let Some(z) = z_limit {
        cfg = cfg.with_z_limit(z);
    }
    let fit = slope_fit(&cfg, &deltas, &grid)?;
    let inputs = json!({ "params": params, "p": p, "q": q, "deltas": deltas, "grid": grid, "z_limit": z_limit });
    sweep_outcome(inputs, fit, &["knapp-cap-construction", "three-regime-lower-bound"], "knapp_sweep")
}

fn g1(l: &Layers, a: &G1Args) -> Result<Outcome> {
    let d = l.get("d", a.d, 4)?;
    let p = l.get("p", a.p, 10.0 / 7.0)?;
    let q = l.get("q", a.q, 2.0)?;
    let (deltas, grid, z_limit) = sweep_setup(l, &a.sweep)?;
    if z_limit.is_some() {
        return Err(invalid("--z-limit is only supported by knapp-sweep"));
    }
    let fit = g1_knapp(&deltas, d, p, q, &grid)?;
    let inputs = json!({ "d": d, "p": p, "q": q, "deltas": deltas, "grid": grid });
    sweep_outcome(inputs, fit, &["g1-knapp-construction"], "g1_knapp")
}

fn tail(l: &Layers, a: &TailArgs) -> Result<Outcome> {
    let d = l.get("d", a.d, 4)?;
    let p_prime = l.get("p_prime", a.p_prime, 3.0)?;
    let radii = match l.opt::<Vec<f64>>("radii", a.radii.clone())? {
        Some(r) => r,
        None => crate::sharpness::default_radii(l.get("count", a.count, 5)?),
    };
    let report = radial_tail(d, p_prime, &radii)?;
    let inputs = json!({ "d": d, "p_prime": p_prime, "radii": radii });
    Outcome::new(inputs, report, &["sigma-hat-integrability-threshold"])
}

fn probe(l: &Layers, a: &ProbeArgs) -> Result<Outcome> {
    let op = l.get("op", a.op.clone(), "t".to_string())?;
    let p = l.get("p", a.p, if op == "remark" { 6.0 } else { 2.0 })?;
    let q = l.get("q", a.q, 2.0)?;
    let trials = l.get("trials", a.trials, 10)?;
    let seed = l.get("seed", a.seed, 0)?;
    let inputs = json!({ "op": op, "p": p, "q": q, "trials": trials, "seed": seed });
    match op.as_str() {
        "t" => {
            let o = ProbeOperator::T {
                a: l.get("a", a.a, 0.75)?,
                b: l.get("b", a.b, 0.25)?,
            };
            Outcome::new(inputs, norm_probe(o, p, q, trials, seed)?, &["weighted-hardy-operator-bounds"])
        }
        "s" => {
            let o = ProbeOperator::S {
                a: l.get("a", a.a, 0.25)?,
                b: l.get("b", a.b, 0.5)?,
                ell: l.get("ell", a.ell, 1.0)?,
            };
            Outcome::new(inputs, norm_probe(o, p, q, trials, seed)?, &["weighted-truncated-operator-bounds"])
        }
        "r" => {
            let o = ProbeOperator::R {
                alpha: l.get("alpha", a.alpha, 1.0 / 3.0)?,
                beta: l.get("beta", a.beta, 1.0 / 3.0)?,
                radius: l.get("radius", a.radius, 250.0)?,
            };
            Outcome::new(inputs, norm_probe(o, p, q, trials, seed)?, &["two-dimensional-indicator-operator-bounds"])
        }
        "remark" => {
            let params = WeightedOpParams::new(
                l.get("a", a.a, 5.0 / 6.0)?,
                l.get("b", a.b, 0.5)?,
                l.get("ell", a.ell, 1.0)?,
            )?;
            let taus = l.get("taus", a.taus.clone(), vec![1e-5, 1e-10, 1e-20, 1e-40, 1e-80, 1e-160])?;
            let eps = l.get("eps", a.eps, 0.1)?;
            let report = remark_family_probe(params, p, q, eps, &taus)?;
            Outcome::new(inputs, report, &["logarithmic-counterexample-family"])
        }
        other => Err(invalid(format!("unknown operator {other}; expected t, s, r or remark"))),
    }
}

fn oscillatory(l: &Layers, a: &OscArgs) -> Result<Outcome> {
    let gamma = l.get("gamma", a.gamma, 0.5)?;
    let lo = l.get("a", a.a, 1.0)?;
    let lambda = l.get("lambda", a.lambda, 1.0)?;
    let (v, ratio, branch) = oscillatory_bound_ratio(gamma, lo, lambda)?;
    let inputs = json!({ "gamma": gamma, "a": lo, "lambda": lambda });
    let result = json!({ "value": complex(v), "bound_ratio": ratio, "branch": branch });
    Outcome::new(inputs, result, &["oscillatory-tail-bound"])
}

fn riesz(l: &Layers, a: &RieszArgs) -> Result<Outcome> {
    let params = params(l, &a.dims, 4, 2)?;
    let p = l.get("p", a.p, 1.5)?;
    let q = l.get("q", a.q, 2.0)?;
    let v = classify(params, p, q)?;
    let mut result = json!({
        "status": v.label,
        "citations": v.citations,
        "landmarks": Landmarks::new(params),
    });
    let mut out = Vec::new();
    if let Some(n) = l.opt("diagram", a.diagram)? {
        let dg = diagram(params, n)?;
        let statuses = [
            RegionStatus::BoundedSufficientI,
            RegionStatus::BoundedSufficientII,
            RegionStatus::BoundedSufficientIII,
            RegionStatus::BoundedSteinTomas,
            RegionStatus::UnboundedNecessary,
            RegionStatus::Open,
        ];
        let counts: Map<String, Value> = statuses
            .iter()
            .map(|s| (s.label().to_string(), json!(dg.count(*s))))
            .collect();
        result["diagram"] = json!({ "resolution": n, "counts": counts });
        out.push(("riesz_diagram.svg".to_string(), dg.to_svg()));
    }
    let inputs = json!({ "params": params, "p": p, "q": q });
    let mut o = Outcome::new(inputs, result, &["necessary-conditions", "sufficient-conditions", "stein-tomas-interpolation"])?;
    o.artifacts = out;
    Ok(o)
}

fn dispatch(cmd: &Command, l: &Layers) -> Result<Outcome> {
    match cmd {
        Command::BesselCheck(a) => bessel_check(l, a),
        Command::Extend(a) => extend(l, a),
        Command::Transform(a) => transform(l, a),
        Command::Norm(a) => norm(l, a),
        Command::Maximize(a) => maximize_cmd(l, a),
        Command::Duality(a) => duality(l, a),
        Command::KnappSweep(a) => knapp_sweep(l, a),
        Command::G1Knapp(a) => g1(l, a),
        Command::RadialTail(a) => tail(l, a),
        Command::OpProbe(a) => probe(l, a),
        Command::Oscillatory(a) => oscillatory(l, a),
        Command::Riesz(a) => riesz(l, a),
    }
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::BesselCheck(_) => "bessel-check",
        Command::Extend(_) => "extend",
        Command::Transform(_) => "transform",
        Command::Norm(_) => "norm",
        Command::Maximize(_) => "maximize",
        Command::Duality(_) => "duality",
        Command::KnappSweep(_) => "knapp-sweep",
        Command::G1Knapp(_) => "g1-knapp",
        Command::RadialTail(_) => "radial-tail",
        Command::OpProbe(_) => "op-probe",
        Command::Oscillatory(_) => "oscillatory",
        Command::Riesz(_) => "riesz",
    }
}

fn jobs(cli: &Cli, l: &Layers) -> Result<usize> {
    let env = match std::env::var(JOBS_ENV) {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| invalid(format!("{JOBS_ENV} must be a positive integer, got {v}")))?),
        Err(_) => None,
    };
    let n = match cli.jobs.or(env) {
        Some(n) => n,
        None => l.get("jobs", None, std::thread::available_parallelism().map_or(1, |n| n.get()))?,
    };
    if n == 0 {
        return Err(invalid("jobs must be at least 1"));
    }
    Ok(n)
}

fn exit_code(e: &LabError) -> i32 {
    match e {
        LabError::InvalidArgument(_) | LabError::Divergent(_) => 2,
        LabError::Escalated(_) => 3,
        _ => 1,
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let name = command_name(&cli.command);
    let layers = Layers::load(cli.config.as_deref(), name)?;
    let strict = layers.flag("strict", cli.strict)?;
    let out_dir = layers.opt::<PathBuf>("out", cli.out.clone())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs(cli, &layers)?)
        .build()
        .map_err(|e| LabError::Numerical(format!("thread pool: {e}")))?;
    let outcome = pool.install(|| dispatch(&cli.command, &layers))?;
    if strict && !outcome.warnings.is_empty() {
        let msg: Vec<String> = outcome.warnings.iter().map(|w| w.to_string()).collect();
        return Err(LabError::Escalated(msg.join("; ")));
    }
    let mut doc = json!({
        "command": name,
        "citations": outcome.citations,
        "inputs": outcome.inputs,
        "result": outcome.result,
        "warnings": outcome.warnings,
    });
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(&dir)?;
        let mut names = Vec::new();
        for (file, body) in &outcome.artifacts {
            std::fs::write(dir.join(file), body)?;
            names.push(file.clone());
        }
        names.push(format!("{name}.json"));
        doc["artifacts"] = json!(names);
        std::fs::write(dir.join(format!("{name}.json")), serde_json::to_string_pretty(&doc)? + "\n")?;
    }
    writeln!(stdout, "{}", serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}

/// Parse `argv` (including the program name), run, and return the exit status.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut argv = vec!["restrict-lab"];
        argv.extend_from_slice(args);
        let code = run(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn riesz_verdict() {
        let (code, out, _) = call(&["riesz", "--d", "4", "--k", "2", "--p", "1.5", "--q", "2"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["result"]["status"], "bounded-sufficient-i");
        assert!(!v["citations"].as_array().unwrap().is_empty());
    }

    #[test]
    fn extend_constant_at_origin() {
        let (code, out, _) = call(&["extend", "--d", "4", "--k", "2", "--const", "--at", "0", "0"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        let re = v["result"]["value"]["re"].as_f64().unwrap();
        assert!((re - 19.7392).abs() < 1e-4, "{re}");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(call(&["riesz", "--bogus"]).0, 2);
        assert_eq!(call(&["riesz", "--d", "4", "--k", "1"]).0, 2);
        assert_eq!(call(&["frobnicate"]).0, 2);
        assert_eq!(call(&["--help"]).0, 0);
        // truncating below the requested shells raises a warning
        let args = ["knapp-sweep", "--deltas", "0.2,0.3", "--z-limit", "5"];
        assert_eq!(call(&args).0, 0);
        let mut strict = args.to_vec();
        strict.push("--strict");
        assert_eq!(call(&strict).0, 3);
    }

    #[test]
    fn config_precedence() {
        let dir = std::env::temp_dir().join(format!("restrict-lab-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let cfg = dir.join("c.json");
        std::fs::write(&cfg, r#"{"p": 2.0, "q": 2.0, "riesz": {"p": 1.25}}"#).unwrap();
        let c = cfg.to_str().unwrap();
        let (_, out, _) = call(&["riesz", "--config", c]);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["inputs"]["p"], 1.25);
        let (_, out, _) = call(&["riesz", "--config", c, "--p", "1.5"]);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["inputs"]["p"], 1.5);
        assert_eq!(v["result"]["status"], "bounded-sufficient-i");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
