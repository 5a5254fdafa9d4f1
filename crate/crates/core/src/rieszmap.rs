//! Classification of exponent pairs `(1/p, 1/q)` for block-symmetric
//! restriction estimates, and the Riesz diagram built from it.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::symgeom::SymmetryParams;

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionStatus {
    BoundedSufficientI,
    BoundedSufficientII,
    BoundedSufficientIII,
    BoundedSteinTomas,
    UnboundedNecessary,
    Open,
}

impl RegionStatus {
    pub fn label(self) -> &'static str {
        match self {
            RegionStatus::BoundedSufficientI => "bounded-sufficient-i",
            RegionStatus::BoundedSufficientII => "bounded-sufficient-ii",
            RegionStatus::BoundedSufficientIII => "bounded-sufficient-iii",
            RegionStatus::BoundedSteinTomas => "bounded-stein-tomas",
            RegionStatus::UnboundedNecessary => "unbounded-necessary",
            RegionStatus::Open => "open",
        }
    }

    pub fn is_bounded(self) -> bool {
        !matches!(self, RegionStatus::UnboundedNecessary | RegionStatus::Open)
    }

    fn colour(self) -> &'static str {
        match self {
            RegionStatus::BoundedSufficientI | RegionStatus::BoundedSufficientII | RegionStatus::BoundedSufficientIII => {
                "#f5e663"
            }
            RegionStatus::BoundedSteinTomas => "#f0a030",
            RegionStatus::UnboundedNecessary => "#d8d8d8",
            RegionStatus::Open => "#e04040",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionVerdict {
    pub status: RegionStatus,
    pub label: &'static str,
    /// Conditions that fired, as written inequalities.
    pub citations: Vec<String>,
}

/// Breakpoints of the diagram on the `1/p` axis (and `1/q` for the last).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Landmarks {
    pub restriction_conjecture: f64,
    pub symmetric_stein_tomas: f64,
    pub lorentz_endpoint: f64,
    pub stein_tomas: f64,
    /// Ordinate of the Lorentz endpoint, `(m-1)/(2m)`.
    pub lorentz_ordinate: f64,
}

impl Landmarks {
    pub fn new(params: SymmetryParams) -> Self {
        let (d, m) = (params.d as f64, params.m as f64);
        Self {
            restriction_conjecture: (d + 1.0) / (2.0 * d),
            symmetric_stein_tomas: (d + m + 2.0) / (2.0 * (d + m)),
            lorentz_endpoint: (m + 1.0) / (2.0 * m),
            stein_tomas: (d + 3.0) / (2.0 * d + 2.0),
            lorentz_ordinate: (m - 1.0) / (2.0 * m),
        }
    }

    pub fn abscissas(&self) -> [f64; 4] {
        [
            self.restriction_conjecture,
            self.symmetric_stein_tomas,
            self.lorentz_endpoint,
            self.stein_tomas,
        ]
    }
}

fn le(a: f64, b: f64) -> bool {
    a <= b + EPS
}

fn lt(a: f64, b: f64) -> bool {
    a < b - EPS
}

fn eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= EPS
}

fn inv(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        1.0 / x
    }
}

/// Shared numerology of the necessary and sufficient conditions.
struct Point {
    ip: f64,
    iq: f64,
    d: f64,
    m: f64,
    lm: Landmarks,
}

impl Point {
    fn new(params: SymmetryParams, ip: f64, iq: f64) -> Self {
        Self {
            ip,
            iq,
            d: params.d as f64,
            m: params.m as f64,
            lm: Landmarks::new(params),
        }
    }

    fn mixed_line(&self) -> bool {
        le(self.d + 1.0, (self.d + self.m) * self.ip + (self.d - self.m) * self.iq)
    }

    fn branch_ii(&self) -> bool {
        eq(self.ip, self.lm.lorentz_endpoint) && lt(1.0, self.ip + self.iq)
    }

    fn branch_iii(&self) -> bool {
        lt(self.lm.lorentz_endpoint, self.ip) && le(1.0, self.ip + self.iq)
    }

    /// Which necessary branches hold; all false means no estimate.
    fn necessary(&self) -> [bool; 3] {
        let i = lt(self.lm.restriction_conjecture, self.ip)
            && lt(self.ip, self.lm.lorentz_endpoint)
            && self.mixed_line();
        [i, self.branch_ii(), self.branch_iii()]
    }

    fn sufficient(&self) -> [bool; 3] {
        let i = le(self.lm.symmetric_stein_tomas, self.ip)
            && lt(self.ip, self.lm.lorentz_endpoint)
            && self.mixed_line();
        [i, self.branch_ii(), self.branch_iii()]
    }

    /// Interpolation of `(1/p_d, 1/2)` with `(1, 0)`, then `q` decreased.
    fn stein_tomas(&self) -> bool {
        le(self.lm.stein_tomas, self.ip) && le((1.0 - self.ip) * (self.d + 1.0) / (self.d - 1.0), self.iq)
    }
}

const NECESSARY: [&str; 3] = [
    "necessary-i: (d+1)/(2d) < 1/p < (m+1)/(2m) and (d+m)/p + (d-m)/q >= d+1",
    "necessary-ii: 1/p = (m+1)/(2m) and 1/p + 1/q > 1",
    "necessary-iii: 1/p > (m+1)/(2m) and 1/p + 1/q >= 1",
];

const SUFFICIENT: [&str; 3] = [
    "sufficient-i: (d+m+2)/(2(d+m)) <= 1/p < (m+1)/(2m) and (d+m)/p + (d-m)/q >= d+1",
    "sufficient-ii: 1/p = (m+1)/(2m) and 1/p + 1/q > 1",
    "sufficient-iii: 1/p > (m+1)/(2m) and 1/p + 1/q >= 1",
];

const STEIN_TOMAS: &str = "stein-tomas: 1/p >= (d+3)/(2d+2) and 1/q >= (d+1)(1-1/p)/(d-1)";

fn verdict_at(params: SymmetryParams, ip: f64, iq: f64) -> RegionVerdict {
    let pt = Point::new(params, ip, iq);
    let nec = pt.necessary();
    let (status, citations) = if !nec.iter().any(|&b| b) {
        let c = NECESSARY.iter().map(|s| format!("violates {s}")).collect();
        (RegionStatus::UnboundedNecessary, c)
    } else {
        let suf = pt.sufficient();
        let statuses = [
            RegionStatus::BoundedSufficientI,
            RegionStatus::BoundedSufficientII,
            RegionStatus::BoundedSufficientIII,
        ];
        match suf.iter().position(|&b| b) {
            Some(i) => (statuses[i], vec![SUFFICIENT[i].to_string()]),
            None if pt.stein_tomas() => (RegionStatus::BoundedSteinTomas, vec![STEIN_TOMAS.to_string()]),
            None => {
                let c = NECESSARY
                    .iter()
                    .zip(nec)
                    .filter(|(_, b)| *b)
                    .map(|(s, _)| format!("satisfies {s}"))
                    .collect();
                (RegionStatus::Open, c)
            }
        }
    };
    RegionVerdict {
        status,
        label: status.label(),
        citations,
    }
}

/// Classify `(p, q)` with `1 <= p, q <= inf`; exact ties follow the
/// strict and non-strict inequalities as stated.
pub fn classify(params: SymmetryParams, p: f64, q: f64) -> Result<RegionVerdict> {
    params.require_theorem_range()?;
    for (name, v) in [("p", p), ("q", q)] {
        if !(v >= 1.0) {
            return Err(crate::error::invalid(format!("exponent {name} must lie in [1, inf], got {v}")));
        }
    }
    Ok(verdict_at(params, inv(p), inv(q)))
}

/// Whether some sufficient condition and the failure of every necessary
/// condition hold at once; never expected.
pub fn verdicts_conflict(params: SymmetryParams, ip: f64, iq: f64) -> bool {
    let pt = Point::new(params, ip, iq);
    let bounded = pt.sufficient().iter().any(|&b| b) || pt.stein_tomas();
    let unbounded = !pt.necessary().iter().any(|&b| b);
    bounded && unbounded
}

/// Verdicts on the lattice `(i/(n-1), j/(n-1))` of `(1/p, 1/q)`,
/// row-major in `1/q`.
#[derive(Debug, Clone, Serialize)]
pub struct RieszDiagram {
    pub params: SymmetryParams,
    pub resolution: usize,
    pub landmarks: Landmarks,
    pub cells: Vec<RegionStatus>,
}

pub fn diagram(params: SymmetryParams, resolution: usize) -> Result<RieszDiagram> {
    params.require_theorem_range()?;
    if resolution < 32 {
        return Err(crate::error::invalid(format!("diagram resolution must be at least 32, got {resolution}")));
    }
    let h = 1.0 / (resolution - 1) as f64;
    let cells = (0..resolution * resolution)
        .into_par_iter()
        .map(|c| verdict_at(params, (c % resolution) as f64 * h, (c / resolution) as f64 * h).status)
        .collect();
    Ok(RieszDiagram {
        params,
        resolution,
        landmarks: Landmarks::new(params),
        cells,
    })
}

impl RieszDiagram {
    pub fn at(&self, i_p: usize, i_q: usize) -> RegionStatus {
        self.cells[i_q * self.resolution + i_p]
    }

    pub fn count(&self, status: RegionStatus) -> usize {
        self.cells.iter().filter(|&&s| s == status).count()
    }

    /// Self-contained SVG 1.1 with the raster, axes and landmark lines.
    pub fn to_svg(&self) -> String {
        let (size, pad) = (480.0, 60.0);
        let n = self.resolution;
        let cell = size / n as f64;
        let mut s = String::new();
        let total = size + 2.0 * pad;
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        for iq in 0..n {
            for ip in 0..n {
                let x = pad + ip as f64 * cell;
                let y = pad + size - (iq + 1) as f64 * cell;
                let _ = writeln!(
                    s,
                    r#"<rect x="{x:.3}" y="{y:.3}" width="{w:.3}" height="{w:.3}" fill="{}"/>"#,
                    self.at(ip, iq).colour(),
                    w = cell + 0.01
                );
            }
        }
        let lm = &self.landmarks;
        let names = ["(d+1)/(2d)", "(d+m+2)/(2(d+m))", "(m+1)/(2m)", "(d+3)/(2d+2)"];
        for (k, (v, name)) in lm.abscissas().iter().zip(names).enumerate() {
            let x = pad + v * size;
            let _ = writeln!(
                s,
                r#"<line x1="{x:.3}" y1="{pad}" x2="{x:.3}" y2="{b}" stroke="black" stroke-dasharray="2,3"/>"#,
                b = pad + size
            );
            let _ = writeln!(
                s,
                r#"<text x="{x:.3}" y="{y}" font-size="10" text-anchor="middle">{name} = {v:.4}</text>"#,
                y = pad + size + 14.0 + 12.0 * k as f64
            );
        }
        let y = pad + size * (1.0 - lm.lorentz_ordinate);
        let _ = writeln!(
            s,
            r#"<line x1="{pad}" y1="{y:.3}" x2="{r}" y2="{y:.3}" stroke="black" stroke-dasharray="2,3"/>"#,
            r = pad + size
        );
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y:.3}" font-size="10" text-anchor="end">(m-1)/(2m)</text>"#,
            x = pad - 4.0
        );
        let _ = writeln!(
            s,
            r#"<rect x="{pad}" y="{pad}" width="{size}" height="{size}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(s, r#"<text x="{x}" y="{y}" font-size="12">1/p</text>"#, x = pad + size + 6.0, y = pad + size);
        let _ = writeln!(s, r#"<text x="{pad}" y="{y}" font-size="12">1/q</text>"#, y = pad - 6.0);
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="20" font-size="12" text-anchor="middle">d = {}, k = {}, m = {}</text>"#,
            self.params.d,
            self.params.k,
            self.params.m,
            x = total / 2.0
        );
        s.push_str("</svg>\n");
        s
    }
}

/// `p'` at the diagonal endpoint `p = 2(d+m)/(d+m+2)`.
pub fn diagonal_endpoint_dual(params: SymmetryParams) -> f64 {
    let dm = (params.d + params.m) as f64;
    2.0 * dm / (dm - 2.0)
}
