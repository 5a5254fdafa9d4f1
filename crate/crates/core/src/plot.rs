//! Minimal self-contained SVG 1.1 plots.

use std::fmt::Write as _;

use crate::transforms::ExtensionField;

const W: f64 = 560.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;

fn header(s: &mut String, title: &str) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{x}" y="20" font-size="13" text-anchor="middle">{}</text>"#,
        escape(title),
        x = W / 2.0
    );
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(xs: &[f64], ys: &[f64]) -> Self {
        let span = |v: &[f64]| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, lo + 0.5)
            }
        };
        let (x0, x1) = span(xs);
        let (y0, y1) = span(ys);
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * PAD)
    }

    fn axes(&self, s: &mut String, xlabel: &str, ylabel: &str) {
        let _ = writeln!(
            s,
            r#"<rect x="{PAD}" y="{PAD}" width="{w}" height="{h}" fill="none" stroke="black"/>"#,
            w = W - 2.0 * PAD,
            h = H - 2.0 * PAD
        );
        for (v, anchor_x) in [(self.x0, PAD), (self.x1, W - PAD)] {
            let _ = writeln!(
                s,
                r#"<text x="{anchor_x}" y="{y}" font-size="10" text-anchor="middle">{v:.3}</text>"#,
                y = H - PAD + 14.0
            );
        }
        for (v, anchor_y) in [(self.y0, H - PAD), (self.y1, PAD)] {
            let _ = writeln!(
                s,
                r#"<text x="{x}" y="{anchor_y}" font-size="10" text-anchor="end">{v:.3}</text>"#,
                x = PAD - 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" font-size="12" text-anchor="middle">{}</text>"#,
            escape(xlabel),
            x = W / 2.0,
            y = H - 14.0
        );
        let _ = writeln!(
            s,
            r#"<text x="14" y="{y}" font-size="12" transform="rotate(-90 14 {y})" text-anchor="middle">{}</text>"#,
            escape(ylabel),
            y = H / 2.0
        );
    }
}

fn polyline(s: &mut String, fr: &Frame, xs: &[f64], ys: &[f64], stroke: &str) {
    let pts: Vec<String> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| format!("{:.2},{:.2}", fr.px(x), fr.py(y)))
        .collect();
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{stroke}"/>"#, pts.join(" "));
}

/// A curve `y(x)` with linear axes.
pub fn line_svg(title: &str, xlabel: &str, ylabel: &str, xs: &[f64], ys: &[f64]) -> String {
    let mut s = String::new();
    header(&mut s, title);
    let fr = Frame::fit(xs, ys);
    fr.axes(&mut s, xlabel, ylabel);
    polyline(&mut s, &fr, xs, ys, "#1f4e9c");
    s.push_str("</svg>\n");
    s
}

/// Points in log-log coordinates with an optional fitted line
/// `log y = slope log x + intercept`.
pub fn loglog_svg(title: &str, xs: &[f64], ys: &[f64], fit: Option<(f64, f64)>) -> String {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mut all_y = ly.clone();
    let line = fit.map(|(m, b)| {
        let ends = [lx[0], lx[lx.len() - 1]];
        let vals = [m * ends[0] + b, m * ends[1] + b];
        all_y.extend(vals);
        (ends, vals)
    });
    let mut s = String::new();
    header(&mut s, title);
    let fr = Frame::fit(&lx, &all_y);
    fr.axes(&mut s, "log x", "log y");
    for (&x, &y) in lx.iter().zip(&ly) {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#1f4e9c"/>"##,
            fr.px(x),
            fr.py(y)
        );
    }
    if let Some((ends, vals)) = line {
        polyline(&mut s, &fr, &ends, &vals, "#c03030");
    }
    s.push_str("</svg>\n");
    s
}

/// `|F hat sigma|` on the `(|y|, |z|)` grid as a grey-scale raster.
pub fn heatmap_svg(title: &str, field: &ExtensionField) -> String {
    let (ny, nz) = (field.eta_nodes.len(), field.zeta_nodes.len());
    let mags: Vec<f64> = field.values.iter().map(|v| v.norm()).collect();
    let top = mags.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut s = String::new();
    header(&mut s, title);
    let (cw, ch) = ((W - 2.0 * PAD) / nz.max(1) as f64, (H - 2.0 * PAD) / ny.max(1) as f64);
    for i in 0..ny {
        for j in 0..nz {
            let level = (255.0 * (1.0 - mags[i * nz + j] / top)).round() as u8;
            let _ = writeln!(
                s,
                r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#{level:02x}{level:02x}{level:02x}"/>"##,
                PAD + j as f64 * cw,
                H - PAD - (i + 1) as f64 * ch,
                cw + 0.01,
                ch + 0.01
            );
        }
    }
    let ends = |v: &[f64]| (v.first().copied().unwrap_or(0.0), v.last().copied().unwrap_or(0.0));
    let (z0, z1) = ends(&field.zeta_nodes);
    let (y0, y1) = ends(&field.eta_nodes);
    let fr = Frame { x0: z0, x1: z1, y0, y1 };
    fr.axes(&mut s, "|z|", "|y|");
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loglog_contains_points_and_line() {
        let s = loglog_svg("q", &[0.01, 0.1, 1.0], &[1.0, 2.0, 4.0], Some((0.3, 1.4)));
        assert_eq!(s.matches("<circle").count(), 3);
        assert!(s.contains("<polyline") && s.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn titles_are_escaped() {
        let s = line_svg("a<b", "x", "y", &[0.0, 1.0], &[1.0, 1.0]);
        assert!(s.contains("a&lt;b"));
    }
}
