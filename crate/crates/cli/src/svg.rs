//! Minimal static SVG plots. Every plot is written next to a CSV holding the
//! same numbers.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
/// Longer series are thinned to this many points.
const MAX_LINE_POINTS: usize = 1000;

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>) -> Axis {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Axis { lo: 0.0, hi: 1.0 };
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Axis {
            lo: lo - pad,
            hi: hi + pad,
        }
    }

    fn frac(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn py(axis: &Axis, v: f64) -> f64 {
    HEIGHT - MARGIN - axis.frac(v) * (HEIGHT - 2.0 * MARGIN)
}

fn px(axis: &Axis, v: f64) -> f64 {
    MARGIN + axis.frac(v) * (WIDTH - 2.0 * MARGIN)
}

fn header(out: &mut String, title: &str, xlabel: &str, ylabel: &str, y: &Axis) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        r#"<path d="M{x0:.1},{y0:.1} L{x0:.1},{y1:.1} L{x1:.1},{y1:.1}" fill="none" stroke="black"/>"#
    );
    for v in [y.lo, (y.lo + y.hi) / 2.0, y.hi] {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            py(y, v) + 4.0,
            tick(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Strip plot: one column per group, points spread deterministically within it.
pub fn group_scatter(title: &str, ylabel: &str, groups: &[(&str, &[f64])]) -> String {
    let y = Axis::fit(groups.iter().flat_map(|(_, v)| v.iter().copied()));
    let mut out = String::new();
    header(&mut out, title, "group", ylabel, &y);
    let slot = (WIDTH - 2.0 * MARGIN) / groups.len().max(1) as f64;
    for (g, (name, values)) in groups.iter().enumerate() {
        let centre = MARGIN + slot * (g as f64 + 0.5);
        let color = COLORS[g % COLORS.len()];
        let n = values.len().max(1) as f64;
        for (i, &v) in values.iter().enumerate() {
            let spread = (i as f64 + 0.5) / n - 0.5;
            let _ = writeln!(
                out,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}" fill-opacity="0.7"/>"#,
                centre + spread * slot * 0.6,
                py(&y, v)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{centre:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            HEIGHT - MARGIN + 16.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Line plot with point markers.
pub fn line(title: &str, xlabel: &str, ylabel: &str, points: &[(f64, f64)]) -> String {
    let stride = points.len().div_ceil(MAX_LINE_POINTS).max(1);
    let shown: Vec<(f64, f64)> = points.iter().copied().step_by(stride).collect();
    let x = Axis::fit(shown.iter().map(|p| p.0));
    let y = Axis::fit(shown.iter().map(|p| p.1));
    let mut out = String::new();
    header(&mut out, title, xlabel, ylabel, &y);
    for v in [x.lo, x.hi] {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            px(&x, v),
            HEIGHT - MARGIN + 16.0,
            tick(v)
        );
    }
    let path: Vec<String> = shown
        .iter()
        .map(|&(a, b)| format!("{:.1},{:.1}", px(&x, a), py(&y, b)))
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
        path.join(" "),
        COLORS[0]
    );
    if shown.len() <= 50 {
        for &(a, b) in &shown {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{}"/>"#,
                px(&x, a),
                py(&y, b),
                COLORS[0]
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
