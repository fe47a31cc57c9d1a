//! Bare-bones SVG line and whisker plots.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const ML: f64 = 70.0;
const MR: f64 = 20.0;
const MT: f64 = 40.0;
const MB: f64 = 55.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub struct Series {
    pub label: String,
    /// `(x, y, lo, hi)`; `lo`/`hi` may be NaN for no band.
    pub points: Vec<(f64, f64, f64, f64)>,
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit<'a>(values: impl Iterator<Item = &'a (f64, f64, f64, f64)>) -> Self {
        let mut x = (f64::INFINITY, f64::NEG_INFINITY);
        let mut y = (f64::INFINITY, f64::NEG_INFINITY);
        for &(px, py, lo, hi) in values {
            x = (x.0.min(px), x.1.max(px));
            for v in [py, lo, hi] {
                if v.is_finite() {
                    y = (y.0.min(v), y.1.max(v));
                }
            }
        }
        let pad = |r: (f64, f64)| {
            if !r.0.is_finite() {
                (0.0, 1.0)
            } else if r.1 - r.0 < 1e-12 {
                (r.0 - 0.5, r.1 + 0.5)
            } else {
                let p = 0.05 * (r.1 - r.0);
                (r.0 - p, r.1 + p)
            }
        };
        Self { x: pad(x), y: pad(y) }
    }

    fn px(&self, v: f64) -> f64 {
        ML + (v - self.x.0) / (self.x.1 - self.x.0) * (W - ML - MR)
    }

    fn py(&self, v: f64) -> f64 {
        H - MB - (v - self.y.0) / (self.y.1 - self.y.0) * (H - MT - MB)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(out: &mut String, f: &Frame, title: &str, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let (x0, x1, y0, y1) = (ML, W - MR, H - MB, MT);
    let _ = writeln!(out, r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" stroke="black" fill="none"/>"#);
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let xv = f.x.0 + t * (f.x.1 - f.x.0);
        let yv = f.y.0 + t * (f.y.1 - f.y.0);
        let (xp, yp) = (f.px(xv), f.py(yv));
        let _ = writeln!(out, r#"<line x1="{xp:.2}" y1="{y0}" x2="{xp:.2}" y2="{:.2}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(out, r#"<text x="{xp:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, y0 + 18.0, tick(xv));
        let _ = writeln!(out, r#"<line x1="{:.2}" y1="{yp:.2}" x2="{x0}" y2="{yp:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, yp + 4.0, tick(yv));
    }
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 12.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn legend(out: &mut String, labels: &[&str]) {
    for (k, l) in labels.iter().enumerate() {
        let y = MT + 8.0 + 16.0 * k as f64;
        let c = COLORS[k % COLORS.len()];
        let _ = writeln!(out, r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{c}" stroke-width="2"/>"#, W - 190.0, W - 170.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, W - 165.0, y + 4.0, escape(l));
    }
}

/// Lines with shaded pointwise bands.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let f = Frame::fit(series.iter().flat_map(|s| s.points.iter()));
    let mut out = String::new();
    axes(&mut out, &f, title, xlabel, ylabel);
    for (k, s) in series.iter().enumerate() {
        let c = COLORS[k % COLORS.len()];
        let banded: Vec<_> = s.points.iter().filter(|p| p.2.is_finite() && p.3.is_finite()).collect();
        if banded.len() >= 2 {
            let mut d = String::new();
            for (i, p) in banded.iter().enumerate() {
                let _ = write!(d, "{}{:.2} {:.2} ", if i == 0 { "M" } else { "L" }, f.px(p.0), f.py(p.3));
            }
            for p in banded.iter().rev() {
                let _ = write!(d, "L{:.2} {:.2} ", f.px(p.0), f.py(p.2));
            }
            let _ = writeln!(out, r#"<path d="{}Z" fill="{c}" fill-opacity="0.15" stroke="none"/>"#, d);
        }
        let mut d = String::new();
        for (i, p) in s.points.iter().enumerate() {
            let _ = write!(d, "{}{:.2} {:.2} ", if i == 0 { "M" } else { "L" }, f.px(p.0), f.py(p.1));
        }
        let _ = writeln!(out, r#"<path d="{}" fill="none" stroke="{c}" stroke-width="2"/>"#, d.trim_end());
    }
    let labels: Vec<&str> = series.iter().map(|s| s.label.as_str()).collect();
    legend(&mut out, &labels);
    out.push_str("</svg>\n");
    out
}

/// Points with vertical interval whiskers.
pub fn whisker_plot(title: &str, xlabel: &str, ylabel: &str, points: &[(f64, f64, f64, f64)]) -> String {
    let f = Frame::fit(points.iter());
    let mut out = String::new();
    axes(&mut out, &f, title, xlabel, ylabel);
    let c = COLORS[0];
    for &(x, y, lo, hi) in points {
        let xp = f.px(x);
        if lo.is_finite() && hi.is_finite() {
            let (a, b) = (f.py(lo), f.py(hi));
            let _ = writeln!(out, r#"<line x1="{xp:.2}" y1="{a:.2}" x2="{xp:.2}" y2="{b:.2}" stroke="{c}"/>"#);
            for yy in [a, b] {
                let _ = writeln!(out, r#"<line x1="{:.2}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="{c}"/>"#, xp - 5.0, xp + 5.0);
            }
        }
        let _ = writeln!(out, r#"<circle cx="{xp:.2}" cy="{:.2}" r="3.5" fill="{c}"/>"#, f.py(y));
    }
    out.push_str("</svg>\n");
    out
}
