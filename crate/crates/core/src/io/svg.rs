//! Static SVG scatter and line plots.
//!
//! Output depends only on the input values: coordinates are printed with a
//! fixed number of decimals and elements are emitted in input order.

use std::fmt::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Style {
    pub width: f64,
    pub height: f64,
    pub radius: f64,
    pub color: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

impl Default for Style {
    fn default() -> Self {
        Style {
            width: 640.0,
            height: 480.0,
            radius: 0.8,
            color: "#1f3a93".into(),
            title: String::new(),
            x_label: "x".into(),
            y_label: "y".into(),
        }
    }
}

impl Style {
    pub fn labels(mut self, title: &str, x: &str, y: &str) -> Self {
        self.title = title.into();
        self.x_label = x.into();
        self.y_label = y.into();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    Dots,
    Line,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub points: Vec<(f64, f64)>,
    pub color: String,
    pub mark: Mark,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub series: Vec<Series>,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 28.0;
const MARGIN_BOTTOM: f64 = 44.0;

/// Ticks at 1, 2 or 5 times a power of ten, inside `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> (Vec<f64>, usize) {
    let span = hi - lo;
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 7.0)
        .unwrap_or(10.0 * mag);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    let values = (first..=last).map(|k| k as f64 * step).collect();
    (values, decimals)
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
        let pad = 0.5 * (1.0 + lo.abs());
        (lo - pad, hi + pad)
    } else {
        let pad = 0.02 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn label(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    // avoid "-0" and "-0.0"
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn check(panels: &[Panel]) -> Result<()> {
    let mut any = false;
    for panel in panels {
        for s in &panel.series {
            for (i, &(x, y)) in s.points.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::NonFinite { row: i, col: 0 });
                }
                if !y.is_finite() {
                    return Err(Error::NonFinite { row: i, col: 1 });
                }
                any = true;
            }
        }
    }
    if !any {
        return Err(Error::Empty("plot points"));
    }
    Ok(())
}

fn draw_panel(out: &mut String, panel: &Panel, x0: f64, width: f64, height: f64, radius: f64) {
    let pts = || panel.series.iter().flat_map(|s| s.points.iter());
    let (xl, xh) = range(pts().map(|p| p.0));
    let (yl, yh) = range(pts().map(|p| p.1));
    let left = x0 + MARGIN_LEFT;
    let right = x0 + width - MARGIN_RIGHT;
    let top = MARGIN_TOP;
    let bottom = height - MARGIN_BOTTOM;
    let sx = |x: f64| left + (x - xl) / (xh - xl) * (right - left);
    let sy = |y: f64| bottom - (y - yl) / (yh - yl) * (bottom - top);

    let _ = writeln!(
        out,
        r##"<rect x="{left:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#000" stroke-width="0.8"/>"##,
        right - left,
        bottom - top
    );
    let (xt, xd) = ticks(xl, xh);
    for t in xt {
        let x = sx(t);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000" stroke-width="0.8"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            bottom + 4.0,
            bottom + 16.0,
            label(t, xd)
        );
    }
    let (yt, yd) = ticks(yl, yh);
    for t in yt {
        let y = sy(t);
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{left:.2}" y2="{y:.2}" stroke="#000" stroke-width="0.8"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            left - 4.0,
            left - 6.0,
            y + 4.0,
            label(t, yd)
        );
    }
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
        (left + right) / 2.0,
        height - 8.0,
        escape(&panel.x_label)
    );
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{}</text>"##,
        x0 + 16.0,
        (top + bottom) / 2.0,
        x0 + 16.0,
        (top + bottom) / 2.0,
        escape(&panel.y_label)
    );
    if !panel.title.is_empty() {
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="18" text-anchor="middle">{}</text>"##,
            (left + right) / 2.0,
            escape(&panel.title)
        );
    }
    for s in &panel.series {
        match s.mark {
            Mark::Dots => {
                let _ = writeln!(out, r##"<g fill="{}">"##, escape(&s.color));
                for &(x, y) in &s.points {
                    let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="{radius}"/>"##, sx(x), sy(y));
                }
                out.push_str("</g>\n");
            }
            Mark::Line => {
                let path: Vec<String> = s
                    .points
                    .iter()
                    .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                    .collect();
                let _ = writeln!(
                    out,
                    r##"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.2"/>"##,
                    path.join(" "),
                    escape(&s.color)
                );
            }
        }
    }
}

/// Panels side by side, each `width` wide.
pub fn emit_panels_svg(panels: &[Panel], width: f64, height: f64, radius: f64) -> Result<String> {
    check(panels)?;
    let total = width * panels.len() as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{height}" viewBox="0 0 {total} {height}" font-family="sans-serif" font-size="11">"##
    );
    let _ = writeln!(out, r##"<rect width="{total}" height="{height}" fill="#fff"/>"##);
    for (i, panel) in panels.iter().enumerate() {
        if panel.series.iter().all(|s| s.points.is_empty()) {
            continue;
        }
        draw_panel(&mut out, panel, i as f64 * width, width, height, radius);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// One-panel scatter plot of `points`.
pub fn emit_scatter_svg(points: &[(f64, f64)], style: &Style) -> Result<String> {
    let panel = Panel {
        series: vec![Series {
            points: points.to_vec(),
            color: style.color.clone(),
            mark: Mark::Dots,
        }],
        title: style.title.clone(),
        x_label: style.x_label.clone(),
        y_label: style.y_label.clone(),
    };
    emit_panels_svg(&[panel], style.width, style.height, style.radius)
}
