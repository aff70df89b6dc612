//! Minimal line-plot writer. Output depends only on the input values, so identical
//! input gives identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Clone, Copy, Debug)]
pub struct Series<'a> {
    pub label: &'a str,
    pub times: &'a [f64],
    pub values: &'a [f64],
}

impl<'a> Series<'a> {
    pub fn new(label: &'a str, times: &'a [f64], values: &'a [f64]) -> Self {
        Series { label, times, values }
    }
}

#[derive(Clone, Debug, Default)]
pub struct PlotLabels {
    pub title: String,
    pub x: String,
    pub y: String,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Data range widened by 5% on each side; degenerate ranges get a unit-scale pad.
fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    let span = hi - lo;
    if span > 0.0 {
        (lo - 0.05 * span, hi + 0.05 * span)
    } else {
        let pad = 0.05 * lo.abs().max(1.0);
        (lo - pad, hi + pad)
    }
}

fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let frac = raw / mag;
    let nice = if frac < 1.5 {
        1.0
    } else if frac < 3.5 {
        2.0
    } else if frac < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn ticks(lo: f64, hi: f64) -> (Vec<f64>, usize) {
    let step = nice_step(hi - lo, 5);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    ((first..=last).map(|k| k as f64 * step).collect(), decimals)
}

fn fmt_tick(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    // avoid "-0.00"
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

pub fn render_svg(series: &[Series<'_>], labels: &PlotLabels) -> Result<String> {
    if series.is_empty() {
        return Err(Error::InvalidParameter("no series to plot".into()));
    }
    for s in series {
        if s.times.len() != s.values.len() || s.times.is_empty() {
            return Err(Error::InvalidParameter(format!("series `{}` has mismatched or empty arrays", s.label)));
        }
    }
    let finite = |xs: &[f64]| xs.iter().copied().filter(|x| x.is_finite()).collect::<Vec<_>>();
    let xs: Vec<f64> = series.iter().flat_map(|s| finite(s.times)).collect();
    let ys: Vec<f64> = series.iter().flat_map(|s| finite(s.values)).collect();
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::InvalidParameter("no finite data to plot".into()));
    }
    let minmax = |v: &[f64]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let (x0, x1) = {
        let (a, b) = minmax(&xs);
        padded_range(a, b)
    };
    let (y0, y1) = {
        let (a, b) = minmax(&ys);
        padded_range(a, b)
    };
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut out = String::new();
    let w = &mut out;
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#).unwrap();
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(w, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    if !labels.title.is_empty() {
        writeln!(
            w,
            r#"<text x="{:.2}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&labels.title)
        )
        .unwrap();
    }
    writeln!(
        w,
        r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black" stroke-width="1"/>"#
    )
    .unwrap();

    writeln!(w, r#"<g font-family="sans-serif" font-size="11" fill="black">"#).unwrap();
    let (xt, xd) = ticks(x0, x1);
    for t in xt {
        let x = px(t);
        writeln!(w, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0).unwrap();
        writeln!(w, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, fmt_tick(t, xd)).unwrap();
    }
    let (yt, yd) = ticks(y0, y1);
    for t in yt {
        let y = py(t);
        writeln!(w, r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT:.2}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0).unwrap();
        writeln!(w, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, y + 4.0, fmt_tick(t, yd)).unwrap();
    }
    if !labels.x.is_empty() {
        writeln!(w, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 10.0, escape(&labels.x)).unwrap();
    }
    if !labels.y.is_empty() {
        let cy = TOP + ph / 2.0;
        writeln!(
            w,
            r#"<text x="16" y="{cy:.2}" text-anchor="middle" transform="rotate(-90 16 {cy:.2})">{}</text>"#,
            escape(&labels.y)
        )
        .unwrap();
    }
    writeln!(w, "</g>").unwrap();

    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let dash = if k >= PALETTE.len() { r#" stroke-dasharray="6 3""# } else { "" };
        let pts: Vec<String> = s
            .times
            .iter()
            .zip(s.values)
            .filter(|(t, v)| t.is_finite() && v.is_finite())
            .map(|(&t, &v)| format!("{:.2},{:.2}", px(t), py(v)))
            .collect();
        writeln!(
            w,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
            pts.join(" ")
        )
        .unwrap();
    }

    writeln!(w, r#"<g font-family="sans-serif" font-size="12">"#).unwrap();
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let y = TOP + 16.0 + 18.0 * k as f64;
        let x = WIDTH - RIGHT - 150.0;
        writeln!(w, r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/>"#, x + 24.0).unwrap();
        writeln!(w, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, x + 30.0, y + 4.0, escape(s.label)).unwrap();
    }
    writeln!(w, "</g>").unwrap();
    writeln!(w, "</svg>").unwrap();
    Ok(out)
}

pub fn emit_svg_labeled(series: &[Series<'_>], labels: &PlotLabels, path: impl AsRef<Path>) -> Result<()> {
    let doc = render_svg(series, labels)?;
    std::fs::write(path, doc)?;
    Ok(())
}

pub fn emit_svg(series: &[Series<'_>], path: impl AsRef<Path>) -> Result<()> {
    emit_svg_labeled(series, &PlotLabels::default(), path)
}
