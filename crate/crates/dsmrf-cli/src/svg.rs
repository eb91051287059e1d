//! Plain SVG line plots and heatmaps.
//!
//! Output is a pure function of the input: coordinates are printed with three
//! decimals and nothing time- or environment-dependent is emitted. The plot
//! area carries `data-*` attributes with its pixel box and axis ranges (in
//! log10 units on log axes), so drawn vertices can be mapped back to data.

use std::fmt::Write;

use crate::error::{CliError, Result};

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const TOP: f64 = 40.0;
const PLOT_W: f64 = 460.0;
const PLOT_H: f64 = 380.0;
const PAD: f64 = 0.03;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub label: String,
    pub log: bool,
}

impl Axis {
    pub fn log(label: &str) -> Self {
        Axis { label: label.into(), log: true }
    }

    pub fn linear(label: &str) -> Self {
        Axis { label: label.into(), log: false }
    }

    fn coord(&self, v: f64) -> Option<f64> {
        match (self.log, v.is_finite()) {
            (_, false) => None,
            (true, _) if v <= 0.0 => None,
            (true, _) => Some(v.log10()),
            (false, _) => Some(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub x: Axis,
    pub y: Axis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Axis range in plot coordinates, padded and never degenerate.
#[derive(Debug, Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi - lo < 1e-12 * lo.abs().max(1.0) {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = PAD * (hi - lo);
        Range { lo: lo - pad, hi: hi + pad }
    }

    fn frac(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick_label(log: bool, v: f64) -> String {
    if log {
        format!("1e{}", v.round() as i64)
    } else {
        let s = format!("{:.6}", v);
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".into() } else { s.into() }
    }
}

fn ticks(log: bool, r: Range) -> Vec<f64> {
    if log {
        let (a, b) = (r.lo.ceil() as i64, r.hi.floor() as i64);
        if b >= a {
            let stride = ((b - a) / 8 + 1).max(1);
            return (a..=b).filter(|k| (k - a) % stride == 0).map(|k| k as f64).collect();
        }
        return vec![r.lo, r.hi];
    }
    let raw = (r.hi - r.lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut v = (r.lo / step).ceil() * step;
    let mut out = Vec::new();
    while v <= r.hi + 1e-9 * step {
        out.push(if v.abs() < 1e-12 * step { 0.0 } else { v });
        v += step;
    }
    out
}

fn header(out: &mut String, width: f64, height: f64, title: &str) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#).unwrap();
    writeln!(out, r#"<text x="{:.3}" y="24" text-anchor="middle" font-size="14">{}</text>"#, width / 2.0, esc(title)).unwrap();
}

/// Frame, ticks and axis labels for a plot box.
fn axes(out: &mut String, (x0, y0, w, h): (f64, f64, f64, f64), x: (&Axis, Range), y: (&Axis, Range)) {
    writeln!(out, r#"<rect class="frame" x="{x0:.3}" y="{y0:.3}" width="{w:.3}" height="{h:.3}" fill="none" stroke="black"/>"#).unwrap();
    for t in ticks(x.0.log, x.1) {
        let px = x0 + x.1.frac(t) * w;
        writeln!(out, r#"<line x1="{px:.3}" y1="{:.3}" x2="{px:.3}" y2="{:.3}" stroke="black"/>"#, y0 + h, y0 + h + 5.0).unwrap();
        writeln!(out, r#"<text x="{px:.3}" y="{:.3}" text-anchor="middle">{}</text>"#, y0 + h + 18.0, tick_label(x.0.log, t)).unwrap();
    }
    for t in ticks(y.0.log, y.1) {
        let py = y0 + h - y.1.frac(t) * h;
        writeln!(out, r#"<line x1="{:.3}" y1="{py:.3}" x2="{x0:.3}" y2="{py:.3}" stroke="black"/>"#, x0 - 5.0).unwrap();
        writeln!(out, r#"<text x="{:.3}" y="{:.3}" text-anchor="end">{}</text>"#, x0 - 8.0, py + 4.0, tick_label(y.0.log, t)).unwrap();
    }
    writeln!(out, r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">{}</text>"#, x0 + w / 2.0, y0 + h + 40.0, esc(&x.0.label)).unwrap();
    let (lx, ly) = (x0 - 58.0, y0 + h / 2.0);
    writeln!(out, r#"<text x="{lx:.3}" y="{ly:.3}" text-anchor="middle" transform="rotate(-90 {lx:.3} {ly:.3})">{}</text>"#, esc(&y.0.label)).unwrap();
}

/// One polyline per series with at least one drawable point.
///
/// Points that are not finite, or not positive on a log axis, are skipped.
pub fn line_plot(spec: &PlotSpec, series: &[Series]) -> Result<String> {
    let kept: Vec<(&str, Vec<(f64, f64)>)> = series
        .iter()
        .map(|s| {
            let pts = s.points.iter().filter_map(|&(x, y)| Some((spec.x.coord(x)?, spec.y.coord(y)?))).collect::<Vec<_>>();
            (s.label.as_str(), pts)
        })
        .filter(|(_, p)| !p.is_empty())
        .collect();
    if kept.is_empty() {
        return Err(CliError::InvalidArgument("nothing to plot: no drawable points".into()));
    }
    let xr = Range::of(kept.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)));
    let yr = Range::of(kept.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)));

    let mut out = String::new();
    header(&mut out, WIDTH, HEIGHT, &spec.title);
    writeln!(
        out,
        r#"<g class="plot-area" data-left="{LEFT:.3}" data-top="{TOP:.3}" data-width="{PLOT_W:.3}" data-height="{PLOT_H:.3}" data-x-min="{}" data-x-max="{}" data-y-min="{}" data-y-max="{}" data-log-x="{}" data-log-y="{}">"#,
        xr.lo, xr.hi, yr.lo, yr.hi, spec.x.log, spec.y.log
    )
    .unwrap();
    axes(&mut out, (LEFT, TOP, PLOT_W, PLOT_H), (&spec.x, xr), (&spec.y, yr));
    for (k, (label, pts)) in kept.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let verts: Vec<String> = pts
            .iter()
            .map(|&(u, v)| format!("{:.3},{:.3}", LEFT + xr.frac(u) * PLOT_W, TOP + PLOT_H - yr.frac(v) * PLOT_H))
            .collect();
        writeln!(out, r#"<polyline data-series="{}" fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, esc(label), verts.join(" ")).unwrap();
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = LEFT + PLOT_W + 16.0;
        writeln!(out, r#"<line x1="{lx:.3}" y1="{ly:.3}" x2="{:.3}" y2="{ly:.3}" stroke="{colour}" stroke-width="2"/>"#, lx + 20.0).unwrap();
        writeln!(out, r#"<text x="{:.3}" y="{:.3}">{}</text>"#, lx + 26.0, ly + 4.0, esc(label)).unwrap();
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

/// Values on a `ys × xs` grid, row-major in `ys`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatPanel {
    pub title: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<f64>,
}

const STOPS: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

fn colour(f: f64) -> String {
    let f = f.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let k = (f.floor() as usize).min(STOPS.len() - 2);
    let s = f - k as f64;
    let (a, b) = (STOPS[k], STOPS[k + 1]);
    let mix = |p: f64, q: f64| (p + (q - p) * s).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Cell edges on a log axis: geometric midpoints, mirrored at the ends.
fn edges(v: &[f64]) -> Vec<f64> {
    let l: Vec<f64> = v.iter().map(|x| x.log10()).collect();
    let n = l.len();
    let mut e = Vec::with_capacity(n + 1);
    if n == 1 {
        return vec![l[0] - 0.5, l[0] + 0.5];
    }
    e.push(l[0] - (l[1] - l[0]) / 2.0);
    for k in 0..n - 1 {
        e.push((l[k] + l[k + 1]) / 2.0);
    }
    e.push(l[n - 1] + (l[n - 1] - l[n - 2]) / 2.0);
    e
}

/// Log–log heatmaps of `log10(value)`, side by side, each with the `y = x` diagonal.
pub fn heatmap(x_label: &str, y_label: &str, panels: &[HeatPanel]) -> Result<String> {
    if panels.is_empty() {
        return Err(CliError::InvalidArgument("nothing to plot: no panels".into()));
    }
    for p in panels {
        if p.xs.is_empty() || p.ys.is_empty() || p.values.len() != p.xs.len() * p.ys.len() {
            return Err(CliError::InvalidArgument(format!("panel '{}' has an inconsistent grid", p.title)));
        }
        if p.xs.iter().chain(&p.ys).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(CliError::InvalidArgument(format!("panel '{}' needs positive grid values", p.title)));
        }
    }
    let side = 340.0;
    let stride = side + 140.0;
    let width = LEFT + stride * panels.len() as f64;
    let height = TOP + side + 90.0;
    let mut out = String::new();
    header(&mut out, width, height, "");
    for (k, p) in panels.iter().enumerate() {
        let x0 = LEFT + stride * k as f64;
        let (ex, ey) = (edges(&p.xs), edges(&p.ys));
        let xr = Range { lo: ex[0], hi: ex[ex.len() - 1] };
        let yr = Range { lo: ey[0], hi: ey[ey.len() - 1] };
        let logs: Vec<f64> = p.values.iter().map(|v| if *v > 0.0 && v.is_finite() { v.log10() } else { f64::NAN }).collect();
        let finite = logs.iter().copied().filter(|v| v.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let span = if hi > lo { hi - lo } else { 1.0 };
        writeln!(
            out,
            r#"<g class="heatmap" data-title="{}" data-left="{x0:.3}" data-top="{TOP:.3}" data-width="{side:.3}" data-height="{side:.3}" data-x-min="{}" data-x-max="{}" data-y-min="{}" data-y-max="{}" data-value-min="{}" data-value-max="{}">"#,
            esc(&p.title), xr.lo, xr.hi, yr.lo, yr.hi, lo, hi
        )
        .unwrap();
        writeln!(out, r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">{}</text>"#, x0 + side / 2.0, TOP - 8.0, esc(&p.title)).unwrap();
        for (i, _) in p.ys.iter().enumerate() {
            for (j, _) in p.xs.iter().enumerate() {
                let v = logs[i * p.xs.len() + j];
                let fill = if v.is_finite() { colour((v - lo) / span) } else { "#bbbbbb".to_string() };
                let (ax, bx) = (x0 + xr.frac(ex[j]) * side, x0 + xr.frac(ex[j + 1]) * side);
                let (ay, by) = (TOP + side - yr.frac(ey[i + 1]) * side, TOP + side - yr.frac(ey[i]) * side);
                writeln!(out, r#"<rect x="{ax:.3}" y="{ay:.3}" width="{:.3}" height="{:.3}" fill="{fill}" shape-rendering="crispEdges"/>"#, bx - ax, by - ay).unwrap();
            }
        }
        let (a, b) = (xr.lo.max(yr.lo), xr.hi.min(yr.hi));
        if b > a {
            writeln!(
                out,
                r#"<line class="diagonal" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="white" stroke-dasharray="4 3"/>"#,
                x0 + xr.frac(a) * side,
                TOP + side - yr.frac(a) * side,
                x0 + xr.frac(b) * side,
                TOP + side - yr.frac(b) * side
            )
            .unwrap();
        }
        axes(&mut out, (x0, TOP, side, side), (&Axis::log(x_label), xr), (&Axis::log(y_label), yr));
        writeln!(out, r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">log10 range [{:.3}, {:.3}]</text>"#, x0 + side / 2.0, TOP + side + 62.0, lo, hi).unwrap();
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    Ok(out)
}
