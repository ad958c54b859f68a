//! Sample-curve CSV and a minimal SVG line plot.

use std::fmt::Write as _;
use std::io::Write;

#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub name: String,
    /// Truncation height, when the curve comes from a zero sum.
    pub truncation: Option<f64>,
    pub points: Vec<(f64, f64)>,
}

impl Curve {
    pub fn new(name: impl Into<String>, truncation: Option<f64>, points: Vec<(f64, f64)>) -> Self {
        Curve { name: name.into(), truncation, points }
    }
}

/// Writes `<abscissa>,value,T,curve` rows; `T` is empty for sieve curves.
pub fn write_curves_csv<W: Write>(abscissa: &str, curves: &[Curve], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{abscissa},value,T,curve")?;
    for c in curves {
        let t = c.truncation.map(|t| t.to_string()).unwrap_or_default();
        for &(x, y) in &c.points {
            writeln!(out, "{x},{y},{t},{}", c.name)?;
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct PlotOptions {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub width: u32,
    pub height: u32,
}

impl Default for PlotOptions {
    fn default() -> Self {
        PlotOptions {
            title: String::new(),
            x_label: "x".into(),
            y_label: String::new(),
            log_x: false,
            width: 800,
            height: 480,
        }
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| s >= raw)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Renders the curves as a standalone SVG document.
pub fn svg_line_plot(curves: &[Curve], opts: &PlotOptions) -> String {
    let (w, h) = (opts.width as f64, opts.height as f64);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 50.0);
    let fx = |x: f64| if opts.log_x { x.log10() } else { x };
    let finite = curves
        .iter()
        .flat_map(|c| c.points.iter())
        .filter(|(x, y)| fx(*x).is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in finite {
        x0 = x0.min(fx(x));
        x1 = x1.max(fx(x));
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        (y0, y1) = (y0 - 1.0, y1 + 1.0);
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let px = |x: f64| left + (fx(x) - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| top + (y1 - y) / (y1 - y0) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        w / 2.0,
        escape(&opts.title)
    );
    let (pl, pr, pt, pb) = (left, w - right, top, h - bottom);
    let _ = writeln!(s, r##"<rect x="{pl}" y="{pt}" width="{}" height="{}" fill="none" stroke="#444"/>"##, pr - pl, pb - pt);
    for v in nice_ticks(x0, x1, 6) {
        let x = left + (v - x0) / (x1 - x0) * (w - left - right);
        let label = if opts.log_x { format!("1e{}", fmt_tick(v)) } else { fmt_tick(v) };
        let _ = writeln!(s, r##"<line x1="{x:.1}" y1="{pb}" x2="{x:.1}" y2="{}" stroke="#444"/>"##, pb + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{}" text-anchor="middle">{label}</text>"#, pb + 18.0);
    }
    for v in nice_ticks(y0, y1, 6) {
        let y = py(v);
        let _ = writeln!(s, r##"<line x1="{}" y1="{y:.1}" x2="{pl}" y2="{y:.1}" stroke="#444"/>"##, pl - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, pl - 8.0, y + 4.0, fmt_tick(v));
    }
    if y0 < 0.0 && y1 > 0.0 {
        let _ = writeln!(s, r##"<line x1="{pl}" y1="{0:.1}" x2="{pr}" y2="{0:.1}" stroke="#999" stroke-dasharray="4 3"/>"##, py(0.0));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 12.0, escape(&opts.x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        h / 2.0,
        escape(&opts.y_label)
    );
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = c
            .points
            .iter()
            .filter(|(x, y)| fx(*x).is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.3" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = top + 14.0 + 16.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{0}" y1="{ly}" x2="{1}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, pl + 10.0, pl + 30.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, pl + 36.0, ly + 4.0, escape(&c.name));
    }
    s.push_str("</svg>\n");
    s
}
