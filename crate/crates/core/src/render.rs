//! Plain SVG plots with byte-stable output: the `λ/√d` scatter of an
//! experiment and tail-report overlays.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{invalid, Result};
use crate::experiment::CsvRow;
use crate::report::TailReport;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const PROB_FLOOR: f64 = 1e-6;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let pad = |a: f64, b: f64| if b > a { (a, b) } else { (a - 0.5, a + 0.5) };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        Self { x0, x1, y0, y1 }
    }

    fn x(&self, v: f64) -> f64 {
        MARGIN + (v - self.x0) / (self.x1 - self.x0) * (W - 2.0 * MARGIN)
    }

    fn y(&self, v: f64) -> f64 {
        H - MARGIN - (v - self.y0) / (self.y1 - self.y0) * (H - 2.0 * MARGIN)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, escape(title));
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str, ytick: impl Fn(f64) -> String) {
    let (l, r, t, b) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
    let _ = writeln!(out, r#"<path d="M{l:.1} {t:.1}V{b:.1}H{r:.1}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let xv = f.x0 + (f.x1 - f.x0) * k as f64 / 4.0;
        let yv = f.y0 + (f.y1 - f.y0) * k as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, f.x(xv), b + 16.0, fmt_tick(xv));
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, l - 6.0, f.y(yv) + 4.0, ytick(yv));
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// `λ/√d` against `n`, one colour per model, with the reference value
/// `2√(1-d/n)` drawn as a grey tick at each `(n, d)` cell.
pub fn render_scatter(rows: &[CsvRow]) -> Result<String> {
    let pts: Vec<(&CsvRow, f64)> = rows.iter().filter_map(|r| r.lambda_over_sqrt_d.map(|y| (r, y))).collect();
    if pts.iter().any(|(_, y)| !y.is_finite()) {
        return Err(invalid("non-finite λ/√d in report"));
    }
    let refs: BTreeMap<(usize, usize), f64> = pts
        .iter()
        .filter_map(|(r, _)| r.d.map(|d| ((r.n, d), 2.0 * (1.0 - d as f64 / r.n as f64).max(0.0).sqrt())))
        .collect();
    let xs = pts.iter().map(|(r, _)| r.n as f64);
    let ys = pts.iter().map(|&(_, y)| y).chain(refs.values().copied());
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (y0, y1) = ys.fold((0.0f64, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let f = if pts.is_empty() { Frame::new(0.0, 1.0, 0.0, 1.0) } else { Frame::new(x0, x1, y0, y1 * 1.05) };

    let mut out = String::new();
    header(&mut out, "λ(A)/√d against n");
    axes(&mut out, &f, "n", "λ/√d", fmt_tick);
    for (&(n, _), &y) in &refs {
        let (cx, cy) = (f.x(n as f64), f.y(y));
        let _ = writeln!(out, r##"<path d="M{:.1} {cy:.1}H{:.1}" stroke="#888" stroke-width="2"/>"##, cx - 8.0, cx + 8.0);
    }
    let models: Vec<&str> = {
        let mut m: Vec<&str> = pts.iter().map(|(r, _)| r.model.as_str()).collect();
        m.sort_unstable();
        m.dedup();
        m
    };
    for (r, y) in &pts {
        let colour = PALETTE[models.iter().position(|m| *m == r.model).unwrap_or(0) % PALETTE.len()];
        let _ = writeln!(out, r#"<circle cx="{:.1}" cy="{:.1}" r="2.5" fill="{colour}" fill-opacity="0.6"/>"#, f.x(r.n as f64), f.y(*y));
    }
    for (i, m) in models.iter().enumerate() {
        let y = MARGIN + 14.0 * i as f64;
        let _ = writeln!(out, r#"<circle cx="{:.1}" cy="{:.1}" r="4" fill="{}"/>"#, W - MARGIN - 110.0, y, PALETTE[i % PALETTE.len()]);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, W - MARGIN - 100.0, y + 4.0, escape(m));
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Empirical tail with its confidence band and the bound curve on a log
/// scale; grid points where the bound is violated are circled in red.
pub fn render_tail(report: &TailReport) -> Result<String> {
    let k = report.grid.len();
    if k == 0 {
        return Err(invalid("tail report has an empty grid"));
    }
    if [report.empirical_ccdf.len(), report.upper_cl.len(), report.lower_cl.len(), report.bound_curve.len()]
        .iter()
        .any(|&l| l != k)
    {
        return Err(invalid("tail report columns differ in length"));
    }
    let lg = |p: f64| p.max(PROB_FLOOR).min(1.0).log10();
    let f = Frame::new(report.grid[0], report.grid[k - 1], PROB_FLOOR.log10(), 0.0);
    let mut out = String::new();
    header(&mut out, &format!("{} ({:?} tail)", report.label, report.side));
    axes(&mut out, &f, "t", "probability", |v| format!("1e{}", v.round() as i64));
    let path = |vals: &[f64]| -> String {
        let mut d = String::new();
        for (i, (&t, &p)) in report.grid.iter().zip(vals).enumerate() {
            let _ = write!(d, "{}{:.1} {:.1}", if i == 0 { "M" } else { "L" }, f.x(t), f.y(lg(p)));
        }
        d
    };
    let mut band = path(&report.upper_cl);
    for (&t, &p) in report.grid.iter().zip(&report.lower_cl).rev() {
        let _ = write!(band, "L{:.1} {:.1}", f.x(t), f.y(lg(p)));
    }
    let _ = writeln!(out, r##"<path d="{band}Z" fill="#1f77b4" fill-opacity="0.15" stroke="none"/>"##);
    let _ = writeln!(out, r##"<path d="{}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>"##, path(&report.empirical_ccdf));
    let _ = writeln!(out, r#"<path d="{}" fill="none" stroke="black" stroke-dasharray="5 3"/>"#, path(&report.bound_curve));
    for v in &report.violations {
        let _ = writeln!(
            out,
            r##"<circle class="violation" cx="{:.1}" cy="{:.1}" r="5" fill="none" stroke="#d62728" stroke-width="2"/>"##,
            f.x(v.t),
            f.y(lg(v.bound))
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}
