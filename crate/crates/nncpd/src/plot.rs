//! Static two-panel SVG: the signal on top, the shifted score with its
//! detections below. True change points, when known, are drawn as grey
//! verticals in both panels.

use std::fmt::Write as _;

use nncpd_core::{DetectionResult, TimeSeries};

const WIDTH: f64 = 960.0;
const PANEL_H: f64 = 220.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 20.0;
const GAP: f64 = 40.0;
const TOP: f64 = 30.0;
const COLORS: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#17becf"];

struct Axis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, px_lo: f64, px_hi: f64) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        Self { lo, hi, px_lo, px_hi }
    }

    fn map(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn polyline(out: &mut String, points: impl Iterator<Item = (f64, f64)>, color: &str) {
    let _ = write!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1" points=""#);
    for (x, y) in points {
        let _ = write!(out, "{x:.2},{y:.2} ");
    }
    out.push_str("\"/>\n");
}

fn frame(out: &mut String, y0: f64, label: &str, ylo: f64, yhi: f64) {
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN_L}" y="{y0}" width="{}" height="{PANEL_H}" fill="none" stroke="#444"/>"##,
        WIDTH - MARGIN_L - MARGIN_R
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="12">{label}</text>"#, MARGIN_L, y0 - 6.0);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{:.3}</text>"#,
        MARGIN_L - 4.0,
        y0 + 10.0,
        yhi
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{:.3}</text>"#,
        MARGIN_L - 4.0,
        y0 + PANEL_H,
        ylo
    );
}

fn verticals(out: &mut String, xs: &[i64], x: &Axis, y0: f64, style: &str) {
    for &c in xs {
        let px = x.map(c as f64);
        let _ = writeln!(out, r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{}" {style}/>"#, y0 + PANEL_H);
    }
}

pub fn render_svg(series: &TimeSeries, result: &DetectionResult, true_cps: Option<&[i64]>) -> String {
    let score = &result.score;
    let score_t: Vec<i64> = score.shifted_times().collect();
    let first = series.start_index().min(score_t.first().copied().unwrap_or(i64::MAX));
    let last = series.end_index().max(score_t.last().copied().unwrap_or(i64::MIN));
    let x = Axis::new(first as f64, last as f64, MARGIN_L, WIDTH - MARGIN_R);
    let height = TOP + 2.0 * PANEL_H + GAP + 30.0;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // signal
    let y0 = TOP;
    let (lo, hi) = bounds(series.values().iter().copied());
    let y = Axis::new(lo, hi, y0 + PANEL_H, y0);
    frame(&mut out, y0, "signal", lo, hi);
    if let Some(cps) = true_cps {
        verticals(&mut out, cps, &x, y0, r##"stroke="#aaa" stroke-dasharray="4 3""##);
    }
    for c in 0..series.dim() {
        let pts = series
            .rows()
            .enumerate()
            .map(|(i, row)| (x.map((series.start_index() + i as i64) as f64), y.map(row[c])));
        polyline(&mut out, pts, COLORS[c % COLORS.len()]);
    }

    // shifted score
    let y1 = TOP + PANEL_H + GAP;
    let (lo, hi) = bounds(score.shifted().iter().copied().chain([result.threshold, 0.0]).filter(|v| v.is_finite()));
    let ys = Axis::new(lo, hi, y1 + PANEL_H, y1);
    frame(&mut out, y1, "shifted score", lo, hi);
    if let Some(cps) = true_cps {
        verticals(&mut out, cps, &x, y1, r##"stroke="#aaa" stroke-dasharray="4 3""##);
    }
    if result.threshold.is_finite() {
        let py = ys.map(result.threshold);
        let _ = writeln!(
            out,
            r##"<line x1="{MARGIN_L}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="#d62728" stroke-dasharray="6 4"/>"##,
            WIDTH - MARGIN_R
        );
    }
    let pts = score_t.iter().zip(score.shifted()).map(|(&t, &v)| (x.map(t as f64), ys.map(v)));
    polyline(&mut out, pts, "#000");
    verticals(&mut out, &result.detected, &x, y1, r##"stroke="#d62728" stroke-width="1""##);
    for &c in &result.detected {
        if let Some(i) = score_t.iter().position(|&t| t == c) {
            let _ = writeln!(
                out,
                r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#d62728"/>"##,
                x.map(c as f64),
                ys.map(score.shifted()[i])
            );
        }
    }

    let axis_y = y1 + PANEL_H + 16.0;
    let _ = writeln!(out, r#"<text x="{MARGIN_L}" y="{axis_y}" font-size="10">{first}</text>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{axis_y}" font-size="10" text-anchor="end">{last}</text>"#,
        WIDTH - MARGIN_R
    );
    out.push_str("</svg>\n");
    out
}
