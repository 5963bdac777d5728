//! Proximity-target plots as standalone SVG.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 64.0;
const TICKS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    Circle,
    Square,
    Triangle,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    /// `(proximity, target)` vertices.
    pub points: Vec<(f64, f64)>,
    pub marker: Marker,
    pub color: &'static str,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>, index: usize) -> Self {
        const MARKERS: [Marker; 3] = [Marker::Circle, Marker::Square, Marker::Triangle];
        const COLORS: [&str; 3] = ["#1f6fb4", "#d0461c", "#2b8a3e"];
        Self { label: label.into(), points, marker: MARKERS[index % 3], color: COLORS[index % 3] }
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

fn marker(out: &mut String, m: Marker, x: f64, y: f64, color: &str) {
    let _ = match m {
        Marker::Circle => writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{color}"/>"#),
        Marker::Square => {
            writeln!(out, r#"<rect x="{:.2}" y="{:.2}" width="7" height="7" fill="none" stroke="{color}"/>"#, x - 3.5, y - 3.5)
        }
        Marker::Triangle => writeln!(
            out,
            r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{color}"/>"#,
            x,
            y - 4.5,
            x - 4.0,
            y + 3.0,
            x + 4.0,
            y + 3.0
        ),
    };
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Plots every series on shared linear axes. Proximity decreases from left
/// to right unless `flip` is set.
pub fn plot(series: &[Series], title: &str, flip: bool) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let (x_lo, x_hi) = range(all().map(|p| p.0));
    let (y_lo, y_hi) = range(all().map(|p| p.1));
    let span = WIDTH - 2.0 * MARGIN;
    let sx = |h: f64| {
        let f = (h - x_lo) / (x_hi - x_lo);
        MARGIN + span * if flip { f } else { 1.0 - f }
    };
    let sy = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - y_lo) / (y_hi - y_lo);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        r#"<path d="M{left},{top} L{left},{bottom} L{right},{bottom}" fill="none" stroke="black"/>"#
    );
    for i in 0..TICKS {
        let f = i as f64 / (TICKS - 1) as f64;
        let h = x_lo + f * (x_hi - x_lo);
        let x = sx(h);
        let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{bottom}" x2="{x:.2}" y2="{}" stroke="black"/>"#, bottom + 5.0);
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{h:.4e}</text>"#, bottom + 18.0);
        let v = y_lo + f * (y_hi - y_lo);
        let y = sy(v);
        let _ = writeln!(out, r#"<line x1="{}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="black"/>"#, left - 5.0);
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{v:.4e}</text>"#, left - 8.0, y + 4.0);
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">proximity</text>"#, WIDTH / 2.0, HEIGHT - 20.0);
    let _ = writeln!(
        out,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">target</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s.points.iter().map(|&(h, v)| format!("{:.2},{:.2}", sx(h), sy(v))).collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            pts.join(" "),
            s.color
        );
        for &(h, v) in &s.points {
            marker(&mut out, s.marker, sx(h), sy(v), s.color);
        }
        let ly = top + 16.0 * i as f64;
        marker(&mut out, s.marker, right - 150.0, ly - 4.0, s.color);
        let _ = writeln!(out, r#"<text x="{}" y="{ly:.2}">{}</text>"#, right - 140.0, escape(&s.label));
    }
    out.push_str("</svg>\n");
    out
}
