//! Minimal SVG line plots of numeric statistics against `d`.

use crate::run::ResultRecord;
use std::collections::BTreeMap;
use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 60.0;
const LEGEND: f64 = 220.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Series name for a statistic, qualified by scenario and measure when set.
fn series_name(r: &ResultRecord, stat: &str) -> String {
    let mut name = stat.to_string();
    for k in ["scenario", "measure"] {
        if let Some(v) = r.methods.get(k) {
            write!(name, " {v}").expect("string");
        }
    }
    if r.cell_spec.seeds.len() == 1 && r.seed != 0 {
        write!(name, " seed {}", r.seed).expect("string");
    }
    name
}

/// Every finite numeric statistic, one polyline per series, averaged over
/// duplicate `d`.
pub fn render(records: &[ResultRecord]) -> String {
    let mut series: BTreeMap<String, BTreeMap<usize, (f64, usize)>> = BTreeMap::new();
    for r in records {
        for (k, v) in &r.stats {
            if let Some(x) = v.as_f64().filter(|x| x.is_finite()) {
                let e = series.entry(series_name(r, k)).or_default().entry(r.d).or_insert((0.0, 0));
                e.0 += x;
                e.1 += 1;
            }
        }
    }
    let points: Vec<(&String, Vec<(f64, f64)>)> =
        series.iter().map(|(name, m)| (name, m.iter().map(|(&d, &(s, n))| (d as f64, s / n as f64)).collect())).collect();
    let all = points.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
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
        y1 = y0 + 1.0;
    }
    let plot_w = WIDTH - 2.0 * MARGIN - LEGEND;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * plot_h;

    let mut svg = String::new();
    writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="11">"#)
        .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    let (left, right, top, bottom) = (MARGIN, MARGIN + plot_w, MARGIN, HEIGHT - MARGIN);
    writeln!(svg, r#"<path d="M{left},{top} L{left},{bottom} L{right},{bottom}" stroke="black" fill="none"/>"#).unwrap();
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, sx(xv), bottom + 16.0, fmt_tick(xv)).unwrap();
        writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, left - 6.0, sy(yv) + 4.0, fmt_tick(yv)).unwrap();
    }
    writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">d</text>"#, (left + right) / 2.0, HEIGHT - 16.0).unwrap();
    for (i, (name, pts)) in points.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        writeln!(svg, r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#, path.join(" ")).unwrap();
        for &(x, y) in pts {
            writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, sx(x), sy(y)).unwrap();
        }
        let ly = top + 14.0 * i as f64;
        writeln!(svg, r#"<rect x="{:.1}" y="{:.1}" width="10" height="3" fill="{color}"/>"#, right + 16.0, ly - 4.0).unwrap();
        writeln!(svg, r#"<text x="{:.1}" y="{ly:.1}">{}</text>"#, right + 30.0, escape(name)).unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
