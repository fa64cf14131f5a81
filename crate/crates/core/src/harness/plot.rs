//! Standalone SVG line charts.

use std::fmt::Write as _;

const PANEL_W: f64 = 300.0;
const PANEL_H: f64 = 180.0;
const MARGIN: f64 = 36.0;

/// Grid of small line charts, one per `(title, points)` series; missing
/// points are skipped.
pub fn svg_line_charts(series: &[(&str, Vec<(f64, Option<f64>)>)], columns: usize) -> String {
    let columns = columns.max(1);
    let rows = series.len().div_ceil(columns);
    let (w, h) = (columns as f64 * PANEL_W, rows as f64 * PANEL_H);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    for (i, (title, pts)) in series.iter().enumerate() {
        let ox = (i % columns) as f64 * PANEL_W;
        let oy = (i / columns) as f64 * PANEL_H;
        let (x0, y0) = (ox + MARGIN, oy + 20.0);
        let (pw, ph) = (PANEL_W - MARGIN - 10.0, PANEL_H - 20.0 - MARGIN);
        let present: Vec<(f64, f64)> = pts.iter().filter_map(|&(x, y)| y.filter(|v| v.is_finite()).map(|v| (x, v))).collect();
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{title}</text>"#, ox + PANEL_W / 2.0, oy + 14.0);
        let _ = writeln!(out, r##"<rect x="{x0}" y="{y0}" width="{pw}" height="{ph}" fill="none" stroke="#999"/>"##);
        if present.is_empty() {
            continue;
        }
        let (xmin, xmax) = present.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
        let (ymin, ymax) = present.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
        let sx = |x: f64| x0 + if xmax > xmin { (x - xmin) / (xmax - xmin) * pw } else { pw / 2.0 };
        let sy = |y: f64| y0 + ph - if ymax > ymin { (y - ymin) / (ymax - ymin) * ph } else { ph / 2.0 };
        let path: Vec<String> = present.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(out, r##"<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{}"/>"##, path.join(" "));
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, x0 - 3.0, y0 + 8.0, short(ymax));
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, x0 - 3.0, y0 + ph, short(ymin));
        let _ = writeln!(out, r#"<text x="{x0}" y="{}">{}</text>"#, y0 + ph + 14.0, short(xmin));
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, x0 + pw, y0 + ph + 14.0, short(xmax));
    }
    out.push_str("</svg>\n");
    out
}

fn short(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}
