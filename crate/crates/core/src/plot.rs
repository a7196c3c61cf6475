//! Dependency-free SVG figures.

use std::fmt::Write as _;

use crate::metrics::ConfusionCounts;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 40.0;
const CLASS_COLORS: [&str; 2] = ["#1f77b4", "#d62728"];

fn header(out: &mut String, title: &str) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    )
    .unwrap();
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Two-class scatter of projected points, class 0 in blue and class 1 in red.
pub fn scatter_svg(points: &[[f64; 2]], labels: &[u8], title: &str) -> String {
    let range = |axis: usize| {
        let lo = points.iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p[axis]).fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 1.0, lo + 1.0)
        }
    };
    let (x0, x1) = range(0);
    let (y0, y1) = range(1);
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;

    let mut out = String::new();
    header(&mut out, title);
    writeln!(
        out,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#333"/>"##
    )
    .unwrap();
    for class in 0..2u8 {
        writeln!(out, r#"<g fill="{}" fill-opacity="0.6">"#, CLASS_COLORS[class as usize]).unwrap();
        for (p, _) in points.iter().zip(labels).filter(|(_, &l)| l == class) {
            let cx = MARGIN + (p[0] - x0) / (x1 - x0) * plot_w;
            let cy = HEIGHT - MARGIN - (p[1] - y0) / (y1 - y0) * plot_h;
            writeln!(out, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="2.5"/>"#).unwrap();
        }
        writeln!(out, "</g>").unwrap();
    }
    writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">PC1</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 14 {})">PC2</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    )
    .unwrap();
    out.push_str("</svg>\n");
    out
}

/// 2 × 2 confusion heatmap, rows actual and columns predicted.
pub fn confusion_svg(c: &ConfusionCounts, title: &str) -> String {
    let cells = [[c.tn, c.fp], [c.fn_, c.tp]];
    let max = cells.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
    let size = (WIDTH - 2.0 * MARGIN - 40.0) / 2.0;
    let mut out = String::new();
    header(&mut out, title);
    for (r, row) in cells.iter().enumerate() {
        for (col, &v) in row.iter().enumerate() {
            let x = MARGIN + 40.0 + col as f64 * size;
            let y = MARGIN + 20.0 + r as f64 * size;
            let shade = 255 - (v as f64 / max * 200.0).round() as u8;
            let text_color = if shade < 140 { "white" } else { "black" };
            writeln!(
                out,
                r##"<rect x="{x}" y="{y}" width="{size}" height="{size}" fill="rgb({shade},{shade},255)" stroke="#333"/>"##
            )
            .unwrap();
            writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="20" fill="{text_color}">{v}</text>"#,
                x + size / 2.0,
                y + size / 2.0 + 7.0
            )
            .unwrap();
        }
    }
    for i in 0..2 {
        let mid = MARGIN + 40.0 + (i as f64 + 0.5) * size;
        writeln!(
            out,
            r#"<text x="{mid}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">predicted {i}</text>"#,
            MARGIN + 14.0
        )
        .unwrap();
        let mid_y = MARGIN + 20.0 + (i as f64 + 0.5) * size;
        writeln!(
            out,
            r#"<text x="{}" y="{mid_y}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 {} {mid_y})">actual {i}</text>"#,
            MARGIN + 20.0,
            MARGIN + 20.0
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}
