//! Standalone SVG scatter plot for 2-D projections.

use std::fmt::Write;

use super::tsne::Projection2D;

const SIZE: f64 = 640.0;
const MARGIN: f64 = 40.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders labelled points scaled to a square canvas. Output depends only on
/// the projection, so identical projections give identical files.
pub fn scatter_svg(projection: &Projection2D, title: &str) -> String {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for c in &projection.coords {
        x0 = x0.min(c[0]);
        x1 = x1.max(c[0]);
        y0 = y0.min(c[1]);
        y1 = y1.max(c[1]);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-12);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="24" font-family="sans-serif" font-size="14">{}</text>"#,
        escape(title)
    );
    for (w, c) in projection.words.iter().zip(&projection.coords) {
        let px = MARGIN + (c[0] - x0) * scale;
        let py = SIZE - MARGIN - (c[1] - y0) * scale;
        let _ = writeln!(
            s,
            r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="steelblue"/><text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="9">{}</text>"#,
            px + 4.0,
            py - 4.0,
            escape(w)
        );
    }
    s.push_str("</svg>\n");
    s
}
