//! Static SVG figures: train-vs-dev UAF1 scatter and selection-frequency bars.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;

pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
    /// Drawn highlighted (zero dementia F1).
    pub flagged: bool,
}

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(out, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Axis range covering `vals` padded to whole multiples of 5, within [0, 100].
fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 100.0);
    }
    let lo = ((lo / 5.0).floor() * 5.0 - 5.0).max(0.0);
    let hi = ((hi / 5.0).ceil() * 5.0 + 5.0).min(100.0);
    if hi <= lo {
        (0.0, 100.0)
    } else {
        (lo, hi)
    }
}

/// Train UAF1 on x, dev UAF1 on y. Flagged points are yellow with a dark
/// outline; the rest are blue.
pub fn scatter_svg(points: &[ScatterPoint], title: &str, x_label: &str, y_label: &str) -> String {
    let (x0, x1) = range(points.iter().map(|p| p.x));
    let (y0, y1) = range(points.iter().map(|p| p.y));
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);
    let mut out = String::new();
    header(&mut out, W, H);
    let _ = writeln!(out, "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>", W / 2.0, escape(title));
    let mut t = x0;
    while t <= x1 + 1e-9 {
        let _ = writeln!(
            out,
            "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{0:.2}\" y2=\"{2:.2}\" stroke=\"#ddd\"/><text x=\"{0:.2}\" y=\"{3:.2}\" text-anchor=\"middle\">{4}</text>",
            px(t),
            py(y0),
            py(y1),
            H - MARGIN + 18.0,
            t
        );
        t += 5.0;
    }
    let mut t = y0;
    while t <= y1 + 1e-9 {
        let _ = writeln!(
            out,
            "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{2:.2}\" y2=\"{1:.2}\" stroke=\"#ddd\"/><text x=\"{3:.2}\" y=\"{4:.2}\" text-anchor=\"end\">{5}</text>",
            px(x0),
            py(t),
            px(x1),
            MARGIN - 8.0,
            py(t) + 4.0,
            t
        );
        t += 5.0;
    }
    let _ = writeln!(
        out,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>", W / 2.0, H - 16.0, escape(x_label));
    let _ = writeln!(
        out,
        "<text x=\"18\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {0})\">{1}</text>",
        H / 2.0,
        escape(y_label)
    );
    // Unflagged first so highlighted points stay visible on top.
    for flagged in [false, true] {
        for p in points.iter().filter(|p| p.flagged == flagged) {
            let (fill, stroke) = if flagged { ("#f2c200", "#6b5500") } else { ("#3b6fb6", "none") };
            let _ = writeln!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{fill}\" fill-opacity=\"0.7\" stroke=\"{stroke}\"/>",
                px(p.x),
                py(p.y)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Horizontal bars, one per (label, value in [0, 1]), in input order.
pub fn bar_svg(bars: &[(String, f64)], title: &str) -> String {
    let row = 22.0;
    let left = 220.0;
    let h = MARGIN * 2.0 + row * bars.len() as f64;
    let span = W - left - MARGIN;
    let mut out = String::new();
    header(&mut out, W, h);
    let _ = writeln!(out, "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>", W / 2.0, escape(title));
    for (i, (label, v)) in bars.iter().enumerate() {
        let y = MARGIN + i as f64 * row;
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text><rect x=\"{left}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#3b6fb6\"/><text x=\"{:.2}\" y=\"{:.2}\">{:.2}</text>",
            left - 8.0,
            y + row * 0.65,
            escape(label),
            y + 3.0,
            span * v.clamp(0.0, 1.0),
            row - 6.0,
            left + span * v.clamp(0.0, 1.0) + 4.0,
            y + row * 0.65,
            v
        );
    }
    let base = MARGIN + row * bars.len() as f64;
    let _ = writeln!(out, "<line x1=\"{left}\" y1=\"{MARGIN}\" x2=\"{left}\" y2=\"{base:.2}\" stroke=\"black\"/>");
    out.push_str("</svg>\n");
    out
}
