//! Minimal SVG emitter for step curves.

use std::fmt::Write as _;

pub struct Series {
    /// Knots `(t, S(t))` of a right-continuous step function.
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Value before the first knot.
    pub initial: f64,
    pub color: &'static str,
    pub width: f64,
    pub dashed: bool,
}

pub const RED: &str = "#d62728";
pub const BLUE: &str = "#1f77b4";
pub const BLACK: &str = "#222222";

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 50.0;

/// Renders series on `[0, x_max] x [y_min, y_max]` with axes and a title.
pub fn render(title: &str, series: &[Series], x_max: f64, y_min: f64, y_max: f64) -> String {
    let x_max = if x_max > 0.0 { x_max } else { 1.0 };
    let sx = |x: f64| MARGIN + (x / x_max) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y_min) / (y_max - y_min) * (H - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"25\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>",
        W / 2.0,
        xml_escape(title)
    );
    // axes
    let _ = writeln!(
        out,
        "<polyline points=\"{:.1},{:.1} {:.1},{:.1} {:.1},{:.1}\" fill=\"none\" stroke=\"black\"/>",
        sx(0.0),
        sy(y_max),
        sx(0.0),
        sy(y_min),
        sx(x_max),
        sy(y_min)
    );
    for k in 0..=4 {
        let y = y_min + (y_max - y_min) * k as f64 / 4.0;
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{:.2}</text>",
            sx(0.0) - 5.0,
            sy(y) + 4.0,
            y
        );
        let x = x_max * k as f64 / 4.0;
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{:.0}</text>",
            sx(x),
            sy(y_min) + 16.0,
            x
        );
    }
    if y_min < 0.0 && y_max > 0.0 {
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#999\" stroke-dasharray=\"2,3\"/>",
            sx(0.0),
            sy(0.0),
            sx(x_max),
            sy(0.0)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">days</text>",
        W / 2.0,
        H - 10.0
    );

    for s in series {
        let mut pts = vec![(0.0, s.initial)];
        let mut current = s.initial;
        for (&t, &v) in s.times.iter().zip(&s.values) {
            if t > x_max {
                break;
            }
            pts.push((t, current));
            pts.push((t, v));
            current = v;
        }
        pts.push((x_max, current));
        let points: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let dash = if s.dashed { " stroke-dasharray=\"5,4\"" } else { "" };
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"{dash}/>",
            points.join(" "),
            s.color,
            s.width
        );
    }
    out.push_str("</svg>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
