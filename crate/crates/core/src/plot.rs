//! Self-contained SVG charts: actual-vs-predicted lines and coefficient stems.

use std::fmt::Write as _;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;

pub struct LineSeries<'a> {
    pub name: &'a str,
    pub color: &'a str,
    pub values: &'a [f64],
    pub dashed: bool,
}

struct Frame {
    x_count: usize,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn new(x_count: usize, values: impl Iterator<Item = f64>, include_zero: bool) -> Self {
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        if !lo.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if include_zero {
            lo = lo.min(0.0);
            hi = hi.max(0.0);
        }
        if hi - lo < 1e-12 {
            lo -= 1.0;
            hi += 1.0;
        }
        let pad = 0.05 * (hi - lo);
        Self {
            x_count: x_count.max(2),
            y_min: lo - pad,
            y_max: hi + pad,
        }
    }

    fn x(&self, i: f64) -> f64 {
        MARGIN_LEFT + i / (self.x_count - 1) as f64 * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        let h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        MARGIN_TOP + (self.y_max - v) / (self.y_max - self.y_min) * h
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, frame: &Frame, x_labels: &[(usize, String)], y_label: &str) {
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let _ = writeln!(
        out,
        r#"<path d="M{x0},{MARGIN_TOP} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let v = frame.y_min + (frame.y_max - frame.y_min) * k as f64 / 4.0;
        let y = frame.y(v);
        let _ = writeln!(
            out,
            r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"##,
            x0 - 6.0,
            y + 4.0
        );
    }
    for (i, label) in x_labels {
        let x = frame.x(*i as f64);
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 18.0,
            escape(label)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
}

/// Line chart of several equally long series. `x_labels` are
/// `(index, text)` tick labels.
pub fn line_chart(
    title: &str,
    y_label: &str,
    series: &[LineSeries<'_>],
    x_labels: &[(usize, String)],
) -> String {
    let n = series.iter().map(|s| s.values.len()).max().unwrap_or(0);
    let frame = Frame::new(
        n,
        series.iter().flat_map(|s| s.values.iter().copied()),
        false,
    );
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &frame, x_labels, y_label);
    for (k, s) in series.iter().enumerate() {
        let mut d = String::new();
        for (i, &v) in s.values.iter().enumerate() {
            let cmd = if i == 0 { 'M' } else { 'L' };
            let _ = write!(d, "{cmd}{:.2},{:.2} ", frame.x(i as f64), frame.y(v));
        }
        let dash = if s.dashed {
            r#" stroke-dasharray="6,4""#
        } else {
            ""
        };
        let _ = writeln!(
            out,
            r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
            d.trim_end(),
            s.color
        );
        let ly = MARGIN_TOP + 14.0 * k as f64;
        let lx = WIDTH - MARGIN_RIGHT - 150.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
            lx + 24.0,
            s.color,
            lx + 30.0,
            ly + 4.0,
            escape(s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Stem plot of a coefficient vector with dashed separators between blocks.
/// `block_starts` are the column offsets of each block, `labels` their names.
pub fn stem_plot(title: &str, values: &[f64], block_starts: &[usize], labels: &[String]) -> String {
    let n = values.len();
    let frame = Frame::new(n + 1, values.iter().copied(), true);
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &frame, &[], "coefficient");
    let zero = frame.y(0.0);
    let _ = writeln!(
        out,
        r#"<line x1="{MARGIN_LEFT}" y1="{zero:.2}" x2="{}" y2="{zero:.2}" stroke="black" stroke-width="0.5"/>"#,
        WIDTH - MARGIN_RIGHT
    );
    for (k, &start) in block_starts.iter().enumerate() {
        if k > 0 {
            let x = frame.x(start as f64);
            let _ = writeln!(
                out,
                r##"<line x1="{x:.2}" y1="{MARGIN_TOP}" x2="{x:.2}" y2="{}" stroke="#555555" stroke-dasharray="5,4"/>"##,
                HEIGHT - MARGIN_BOTTOM
            );
        }
        let end = block_starts.get(k + 1).copied().unwrap_or(n);
        if let Some(label) = labels.get(k) {
            let mid = frame.x((start + end) as f64 / 2.0);
            let _ = writeln!(
                out,
                r#"<text x="{mid:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                HEIGHT - MARGIN_BOTTOM + 18.0,
                escape(label)
            );
        }
    }
    for (i, &v) in values.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let x = frame.x(i as f64 + 0.5);
        let y = frame.y(v);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{zero:.2}" x2="{x:.2}" y2="{y:.2}" stroke="#1f77b4" stroke-width="1.5"/><circle cx="{x:.2}" cy="{y:.2}" r="3" fill="#1f77b4"/>"##
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_has_one_path_per_series() {
        let a = [1.0, 2.0, 3.0];
        let b = [1.5, 2.5, 2.0];
        let svg = line_chart(
            "t",
            "km/h",
            &[
                LineSeries {
                    name: "actual",
                    color: "black",
                    values: &a,
                    dashed: false,
                },
                LineSeries {
                    name: "pred",
                    color: "red",
                    values: &b,
                    dashed: true,
                },
            ],
            &[(0, "14:00".into())],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<path d=\"M").count(), 3); // axes + two series
        assert!(svg.contains("14:00"));
    }

    #[test]
    fn stems_only_for_nonzero_and_separators_between_blocks() {
        let v = [0.0, 0.4, 0.0, 0.0, -0.2, 0.0];
        let svg = stem_plot("x", &v, &[0, 2, 4], &["a".into(), "b".into(), "c<".into()]);
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(svg.matches("stroke-dasharray=\"5,4\"").count(), 2);
        assert!(svg.contains("c&lt;"));
    }
}
