//! Static SVG plots. Output is a pure function of the input, formatted with
//! fixed precision, so identical data gives identical bytes.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PlotSpec {
    /// Points on log-log axes with the fitted slope written on the plot.
    LogLog { file: String, title: String, xs: Vec<f64>, ys: Vec<f64>, slope: f64 },
    Histogram { file: String, title: String, labels: Vec<String>, counts: Vec<usize> },
    Scatter { file: String, title: String, x_label: String, y_label: String, xs: Vec<f64>, ys: Vec<f64> },
}

impl PlotSpec {
    pub fn file(&self) -> &str {
        match self {
            PlotSpec::LogLog { file, .. } | PlotSpec::Histogram { file, .. } | PlotSpec::Scatter { file, .. } => file,
        }
    }

    /// Render with `tag` (the run id) embedded as a comment.
    pub fn render(&self, tag: &str) -> String {
        match self {
            PlotSpec::LogLog { title, xs, ys, slope, .. } => {
                let pts: Vec<(f64, f64)> = xs
                    .iter()
                    .zip(ys)
                    .filter(|(x, y)| **x > 0.0 && **y > 0.0)
                    .map(|(x, y)| (x.log10(), y.log10()))
                    .collect();
                let note = format!("slope = {slope:.4}");
                points_svg(tag, title, "log10 r", "log10 value", &pts, Some(&note))
            }
            PlotSpec::Scatter { title, x_label, y_label, xs, ys, .. } => {
                let pts: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
                points_svg(tag, title, x_label, y_label, &pts, None)
            }
            PlotSpec::Histogram { title, labels, counts, .. } => histogram_svg(tag, title, labels, counts),
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(tag: &str, title: &str) -> String {
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#).unwrap();
    writeln!(s, "<!-- run {} -->", escape(tag).replace("--", "- -")).unwrap();
    writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{:.1}" y="30" text-anchor="middle" font-size="16">{}</text>"#, WIDTH / 2.0, escape(title)).unwrap();
    s
}

fn axes(s: &mut String, x_label: &str, y_label: &str) {
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    writeln!(s, r#"<line x1="{x0:.1}" y1="{y0:.1}" x2="{x1:.1}" y2="{y0:.1}" stroke="black"/>"#).unwrap();
    writeln!(s, r#"<line x1="{x0:.1}" y1="{y0:.1}" x2="{x0:.1}" y2="{y1:.1}" stroke="black"/>"#).unwrap();
    writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">{}</text>"#, WIDTH / 2.0, HEIGHT - 20.0, escape(x_label)).unwrap();
    writeln!(
        s,
        r#"<text x="20" y="{:.1}" text-anchor="middle" font-size="12" transform="rotate(-90 20 {:.1})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    )
    .unwrap();
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn points_svg(tag: &str, title: &str, x_label: &str, y_label: &str, pts: &[(f64, f64)], note: Option<&str>) -> String {
    let mut s = header(tag, title);
    axes(&mut s, x_label, y_label);
    let (xl, xh) = range(pts.iter().map(|p| p.0));
    let (yl, yh) = range(pts.iter().map(|p| p.1));
    let sx = |x: f64| MARGIN + (x - xl) / (xh - xl) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - yl) / (yh - yl) * (HEIGHT - 2.0 * MARGIN);
    writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="10">{xl:.3}</text>"#, MARGIN, HEIGHT - MARGIN + 15.0).unwrap();
    writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{xh:.3}</text>"#, WIDTH - MARGIN, HEIGHT - MARGIN + 15.0).unwrap();
    writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{yl:.3}</text>"#, MARGIN - 5.0, HEIGHT - MARGIN).unwrap();
    writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{yh:.3}</text>"#, MARGIN - 5.0, MARGIN + 10.0).unwrap();
    for &(x, y) in pts.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
        writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, sx(x), sy(y)).unwrap();
    }
    if let Some(n) = note {
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="14" class="slope">{}</text>"#, MARGIN + 10.0, MARGIN + 20.0, escape(n)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn histogram_svg(tag: &str, title: &str, labels: &[String], counts: &[usize]) -> String {
    let mut s = header(tag, title);
    axes(&mut s, "class", "count");
    let top = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let slot = (WIDTH - 2.0 * MARGIN) / labels.len().max(1) as f64;
    for (i, (label, &c)) in labels.iter().zip(counts).enumerate() {
        let h = c as f64 / top * (HEIGHT - 2.0 * MARGIN);
        let x = MARGIN + i as f64 * slot;
        writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="steelblue"/>"#,
            x + 0.1 * slot,
            HEIGHT - MARGIN - h,
            0.8 * slot
        )
        .unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"#, x + slot / 2.0, HEIGHT - MARGIN + 15.0, escape(label)).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{c}</text>"#, x + slot / 2.0, HEIGHT - MARGIN - h - 4.0).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_stable() {
        let p = PlotSpec::LogLog { file: "a.svg".into(), title: "t".into(), xs: vec![1.0, 2.0, 4.0], ys: vec![1.0, 4.0, 16.0], slope: 2.0 };
        assert_eq!(p.render("x"), p.clone().render("x"));
        assert!(p.render("x").contains("slope = 2.0000"));
    }

    #[test]
    fn empty_inputs_still_draw_axes() {
        let h = PlotSpec::Histogram { file: "h.svg".into(), title: "empty".into(), labels: vec![], counts: vec![] };
        let s = h.render("r");
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert_eq!(s.matches("<line").count(), 2);
        let sc = PlotSpec::Scatter { file: "s.svg".into(), title: "e".into(), x_label: "x".into(), y_label: "y".into(), xs: vec![], ys: vec![] };
        assert_eq!(sc.render("r").matches("<circle").count(), 0);
    }
}
