//! Minimal SVG plotter: line charts, scatter plots, bar charts and heatmaps.
//! Output is a pure function of the data, so figures are reproducible.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Trims trailing zeros so tick labels stay short.
fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Self { lo: 0.0, hi: 1.0 };
        }
        if hi - lo < 1e-12 {
            let pad = lo.abs().max(1.0) * 0.5;
            return Self {
                lo: lo - pad,
                hi: hi + pad,
            };
        }
        let pad = 0.04 * (hi - lo);
        Self {
            lo: lo - pad,
            hi: hi + pad,
        }
    }

    fn fixed(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    /// Round-numbered ticks (steps of 1, 2, 2.5 or 5 times a power of ten).
    fn ticks(&self) -> Vec<f64> {
        let raw = (self.hi - self.lo) / 4.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = mag
            * match raw / mag {
                f if f <= 1.0 => 1.0,
                f if f <= 2.0 => 2.0,
                f if f <= 2.5 => 2.5,
                f if f <= 5.0 => 5.0,
                _ => 10.0,
            };
        let mut out = Vec::new();
        let mut k = (self.lo / step).ceil();
        while k * step <= self.hi + 1e-9 * step {
            out.push(k * step);
            k += 1.0;
        }
        out
    }
}

struct Frame {
    svg: String,
    x: Range,
    y: Range,
    x_ticks: bool,
}

impl Frame {
    fn new(title: &str, x_label: &str, y_label: &str, x: Range, y: Range, x_ticks: bool) -> Self {
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            (LEFT + W - RIGHT) / 2.0,
            esc(title)
        );
        let mut f = Self { svg, x, y, x_ticks };
        f.axes(x_label, y_label);
        f
    }

    fn px(&self, v: f64) -> f64 {
        LEFT + (v - self.x.lo) / (self.x.hi - self.x.lo) * (W - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        H - BOTTOM - (v - self.y.lo) / (self.y.hi - self.y.lo) * (H - TOP - BOTTOM)
    }

    fn axes(&mut self, x_label: &str, y_label: &str) {
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
        let _ = writeln!(
            self.svg,
            r##"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="#333"/>"##,
            x1 - x0,
            y0 - y1
        );
        let x_ticks = if self.x_ticks { self.x.ticks() } else { Vec::new() };
        for t in x_ticks {
            let p = self.px(t);
            let _ = writeln!(
                self.svg,
                r##"<line x1="{p:.2}" y1="{y0}" x2="{p:.2}" y2="{}" stroke="#333"/><text x="{p:.2}" y="{}" text-anchor="middle">{}</text>"##,
                y0 + 5.0,
                y0 + 18.0,
                num(t)
            );
        }
        for t in self.y.ticks() {
            let p = self.py(t);
            let _ = writeln!(
                self.svg,
                r##"<line x1="{}" y1="{p:.2}" x2="{x0}" y2="{p:.2}" stroke="#333"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
                x0 - 5.0,
                x0 - 8.0,
                p + 4.0,
                num(t)
            );
        }
        let _ = writeln!(
            self.svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            H - 16.0,
            esc(x_label)
        );
        let _ = writeln!(
            self.svg,
            r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
            (y0 + y1) / 2.0,
            esc(y_label)
        );
    }

    fn legend(&mut self, names: &[String]) {
        for (i, name) in names.iter().enumerate() {
            let y = TOP + 10.0 + 18.0 * i as f64;
            let x = W - RIGHT + 12.0;
            let _ = writeln!(
                self.svg,
                r#"<rect x="{x}" y="{}" width="12" height="12" fill="{}"/><text x="{}" y="{}">{}</text>"#,
                y - 10.0,
                PALETTE[i % PALETTE.len()],
                x + 18.0,
                y,
                esc(name)
            );
        }
    }

    fn finish(mut self) -> String {
        self.svg.push_str("</svg>\n");
        self.svg
    }
}

/// A named polyline.
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Polylines on shared axes. `y_fixed` pins the y range (e.g. `[0, 1]`).
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], y_fixed: Option<(f64, f64)>) -> String {
    let x = Range::of(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let y = match y_fixed {
        Some((lo, hi)) => Range::fixed(lo, hi),
        None => Range::of(series.iter().flat_map(|s| s.points.iter().map(|p| p.1))),
    };
    let mut f = Frame::new(title, x_label, y_label, x, y, true);
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(a, b)| format!("{:.2},{:.2}", f.px(a), f.py(b)))
            .collect();
        let _ = writeln!(
            f.svg,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.8" points="{}"/>"#,
            PALETTE[i % PALETTE.len()],
            pts.join(" ")
        );
    }
    f.legend(&series.iter().map(|s| s.name.clone()).collect::<Vec<_>>());
    f.finish()
}

/// Points coloured by class index into `class_names`.
pub fn scatter(title: &str, points: &[(f64, f64, usize)], class_names: &[String]) -> String {
    let x = Range::of(points.iter().map(|p| p.0));
    let y = Range::of(points.iter().map(|p| p.1));
    let mut f = Frame::new(title, "dimension 1", "dimension 2", x, y, true);
    for &(a, b, c) in points {
        let _ = writeln!(
            f.svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{}" fill-opacity="0.8"/>"#,
            f.px(a),
            f.py(b),
            PALETTE[c % PALETTE.len()]
        );
    }
    f.legend(class_names);
    f.finish()
}

/// Vertical bars with the value printed above each one.
pub fn bar_chart(title: &str, y_label: &str, labels: &[String], values: &[f64]) -> String {
    let top = values.iter().cloned().fold(0.0_f64, f64::max);
    let y = Range::fixed(0.0, if top > 0.0 { top * 1.1 } else { 1.0 });
    let x = Range::fixed(0.0, labels.len().max(1) as f64);
    let mut f = Frame::new(title, "", y_label, x, y, false);
    let slot = (W - LEFT - RIGHT) / labels.len().max(1) as f64;
    for (i, (l, &v)) in labels.iter().zip(values).enumerate() {
        let x0 = LEFT + slot * (i as f64 + 0.15);
        let yv = f.py(v);
        let _ = writeln!(
            f.svg,
            r#"<rect x="{x0:.2}" y="{yv:.2}" width="{:.2}" height="{:.2}" fill="{}"/><text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text><text x="{:.2}" y="{}" text-anchor="middle" font-size="10">{}</text>"#,
            slot * 0.7,
            H - BOTTOM - yv,
            PALETTE[i % PALETTE.len()],
            x0 + slot * 0.35,
            yv - 4.0,
            num(v),
            x0 + slot * 0.35,
            H - BOTTOM + 32.0,
            esc(l)
        );
    }
    f.finish()
}

/// Cells shaded from white to blue by value; `annotate` prints each value.
pub fn heatmap(
    title: &str,
    cells: &[Vec<f64>],
    row_labels: &[String],
    col_labels: &[String],
    annotate: bool,
) -> String {
    let rows = cells.len().max(1);
    let cols = cells.first().map_or(1, Vec::len).max(1);
    let (lo, hi) = cells
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        W / 2.0,
        esc(title)
    );
    let (x0, y0) = (LEFT + 40.0, TOP);
    let cw = (W - x0 - 40.0) / cols as f64;
    let ch = (H - y0 - BOTTOM) / rows as f64;
    for (r, row) in cells.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let t = (v - lo) / span;
            let shade = |full: f64| (255.0 - t * (255.0 - full)).round() as u8;
            let _ = writeln!(
                svg,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({},{},{})"/>"#,
                x0 + cw * c as f64,
                y0 + ch * r as f64,
                cw + 0.05,
                ch + 0.05,
                shade(31.0),
                shade(119.0),
                shade(180.0)
            );
            if annotate {
                let ink = if t > 0.6 { "white" } else { "black" };
                let _ = writeln!(
                    svg,
                    r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" fill="{ink}">{}</text>"#,
                    x0 + cw * (c as f64 + 0.5),
                    y0 + ch * (r as f64 + 0.5) + 4.0,
                    num(v)
                );
            }
        }
    }
    for (r, l) in row_labels.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            y0 + ch * (r as f64 + 0.5) + 4.0,
            esc(l)
        );
    }
    for (c, l) in col_labels.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            x0 + cw * (c as f64 + 0.5),
            H - BOTTOM + 18.0,
            esc(l)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figures_are_well_formed() {
        let names: Vec<String> = vec!["a".into(), "b<c".into()];
        let line = line_chart(
            "t",
            "x",
            "y",
            &[Series {
                name: "s".into(),
                points: vec![(0.0, 1.0), (1.0, 2.0)],
            }],
            None,
        );
        let sc = scatter("t", &[(0.0, 0.0, 0), (1.0, 1.0, 1)], &names);
        let bars = bar_chart("t", "acc", &names, &[0.5, 0.9]);
        let hm = heatmap("t", &[vec![1.0, 0.0], vec![0.0, 3.0]], &names, &names, true);
        for svg in [&line, &sc, &bars, &hm] {
            assert!(svg.starts_with("<svg"));
            assert!(svg.trim_end().ends_with("</svg>"));
            assert!(!svg.contains("NaN"));
        }
        assert!(sc.contains("b&lt;c"));
        assert_eq!(sc.matches("<circle").count(), 2);
        assert_eq!(hm.matches("fill=\"rgb(").count(), 4);
    }

    #[test]
    fn tick_labels_are_trimmed() {
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(2.0), "2");
        assert_eq!(num(-0.0001), "0");
    }

    #[test]
    fn flat_data_still_gets_a_range() {
        let r = Range::of([3.0, 3.0].into_iter());
        assert!(r.hi > r.lo);
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(Range::fixed(0.0, 1.0).ticks(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(Range::fixed(-0.04, 1.04).ticks(), vec![0.0, 0.5, 1.0]);
        assert_eq!(Range::fixed(0.0, 91.7).ticks(), vec![0.0, 25.0, 50.0, 75.0]);
    }
}
