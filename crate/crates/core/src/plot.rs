//! Minimal static SVG charts: quantile ribbons and line plots.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 48.0;
const PALETTE: [&str; 6] = ["#1b6ca8", "#d1495b", "#2e933c", "#edae49", "#6a4c93", "#444444"];

/// A named series of `(x, y)` points. Non-finite points are skipped.
#[derive(Clone, Debug)]
pub struct Line {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// A shaded band between `lower` and `upper` with an optional center line.
#[derive(Clone, Debug)]
pub struct Ribbon {
    pub label: String,
    pub x: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub center: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub ribbons: Vec<Ribbon>,
    pub lines: Vec<Line>,
    /// Dashed horizontal reference lines.
    pub hlines: Vec<f64>,
}

struct Scale {
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
}

impl Scale {
    fn new(values: impl Iterator<Item = f64>, from: f64, to: f64) -> Self {
        let (mut lo, mut hi) = values
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.04 * (hi - lo);
        Scale {
            lo: lo - pad,
            hi: hi + pad,
            from,
            to,
        }
    }

    fn map(&self, v: f64) -> f64 {
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }

    fn ticks(&self) -> Vec<f64> {
        let raw = (self.hi - self.lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(mag * 10.0);
        let mut t = (self.lo / step).ceil() * step;
        let mut out = Vec::new();
        while t <= self.hi {
            out.push(t);
            t += step;
        }
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        "0".into()
    } else {
        r.to_string()
    }
}

impl Chart {
    pub fn to_svg(&self) -> String {
        let xs = self
            .ribbons
            .iter()
            .flat_map(|r| r.x.iter().copied())
            .chain(self.lines.iter().flat_map(|l| l.points.iter().map(|p| p.0)));
        let ys = self
            .ribbons
            .iter()
            .flat_map(|r| r.lower.iter().chain(&r.upper).copied())
            .chain(self.lines.iter().flat_map(|l| l.points.iter().map(|p| p.1)))
            .chain(self.hlines.iter().copied());
        let sx = Scale::new(xs, MARGIN_L, WIDTH - MARGIN_R);
        let sy = Scale::new(ys, HEIGHT - MARGIN_B, MARGIN_T);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );

        for t in sx.ticks() {
            let x = sx.map(t);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="#ddd"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"##,
                MARGIN_T,
                HEIGHT - MARGIN_B,
                HEIGHT - MARGIN_B + 16.0,
                fmt_tick(t)
            );
        }
        for t in sy.ticks() {
            let y = sy.map(t);
            let _ = writeln!(
                s,
                r##"<line x1="{}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
                MARGIN_L,
                WIDTH - MARGIN_R,
                MARGIN_L - 6.0,
                y + 4.0,
                fmt_tick(t)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
            HEIGHT - 10.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
            (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
            escape(&self.y_label)
        );

        let mut legend = Vec::new();
        for (i, r) in self.ribbons.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let mut pts: Vec<String> = Vec::new();
            for (x, y) in r.x.iter().zip(&r.upper) {
                pts.push(format!("{:.2},{:.2}", sx.map(*x), sy.map(*y)));
            }
            for (x, y) in r.x.iter().zip(&r.lower).rev() {
                pts.push(format!("{:.2},{:.2}", sx.map(*x), sy.map(*y)));
            }
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.25" stroke="none"/>"#,
                pts.join(" ")
            );
            if let Some(c) = &r.center {
                let line: Vec<(f64, f64)> = r.x.iter().copied().zip(c.iter().copied()).collect();
                polyline(&mut s, &line, &sx, &sy, color);
            }
            legend.push((r.label.clone(), color));
        }
        for (i, l) in self.lines.iter().enumerate() {
            let color = PALETTE[(i + self.ribbons.len()) % PALETTE.len()];
            polyline(&mut s, &l.points, &sx, &sy, color);
            for &(x, y) in l.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                    sx.map(x),
                    sy.map(y)
                );
            }
            legend.push((l.label.clone(), color));
        }
        for &h in &self.hlines {
            let y = sy.map(h);
            let _ = writeln!(
                s,
                r##"<line x1="{}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
                MARGIN_L,
                WIDTH - MARGIN_R
            );
        }
        for (i, (label, color)) in legend.iter().enumerate() {
            let y = MARGIN_T + 8.0 + 16.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{:.2}" width="10" height="10" fill="{color}"/><text x="{}" y="{:.2}">{}</text>"#,
                MARGIN_L + 10.0,
                y - 9.0,
                MARGIN_L + 26.0,
                y,
                escape(label)
            );
        }
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            WIDTH - MARGIN_L - MARGIN_R,
            HEIGHT - MARGIN_T - MARGIN_B
        );
        s.push_str("</svg>\n");
        s
    }
}

fn polyline(s: &mut String, points: &[(f64, f64)], sx: &Scale, sy: &Scale, color: &str) {
    let pts: Vec<String> = points
        .iter()
        .filter(|p| p.0.is_finite() && p.1.is_finite())
        .map(|&(x, y)| format!("{:.2},{:.2}", sx.map(x), sy.map(y)))
        .collect();
    if pts.len() > 1 {
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#,
            pts.join(" ")
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_well_formed_document() {
        let chart = Chart {
            title: "a < b".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            ribbons: vec![Ribbon {
                label: "band".into(),
                x: vec![1.0, 2.0, 3.0],
                lower: vec![0.0, 1.0, 2.0],
                upper: vec![2.0, 3.0, 4.0],
                center: Some(vec![1.0, 2.0, 3.0]),
            }],
            lines: vec![Line {
                label: "line".into(),
                points: vec![(1.0, 1.0), (2.0, f64::NAN), (3.0, 2.5)],
            }],
            hlines: vec![0.0],
        };
        let svg = chart.to_svg();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn empty_chart_still_renders() {
        let svg = Chart::default().to_svg();
        assert!(svg.contains("</svg>"));
    }
}
