//! Minimal line charts as standalone SVG text.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    /// `(x, y)` pairs; non-finite `y` breaks the line.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub y_range: (f64, f64),
    pub series: Vec<Series>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e6 {
        format!("{}", x as i64)
    } else {
        format!("{x:.2}")
    }
}

impl LineChart {
    fn x_bounds(&self) -> (f64, f64) {
        let xs = self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
        let (mut lo, mut hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
            (a.min(x), b.max(x))
        });
        if !lo.is_finite() {
            (lo, hi) = (1.0, 10.0);
        }
        if self.log_x {
            lo = lo.max(f64::MIN_POSITIVE);
        }
        if hi <= lo {
            hi = if self.log_x { lo * 10.0 } else { lo + 1.0 };
        }
        (lo, hi)
    }

    fn x_ticks(&self, lo: f64, hi: f64) -> Vec<f64> {
        if self.log_x {
            let (a, b) = (lo.log10().floor() as i32, hi.log10().ceil() as i32);
            (a..=b)
                .map(|e| 10f64.powi(e))
                .filter(|t| *t >= lo * (1.0 - 1e-9) && *t <= hi * (1.0 + 1e-9))
                .collect()
        } else {
            (0..=5).map(|i| lo + (hi - lo) * i as f64 / 5.0).collect()
        }
    }

    pub fn render(&self) -> String {
        let (x0, x1) = self.x_bounds();
        let (y0, y1) = self.y_range;
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| {
            let t = if self.log_x {
                (x.log10() - x0.log10()) / (x1.log10() - x0.log10())
            } else {
                (x - x0) / (x1 - x0)
            };
            LEFT + t * pw
        };
        let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            esc(&self.title)
        );
        let _ = writeln!(
            out,
            r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
        );
        for t in self.x_ticks(x0, x1) {
            let x = sx(t);
            let _ = writeln!(
                out,
                r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                TOP + ph,
                TOP + ph + 16.0,
                fmt_tick(t)
            );
        }
        for i in 0..=5 {
            let v = y0 + (y1 - y0) * i as f64 / 5.0;
            let y = sy(v);
            let _ = writeln!(
                out,
                r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"##,
                LEFT + pw,
                LEFT - 6.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 14.0,
            esc(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            esc(&self.y_label)
        );

        for (i, s) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let mut run: Vec<String> = Vec::new();
            let flush = |run: &mut Vec<String>, out: &mut String| {
                if run.len() > 1 {
                    let _ = writeln!(
                        out,
                        r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                        run.join(" ")
                    );
                }
                run.clear();
            };
            for &(x, y) in &s.points {
                if y.is_finite() && (!self.log_x || x > 0.0) {
                    let (px, py) = (sx(x), sy(y.clamp(y0, y1)));
                    run.push(format!("{px:.2},{py:.2}"));
                    let _ = writeln!(
                        out,
                        r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{color}"/>"#
                    );
                } else {
                    flush(&mut run, &mut out);
                }
            }
            flush(&mut run, &mut out);
            let ly = TOP + 10.0 + 18.0 * i as f64;
            let lx = LEFT + pw + 12.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                lx + 20.0,
                lx + 26.0,
                ly + 4.0,
                esc(&s.label)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart(log_x: bool) -> LineChart {
        LineChart {
            title: "r vs eta".into(),
            x_label: "eta".into(),
            y_label: "r".into(),
            log_x,
            y_range: (0.0, 1.0),
            series: vec![
                Series {
                    label: "37 Mbit/s".into(),
                    points: vec![(10.0, 0.5), (100.0, 0.9), (1000.0, 1.0)],
                },
                Series {
                    label: "40 Mbit/s".into(),
                    points: vec![(10.0, 0.4), (100.0, f64::NAN), (1000.0, 0.8)],
                },
            ],
        }
    }

    #[test]
    fn one_polyline_per_unbroken_run() {
        let svg = chart(true).render();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<circle").count(), 5);
        assert!(svg.contains(">37 Mbit/s<") && svg.contains(">40 Mbit/s<"));
    }

    #[test]
    fn log_axis_ticks_on_decades() {
        let svg = chart(true).render();
        for t in [">10<", ">100<", ">1000<"] {
            assert!(svg.contains(t), "{t}");
        }
        // first and last point at the plot edges
        assert!(svg.contains(&format!("cx=\"{:.2}\"", LEFT)));
        assert!(svg.contains(&format!("cx=\"{:.2}\"", WIDTH - RIGHT)));
    }

    #[test]
    fn deterministic_text() {
        assert_eq!(chart(false).render(), chart(false).render());
    }
}
