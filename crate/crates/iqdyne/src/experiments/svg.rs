//! Minimal static SVG plots. The CSV files are the data contract; these
//! renderings are a quick visual check, nothing more.

use std::io;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesStyle {
    Line,
    Points,
    Bars,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub style: SeriesStyle,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 540.0;
const MARGIN_L: f64 = 90.0;
const MARGIN_R: f64 = 30.0;
const MARGIN_T: f64 = 50.0;
const MARGIN_B: f64 = 70.0;
const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            log_x: false,
            log_y: false,
            series: Vec::new(),
        }
    }

    pub fn with_series(mut self, label: &str, style: SeriesStyle, points: Vec<(f64, f64)>) -> Self {
        self.series.push(Series {
            label: label.to_string(),
            style,
            points,
        });
        self
    }

    fn tx(&self, x: f64) -> Option<f64> {
        if self.log_x {
            (x > 0.0).then(|| x.log10())
        } else {
            Some(x)
        }
    }

    fn ty(&self, y: f64) -> Option<f64> {
        if self.log_y {
            (y > 0.0).then(|| y.log10())
        } else {
            Some(y)
        }
    }

    pub fn render_to(&self, path: &Path) -> io::Result<()> {
        let mut pts: Vec<(f64, f64)> = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                if let (Some(tx), Some(ty)) = (self.tx(x), self.ty(y)) {
                    if tx.is_finite() && ty.is_finite() {
                        pts.push((tx, ty));
                    }
                }
            }
        }
        let (mut x0, mut x1) = min_max(pts.iter().map(|p| p.0));
        let (mut y0, mut y1) = min_max(pts.iter().map(|p| p.1));
        if !self.log_y && y0 > 0.0 && y0 < 0.3 * y1 {
            y0 = 0.0; // anchor bar/line plots at zero when it is close
        }
        pad_range(&mut x0, &mut x1);
        pad_range(&mut y0, &mut y1);

        let pw = WIDTH - MARGIN_L - MARGIN_R;
        let ph = HEIGHT - MARGIN_T - MARGIN_B;
        let px = |tx: f64| MARGIN_L + (tx - x0) / (x1 - x0) * pw;
        let py = |ty: f64| MARGIN_T + (1.0 - (ty - y0) / (y1 - y0)) * ph;

        let mut svg = String::new();
        svg.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n"
        ));
        svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"28\" text-anchor=\"middle\" font-size=\"17\">{}</text>\n",
            WIDTH / 2.0,
            esc(&self.title)
        ));

        // Ticks and grid.
        for t in ticks(x0, x1, self.log_x) {
            let x = px(t);
            svg.push_str(&format!(
                "<line x1=\"{x:.1}\" y1=\"{}\" x2=\"{x:.1}\" y2=\"{}\" stroke=\"#dddddd\"/>\n",
                MARGIN_T,
                MARGIN_T + ph
            ));
            svg.push_str(&format!(
                "<text x=\"{x:.1}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{}</text>\n",
                MARGIN_T + ph + 18.0,
                tick_label(t, self.log_x)
            ));
        }
        for t in ticks(y0, y1, self.log_y) {
            let y = py(t);
            svg.push_str(&format!(
                "<line x1=\"{}\" y1=\"{y:.1}\" x2=\"{}\" y2=\"{y:.1}\" stroke=\"#dddddd\"/>\n",
                MARGIN_L,
                MARGIN_L + pw
            ));
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"12\">{}</text>\n",
                MARGIN_L - 8.0,
                y + 4.0,
                tick_label(t, self.log_y)
            ));
        }
        svg.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>\n",
            MARGIN_L, MARGIN_T
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
            MARGIN_L + pw / 2.0,
            HEIGHT - 20.0,
            esc(&self.x_label)
        ));
        svg.push_str(&format!(
            "<text x=\"22\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\" \
             transform=\"rotate(-90 22 {})\">{}</text>\n",
            MARGIN_T + ph / 2.0,
            MARGIN_T + ph / 2.0,
            esc(&self.y_label)
        ));

        // Series.
        for (i, s) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let mapped: Vec<(f64, f64)> = s
                .points
                .iter()
                .filter_map(|&(x, y)| match (self.tx(x), self.ty(y)) {
                    (Some(tx), Some(ty)) if tx.is_finite() && ty.is_finite() => {
                        Some((px(tx), py(ty)))
                    }
                    _ => None,
                })
                .collect();
            match s.style {
                SeriesStyle::Line => {
                    let coords: Vec<String> = mapped
                        .iter()
                        .map(|(x, y)| format!("{x:.2},{y:.2}"))
                        .collect();
                    svg.push_str(&format!(
                        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\" points=\"{}\"/>\n",
                        coords.join(" ")
                    ));
                }
                SeriesStyle::Points => {
                    for (x, y) in &mapped {
                        svg.push_str(&format!(
                            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3.5\" fill=\"{color}\"/>\n"
                        ));
                    }
                }
                SeriesStyle::Bars => {
                    let gap = if mapped.len() > 1 {
                        let mut xs: Vec<f64> = mapped.iter().map(|p| p.0).collect();
                        xs.sort_by(f64::total_cmp);
                        xs.windows(2)
                            .map(|w| w[1] - w[0])
                            .fold(f64::INFINITY, f64::min)
                    } else {
                        20.0
                    };
                    let half = (0.4 * gap).max(1.0);
                    let base = py(y0.max(0.0));
                    for (x, y) in &mapped {
                        let top = y.min(base);
                        svg.push_str(&format!(
                            "<rect x=\"{:.2}\" y=\"{top:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
                             fill=\"{color}\" fill-opacity=\"0.7\"/>\n",
                            x - half,
                            2.0 * half,
                            (base - top).abs()
                        ));
                    }
                }
            }
            svg.push_str(&format!(
                "<rect x=\"{}\" y=\"{:.1}\" width=\"12\" height=\"12\" fill=\"{color}\"/>\n",
                MARGIN_L + pw - 180.0,
                MARGIN_T + 8.0 + 18.0 * i as f64
            ));
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{:.1}\" font-size=\"12\">{}</text>\n",
                MARGIN_L + pw - 162.0,
                MARGIN_T + 18.0 + 18.0 * i as f64,
                esc(&s.label)
            ));
        }

        svg.push_str("</svg>\n");
        std::fs::write(path, svg)
    }
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(lo.is_finite() && hi.is_finite()) {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

fn pad_range(lo: &mut f64, hi: &mut f64) {
    if *hi <= *lo {
        *lo -= 1.0;
        *hi += 1.0;
    } else {
        let pad = 0.05 * (*hi - *lo);
        *lo -= pad;
        *hi += pad;
    }
}

fn ticks(lo: f64, hi: f64, log: bool) -> Vec<f64> {
    if log {
        let decades: Vec<f64> = ((lo.floor() as i64)..=(hi.ceil() as i64))
            .map(|d| d as f64)
            .filter(|d| *d >= lo && *d <= hi)
            .collect();
        if decades.len() >= 2 {
            return decades;
        }
        // Not enough whole decades in range: linear ticks in log space.
    }
    let span = hi - lo;
    let raw_step = span / 6.0;
    let mag = 10f64.powf(raw_step.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 7.0)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(t);
        t += step;
    }
    out
}

fn tick_label(t: f64, log: bool) -> String {
    let v = if log { 10f64.powf(t) } else { t };
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e4).contains(&a) {
        format!("{v:.1e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
