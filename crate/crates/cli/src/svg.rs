//! Minimal native SVG rendering: line plots with dashed overlays and a
//! downsampled heatmap. No plotting dependency; output is deterministic.

use std::fmt::Write;

const W: f64 = 860.0;
const H: f64 = 560.0;
const ML: f64 = 70.0;
const MR: f64 = 20.0;
const MT: f64 = 40.0;
const MB: f64 = 55.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
    /// shares a palette slot with its solid partner
    pub color_index: usize,
}

pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(mag * 10.0);
    let start = (lo / step).ceil() * step;
    let mut out = Vec::new();
    let mut v = start;
    while v <= hi + 1e-12 * step {
        out.push(v);
        v += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e4).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    }
}

impl LinePlot {
    pub fn render(&self) -> String {
        let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &self.series {
            for &(x, y) in &s.points {
                if x.is_finite() && y.is_finite() {
                    x0 = x0.min(x);
                    x1 = x1.max(x);
                    y0 = y0.min(y);
                    y1 = y1.max(y);
                }
            }
        }
        if !x0.is_finite() {
            x0 = 0.0;
            x1 = 1.0;
            y0 = 0.0;
            y1 = 1.0;
        }
        if y1 - y0 < 1e-12 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let pad = 0.04 * (y1 - y0);
        y0 -= pad;
        y1 += pad;
        let px = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
        let py = |y: f64| H - MB - (y - y0) / (y1 - y0) * (H - MT - MB);
        let mut s = String::new();
        writeln!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
             viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\">"
        )
        .unwrap();
        s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        // axes and ticks
        for t in nice_ticks(x0, x1, 8) {
            let x = px(t);
            write!(
                s,
                "<line x1=\"{x:.2}\" y1=\"{}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"#ddd\"/>\n\
                 <text x=\"{x:.2}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
                MT,
                H - MB,
                H - MB + 18.0,
                fmt_tick(t)
            )
            .unwrap();
        }
        for t in nice_ticks(y0, y1, 7) {
            let y = py(t);
            write!(
                s,
                "<line x1=\"{ML}\" y1=\"{y:.2}\" x2=\"{}\" y2=\"{y:.2}\" stroke=\"#ddd\"/>\n\
                 <text x=\"{}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">{}</text>\n",
                W - MR,
                ML - 6.0,
                y + 4.0,
                fmt_tick(t)
            )
            .unwrap();
        }
        writeln!(
            s,
            "<rect x=\"{ML}\" y=\"{MT}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>",
            W - ML - MR,
            H - MT - MB
        )
        .unwrap();
        // series
        for sr in &self.series {
            let color = PALETTE[sr.color_index % PALETTE.len()];
            let dash = if sr.dashed { " stroke-dasharray=\"7,5\"" } else { "" };
            let mut path = String::new();
            let mut pen = false;
            for &(x, y) in &sr.points {
                if !(x.is_finite() && y.is_finite()) {
                    pen = false;
                    continue;
                }
                write!(path, "{}{:.2},{:.2} ", if pen { "L" } else { "M" }, px(x), py(y)).unwrap();
                pen = true;
            }
            writeln!(
                s,
                "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.4\"{dash}/>",
                path.trim_end()
            )
            .unwrap();
        }
        // legend
        let mut ly = MT + 14.0;
        for sr in &self.series {
            let color = PALETTE[sr.color_index % PALETTE.len()];
            let dash = if sr.dashed { " stroke-dasharray=\"7,5\"" } else { "" };
            write!(
                s,
                "<line x1=\"{}\" y1=\"{ly:.1}\" x2=\"{}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"{dash}/>\n\
                 <text x=\"{}\" y=\"{:.1}\" font-size=\"12\">{}</text>\n",
                ML + 12.0,
                ML + 44.0,
                ML + 50.0,
                ly + 4.0,
                xml_escape(&sr.label)
            )
            .unwrap();
            ly += 16.0;
        }
        write!(
            s,
            "<text x=\"{:.1}\" y=\"22\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n\
             <text x=\"16\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" \
             transform=\"rotate(-90 16 {:.1})\">{}</text>\n</svg>\n",
            0.5 * W,
            xml_escape(&self.title),
            0.5 * W,
            H - 12.0,
            xml_escape(&self.x_label),
            0.5 * H,
            0.5 * H,
            xml_escape(&self.y_label)
        )
        .unwrap();
        s
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Grayscale-to-blue heatmap of a matrix sampled by `value(i, j)` on an
/// (n_rows × n_cols) lattice; rows map to y (bottom-up), columns to x.
pub struct Heatmap {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

impl Heatmap {
    pub fn render<F: Fn(usize, usize) -> f64>(
        &self,
        n_rows: usize,
        n_cols: usize,
        value: F,
    ) -> String {
        let mut vals = vec![0.0; n_rows * n_cols];
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for r in 0..n_rows {
            for c in 0..n_cols {
                let v = value(r, c);
                vals[r * n_cols + c] = v;
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !(hi > lo) {
            hi = lo + 1.0;
        }
        let cw = (W - ML - MR) / n_cols as f64;
        let ch = (H - MT - MB) / n_rows as f64;
        let mut s = String::new();
        write!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
             viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        )
        .unwrap();
        for r in 0..n_rows {
            for c in 0..n_cols {
                let u = (vals[r * n_cols + c] - lo) / (hi - lo);
                // deep blue (low) through white (high)
                let red = (255.0 * u) as u8;
                let green = (255.0 * u) as u8;
                let blue = (150.0 + 105.0 * u) as u8;
                let x = ML + c as f64 * cw;
                let y = H - MB - (r + 1) as f64 * ch;
                writeln!(
                    s,
                    "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
                     fill=\"rgb({red},{green},{blue})\"/>",
                    cw + 0.5,
                    ch + 0.5
                )
                .unwrap();
            }
        }
        writeln!(
            s,
            "<rect x=\"{ML}\" y=\"{MT}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>",
            W - ML - MR,
            H - MT - MB
        )
        .unwrap();
        for (frac, v) in [(0.0, self.x_range.0), (0.5, 0.5 * (self.x_range.0 + self.x_range.1)), (1.0, self.x_range.1)] {
            let x = ML + frac * (W - ML - MR);
            writeln!(
                s,
                "<text x=\"{x:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
                H - MB + 18.0,
                fmt_tick(v)
            )
            .unwrap();
        }
        for (frac, v) in [(0.0, self.y_range.0), (0.5, 0.5 * (self.y_range.0 + self.y_range.1)), (1.0, self.y_range.1)] {
            let y = H - MB - frac * (H - MT - MB);
            writeln!(
                s,
                "<text x=\"{:.1}\" y=\"{y:.1}\" font-size=\"12\" text-anchor=\"end\">{}</text>",
                ML - 6.0,
                fmt_tick(v)
            )
            .unwrap();
        }
        write!(
            s,
            "<text x=\"{:.1}\" y=\"22\" font-size=\"15\" text-anchor=\"middle\">{} \
             (min {:.4}, max {:.4})</text>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n\
             <text x=\"16\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" \
             transform=\"rotate(-90 16 {:.1})\">{}</text>\n</svg>\n",
            0.5 * W,
            xml_escape(&self.title),
            lo,
            hi,
            0.5 * W,
            H - 12.0,
            xml_escape(&self.x_label),
            0.5 * H,
            0.5 * H,
            xml_escape(&self.y_label)
        )
        .unwrap();
        s
    }
}
