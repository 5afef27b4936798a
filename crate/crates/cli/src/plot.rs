//! Standalone SVG line charts with error bars, rendered from sweep CSV
//! files.

use crate::report::SweepReport;
use std::io;
use std::path::Path;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 56.0;

/// Reads a sweep CSV and writes its chart; the CSV is the only input.
pub fn plot_csv(csv_path: &Path, svg_path: &Path) -> io::Result<()> {
    let report = SweepReport::from_csv(csv_path)?;
    std::fs::write(svg_path, sweep_svg(&report))
}

/// Mean correlation against the swept variable, one error bar per point.
pub fn sweep_svg(report: &SweepReport) -> String {
    let rows = &report.rows;
    let (x_min, x_max) = rows.iter().fold((f64::MAX, f64::MIN), |(lo, hi), r| {
        (lo.min(r.value), hi.max(r.value))
    });
    let (x_min, x_max) = pad_range(x_min, x_max);
    let mut y_min = f64::MAX;
    let mut y_max = f64::MIN;
    for r in rows {
        y_min = y_min.min(r.mean_correlation - r.std_correlation);
        y_max = y_max.max(r.mean_correlation + r.std_correlation);
    }
    let (y_min, y_max) = pad_range(y_min, y_max);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |v: f64| MARGIN_LEFT + (v - x_min) / (x_max - x_min) * plot_w;
    let sy = |v: f64| MARGIN_TOP + (y_max - v) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{} sweep</text>\n",
        WIDTH / 2.0,
        escape(&report.variable_name)
    ));

    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{l}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{l}\" y1=\"{t}\" x2=\"{l}\" y2=\"{b}\" stroke=\"black\"/>\n",
        l = MARGIN_LEFT,
        r = WIDTH - MARGIN_RIGHT,
        t = MARGIN_TOP,
        b = HEIGHT - MARGIN_BOTTOM
    ));
    for i in 0..=4 {
        let fx = x_min + (x_max - x_min) * i as f64 / 4.0;
        let fy = y_min + (y_max - y_min) * i as f64 / 4.0;
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            sx(fx),
            HEIGHT - MARGIN_BOTTOM + 18.0,
            trim_number(fx)
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            MARGIN_LEFT - 6.0,
            sy(fy) + 4.0,
            trim_number(fy)
        ));
        svg.push_str(&format!(
            "<line x1=\"{l}\" y1=\"{y:.1}\" x2=\"{r}\" y2=\"{y:.1}\" stroke=\"#dddddd\"/>\n",
            l = MARGIN_LEFT,
            r = WIDTH - MARGIN_RIGHT,
            y = sy(fy)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(&report.variable_name)
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">mean |Pearson| correlation</text>\n",
        HEIGHT / 2.0,
        HEIGHT / 2.0
    ));

    // Error bars.
    for r in rows {
        let x = sx(r.value);
        let y_lo = sy(r.mean_correlation - r.std_correlation);
        let y_hi = sy(r.mean_correlation + r.std_correlation);
        svg.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{y_hi:.1}\" x2=\"{x:.1}\" y2=\"{y_lo:.1}\" stroke=\"#888888\"/>\n<line x1=\"{:.1}\" y1=\"{y_hi:.1}\" x2=\"{:.1}\" y2=\"{y_hi:.1}\" stroke=\"#888888\"/>\n<line x1=\"{:.1}\" y1=\"{y_lo:.1}\" x2=\"{:.1}\" y2=\"{y_lo:.1}\" stroke=\"#888888\"/>\n",
            x - 4.0, x + 4.0, x - 4.0, x + 4.0
        ));
    }

    // Line and markers.
    let points: Vec<String> = rows
        .iter()
        .map(|r| format!("{:.1},{:.1}", sx(r.value), sy(r.mean_correlation)))
        .collect();
    svg.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"2\"/>\n",
        points.join(" ")
    ));
    for r in rows {
        svg.push_str(&format!(
            "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3.2\" fill=\"#1f6fb2\"/>\n",
            sx(r.value),
            sy(r.mean_correlation)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn pad_range(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = (hi - lo) * 0.06;
    (lo - pad, hi + pad)
}

fn trim_number(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
