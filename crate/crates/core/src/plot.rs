//! Minimal self-contained SVG line plots, written directly with no plotting
//! dependency. Plots are a convenience output, never a test surface.

use std::fmt::Write as _;
use std::path::Path;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

/// One polyline with a label for the legend.
pub struct PlotSeries<'a> {
    pub label: &'a str,
    /// Any SVG color, e.g. "#b22222" or "gray".
    pub color: &'a str,
    pub points: &'a [(f64, f64)],
}

/// Write an SVG with shared axes for all series.
pub fn write_line_plot(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[PlotSeries<'_>],
) -> std::io::Result<()> {
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in s.points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if !x_min.is_finite() || x_max == x_min {
        x_min -= 0.5;
        x_max = x_min + 1.0;
    }
    if !y_min.is_finite() || y_max == y_min {
        y_min -= 0.5;
        y_max = y_min + 1.0;
    }
    // A little headroom above and below the data.
    let y_pad = 0.05 * (y_max - y_min);
    let (y_min, y_max) = (y_min - y_pad, y_max + y_pad);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let to_px = |x: f64, y: f64| -> (f64, f64) {
        (
            MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w,
            MARGIN_TOP + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h,
        )
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    );
    // Frame.
    let _ = writeln!(
        svg,
        "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{plot_w}\" height=\"{plot_h}\" fill=\"none\" stroke=\"black\"/>"
    );
    // Axis labels and min/max tick labels.
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(y_label)
    );
    for (value, frac) in [(x_min, 0.0), (x_max, 1.0)] {
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
            MARGIN_LEFT + frac * plot_w,
            MARGIN_TOP + plot_h + 16.0,
            format_tick(value)
        );
    }
    for (value, frac) in [(y_min, 1.0), (y_max, 0.0)] {
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>",
            MARGIN_LEFT - 6.0,
            MARGIN_TOP + frac * plot_h + 4.0,
            format_tick(value)
        );
    }
    // Series.
    for (i, s) in series.iter().enumerate() {
        let mut d = String::new();
        for &(x, y) in s.points {
            let (px, py) = to_px(x, y);
            let _ = write!(d, "{px:.2},{py:.2} ");
        }
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>",
            d.trim_end(),
            s.color
        );
        let legend_y = MARGIN_TOP + 16.0 + 18.0 * i as f64;
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{legend_y}\" x2=\"{}\" y2=\"{legend_y}\" stroke=\"{}\" stroke-width=\"2\"/>",
            MARGIN_LEFT + plot_w - 150.0,
            MARGIN_LEFT + plot_w - 120.0,
            s.color
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            MARGIN_LEFT + plot_w - 112.0,
            legend_y + 4.0,
            escape(s.label)
        );
    }
    let _ = writeln!(svg, "</svg>");
    std::fs::write(path, svg)
}

fn format_tick(value: f64) -> String {
    if value == 0.0 {
        "0".to_string()
    } else if value.abs() >= 0.01 && value.abs() < 10_000.0 {
        format!("{value:.3}")
    } else {
        format!("{value:.2e}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn writes_well_formed_svg() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("p.svg");
        let points: Vec<(f64, f64)> = (0..50)
            .map(|i| (i as f64, (i as f64 / 8.0).sin()))
            .collect();
        write_line_plot(
            &path,
            "test",
            "x",
            "y",
            &[PlotSeries {
                label: "sine",
                color: "gray",
                points: &points,
            }],
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("<svg"));
        assert!(text.trim_end().ends_with("</svg>"));
        assert!(text.contains("polyline"));
    }
}
