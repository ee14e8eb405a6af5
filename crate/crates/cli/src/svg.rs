//! Minimal SVG line-chart writer: one or more named series on log-scaled
//! axes (falling back to linear when values are not positive).

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

pub struct Series<'a> {
    pub label: String,
    pub points: &'a [(f64, f64)],
}

struct Axis {
    min: f64,
    max: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64> + Clone) -> Axis {
        let log = values.clone().all(|v| v > 0.0);
        let transform = |v: f64| if log { v.log10() } else { v };
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in values {
            let v = transform(v);
            min = min.min(v);
            max = max.max(v);
        }
        if !min.is_finite() || !max.is_finite() {
            min = 0.0;
            max = 1.0;
        }
        if (max - min).abs() < 1e-12 {
            max = min + 1.0;
        }
        Axis { min, max, log }
    }

    fn project(&self, v: f64, lo: f64, hi: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        lo + (v - self.min) / (self.max - self.min) * (hi - lo)
    }

    fn label_at(&self, frac: f64) -> String {
        let v = self.min + frac * (self.max - self.min);
        let v = if self.log { 10f64.powf(v) } else { v };
        format!("{v:.3e}")
    }
}

/// Render the chart; series points are `(x, y)` pairs.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let ys = series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
    let x_axis = Axis::fit(xs);
    let y_axis = Axis::fit(ys);

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    out.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));

    // Frame and tick labels.
    let (x0, x1) = (MARGIN_L, WIDTH - MARGIN_R);
    let (y0, y1) = (HEIGHT - MARGIN_B, MARGIN_T);
    out.push_str(&format!(
        "<rect x=\"{x0}\" y=\"{y1}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n",
        x1 - x0,
        y0 - y1
    ));
    for frac in [0.0, 0.5, 1.0] {
        let x = x0 + frac * (x1 - x0);
        out.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            y0 + 18.0,
            x_axis.label_at(frac)
        ));
        let y = y0 + frac * (y1 - y0);
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            x0 - 6.0,
            y + 4.0,
            y_axis.label_at(frac)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    ));

    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .filter(|&&(x, y)| {
                (!x_axis.log || x > 0.0) && (!y_axis.log || y > 0.0)
            })
            .map(|&(x, y)| {
                format!(
                    "{:.2},{:.2}",
                    x_axis.project(x, x0, x1),
                    y_axis.project(y, y0, y1)
                )
            })
            .collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            path.join(" ")
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>\n",
            x1 - 150.0,
            y1 + 16.0 + 16.0 * k as f64,
            escape(&s.label)
        ));
    }
    out.push_str("</svg>\n");
    out
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_contains_series_and_axes() {
        let points = [(1.0, 1.0), (2.0, 0.5), (4.0, 0.25)];
        let svg = line_chart(
            "demo",
            "passes",
            "error",
            &[Series {
                label: "run".into(),
                points: &points,
            }],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("run"));
        assert!(svg.ends_with("</svg>\n"));
    }
}
