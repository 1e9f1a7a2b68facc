//! Deterministic log-log SVG plots for convergence studies.
//!
//! Output is plain SVG 1.1 with no external resources; identical inputs
//! produce byte-identical files.

/// One plotted curve: (x, y) samples with positive coordinates.
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// A dashed reference line of fixed slope in log-log space, anchored near
/// the last point of the series it annotates.
pub struct RefLine {
    /// Order p, drawn as y ∝ x^p.
    pub slope: f64,
    /// Index into the series list whose tail anchors this line.
    pub anchor: usize,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 540.0;
const MARGIN_L: f64 = 86.0;
const MARGIN_R: f64 = 180.0;
const MARGIN_T: f64 = 46.0;
const MARGIN_B: f64 = 66.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Render `series` on log-log axes with optional reference slopes.
/// Points with non-positive coordinates are dropped (they have no log).
pub fn log_log_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    refs: &[RefLine],
) -> String {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in series {
        for &(x, y) in &s.points {
            if x > 0.0 && y > 0.0 {
                xs.push(x.log10());
                ys.push(y.log10());
            }
        }
    }
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;

    let (x0, x1) = padded_range(&xs);
    let (y0, y1) = padded_range(&ys);
    let sx = move |lx: f64| MARGIN_L + (lx - x0) / (x1 - x0) * plot_w;
    let sy = move |ly: f64| MARGIN_T + (y1 - ly) / (y1 - y0) * plot_h;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"Helvetica, Arial, sans-serif\" font-size=\"13\">\n"
    ));
    out.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"26\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        fmt(MARGIN_L + plot_w / 2.0),
        escape(title)
    ));

    // Grid lines and tick labels.
    for (lx, label) in ticks(x0, x1) {
        let px = sx(lx);
        out.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#dddddd\"/>\n",
            fmt(px),
            fmt(MARGIN_T),
            fmt(MARGIN_T + plot_h)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{label}</text>\n",
            fmt(px),
            fmt(MARGIN_T + plot_h + 20.0)
        ));
    }
    for (ly, label) in ticks(y0, y1) {
        let py = sy(ly);
        out.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{2}\" x2=\"{1}\" y2=\"{2}\" stroke=\"#dddddd\"/>\n",
            fmt(MARGIN_L),
            fmt(MARGIN_L + plot_w),
            fmt(py)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{label}</text>\n",
            fmt(MARGIN_L - 8.0),
            fmt(py + 4.0)
        ));
    }

    // Axes frame and labels.
    out.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333333\"/>\n",
        fmt(MARGIN_L),
        fmt(MARGIN_T),
        fmt(plot_w),
        fmt(plot_h)
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        fmt(MARGIN_L + plot_w / 2.0),
        fmt(HEIGHT - 18.0),
        escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"24\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 24 {})\">{}</text>\n",
        fmt(MARGIN_T + plot_h / 2.0),
        fmt(MARGIN_T + plot_h / 2.0),
        escape(y_label)
    ));

    // Reference slopes: dashed grey segments anchored at the tail of the
    // series they annotate, spanning the last stretch of its x-range.
    for r in refs {
        let Some(s) = series.get(r.anchor) else { continue };
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .filter(|&&(x, y)| x > 0.0 && y > 0.0)
            .map(|&(x, y)| (x.log10(), y.log10()))
            .collect();
        if pts.len() < 2 {
            continue;
        }
        let (lx1, ly1) = pts[pts.len() - 1];
        let lx0q = pts[0].0;
        // Offset the line slightly below the data so it does not overdraw.
        let shift = -0.12;
        let a = (lx0q, ly1 + r.slope * (lx0q - lx1) + shift);
        let b = (lx1, ly1 + shift);
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#888888\" \
             stroke-dasharray=\"6 4\"/>\n",
            fmt(sx(a.0)),
            fmt(sy(a.1)),
            fmt(sx(b.0)),
            fmt(sy(b.1))
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" fill=\"#888888\">slope {}</text>\n",
            fmt(sx(b.0) + 6.0),
            fmt(sy(b.1) + 4.0),
            trim_float(r.slope)
        ));
    }

    // Data series: polyline plus circle markers, legend at the right.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .filter(|&&(x, y)| x > 0.0 && y > 0.0)
            .map(|&(x, y)| (sx(x.log10()), sy(y.log10())))
            .collect();
        if !pts.is_empty() {
            let path: Vec<String> =
                pts.iter().map(|&(px, py)| format!("{},{}", fmt(px), fmt(py))).collect();
            out.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.8\"/>\n",
                path.join(" "),
                color
            ));
            for &(px, py) in &pts {
                out.push_str(&format!(
                    "<circle cx=\"{}\" cy=\"{}\" r=\"3.2\" fill=\"{}\"/>\n",
                    fmt(px),
                    fmt(py),
                    color
                ));
            }
        }
        let ly = MARGIN_T + 14.0 + 22.0 * i as f64;
        let lx = MARGIN_L + plot_w + 16.0;
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"1.8\"/>\n",
            fmt(lx),
            fmt(ly - 4.0),
            fmt(lx + 22.0),
            fmt(ly - 4.0),
            color
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            fmt(lx + 28.0),
            fmt(ly),
            escape(&s.name)
        ));
    }

    out.push_str("</svg>\n");
    out
}

/// Tick positions (in log10 units) with labels.  Decades get `1e±d`
/// labels; when fewer than three decade lines land in range, 2× and 5×
/// subticks are added so short axes still show a scale.
fn ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let in_range = |v: f64| v >= lo - 1e-9 && v <= hi + 1e-9;
    let decades: Vec<i64> = (lo.floor() as i64..=hi.ceil() as i64)
        .filter(|&d| in_range(d as f64))
        .collect();
    let mut out: Vec<(f64, String)> =
        decades.iter().map(|&d| (d as f64, format!("1e{d}"))).collect();
    if decades.len() < 3 {
        for d in lo.floor() as i64 - 1..=hi.ceil() as i64 {
            for m in [2.0f64, 5.0] {
                let lv = d as f64 + m.log10();
                if in_range(lv) {
                    out.push((lv, format!("{}e{d}", m as i64)));
                }
            }
        }
        out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    }
    if out.len() < 3 {
        // Sub-decade span: fall back to evenly spaced log ticks.
        out = [0.08, 0.36, 0.64, 0.92]
            .iter()
            .map(|f| {
                let lv = lo + f * (hi - lo);
                let d = lv.floor() as i64;
                (lv, format!("{:.1}e{d}", 10f64.powf(lv - d as f64)))
            })
            .collect();
    }
    out
}

/// Log-range with 6% padding; degenerate ranges get a half-decade margin.
fn padded_range(vals: &[f64]) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in vals {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-9 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.06 * (hi - lo);
    (lo - pad, hi + pad)
}

fn trim_float(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_is_deterministic_and_well_formed() {
        let series = vec![
            Series { name: "L2".into(), points: vec![(0.1, 1e-2), (0.05, 1.2e-3), (0.025, 1.5e-4)] },
            Series { name: "H1".into(), points: vec![(0.1, 1e-1), (0.05, 2.6e-2), (0.025, 6.4e-3)] },
        ];
        let refs = vec![RefLine { slope: 3.0, anchor: 0 }, RefLine { slope: 2.0, anchor: 1 }];
        let a = log_log_plot("t", "h", "error", &series, &refs);
        let b = log_log_plot("t", "h", "error", &series, &refs);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.ends_with("</svg>\n"));
        assert_eq!(a.matches("<polyline").count(), 2);
        assert_eq!(a.matches("stroke-dasharray").count(), 2);
        assert!(a.contains("slope 3"));
    }

    #[test]
    fn drops_nonpositive_points() {
        let series =
            vec![Series { name: "x".into(), points: vec![(0.1, 0.0), (0.05, 1e-3), (0.025, 1e-4)] }];
        let svg = log_log_plot("t", "h", "e", &series, &[]);
        // Only two markers survive.
        assert_eq!(svg.matches("<circle").count(), 2);
    }
}
