//! Minimal static SVG line plots: stacked panels, one polyline each.

pub struct Panel<'a> {
    pub title: &'a str,
    pub xs: &'a [f64],
    pub ys: &'a [f64],
}

const PANEL_W: f64 = 640.0;
const PANEL_H: f64 = 180.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 28.0;
const MARGIN_B: f64 = 30.0;

pub fn render(panels: &[Panel<'_>]) -> String {
    let total_h = panels.len() as f64 * PANEL_H;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PANEL_W}\" height=\"{total_h}\" \
         viewBox=\"0 0 {PANEL_W} {total_h}\" font-family=\"monospace\" font-size=\"11\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (i, panel) in panels.iter().enumerate() {
        let top = i as f64 * PANEL_H;
        render_panel(&mut out, panel, top);
    }
    out.push_str("</svg>\n");
    out
}

fn render_panel(out: &mut String, panel: &Panel<'_>, top: f64) {
    let (x0, x1) = bounds(panel.xs);
    let (mut y0, mut y1) = bounds(panel.ys);
    if y1 - y0 < 1e-12 {
        // Flat series: open up a symmetric band so the line is visible.
        let pad = 0.5 * y0.abs().max(1e-6);
        y0 -= pad;
        y1 += pad;
    }
    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
    let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| top + MARGIN_T + plot_h - (y - y0) / (y1 - y0) * plot_h;

    out.push_str(&format!(
        "<text x=\"{MARGIN_L}\" y=\"{}\" font-weight=\"bold\">{}</text>\n",
        top + 16.0,
        panel.title
    ));
    out.push_str(&format!(
        "<rect x=\"{MARGIN_L}\" y=\"{}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"#999\"/>\n",
        top + MARGIN_T
    ));
    for (value, anchor_y) in [(y1, top + MARGIN_T + 10.0), (y0, top + MARGIN_T + plot_h)] {
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{anchor_y}\" text-anchor=\"end\">{value:.4}</text>\n",
            MARGIN_L - 6.0
        ));
    }
    for (value, anchor_x) in [(x0, MARGIN_L), (x1, MARGIN_L + plot_w)] {
        out.push_str(&format!(
            "<text x=\"{anchor_x}\" y=\"{}\" text-anchor=\"middle\">{value:.3}</text>\n",
            top + MARGIN_T + plot_h + 16.0
        ));
    }
    let points: Vec<String> = panel
        .xs
        .iter()
        .zip(panel.ys.iter())
        .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
        .collect();
    out.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        points.join(" ")
    ));
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_wellformed_document() {
        let xs = [0.0, 0.5, 1.0];
        let ys = [1.0, 0.5, 0.75];
        let flat = [2.0, 2.0, 2.0];
        let svg = render(&[
            Panel { title: "w(t)", xs: &xs, ys: &ys },
            Panel { title: "v(t)", xs: &xs, ys: &flat },
        ]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
    }
}
