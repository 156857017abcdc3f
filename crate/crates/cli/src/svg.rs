//! Minimal self-contained SVG line charts: fixed canvas, one polyline per
//! series, no external fonts or scripts. Output depends only on the input
//! series, so identical sweeps produce identical bytes.

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 614.0;
const TOP: f64 = 34.0;
const BOTTOM: f64 = 360.0;

const PALETTE: [&str; 8] = [
    "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c",
];

/// Largest of 1, 2, 5 times a power of ten that divides the range into at
/// most `slots` steps.
fn nice_step(range: f64, slots: usize) -> f64 {
    let raw = range / slots as f64;
    let mag = 10f64.powf(raw.log10().floor());
    for mult in [1.0, 2.0, 5.0, 10.0] {
        if mag * mult >= raw {
            return mag * mult;
        }
    }
    mag * 10.0
}

/// One chart: every series drawn over a shared axis box with bottom/left
/// tick labels and a legend. Empty series are skipped; an entirely empty
/// chart still renders its axes.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> String {
    let points: Vec<(f64, f64)> = series.iter().flat_map(|(_, pts)| pts.iter().copied()).collect();
    let (x_min, x_max) = match points.iter().map(|p| p.0).fold(None, min_max_fold) {
        Some((lo, hi)) if lo < hi => (lo, hi),
        Some((lo, _)) => (lo - 0.5, lo + 0.5),
        None => (0.0, 1.0),
    };
    let (y_min, y_max) = match points.iter().map(|p| p.1).fold(None, min_max_fold) {
        Some((lo, hi)) if lo < hi => (lo - (hi - lo) * 0.05, hi + (hi - lo) * 0.05),
        Some((lo, _)) => (lo - 1.0, lo + 1.0),
        None => (0.0, 1.0),
    };
    let sx = |x: f64| LEFT + (x - x_min) / (x_max - x_min) * (RIGHT - LEFT);
    let sy = |y: f64| BOTTOM - (y - y_min) / (y_max - y_min) * (BOTTOM - TOP);

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"18\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        (LEFT + RIGHT) / 2.0,
        escape(title)
    ));
    out.push_str(&format!(
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{:.1}\" height=\"{:.1}\" \
         fill=\"none\" stroke=\"#444444\"/>\n",
        RIGHT - LEFT,
        BOTTOM - TOP
    ));

    let x_step = nice_step(x_max - x_min, 8);
    let mut x = (x_min / x_step).ceil() * x_step;
    while x <= x_max + 1e-12 {
        let px = sx(x);
        out.push_str(&format!(
            "<line x1=\"{px:.2}\" y1=\"{BOTTOM}\" x2=\"{px:.2}\" y2=\"{:.1}\" stroke=\"#444444\"/>\n",
            BOTTOM + 5.0
        ));
        out.push_str(&format!(
            "<text x=\"{px:.2}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            BOTTOM + 19.0,
            trim_float(x)
        ));
        x += x_step;
    }
    let y_step = nice_step(y_max - y_min, 7);
    let mut y = (y_min / y_step).ceil() * y_step;
    while y <= y_max + 1e-12 {
        let py = sy(y);
        out.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{py:.2}\" x2=\"{LEFT}\" y2=\"{py:.2}\" stroke=\"#444444\"/>\n",
            LEFT - 5.0
        ));
        out.push_str(&format!(
            "<line x1=\"{LEFT}\" y1=\"{py:.2}\" x2=\"{RIGHT}\" y2=\"{py:.2}\" \
             stroke=\"#dddddd\"/>\n"
        ));
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
            LEFT - 9.0,
            py + 4.0,
            trim_float(y)
        ));
        y += y_step;
    }
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
        (LEFT + RIGHT) / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 18 {:.1})\">{}</text>\n",
        (TOP + BOTTOM) / 2.0,
        (TOP + BOTTOM) / 2.0,
        escape(y_label)
    ));

    for (i, (label, pts)) in series.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            path.join(" ")
        ));
        for &(x, y) in pts {
            out.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                sx(x),
                sy(y)
            ));
        }
        let ly = TOP + 16.0 + i as f64 * 16.0;
        out.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" \
             stroke=\"{color}\" stroke-width=\"2\"/>\n",
            LEFT + 12.0,
            LEFT + 34.0
        ));
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\">{}</text>\n",
            LEFT + 40.0,
            ly + 4.0,
            escape(label)
        ));
    }
    out.push_str("</svg>\n");
    out
}

fn min_max_fold(acc: Option<(f64, f64)>, v: f64) -> Option<(f64, f64)> {
    match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Tick label without trailing zero noise.
fn trim_float(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_is_deterministic_and_well_formed() {
        let series = vec![
            ("alpha".to_string(), vec![(0.05, 20.0), (0.1, 18.5), (0.3, 12.0)]),
            ("beta".to_string(), vec![(0.05, 25.0), (0.1, 24.0), (0.3, 19.0)]),
        ];
        let a = line_chart("quality vs loss", "p", "dB", &series);
        let b = line_chart("quality vs loss", "p", "dB", &series);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.trim_end().ends_with("</svg>"));
        assert_eq!(a.matches("<polyline").count(), 2);
        assert!(a.contains("alpha") && a.contains("beta"));
    }

    #[test]
    fn degenerate_inputs_still_render() {
        let one_point = vec![("solo".to_string(), vec![(0.1, 5.0)])];
        let svg = line_chart("t", "x", "y", &one_point);
        assert!(svg.contains("<circle"));
        let empty: Vec<(String, Vec<(f64, f64)>)> = vec![];
        let svg = line_chart("t", "x", "y", &empty);
        assert!(svg.contains("<rect"));
    }

    #[test]
    fn escapes_markup_in_labels() {
        let series = vec![("a<b&c".to_string(), vec![(0.0, 1.0), (1.0, 2.0)])];
        let svg = line_chart("x<y", "p", "dB", &series);
        assert!(svg.contains("a&lt;b&amp;c"));
        assert!(svg.contains("x&lt;y"));
        assert!(!svg.contains("a<b"));
    }
}
