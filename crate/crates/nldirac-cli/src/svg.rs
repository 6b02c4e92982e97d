//! Standalone SVG rendering: line plots (profiles, charge curves,
//! eigenvalue-ratio convergence) and the spectrum scatter with its band
//! rays. Everything is emitted with fixed-precision coordinates from
//! canonical inputs, so the artifacts are byte-deterministic.

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 48.0;
const MARGIN_B: f64 = 56.0;

/// One plotted series.
pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
    pub markers: bool,
}

/// A horizontal or vertical reference line at a data value.
pub struct GuideLine {
    pub value: f64,
    pub label: String,
    pub vertical: bool,
}

fn px(v: f64) -> String {
    format!("{v:.2}")
}

/// Tick label: short fixed-point for moderate magnitudes, scientific
/// otherwise, trailing zeros trimmed.
fn label_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    let s = if (1e-2..1e4).contains(&a) {
        format!("{v:.4}")
    } else {
        return format!("{v:.2e}");
    };
    let trimmed = s.trim_end_matches('0').trim_end_matches('.');
    trimmed.to_string()
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn from_ranges(x: (f64, f64), y: (f64, f64)) -> Frame {
        let pad = |lo: f64, hi: f64| -> (f64, f64) {
            if hi > lo {
                let p = 0.05 * (hi - lo);
                (lo - p, hi + p)
            } else {
                let p = 0.5_f64.max(0.1 * lo.abs());
                (lo - p, hi + p)
            }
        };
        let (x_min, x_max) = pad(x.0, x.1);
        let (y_min, y_max) = pad(y.0, y.1);
        Frame { x_min, x_max, y_min, y_max }
    }

    fn sx(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn sy(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_B
            - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_T - MARGIN_B)
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }
}

fn document_open(title: &str) -> String {
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\" font-family=\"Helvetica, Arial, sans-serif\">\n",
            "<rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"#ffffff\"/>\n",
            "<text x=\"{tx}\" y=\"26\" font-size=\"16\" fill=\"#202124\">{title}</text>\n"
        ),
        w = WIDTH,
        h = HEIGHT,
        tx = MARGIN_L,
        title = title
    )
}

fn axes(frame: &Frame, x_label: &str, y_label: &str) -> String {
    let mut s = String::new();
    let (left, right) = (MARGIN_L, WIDTH - MARGIN_R);
    let (top, bottom) = (MARGIN_T, HEIGHT - MARGIN_B);
    s.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#dadce0\"/>\n",
        px(left),
        px(top),
        px(right - left),
        px(bottom - top)
    ));
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = frame.x_min + f * (frame.x_max - frame.x_min);
        let yv = frame.y_min + f * (frame.y_max - frame.y_min);
        let xp = frame.sx(xv);
        let yp = frame.sy(yv);
        s.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"#f1f3f4\"/>\n",
            px(top),
            px(bottom),
            x = px(xp)
        ));
        s.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#f1f3f4\"/>\n",
            px(left),
            px(right),
            y = px(yp)
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"#5f6368\" text-anchor=\"middle\">{}</text>\n",
            px(xp),
            px(bottom + 16.0),
            label_num(xv)
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"#5f6368\" text-anchor=\"end\">{}</text>\n",
            px(left - 6.0),
            px(yp + 4.0),
            label_num(yv)
        ));
    }
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" fill=\"#202124\" text-anchor=\"middle\">{}</text>\n",
        px((left + right) / 2.0),
        px(HEIGHT - 14.0),
        x_label
    ));
    s.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-size=\"13\" fill=\"#202124\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">{}</text>\n",
        px((top + bottom) / 2.0),
        px((top + bottom) / 2.0),
        y_label
    ));
    s
}

/// Multi-series line plot with optional reference lines.
pub fn line_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series<'_>],
    guides: &[GuideLine],
) -> String {
    let mut x_rng = (f64::INFINITY, f64::NEG_INFINITY);
    let mut y_rng = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for &(x, y) in &s.points {
            x_rng = (x_rng.0.min(x), x_rng.1.max(x));
            y_rng = (y_rng.0.min(y), y_rng.1.max(y));
        }
    }
    for g in guides {
        if g.vertical {
            x_rng = (x_rng.0.min(g.value), x_rng.1.max(g.value));
        } else {
            y_rng = (y_rng.0.min(g.value), y_rng.1.max(g.value));
        }
    }
    if !x_rng.0.is_finite() {
        x_rng = (0.0, 1.0);
        y_rng = (0.0, 1.0);
    }
    let frame = Frame::from_ranges(x_rng, y_rng);

    let mut doc = document_open(title);
    doc.push_str(&axes(&frame, x_label, y_label));

    for g in guides {
        let (x1, y1, x2, y2) = if g.vertical {
            let xp = frame.sx(g.value);
            (xp, MARGIN_T, xp, HEIGHT - MARGIN_B)
        } else {
            let yp = frame.sy(g.value);
            (MARGIN_L, yp, WIDTH - MARGIN_R, yp)
        };
        doc.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#80868b\" stroke-dasharray=\"6 4\"/>\n",
            px(x1),
            px(y1),
            px(x2),
            px(y2)
        ));
        doc.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"#5f6368\">{}</text>\n",
            px(x2 - 150.0),
            px(y1 - 6.0),
            g.label
        ));
    }

    for s in series {
        if s.points.is_empty() {
            continue;
        }
        let coords: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{},{}", px(frame.sx(x)), px(frame.sy(y))))
            .collect();
        let dash = if s.dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        doc.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"{}/>\n",
            coords.join(" "),
            s.color,
            dash
        ));
        if s.markers {
            for &(x, y) in &s.points {
                doc.push_str(&format!(
                    "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{}\"/>\n",
                    px(frame.sx(x)),
                    px(frame.sy(y)),
                    s.color
                ));
            }
        }
    }

    for (i, s) in series.iter().enumerate() {
        let y = MARGIN_T + 14.0 + 16.0 * i as f64;
        let x = WIDTH - MARGIN_R - 170.0;
        doc.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
            px(x),
            px(x + 22.0),
            s.color,
            y = px(y - 4.0)
        ));
        doc.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"#202124\">{}</text>\n",
            px(x + 28.0),
            px(y),
            s.label
        ));
    }

    doc.push_str("</svg>\n");
    doc
}

/// Color for one eigenvalue classification tag.
fn class_color(class: &str) -> &'static str {
    match class {
        "point-real" => "#d93025",
        "point-imaginary-gap" => "#1a73e8",
        "essential-band-artifact" => "#9aa0a6",
        _ => "#f9ab00",
    }
}

/// Spectrum scatter: eigenvalue dots colored by class, thick band rays
/// along the imaginary axis starting at the gap edges, tick marks at the
/// edges, and ring markers on the real eigenvalue pair. The view is zoomed
/// to the gap scale, so the rays run off the frame like the essential
/// spectrum they discretize.
pub fn spectrum_svg(
    title: &str,
    eigenvalues: &[(f64, f64, &str)],
    band_edge: f64,
    real_pairs: &[f64],
) -> String {
    let lambda_max = real_pairs.first().copied().unwrap_or(0.0);
    let x_half = (2.5 * band_edge).max(1.6 * lambda_max).max(1e-12);
    let y_half = (8.0 * band_edge).max(1e-12);
    let frame = Frame::from_ranges((-x_half, x_half), (-y_half, y_half));

    let mut doc = document_open(title);
    doc.push_str(&axes(&frame, "Re", "Im"));

    // Axis cross through the origin.
    doc.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#dadce0\"/>\n",
        px(frame.sx(frame.x_min)),
        px(frame.sy(0.0)),
        px(frame.sx(frame.x_max)),
        px(frame.sy(0.0))
    ));
    doc.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#dadce0\"/>\n",
        px(frame.sx(0.0)),
        px(frame.sy(frame.y_min)),
        px(frame.sx(0.0)),
        px(frame.sy(frame.y_max))
    ));

    // Essential-band rays from the gap edges outward.
    for sign in [1.0, -1.0] {
        let y_from = frame.sy(sign * band_edge);
        let y_to = frame.sy(sign * frame_edge(y_half));
        doc.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"#5f6368\" stroke-width=\"7\" stroke-opacity=\"0.30\" stroke-linecap=\"butt\"/>\n",
            px(y_from),
            px(y_to),
            x = px(frame.sx(0.0))
        ));
        // Gap-edge tick and label.
        doc.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#202124\"/>\n",
            px(frame.sx(0.0) - 8.0),
            px(frame.sx(0.0) + 8.0),
            y = px(y_from)
        ));
        let tag = if sign > 0.0 { "+i(m-|omega|)" } else { "-i(m-|omega|)" };
        doc.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"#202124\">{}</text>\n",
            px(frame.sx(0.0) + 12.0),
            px(y_from + 4.0),
            tag
        ));
    }

    // Ring markers on the real pair.
    for &lambda in real_pairs {
        for sign in [1.0, -1.0] {
            doc.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"7\" fill=\"none\" stroke=\"#d93025\" stroke-width=\"1.5\"/>\n",
                px(frame.sx(sign * lambda)),
                px(frame.sy(0.0))
            ));
        }
    }

    // Eigenvalue dots (view-clipped; the omitted ones are deep in the band).
    let mut shown = 0usize;
    for &(re, im, class) in eigenvalues {
        if !frame.contains(re, im) {
            continue;
        }
        shown += 1;
        doc.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.85\"/>\n",
            px(frame.sx(re)),
            px(frame.sy(im)),
            class_color(class)
        ));
    }

    // Legend.
    let legend = [
        ("point-real", "real pair"),
        ("point-imaginary-gap", "gap (imaginary)"),
        ("essential-band-artifact", "band discretization"),
        ("unresolved", "unresolved"),
    ];
    for (i, (class, label)) in legend.iter().enumerate() {
        let y = MARGIN_T + 14.0 + 16.0 * i as f64;
        let x = WIDTH - MARGIN_R - 180.0;
        doc.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{}\"/>\n",
            px(x),
            px(y - 4.0),
            class_color(class)
        ));
        doc.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"#202124\">{}</text>\n",
            px(x + 10.0),
            px(y),
            label
        ));
    }
    doc.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"#5f6368\">{} of {} eigenvalues in view</text>\n",
        px(MARGIN_L + 6.0),
        px(HEIGHT - MARGIN_B - 8.0),
        shown,
        eigenvalues.len()
    ));

    doc.push_str("</svg>\n");
    doc
}

/// Data-space extent of the band ray: run to the frame edge.
fn frame_edge(y_half: f64) -> f64 {
    1.05 * y_half + 0.05 * y_half
}
