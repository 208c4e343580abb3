//! Plain SVG emitters for scatter plots, line charts, heatmaps and
//! histograms. Output is deterministic for identical input.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Svg {
    body: String,
}

impl Svg {
    fn new(title: &str) -> Self {
        let mut s = Svg {
            body: String::new(),
        };
        s.raw(format!(
            r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#
        ));
        s.text(W / 2.0, 24.0, title, "middle", 16.0);
        s
    }

    fn raw(&mut self, element: String) {
        self.body.push_str(&element);
        self.body.push('\n');
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        self.raw(format!(
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="{width}"/>"#
        ));
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        self.raw(format!(
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r}" fill="{fill}"/>"#
        ));
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        self.raw(format!(
            r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#
        ));
    }

    fn text(&mut self, x: f64, y: f64, s: &str, anchor: &str, size: f64) {
        self.raw(format!(
            r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="{size}" text-anchor="{anchor}">{}</text>"#,
            escape(s)
        ));
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n{}</svg>\n",
            self.body
        )
    }
}

/// Affine map from data range onto a pixel range; a degenerate range is
/// widened so that its single value lands in the middle.
#[derive(Clone, Copy)]
struct Scale {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Scale {
    fn fit(values: impl Iterator<Item = f64>, px_lo: f64, px_hi: f64) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            (lo, hi) = (lo - 0.5, hi + 0.5);
        }
        let pad = 0.05 * (hi - lo);
        Scale {
            lo: lo - pad,
            hi: hi + pad,
            px_lo,
            px_hi,
        }
    }

    fn at(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

fn axes(svg: &mut Svg, x: Scale, y: Scale, x_label: &str, y_label: &str) {
    let (x0, x1, y0, y1) = (MARGIN, W - MARGIN, H - MARGIN, MARGIN);
    svg.line(x0, y0, x1, y0, "black", 1.0);
    svg.line(x0, y0, x0, y1, "black", 1.0);
    for t in 0..=4 {
        let f = t as f64 / 4.0;
        let xv = x.lo + f * (x.hi - x.lo);
        let yv = y.lo + f * (y.hi - y.lo);
        svg.text(x.at(xv), y0 + 16.0, &tick(xv), "middle", 10.0);
        svg.text(x0 - 6.0, y.at(yv) + 3.0, &tick(yv), "end", 10.0);
    }
    svg.text((x0 + x1) / 2.0, H - 16.0, x_label, "middle", 12.0);
    svg.raw(format!(
        r#"<text x="16" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    ));
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 || (v != 0.0 && v.abs() < 0.01) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

/// One point per object with its label, and one segment per `(a, b)` link.
pub fn scatter(
    title: &str,
    points: &[(f64, f64)],
    labels: &[String],
    segments: &[(usize, usize)],
    colors: Option<&[usize]>,
) -> String {
    let mut svg = Svg::new(title);
    let x = Scale::fit(points.iter().map(|p| p.0), MARGIN, W - MARGIN);
    let y = Scale::fit(points.iter().map(|p| p.1), H - MARGIN, MARGIN);
    axes(&mut svg, x, y, "dim 1", "dim 2");
    for &(a, b) in segments {
        let (pa, pb) = (points[a], points[b]);
        svg.line(
            x.at(pa.0),
            y.at(pa.1),
            x.at(pb.0),
            y.at(pb.1),
            "#999999",
            1.0,
        );
    }
    for (i, p) in points.iter().enumerate() {
        let fill = colors.map_or(color(0), |c| color(c[i]));
        svg.circle(x.at(p.0), y.at(p.1), 4.0, fill);
        if let Some(l) = labels.get(i) {
            svg.text(x.at(p.0) + 6.0, y.at(p.1) - 6.0, l, "start", 9.0);
        }
    }
    svg.finish()
}

/// Named series over shared x values; `log_x` spaces x logarithmically.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    xs: &[f64],
    series: &[(String, Vec<f64>)],
    log_x: bool,
) -> String {
    let tx = |v: f64| if log_x { v.log10() } else { v };
    let mut svg = Svg::new(title);
    let x = Scale::fit(xs.iter().map(|&v| tx(v)), MARGIN, W - MARGIN);
    let y = Scale::fit(
        series.iter().flat_map(|s| s.1.iter().copied()),
        H - MARGIN,
        MARGIN,
    );
    let label = if log_x {
        format!("log10 {x_label}")
    } else {
        x_label.to_string()
    };
    axes(&mut svg, x, y, &label, y_label);
    for (si, (name, ys)) in series.iter().enumerate() {
        let pts: Vec<(f64, f64)> = xs
            .iter()
            .zip(ys)
            .filter(|(_, v)| v.is_finite())
            .map(|(&a, &b)| (x.at(tx(a)), y.at(b)))
            .collect();
        let mut path = String::new();
        for (k, (px, py)) in pts.iter().enumerate() {
            let _ = write!(path, "{}{px:.2},{py:.2}", if k == 0 { "M" } else { " L" });
        }
        if !path.is_empty() {
            svg.raw(format!(
                r#"<path d="{path}" fill="none" stroke="{}" stroke-width="2"/>"#,
                color(si)
            ));
        }
        for &(px, py) in &pts {
            svg.circle(px, py, 3.0, color(si));
        }
        let ly = MARGIN + 14.0 * si as f64;
        svg.line(W - MARGIN - 90.0, ly, W - MARGIN - 70.0, ly, color(si), 2.0);
        svg.text(W - MARGIN - 66.0, ly + 4.0, name, "start", 11.0);
    }
    svg.finish()
}

/// Square grid of values in `[0, 1]`; missing cells are drawn grey.
pub fn heatmap(title: &str, labels: &[String], values: &[Vec<Option<f64>>]) -> String {
    let mut svg = Svg::new(title);
    let k = labels.len().max(1);
    let side = (H - 2.0 * MARGIN).min(W - 2.0 * MARGIN) / k as f64;
    let (ox, oy) = (MARGIN + 40.0, MARGIN);
    for (i, row) in values.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let fill = match v {
                Some(v) if v.is_finite() => {
                    let t = v.clamp(0.0, 1.0);
                    let c = (255.0 * (1.0 - t)) as u8;
                    format!("rgb({c},{c},255)")
                }
                _ => "#cccccc".into(),
            };
            let (x, y) = (ox + j as f64 * side, oy + i as f64 * side);
            svg.rect(x, y, side, side, &fill);
            if let Some(v) = v {
                svg.text(
                    x + side / 2.0,
                    y + side / 2.0 + 4.0,
                    &format!("{v:.2}"),
                    "middle",
                    10.0,
                );
            }
        }
    }
    for (i, l) in labels.iter().enumerate() {
        svg.text(ox - 4.0, oy + (i as f64 + 0.5) * side + 4.0, l, "end", 10.0);
        svg.text(
            ox + (i as f64 + 0.5) * side,
            oy + k as f64 * side + 14.0,
            l,
            "middle",
            10.0,
        );
    }
    svg.finish()
}

/// Bars `(left, right, count)` with an optional labeled vertical marker.
pub fn histogram(
    title: &str,
    x_label: &str,
    bins: &[(f64, f64, usize)],
    marker: Option<(f64, &str)>,
) -> String {
    let mut svg = Svg::new(title);
    let x = Scale::fit(
        bins.iter()
            .flat_map(|b| [b.0, b.1])
            .chain(marker.map(|m| m.0)),
        MARGIN,
        W - MARGIN,
    );
    let top = bins.iter().map(|b| b.2).max().unwrap_or(1).max(1) as f64;
    let y = Scale {
        lo: 0.0,
        hi: top * 1.1,
        px_lo: H - MARGIN,
        px_hi: MARGIN,
    };
    axes(&mut svg, x, y, x_label, "count");
    for &(l, r, c) in bins {
        let (px, py) = (x.at(l), y.at(c as f64));
        svg.rect(px, py, (x.at(r) - px).max(0.0), H - MARGIN - py, color(0));
    }
    if let Some((v, label)) = marker {
        svg.line(x.at(v), H - MARGIN, x.at(v), MARGIN, color(1), 2.0);
        svg.text(x.at(v) + 4.0, MARGIN + 12.0, label, "start", 11.0);
    }
    svg.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scatter_counts_elements() {
        let s = scatter(
            "t",
            &[(0.0, 0.0), (1.0, 1.0), (2.0, 0.5)],
            &["a".into(), "b".into(), "c<d".into()],
            &[(0, 1), (1, 2)],
            None,
        );
        assert_eq!(s.matches("<circle").count(), 3);
        // Two segments plus two axis lines.
        assert_eq!(s.matches("<line").count(), 4);
        assert!(s.contains("c&lt;d"));
        assert!(s.starts_with("<svg"));
    }

    #[test]
    fn deterministic() {
        let series = vec![("train".to_string(), vec![0.5, 0.9, 1.0])];
        let a = line_chart("w", "width", "acc", &[2.0, 8.0, 50.0], &series, true);
        let b = line_chart("w", "width", "acc", &[2.0, 8.0, 50.0], &series, true);
        assert_eq!(a, b);
        assert_eq!(a.matches("<path").count(), 1);
    }

    #[test]
    fn heatmap_and_histogram() {
        let h = heatmap(
            "es",
            &["a".into(), "b".into()],
            &[vec![Some(1.0), None], vec![Some(0.3), Some(1.0)]],
        );
        assert_eq!(h.matches("#cccccc").count(), 1);
        let g = histogram(
            "b",
            "es",
            &[(0.0, 0.5, 3), (0.5, 1.0, 1)],
            Some((0.9, "run")),
        );
        assert!(g.contains(">run</text>"));
    }
}
