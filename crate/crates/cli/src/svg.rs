//! Minimal SVG charts: axes, polylines, markers, bars and shaded bands.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 78.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mark {
    Line,
    Points,
    /// Bars of the given width (data units), from zero to `y`.
    Bars(f64),
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub mark: Mark,
}

impl Series {
    pub fn new(label: impl Into<String>, xs: Vec<f64>, ys: Vec<f64>, mark: Mark) -> Self {
        Series { label: label.into(), xs, ys, mark }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
    /// Shaded vertical band `[x0, x1]`.
    pub band: Option<(f64, f64)>,
    pub band_label: String,
    pub vlines: Vec<f64>,
    /// Categorical tick labels replacing the numeric x ticks.
    pub x_ticks: Option<Vec<(f64, String)>>,
}

impl Figure {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Figure {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Default::default()
        }
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool, include_zero: bool) -> Axis {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if include_zero && !log {
            lo = lo.min(0.0);
            hi = hi.max(0.0);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 * (1.0 + lo.abs()) {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Axis { lo: lo - pad, hi: hi + pad, log }
    }

    fn unit(&self, v: f64) -> Option<f64> {
        let v = if self.log {
            if v <= 0.0 {
                return None;
            }
            v.log10()
        } else {
            v
        };
        v.is_finite().then(|| (v - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo.floor() as i32, self.hi.ceil() as i32);
            // 2 and 5 multiples only when the axis spans few decades
            let mults: &[f64] = if b - a <= 2 { &[1.0, 2.0, 5.0] } else { &[1.0] };
            return (a..=b)
                .flat_map(|k| mults.iter().map(move |&f| (f * 10f64.powi(k), k, f)))
                .filter(|&(v, _, _)| (self.lo..=self.hi).contains(&v.log10()))
                .map(|(v, k, f)| (v, if f == 1.0 { format!("1e{k}") } else { format!("{f}e{k}") }))
                .collect();
        }
        let span = self.hi - self.lo;
        let raw = span / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0].iter().map(|f| f * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
        let mut out = Vec::new();
        let mut v = (self.lo / step).ceil() * step;
        while v <= self.hi + 1e-9 * step {
            let label = if v.abs() < 1e-12 * step { "0".into() } else { fmt_tick(v) };
            out.push((v, label));
            v += step;
        }
        out
    }
}

fn fmt_tick(v: f64) -> String {
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the figure as a standalone SVG document.
pub fn render(fig: &Figure) -> String {
    let has_bars = fig.series.iter().any(|s| matches!(s.mark, Mark::Bars(_)));
    let xs = fig.series.iter().flat_map(|s| {
        let half = if let Mark::Bars(w) = s.mark { 0.5 * w } else { 0.0 };
        s.xs.iter().flat_map(move |&x| [x - half, x + half])
    });
    let band = fig.band.iter().flat_map(|&(a, b)| [a, b]);
    let xa = Axis::fit(xs.chain(band).chain(fig.vlines.iter().copied()), fig.log_x, false);
    let ya = Axis::fit(fig.series.iter().flat_map(|s| s.ys.iter().copied()), fig.log_y, has_bars);
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let px = |x: f64| xa.unit(x).map(|u| LEFT + u * pw);
    let py = |y: f64| ya.unit(y).map(|u| TOP + (1.0 - u) * ph);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(&fig.title));

    if let Some((a, b)) = fig.band {
        if let (Some(x0), Some(x1)) = (px(a), px(b)) {
            let _ = writeln!(s, r##"<rect x="{x0:.2}" y="{TOP}" width="{:.2}" height="{ph}" fill="#cccccc" fill-opacity="0.5"/>"##, (x1 - x0).max(0.0));
        }
    }

    // axes and ticks
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let xticks = fig.x_ticks.clone().unwrap_or_else(|| xa.ticks());
    for (v, label) in xticks {
        if let Some(x) = px(v) {
            let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, escape(&label));
        }
    }
    for (v, label) in ya.ticks() {
        if let Some(y) = py(v) {
            let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0);
            let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, y + 4.0, escape(&label));
        }
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 14.0, escape(&fig.x_label));
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        TOP + ph / 2.0,
        escape(&fig.y_label)
    );

    for (k, series) in fig.series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        match series.mark {
            Mark::Line => {
                let pts: Vec<String> = series
                    .xs
                    .iter()
                    .zip(&series.ys)
                    .filter_map(|(&x, &y)| Some(format!("{:.2},{:.2}", px(x)?, py(y)?)))
                    .collect();
                let _ = writeln!(s, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
            }
            Mark::Points => {
                for (&x, &y) in series.xs.iter().zip(&series.ys) {
                    if let (Some(x), Some(y)) = (px(x), py(y)) {
                        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{colour}"/>"#);
                    }
                }
            }
            Mark::Bars(width) => {
                let base = py(if ya.log { 10f64.powf(ya.lo) } else { 0.0 }).unwrap_or(TOP + ph);
                for (&x, &y) in series.xs.iter().zip(&series.ys) {
                    if let (Some(x0), Some(x1), Some(yt)) = (px(x - 0.5 * width), px(x + 0.5 * width), py(y)) {
                        let (top, h) = if yt < base { (yt, base - yt) } else { (base, yt - base) };
                        let _ = writeln!(
                            s,
                            r#"<rect x="{x0:.2}" y="{top:.2}" width="{:.2}" height="{h:.2}" fill="{colour}" fill-opacity="0.8"/>"#,
                            x1 - x0
                        );
                    }
                }
            }
        }
        let ly = TOP + 14.0 + 16.0 * k as f64;
        let _ = writeln!(s, r#"<rect x="{}" y="{}" width="10" height="10" fill="{colour}"/>"#, LEFT + pw - 150.0, ly - 9.0);
        let _ = writeln!(s, r#"<text x="{}" y="{ly}">{}</text>"#, LEFT + pw - 135.0, escape(&series.label));
    }
    if fig.band.is_some() && !fig.band_label.is_empty() {
        let ly = TOP + 14.0 + 16.0 * fig.series.len() as f64;
        let _ = writeln!(s, r##"<rect x="{}" y="{}" width="10" height="10" fill="#cccccc"/>"##, LEFT + pw - 150.0, ly - 9.0);
        let _ = writeln!(s, r#"<text x="{}" y="{ly}">{}</text>"#, LEFT + pw - 135.0, escape(&fig.band_label));
    }
    for &v in &fig.vlines {
        if let Some(x) = px(v) {
            let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{}" stroke="black" stroke-dasharray="4 3"/>"#, TOP + ph);
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Equal-width histogram: bin centres, counts and the bin width.
pub fn histogram(values: &[f64], bins: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() || bins == 0 {
        return (Vec::new(), Vec::new(), 1.0);
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1e-12f64.max(lo.abs() * 1e-6) };
    let mut counts = vec![0.0; bins];
    for v in finite {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1.0;
    }
    let centres = (0..bins).map(|k| lo + (k as f64 + 0.5) * width).collect();
    (centres, counts, width)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_counts_every_finite_value() {
        let v = [0.0, 0.1, 0.2, 0.3, 1.0, f64::NAN];
        let (c, n, w) = histogram(&v, 4);
        assert_eq!(n.iter().sum::<f64>(), 5.0);
        assert_eq!(n, vec![3.0, 1.0, 0.0, 1.0]);
        assert!((w - 0.25).abs() < 1e-15);
        assert!((c[0] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn render_is_well_formed_and_deterministic() {
        let fig = Figure::new("a < b", "t", "E")
            .with(Series::new("E", vec![0.0, 1.0, 2.0], vec![1.0, 0.5, 0.25], Mark::Line))
            .with(Series::new("bars", vec![0.5, 1.5], vec![0.2, -0.1], Mark::Bars(0.4)));
        let a = render(&fig);
        assert_eq!(a, render(&fig));
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert!(a.contains("a &lt; b"));
        assert_eq!(a.matches("<polyline").count(), 1);
    }

    #[test]
    fn log_axes_skip_nonpositive_values() {
        let mut fig = Figure::new("", "lag", "ms").with(Series::new("m", vec![0.0, 1.0, 10.0], vec![1.0, 2.0, 20.0], Mark::Points));
        fig.log_x = true;
        fig.log_y = true;
        let out = render(&fig);
        assert_eq!(out.matches("<circle").count(), 2);
        assert!(out.contains("1e0") && out.contains("1e1"));
    }
}
