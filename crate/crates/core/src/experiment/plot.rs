use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use image::{Rgb, RgbImage};

use super::font::{glyph, GLYPH_H, GLYPH_W};
use super::results::{write_atomic, MetricKind};
use super::summary::SummaryRow;
use crate::driver::Strategy;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PlotStyle {
    /// Metric to draw; `None` picks regret if present, else cost. Cost plots
    /// also draw the oracle cost dashed.
    pub metric: Option<MetricKind>,
    pub log_y: bool,
    pub width: u32,
    pub height: u32,
    pub title: Option<String>,
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self { metric: None, log_y: false, width: 800, height: 500, title: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotFormat {
    Svg,
    Png,
}

impl PlotFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        match ext.as_str() {
            "svg" => Ok(PlotFormat::Svg),
            "png" => Ok(PlotFormat::Png),
            _ => Err(Error::UnsupportedFormat(ext)),
        }
    }
}

type Color = [u8; 3];

fn strategy_color(s: Strategy) -> Color {
    match s {
        Strategy::JointKg => [0x1f, 0x77, 0xb4],
        Strategy::AlternatingKg => [0xff, 0x7f, 0x0e],
        Strategy::TwoStepKg => [0x2c, 0xa0, 0x2c],
        Strategy::JointRandom => [0xd6, 0x27, 0x28],
        Strategy::TwoStepRandom => [0x94, 0x67, 0xbd],
    }
}

const BLACK: Color = [0, 0, 0];
const GRAY: Color = [0xbb, 0xbb, 0xbb];
const LIGHT: Color = [0xe8, 0xe8, 0xe8];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Anchor {
    Start,
    Middle,
    End,
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Rect { x: f64, y: f64, w: f64, h: f64, fill: Color, opacity: f64, class: &'static str },
    Polygon { points: Vec<(f64, f64)>, fill: Color, opacity: f64 },
    Polyline { points: Vec<(f64, f64)>, stroke: Color, width: f64, dashed: bool },
    Text { x: f64, y: f64, text: String, anchor: Anchor },
}

/// Curves, bands and initial-design shading, laid out in pixel space.
struct Scene {
    width: u32,
    height: u32,
    shapes: Vec<Shape>,
}

/// Initial-design spans `(start, end)` in evaluations, recovered from the
/// gap between evaluations used and proposals made at each checkpoint.
fn initial_regions(rows: &[&SummaryRow]) -> Vec<(usize, usize)> {
    let mut regions = Vec::new();
    let mut seen = 0;
    for r in rows {
        let initial = r.evaluations_used.saturating_sub(r.iteration);
        if initial > seen {
            regions.push((r.evaluations_used - (initial - seen), r.evaluations_used));
            seen = initial;
        }
    }
    regions
}

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].into_iter().map(|m| m * mag).find(|s| span / s <= target as f64).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

/// Decades, plus 2× and 5× marks when fewer than three decades are visible.
/// Returns (value, log10 value) pairs.
fn log_ticks(lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let decades: Vec<f64> = nice_ticks(lo, hi, 6).into_iter().filter(|t| t.fract() == 0.0).collect();
    if decades.len() >= 3 {
        return decades.into_iter().map(|t| (10f64.powf(t), t)).collect();
    }
    let mut ticks = Vec::new();
    for e in lo.floor() as i64..=hi.ceil() as i64 {
        for m in [1.0, 2.0, 5.0] {
            let v = m * 10f64.powi(e as i32);
            let t = v.log10();
            if t >= lo && t <= hi {
                ticks.push((v, t));
            }
        }
    }
    ticks
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.abs() >= 1e4 || v.abs() < 1e-3 {
        return format!("{v:.0e}");
    }
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn build_scene(summary: &[SummaryRow], style: &PlotStyle) -> Result<Scene> {
    let metric = style
        .metric
        .or_else(|| summary.iter().any(|r| r.metric_kind == MetricKind::Regret).then_some(MetricKind::Regret))
        .unwrap_or(MetricKind::Cost);
    let kinds: Vec<MetricKind> = if metric == MetricKind::Cost { vec![MetricKind::Cost, MetricKind::OracleCost] } else { vec![metric] };

    let mut series: BTreeMap<(Strategy, MetricKind), Vec<&SummaryRow>> = BTreeMap::new();
    for r in summary.iter().filter(|r| kinds.contains(&r.metric_kind) && r.mean.is_finite()) {
        series.entry((r.strategy, r.metric_kind)).or_default().push(r);
    }
    series.retain(|_, rows| !rows.is_empty());
    if series.is_empty() {
        return Err(Error::Results(format!("summary has no `{metric}` rows to plot")));
    }
    for rows in series.values_mut() {
        rows.sort_by_key(|r| r.evaluations_used);
    }

    let log_y = style.log_y && series.values().flatten().all(|r| r.mean > 0.0);
    if style.log_y && !log_y {
        log::warn!("nonpositive means; falling back to a linear axis");
    }
    let ty = |v: f64| if log_y { v.log10() } else { v };
    let x_max = series.values().flatten().map(|r| r.evaluations_used).max().unwrap_or(1).max(1) as f64;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for r in series.values().flatten() {
        let lower = if log_y && r.lower <= 0.0 { r.mean } else { r.lower };
        y_lo = y_lo.min(ty(lower));
        y_hi = y_hi.max(ty(r.upper));
    }
    if y_hi - y_lo < 1e-12 {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let pad = 0.05 * (y_hi - y_lo);
    let (y_lo, y_hi) = (y_lo - pad, y_hi + pad);

    let (w, h) = (style.width as f64, style.height as f64);
    let (left, right, top, bottom) = (70.0, w - 130.0, 40.0, h - 50.0);
    let px = |e: f64| left + (right - left) * e / x_max;
    let py = |v: f64| bottom - (bottom - top) * (ty(v).clamp(y_lo, y_hi) - y_lo) / (y_hi - y_lo);

    let mut shapes = vec![Shape::Rect { x: 0.0, y: 0.0, w, h, fill: [255, 255, 255], opacity: 1.0, class: "background" }];

    let mut regions: Vec<(usize, usize)> = series
        .iter()
        .filter(|((_, k), _)| *k == kinds[0])
        .flat_map(|(_, rows)| initial_regions(rows))
        .collect();
    regions.sort_unstable();
    regions.dedup();
    for (a, b) in regions {
        shapes.push(Shape::Rect {
            x: px(a as f64),
            y: top,
            w: px(b as f64) - px(a as f64),
            h: bottom - top,
            fill: LIGHT,
            opacity: 1.0,
            class: "initial-design",
        });
    }

    for t in nice_ticks(0.0, x_max, 8) {
        shapes.push(Shape::Polyline { points: vec![(px(t), bottom), (px(t), bottom + 5.0)], stroke: BLACK, width: 1.0, dashed: false });
        shapes.push(Shape::Text { x: px(t), y: bottom + 18.0, text: format_tick(t), anchor: Anchor::Middle });
    }
    let y_ticks: Vec<(f64, f64)> = if log_y {
        log_ticks(y_lo, y_hi)
    } else {
        nice_ticks(y_lo, y_hi, 6).into_iter().map(|t| (t, t)).collect()
    };
    for (v, t) in y_ticks {
        let y = bottom - (bottom - top) * (t - y_lo) / (y_hi - y_lo);
        shapes.push(Shape::Polyline { points: vec![(left - 5.0, y), (left, y)], stroke: BLACK, width: 1.0, dashed: false });
        shapes.push(Shape::Polyline { points: vec![(left, y), (right, y)], stroke: GRAY, width: 0.5, dashed: true });
        shapes.push(Shape::Text { x: left - 8.0, y: y + 4.0, text: format_tick(v), anchor: Anchor::End });
    }

    for ((strategy, kind), rows) in &series {
        let color = strategy_color(*strategy);
        let upper: Vec<(f64, f64)> = rows.iter().map(|r| (px(r.evaluations_used as f64), py(r.upper))).collect();
        let lower = rows.iter().rev().map(|r| {
            let v = if log_y && r.lower <= 0.0 { r.mean } else { r.lower };
            (px(r.evaluations_used as f64), py(v))
        });
        shapes.push(Shape::Polygon { points: upper.into_iter().chain(lower).collect(), fill: color, opacity: 0.2 });
        let points = rows.iter().map(|r| (px(r.evaluations_used as f64), py(r.mean))).collect();
        shapes.push(Shape::Polyline { points, stroke: color, width: 2.0, dashed: *kind == MetricKind::OracleCost });
    }

    shapes.push(Shape::Polyline {
        points: vec![(left, top), (left, bottom), (right, bottom)],
        stroke: BLACK,
        width: 1.0,
        dashed: false,
    });
    shapes.push(Shape::Text { x: (left + right) / 2.0, y: h - 12.0, text: "evaluations".into(), anchor: Anchor::Middle });
    let y_label = match metric {
        MetricKind::Regret if log_y => "regret (log scale)",
        MetricKind::Regret => "regret",
        _ => "expected cost",
    };
    shapes.push(Shape::Text { x: left, y: top - 10.0, text: y_label.into(), anchor: Anchor::Start });
    if let Some(title) = &style.title {
        shapes.push(Shape::Text { x: (left + right) / 2.0, y: 20.0, text: title.clone(), anchor: Anchor::Middle });
    }

    let mut y = top + 10.0;
    for (strategy, kind) in series.keys() {
        let dashed = *kind == MetricKind::OracleCost;
        let label = if dashed { format!("{strategy} oracle") } else { strategy.name().to_string() };
        shapes.push(Shape::Polyline {
            points: vec![(right + 10.0, y - 4.0), (right + 35.0, y - 4.0)],
            stroke: strategy_color(*strategy),
            width: 2.0,
            dashed,
        });
        shapes.push(Shape::Text { x: right + 42.0, y, text: label, anchor: Anchor::Start });
        y += 18.0;
    }
    Ok(Scene { width: style.width, height: style.height, shapes })
}

fn hex(c: Color) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn render_svg(scene: &Scene) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = scene.width,
        h = scene.height
    );
    let pts = |p: &[(f64, f64)]| p.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect::<Vec<_>>().join(" ");
    for s in &scene.shapes {
        let _ = match s {
            Shape::Rect { x, y, w, h, fill, opacity, class } => writeln!(
                out,
                r#"<rect class="{class}" x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{}" fill-opacity="{opacity}"/>"#,
                hex(*fill)
            ),
            Shape::Polygon { points, fill, opacity } => {
                writeln!(out, r#"<polygon class="band" points="{}" fill="{}" fill-opacity="{opacity}"/>"#, pts(points), hex(*fill))
            }
            Shape::Polyline { points, stroke, width, dashed } => writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="{width}"{}/>"#,
                pts(points),
                hex(*stroke),
                if *dashed { r#" stroke-dasharray="6,4""# } else { "" }
            ),
            Shape::Text { x, y, text, anchor } => {
                let a = match anchor {
                    Anchor::Start => "start",
                    Anchor::Middle => "middle",
                    Anchor::End => "end",
                };
                writeln!(out, r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{a}">{}</text>"#, escape(text))
            }
        };
    }
    out.push_str("</svg>\n");
    out
}

struct Raster {
    img: RgbImage,
}

impl Raster {
    fn blend(&mut self, x: i64, y: i64, c: Color, alpha: f64) {
        if x < 0 || y < 0 || x >= self.img.width() as i64 || y >= self.img.height() as i64 {
            return;
        }
        let p = self.img.get_pixel_mut(x as u32, y as u32);
        for k in 0..3 {
            p.0[k] = (p.0[k] as f64 * (1.0 - alpha) + c[k] as f64 * alpha).round() as u8;
        }
    }

    /// Even-odd scanline fill sampled at pixel centers.
    fn fill_polygon(&mut self, points: &[(f64, f64)], c: Color, alpha: f64) {
        let (y0, y1) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
        for py in y0.floor().max(0.0) as i64..=y1.ceil().min(self.img.height() as f64) as i64 {
            let yc = py as f64 + 0.5;
            let mut xs = Vec::new();
            for i in 0..points.len() {
                let (a, b) = (points[i], points[(i + 1) % points.len()]);
                if (a.1 <= yc) != (b.1 <= yc) {
                    xs.push(a.0 + (yc - a.1) / (b.1 - a.1) * (b.0 - a.0));
                }
            }
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks_exact(2) {
                for px in (pair[0] - 0.5).ceil() as i64..=(pair[1] - 0.5).floor() as i64 {
                    self.blend(px, py, c, alpha);
                }
            }
        }
    }

    fn stroke(&mut self, points: &[(f64, f64)], c: Color, width: f64, dashed: bool) {
        let r = (width / 2.0).max(0.5);
        let mut travelled = 0.0;
        for seg in points.windows(2) {
            let ((ax, ay), (bx, by)) = (seg[0], seg[1]);
            let len = ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt();
            let steps = (len * 2.0).ceil().max(1.0) as usize;
            for i in 0..=steps {
                let t = i as f64 / steps as f64;
                if dashed && (travelled + t * len) % 10.0 >= 6.0 {
                    continue;
                }
                let (x, y) = (ax + t * (bx - ax), ay + t * (by - ay));
                for px in (x - r).round() as i64..=(x + r).round() as i64 {
                    for py in (y - r).round() as i64..=(y + r).round() as i64 {
                        if ((px as f64 - x).powi(2) + (py as f64 - y).powi(2)).sqrt() <= r + 0.25 {
                            self.set(px, py, c);
                        }
                    }
                }
            }
            travelled += len;
        }
    }

    fn set(&mut self, x: i64, y: i64, c: Color) {
        if x >= 0 && y >= 0 && x < self.img.width() as i64 && y < self.img.height() as i64 {
            self.img.put_pixel(x as u32, y as u32, Rgb(c));
        }
    }

    fn text(&mut self, x: f64, baseline: f64, text: &str, anchor: Anchor) {
        let scale = 2;
        let advance = (GLYPH_W + 1) * scale;
        let width = (text.chars().count() * advance) as f64;
        let x0 = match anchor {
            Anchor::Start => x,
            Anchor::Middle => x - width / 2.0,
            Anchor::End => x - width,
        }
        .round() as i64;
        let y0 = baseline.round() as i64 - (GLYPH_H * scale) as i64;
        for (i, ch) in text.chars().enumerate() {
            for (row, bits) in glyph(ch).iter().enumerate() {
                for col in 0..GLYPH_W {
                    if bits >> (GLYPH_W - 1 - col) & 1 == 1 {
                        for dy in 0..scale {
                            for dx in 0..scale {
                                let px = x0 + (i * advance + col * scale + dx) as i64;
                                let py = y0 + (row * scale + dy) as i64;
                                self.set(px, py, BLACK);
                            }
                        }
                    }
                }
            }
        }
    }
}

fn render_png(scene: &Scene) -> Result<Vec<u8>> {
    let mut r = Raster { img: RgbImage::from_pixel(scene.width, scene.height, Rgb([255, 255, 255])) };
    for s in &scene.shapes {
        match s {
            Shape::Rect { x, y, w, h, fill, opacity, .. } => {
                r.fill_polygon(&[(*x, *y), (x + w, *y), (x + w, y + h), (*x, y + h)], *fill, *opacity)
            }
            Shape::Polygon { points, fill, opacity } => r.fill_polygon(points, *fill, *opacity),
            Shape::Polyline { points, stroke, width, dashed } => r.stroke(points, *stroke, *width, *dashed),
            Shape::Text { x, y, text, anchor } => r.text(*x, *y, text, *anchor),
        }
    }
    let mut bytes = Vec::new();
    r.img
        .write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| Error::Image(e.to_string()))?;
    Ok(bytes)
}

/// Renders the summary as a regret (or cost) plot; the format follows the
/// file extension (`.svg` or `.png`).
pub fn plot_regret(summary: &[SummaryRow], path: &Path, style: &PlotStyle) -> Result<()> {
    let bytes = render(summary, PlotFormat::from_path(path)?, style)?;
    write_atomic(path, &bytes)
}

/// Rendered image bytes.
pub fn render(summary: &[SummaryRow], format: PlotFormat, style: &PlotStyle) -> Result<Vec<u8>> {
    if summary.is_empty() {
        return Err(Error::Results("summary is empty".into()));
    }
    let scene = build_scene(summary, style)?;
    match format {
        PlotFormat::Svg => Ok(render_svg(&scene).into_bytes()),
        PlotFormat::Png => render_png(&scene),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(strategy: Strategy, evals: usize, iteration: usize, mean: f64) -> SummaryRow {
        SummaryRow {
            problem: "p".into(),
            strategy,
            metric_kind: MetricKind::Regret,
            evaluations_used: evals,
            iteration,
            replicates: 3,
            mean,
            se: 0.1,
            lower: mean - 0.2,
            upper: mean + 0.2,
            single_replicate: false,
        }
    }

    fn two_step() -> Vec<SummaryRow> {
        // Two phases of 10 initial points and 50 evaluations each.
        vec![
            row(Strategy::TwoStepKg, 10, 0, 3.0),
            row(Strategy::TwoStepKg, 50, 40, 2.0),
            row(Strategy::TwoStepKg, 60, 40, 1.5),
            row(Strategy::TwoStepKg, 100, 80, 1.0),
        ]
    }

    fn svg(summary: &[SummaryRow]) -> String {
        String::from_utf8(render(summary, PlotFormat::Svg, &PlotStyle::default()).unwrap()).unwrap()
    }

    #[test]
    fn two_step_strategies_shade_two_regions() {
        let text = svg(&two_step());
        assert_eq!(text.matches("class=\"initial-design\"").count(), 2);
        let mut joint = two_step();
        joint.extend([row(Strategy::JointKg, 10, 0, 3.0), row(Strategy::JointKg, 100, 90, 0.5)]);
        assert_eq!(svg(&joint).matches("class=\"initial-design\"").count(), 2);
        let only_joint: Vec<_> = joint.into_iter().filter(|r| r.strategy == Strategy::JointKg).collect();
        assert_eq!(svg(&only_joint).matches("class=\"initial-design\"").count(), 1);
    }

    #[test]
    fn empty_series_are_not_drawn() {
        let mut rows = two_step();
        rows.push(SummaryRow { mean: f64::NAN, ..row(Strategy::JointRandom, 10, 0, 0.0) });
        let text = svg(&rows);
        assert!(text.contains(">2sKG<"));
        assert!(!text.contains(">jRS<"));
        assert_eq!(text.matches("class=\"band\"").count(), 1);
    }

    #[test]
    fn output_is_deterministic() {
        let rows = two_step();
        for format in [PlotFormat::Svg, PlotFormat::Png] {
            let a = render(&rows, format, &PlotStyle::default()).unwrap();
            let b = render(&rows, format, &PlotStyle::default()).unwrap();
            assert_eq!(a, b);
        }
        let png = render(&rows, PlotFormat::Png, &PlotStyle { log_y: true, ..PlotStyle::default() }).unwrap();
        assert_eq!(&png[1..4], b"PNG");
    }

    #[test]
    fn unknown_extensions_list_the_supported_formats() {
        let err = plot_regret(&two_step(), Path::new("out.jpg"), &PlotStyle::default()).unwrap_err().to_string();
        assert!(err.contains("svg") && err.contains("png"), "{err}");
        assert!(render(&[], PlotFormat::Svg, &PlotStyle::default()).is_err());
    }

    #[test]
    fn cost_plots_draw_the_oracle_dashed() {
        let rows: Vec<SummaryRow> = [MetricKind::Cost, MetricKind::OracleCost]
            .into_iter()
            .flat_map(|k| {
                [row(Strategy::JointKg, 20, 0, 900.0), row(Strategy::JointKg, 100, 80, 700.0)]
                    .map(|r| SummaryRow { metric_kind: k, ..r })
            })
            .collect();
        let text = svg(&rows);
        assert!(text.contains("jKG oracle"));
        assert!(text.contains("expected cost"));
    }
}
