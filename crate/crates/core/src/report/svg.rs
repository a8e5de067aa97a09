//! Deterministic SVG charts on a fixed 800×400 canvas.

use std::f64::consts::PI;
use std::fmt::Write;

use quick_xml::escape::escape;

use crate::error::{Error, Result};
use crate::xml::Gender;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 400.0;

const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 40.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];
const MALE: &str = "#3b6fd6";
const FEMALE: &str = "#f49ac1";
const UNKNOWN: &str = "#a0a0a0";

#[derive(Debug, Clone, PartialEq)]
pub struct LineSeries {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarSeries {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub id: u32,
    pub label: String,
    pub size: f64,
    pub gender: Gender,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Chart {
    /// One row of marks per series over [0, 1], with dashed vertical lines.
    Timeline {
        rows: Vec<(String, Vec<f64>)>,
        breaks: Vec<f64>,
    },
    /// Nodes on a circle in id order; edges are (source, target, weight).
    Network {
        nodes: Vec<GraphNode>,
        edges: Vec<(u32, u32, f64)>,
    },
    Line {
        series: Vec<LineSeries>,
        x_label: String,
        y_label: String,
    },
    Bar {
        categories: Vec<String>,
        series: Vec<BarSeries>,
        y_label: String,
    },
    /// Square matrix; absent cells are drawn grey.
    Heatmap {
        labels: Vec<String>,
        cells: Vec<Vec<Option<f64>>>,
    },
}

/// Three decimals, without a negative zero.
pub fn num(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".to_string()
    } else {
        s
    }
}

fn check(name: &str, values: impl IntoIterator<Item = f64>) -> Result<()> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::NonFinite(name.to_string()))
    }
}

fn validate(chart: &Chart) -> Result<()> {
    match chart {
        Chart::Timeline { rows, breaks } => {
            check("timeline", rows.iter().flat_map(|r| r.1.iter().copied()))?;
            check("timeline breaks", breaks.iter().copied())
        }
        Chart::Network { nodes, edges } => {
            check("network nodes", nodes.iter().map(|n| n.size))?;
            check("network edges", edges.iter().map(|e| e.2))
        }
        Chart::Line { series, .. } => check(
            "line series",
            series.iter().flat_map(|s| s.points.iter().flat_map(|p| [p.0, p.1])),
        ),
        Chart::Bar { series, .. } => check("bar series", series.iter().flat_map(|s| s.values.iter().copied())),
        Chart::Heatmap { cells, .. } => check("heatmap", cells.iter().flatten().flatten().copied()),
    }
}

struct Canvas {
    out: String,
}

impl Canvas {
    fn new(kind: &str) -> Self {
        let mut out = String::new();
        write!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" class="chart {kind}" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#,
            w = WIDTH,
            h = HEIGHT
        )
        .unwrap();
        out.push('\n');
        Canvas { out }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, style: &str) {
        writeln!(
            self.out,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" {style}/>"#,
            num(x1),
            num(y1),
            num(x2),
            num(y2)
        )
        .unwrap();
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        writeln!(
            self.out,
            r#"<text x="{}" y="{}" text-anchor="{anchor}">{}</text>"#,
            num(x),
            num(y),
            escape(s)
        )
        .unwrap();
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        writeln!(
            self.out,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{fill}"/>"#,
            num(x),
            num(y),
            num(w.max(0.0)),
            num(h.max(0.0))
        )
        .unwrap();
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn plot_width() -> f64 {
    WIDTH - LEFT - RIGHT
}

fn plot_height() -> f64 {
    HEIGHT - TOP - BOTTOM
}

/// Value range padded so that a single value still spans the axis.
fn range(values: impl Iterator<Item = f64>, include_zero: bool) -> (f64, f64) {
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if include_zero {
        lo = lo.min(0.0);
        hi = hi.max(0.0);
    }
    if hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    (lo, hi)
}

fn axes(c: &mut Canvas, x_label: &str, y_label: &str, y_range: Option<(f64, f64)>) {
    let style = r##"stroke="#333" stroke-width="1""##;
    c.line(LEFT, TOP, LEFT, HEIGHT - BOTTOM, style);
    c.line(LEFT, HEIGHT - BOTTOM, WIDTH - RIGHT, HEIGHT - BOTTOM, style);
    if let Some((lo, hi)) = y_range {
        for i in 0..=4 {
            let v = lo + (hi - lo) * i as f64 / 4.0;
            let y = HEIGHT - BOTTOM - plot_height() * i as f64 / 4.0;
            c.line(LEFT - 4.0, y, LEFT, y, style);
            c.text(LEFT - 6.0, y + 4.0, "end", &num(v));
        }
    }
    if !x_label.is_empty() {
        c.text(LEFT + plot_width() / 2.0, HEIGHT - 8.0, "middle", x_label);
    }
    if !y_label.is_empty() {
        c.text(LEFT, TOP - 12.0, "start", y_label);
    }
}

fn legend(c: &mut Canvas, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let x = LEFT + 10.0 + 150.0 * i as f64;
        c.rect(x, 6.0, 10.0, 10.0, PALETTE[i % PALETTE.len()]);
        c.text(x + 14.0, 15.0, "start", name);
    }
}

fn render_line(series: &[LineSeries], x_label: &str, y_label: &str) -> String {
    let mut c = Canvas::new("line");
    let points = || series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = range(points().map(|p| p.0), false);
    let (y0, y1) = range(points().map(|p| p.1), true);
    axes(&mut c, x_label, y_label, Some((y0, y1)));
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_width();
    let sy = |y: f64| HEIGHT - BOTTOM - (y - y0) / (y1 - y0) * plot_height();
    for (i, s) in series.iter().enumerate() {
        if s.points.is_empty() {
            continue;
        }
        let mut d = String::new();
        for (j, &(x, y)) in s.points.iter().enumerate() {
            let cmd = if j == 0 { 'M' } else { 'L' };
            write!(d, "{}{}{} {}", if j == 0 { "" } else { " " }, cmd, num(sx(x)), num(sy(y))).unwrap();
        }
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        writeln!(
            c.out,
            r#"<path d="{d}" fill="none" stroke="{}" stroke-width="2"{dash}/>"#,
            PALETTE[i % PALETTE.len()]
        )
        .unwrap();
    }
    let names: Vec<&str> = series.iter().map(|s| s.name.as_str()).collect();
    legend(&mut c, &names);
    c.finish()
}

fn render_bar(categories: &[String], series: &[BarSeries], y_label: &str) -> String {
    let mut c = Canvas::new("bar");
    let (y0, y1) = range(series.iter().flat_map(|s| s.values.iter().copied()), true);
    axes(&mut c, "", y_label, Some((y0, y1)));
    let sy = |y: f64| HEIGHT - BOTTOM - (y - y0) / (y1 - y0) * plot_height();
    if !categories.is_empty() && !series.is_empty() {
        let slot = plot_width() / categories.len() as f64;
        let bar = slot * 0.8 / series.len() as f64;
        for (k, cat) in categories.iter().enumerate() {
            let base = LEFT + slot * k as f64 + slot * 0.1;
            for (i, s) in series.iter().enumerate() {
                let Some(&v) = s.values.get(k) else { continue };
                let (top, bottom) = if v >= 0.0 { (sy(v), sy(0.0)) } else { (sy(0.0), sy(v)) };
                c.rect(base + bar * i as f64, top, bar, bottom - top, PALETTE[i % PALETTE.len()]);
            }
            c.text(base + slot * 0.4, HEIGHT - BOTTOM + 14.0, "middle", cat);
        }
    }
    let names: Vec<&str> = series.iter().map(|s| s.name.as_str()).collect();
    legend(&mut c, &names);
    c.finish()
}

fn render_timeline(rows: &[(String, Vec<f64>)], breaks: &[f64]) -> String {
    let mut c = Canvas::new("timeline");
    let left = 140.0;
    let width = WIDTH - left - RIGHT;
    let style = r##"stroke="#333" stroke-width="1""##;
    c.line(left, HEIGHT - BOTTOM, WIDTH - RIGHT, HEIGHT - BOTTOM, style);
    c.text(left + width / 2.0, HEIGHT - 8.0, "middle", "position in book");
    let sx = |x: f64| left + x.clamp(0.0, 1.0) * width;
    for &b in breaks {
        c.line(
            sx(b),
            TOP,
            sx(b),
            HEIGHT - BOTTOM,
            r##"stroke="#999" stroke-width="1" stroke-dasharray="4 3""##,
        );
    }
    if !rows.is_empty() {
        let row_h = plot_height() / rows.len() as f64;
        for (i, (name, positions)) in rows.iter().enumerate() {
            let y = TOP + row_h * (i as f64 + 0.5);
            c.text(left - 6.0, y + 4.0, "end", name);
            let color = PALETTE[i % PALETTE.len()];
            for &p in positions {
                writeln!(c.out, r#"<circle cx="{}" cy="{}" r="2" fill="{color}"/>"#, num(sx(p)), num(y)).unwrap();
            }
        }
    }
    c.finish()
}

fn gender_color(g: Gender) -> &'static str {
    match g {
        Gender::Male => MALE,
        Gender::Female => FEMALE,
        Gender::Unknown => UNKNOWN,
    }
}

/// Node centres on a circle, in ascending id order starting at the top.
pub fn circle_layout(ids: &[u32]) -> Vec<(u32, f64, f64)> {
    let mut sorted = ids.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let (cx, cy, radius) = (WIDTH / 2.0, HEIGHT / 2.0, 150.0);
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, id)| {
            let angle = 2.0 * PI * i as f64 / n as f64 - PI / 2.0;
            (id, cx + radius * angle.cos(), cy + radius * angle.sin())
        })
        .collect()
}

fn render_network(nodes: &[GraphNode], edges: &[(u32, u32, f64)]) -> String {
    let mut c = Canvas::new("network");
    let ids: Vec<u32> = nodes.iter().map(|n| n.id).collect();
    let layout = circle_layout(&ids);
    let at = |id: u32| layout.iter().find(|l| l.0 == id).map(|l| (l.1, l.2));
    let max_weight = edges.iter().map(|e| e.2).fold(0.0, f64::max);
    for &(a, b, w) in edges {
        if let (Some(p), Some(q)) = (at(a), at(b)) {
            let width = if max_weight > 0.0 { 1.0 + 4.0 * w / max_weight } else { 1.0 };
            c.line(p.0, p.1, q.0, q.1, &format!(r##"stroke="#888" stroke-width="{}""##, num(width)));
        }
    }
    let max_size = nodes.iter().map(|n| n.size).fold(0.0, f64::max);
    let mut sorted: Vec<&GraphNode> = nodes.iter().collect();
    sorted.sort_by_key(|n| n.id);
    for n in sorted {
        let (x, y) = at(n.id).unwrap();
        let r = if max_size > 0.0 { 24.0 * (n.size / max_size).sqrt() } else { 0.0 };
        writeln!(
            c.out,
            r#"<circle cx="{}" cy="{}" r="{}" fill="{}"/>"#,
            num(x),
            num(y),
            num(r),
            gender_color(n.gender)
        )
        .unwrap();
        c.text(x, y - r - 4.0, "middle", &n.label);
    }
    c.finish()
}

fn heat_color(v: f64) -> String {
    let v = v.clamp(-1.0, 1.0);
    let (r, g, b) = if v >= 0.0 {
        (255.0, 255.0 * (1.0 - v), 255.0 * (1.0 - v))
    } else {
        (255.0 * (1.0 + v), 255.0 * (1.0 + v), 255.0)
    };
    format!("rgb({},{},{})", r.round() as u8, g.round() as u8, b.round() as u8)
}

fn render_heatmap(labels: &[String], cells: &[Vec<Option<f64>>]) -> String {
    let mut c = Canvas::new("heatmap");
    let n = cells.len();
    if n > 0 {
        let size = (plot_height() / n as f64).min(plot_width() / n as f64);
        let left = (WIDTH - size * n as f64) / 2.0;
        for (i, row) in cells.iter().enumerate() {
            let y = TOP + size * i as f64;
            if let Some(l) = labels.get(i) {
                c.text(left - 6.0, y + size / 2.0 + 4.0, "end", l);
            }
            for (j, cell) in row.iter().enumerate() {
                let x = left + size * j as f64;
                match cell {
                    Some(v) => {
                        c.rect(x, y, size, size, &heat_color(*v));
                        c.text(x + size / 2.0, y + size / 2.0 + 4.0, "middle", &format!("{v:.2}"));
                    }
                    None => c.rect(x, y, size, size, "#d0d0d0"),
                }
            }
        }
        for (j, l) in labels.iter().enumerate().take(n) {
            c.text(left + size * (j as f64 + 0.5), TOP + size * n as f64 + 14.0, "middle", l);
        }
    }
    c.finish()
}

/// Renders `chart`; non-finite data is an error.
pub fn render_svg_chart(chart: &Chart) -> Result<String> {
    validate(chart)?;
    Ok(match chart {
        Chart::Timeline { rows, breaks } => render_timeline(rows, breaks),
        Chart::Network { nodes, edges } => render_network(nodes, edges),
        Chart::Line {
            series,
            x_label,
            y_label,
        } => render_line(series, x_label, y_label),
        Chart::Bar {
            categories,
            series,
            y_label,
        } => render_bar(categories, series, y_label),
        Chart::Heatmap { labels, cells } => render_heatmap(labels, cells),
    })
}
