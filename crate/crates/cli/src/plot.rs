//! Self-contained SVG charts rendered from the CSV files the figure commands
//! write. Rendering reads only the CSV text, so regenerating a chart from a
//! saved CSV reproduces it byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context, Result};

const PANEL_W: f64 = 480.0;
const PANEL_H: f64 = 360.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// A parsed CSV: header names and rows of raw fields.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn parse(csv: &str) -> Result<Self> {
        let mut lines = csv.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| anyhow!("empty CSV"))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
            if fields.len() != header.len() {
                bail!("CSV line {}: expected {} fields, found {}", i + 2, header.len(), fields.len());
            }
            rows.push(fields);
        }
        Ok(Table { header, rows })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("CSV has no `{name}` column"))
    }

    fn number(&self, row: &[String], col: usize) -> Result<f64> {
        row[col]
            .parse()
            .with_context(|| format!("`{}` in column `{}` is not a number", row[col], self.header[col]))
    }
}

/// Picks the chart from the CSV header.
pub fn svg_from_csv(csv: &str) -> Result<String> {
    let header = csv.lines().next().unwrap_or_default().trim();
    match header {
        "p,n,trial,series,index,value" => spectrum_svg(csv),
        "n,k,trials,mean_fhat,std_err,overlay" => misclassification_svg(csv),
        _ => bail!("unrecognised CSV header `{header}`"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Style {
    Line,
    Dashed,
    Circles,
    Squares,
}

struct Series {
    label: String,
    color: &'static str,
    style: Style,
    points: Vec<(f64, f64)>,
}

struct Panel {
    title: String,
    x_label: String,
    y_label: String,
    log_y: bool,
    series: Vec<Series>,
}

/// Chart for the `p,n,trial,series,index,value` spectrum CSV: one panel per
/// `p`, log-scaled eigenvalues against `n`.
pub fn spectrum_svg(csv: &str) -> Result<String> {
    let t = Table::parse(csv)?;
    let (cp, cn, cs, ci, cv) = (
        t.column("p")?,
        t.column("n")?,
        t.column("series")?,
        t.column("index")?,
        t.column("value")?,
    );
    // p (as text, to keep the order stable) → (series, index) → points.
    let mut by_p: BTreeMap<String, BTreeMap<(String, usize), Vec<(f64, f64)>>> = BTreeMap::new();
    for row in &t.rows {
        let index: usize = row[ci].parse().with_context(|| format!("bad index `{}`", row[ci]))?;
        let point = (t.number(row, cn)?, t.number(row, cv)?);
        by_p.entry(row[cp].clone())
            .or_default()
            .entry((row[cs].clone(), index))
            .or_default()
            .push(point);
    }
    let panels = by_p
        .into_iter()
        .map(|(p, groups)| {
            let signal_indices: Vec<usize> = groups
                .keys()
                .filter(|(s, _)| s == "T")
                .map(|(_, i)| *i)
                .collect();
            let series = groups
                .into_iter()
                .map(|((name, index), points)| {
                    let color = COLORS[(index - 1) % COLORS.len()];
                    let (style, label) = match name.as_str() {
                        "T" => (Style::Line, format!("λ{index}(T)")),
                        "noise_estimate" => (Style::Dashed, format!("noise estimate λ{index}")),
                        _ if signal_indices.contains(&index) => (Style::Circles, format!("λ{index}(S)")),
                        _ => (Style::Squares, format!("λ{index}(S)")),
                    };
                    Series {
                        label,
                        color: if style == Style::Dashed { "#555555" } else { color },
                        style,
                        points,
                    }
                })
                .collect();
            Panel {
                title: format!("p = {p}"),
                x_label: "n".into(),
                y_label: "eigenvalue".into(),
                log_y: true,
                series,
            }
        })
        .collect();
    render("Leading eigenvalues of S and T, cycle model", panels)
}

/// Chart for the `n,k,trials,mean_fhat,std_err,overlay` CSV.
pub fn misclassification_svg(csv: &str) -> Result<String> {
    let t = Table::parse(csv)?;
    let (cn, ck, cm, co) = (t.column("n")?, t.column("k")?, t.column("mean_fhat")?, t.column("overlay")?);
    let ct = t.column("trials")?;
    let mut trials: Vec<&str> = t.rows.iter().map(|r| r[ct].as_str()).collect();
    trials.dedup();
    let title = format!("Mean misclassification error, cycle model ({} trials)", trials.join("/"));
    let mut by_k: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    let mut overlay: BTreeMap<u64, f64> = BTreeMap::new();
    for row in &t.rows {
        let n = t.number(row, cn)?;
        let k: u64 = row[ck].parse().with_context(|| format!("bad k `{}`", row[ck]))?;
        by_k.entry(k).or_default().push((n, t.number(row, cm)?));
        overlay.insert(n.to_bits(), t.number(row, co)?);
    }
    let mut series: Vec<Series> = by_k
        .into_iter()
        .enumerate()
        .map(|(i, (k, points))| Series {
            label: format!("mean f̂, S_{k}"),
            color: COLORS[i % COLORS.len()],
            style: Style::Circles,
            points,
        })
        .collect();
    let mut curve: Vec<(f64, f64)> = overlay.into_iter().map(|(n, v)| (f64::from_bits(n), v)).collect();
    curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    series.push(Series {
        label: "3/(10n+24)".into(),
        color: "#555555",
        style: Style::Dashed,
        points: curve,
    });
    render(
        &title,
        vec![Panel {
            title: "misclassification".into(),
            x_label: "n".into(),
            y_label: "mean f̂".into(),
            log_y: false,
            series,
        }],
    )
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// `count + 1` evenly spaced tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..=count).map(|i| lo + (hi - lo) * i as f64 / count as f64).collect()
}

fn render(title: &str, panels: Vec<Panel>) -> Result<String> {
    if panels.is_empty() {
        bail!("nothing to plot");
    }
    let width = PANEL_W * panels.len() as f64;
    let height = PANEL_H + 30.0;
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    )?;
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="15">{}</text>"#, width / 2.0, escape(title))?;
    for (i, panel) in panels.iter().enumerate() {
        draw_panel(&mut svg, panel, PANEL_W * i as f64, 30.0)?;
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn draw_panel(svg: &mut String, panel: &Panel, ox: f64, oy: f64) -> Result<()> {
    let pts = panel.series.iter().flat_map(|s| s.points.iter());
    let usable = |y: f64| !panel.log_y || y > 0.0;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in pts.filter(|p| usable(p.1) && p.0.is_finite() && p.1.is_finite()) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        let y = if panel.log_y { y.log10() } else { y };
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if !panel.log_y {
        y0 = y0.min(0.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - if panel.log_y { pad } else { 0.0 }, y1 + pad);
    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
    let (left, top) = (ox + MARGIN_L, oy + MARGIN_T);
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| {
        let y = if panel.log_y { y.log10() } else { y };
        top + plot_h - (y - y0) / (y1 - y0) * plot_h
    };

    writeln!(svg, r#"<g>"#)?;
    writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#,
        left + plot_w / 2.0,
        oy + 22.0,
        escape(&panel.title)
    )?;
    writeln!(
        svg,
        r##"<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#333"/>"##
    )?;
    for x in ticks(x0, x1, 4) {
        let px = sx(x);
        writeln!(
            svg,
            r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#333"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            top + plot_h,
            top + plot_h + 5.0,
            top + plot_h + 18.0,
            fmt_num(x)
        )?;
    }
    for y in ticks(y0, y1, 4) {
        let value = if panel.log_y { 10f64.powf(y) } else { y };
        let py = top + plot_h - (y - y0) / (y1 - y0) * plot_h;
        writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{py:.2}" x2="{left:.2}" y2="{py:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            left - 5.0,
            left - 8.0,
            py + 4.0,
            fmt_num(value)
        )?;
    }
    writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        left + plot_w / 2.0,
        top + plot_h + 38.0,
        escape(&panel.x_label)
    )?;
    writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{}{}</text>"#,
        ox + 16.0,
        top + plot_h / 2.0,
        ox + 16.0,
        top + plot_h / 2.0,
        escape(&panel.y_label),
        if panel.log_y { " (log scale)" } else { "" }
    )?;

    for (i, s) in panel.series.iter().enumerate() {
        let mut points: Vec<(f64, f64)> = s.points.iter().copied().filter(|p| usable(p.1)).collect();
        points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        match s.style {
            Style::Line | Style::Dashed => {
                let path: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                let dash = if s.style == Style::Dashed { r#" stroke-dasharray="6 4""# } else { "" };
                writeln!(
                    svg,
                    r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
                    path.join(" "),
                    s.color
                )?;
            }
            Style::Circles => {
                for &(x, y) in &points {
                    writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="none" stroke="{}"/>"#, sx(x), sy(y), s.color)?;
                }
            }
            Style::Squares => {
                for &(x, y) in &points {
                    writeln!(
                        svg,
                        r#"<rect x="{:.2}" y="{:.2}" width="6" height="6" fill="none" stroke="{}"/>"#,
                        sx(x) - 3.0,
                        sy(y) - 3.0,
                        s.color
                    )?;
                }
            }
        }
        let ly = top + 14.0 + 15.0 * i as f64;
        let lx = left + 10.0;
        writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}"{}/><text x="{:.2}" y="{ly:.2}">{}</text>"#,
            ly - 4.0,
            lx + 18.0,
            ly - 4.0,
            s.color,
            if s.style == Style::Dashed { r#" stroke-dasharray="6 4""# } else { "" },
            lx + 24.0,
            escape(&s.label)
        )?;
    }
    writeln!(svg, "</g>")?;
    Ok(())
}
