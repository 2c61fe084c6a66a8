//! SVG line plot of moving-average success per mode.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::Mode;
use crate::error::Result;
use crate::experiment::{fmt_g, write_atomic, CsvRow};
use crate::summary::{moving_average, read_csv};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Seed-mean success per episode for each mode, in order of first appearance.
pub fn mean_curves(rows: &[CsvRow]) -> Vec<(Mode, Vec<(u64, f64)>)> {
    let mut out: Vec<(Mode, Vec<(u64, f64, usize)>)> = Vec::new();
    for row in rows {
        let idx = match out.iter().position(|(m, _)| *m == row.mode) {
            Some(i) => i,
            None => {
                out.push((row.mode, Vec::new()));
                out.len() - 1
            }
        };
        let pts = &mut out[idx].1;
        match pts.binary_search_by_key(&row.episode, |p| p.0) {
            Ok(i) => {
                pts[i].1 += row.success;
                pts[i].2 += 1;
            }
            Err(i) => pts.insert(i, (row.episode, row.success, 1)),
        }
    }
    out.into_iter()
        .map(|(m, pts)| (m, pts.into_iter().map(|(e, s, n)| (e, s / n as f64)).collect()))
        .collect()
}

/// Episodes at which the phase index changes.
pub fn change_episodes(rows: &[CsvRow]) -> Vec<u64> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    let mut run: Vec<(u64, usize)> = rows
        .iter()
        .filter(|r| r.mode == first.mode && r.seed == first.seed)
        .map(|r| (r.episode, r.phase))
        .collect();
    run.sort_unstable();
    run.windows(2).filter(|w| w[0].1 != w[1].1).map(|w| w[1].0).collect()
}

pub fn render_svg(rows: &[CsvRow], window: usize) -> String {
    let curves = mean_curves(rows);
    let changes = change_episodes(rows);
    let max_ep = rows.iter().map(|r| r.episode).max().unwrap_or(0).max(1) as f64;
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let x = |e: f64| LEFT + pw * e / max_ep;
    let y = |s: f64| TOP + ph * (1.0 - s);

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    // axes
    writeln!(
        svg,
        r#"<line x1="{LEFT}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        y(0.0),
        x(max_ep),
        y(0.0)
    )
    .unwrap();
    writeln!(
        svg,
        r#"<line x1="{LEFT}" y1="{}" x2="{LEFT}" y2="{}" stroke="black"/>"#,
        y(0.0),
        y(1.0)
    )
    .unwrap();
    for i in 0..=5 {
        let s = i as f64 / 5.0;
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y(s) + 4.0,
            fmt_g(s)
        )
        .unwrap();
    }
    let step = nice_step(max_ep);
    let mut e = 0.0;
    while e <= max_ep {
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
            x(e),
            y(0.0) + 16.0,
            fmt_g(e)
        )
        .unwrap();
        e += step;
    }
    writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">episode</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="16" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">success rate</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    )
    .unwrap();

    for &c in &changes {
        let cx = x(c as f64);
        writeln!(
            svg,
            r##"<line class="change" x1="{cx}" y1="{}" x2="{cx}" y2="{}" stroke="#555555" stroke-dasharray="6,4"/>"##,
            y(1.0),
            y(0.0)
        )
        .unwrap();
    }

    for (i, (mode, pts)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let ma = moving_average(&ys, window);
        let points: Vec<String> = pts
            .iter()
            .zip(&ma)
            .map(|(p, m)| format!("{:.2},{:.2}", x(p.0 as f64), y(*m)))
            .collect();
        writeln!(
            svg,
            r#"<polyline class="mode" data-mode="{mode}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        )
        .unwrap();
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        writeln!(
            svg,
            r#"<rect x="{lx}" y="{}" width="18" height="3" fill="{color}"/>"#,
            ly - 3.0
        )
        .unwrap();
        writeln!(svg, r#"<text x="{}" y="{}" font-size="12">{mode}</text>"#, lx + 24.0, ly + 1.0).unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

fn nice_step(max: f64) -> f64 {
    let raw = max / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
        .max(1.0)
}

/// Reads an experiment CSV and writes the plot.
pub fn emit_plot(csv: &Path, out: &Path, window: usize) -> Result<()> {
    let rows = read_csv(csv)?;
    write_atomic(out, render_svg(&rows, window).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steps_are_round() {
        assert_eq!(nice_step(300.0), 50.0);
        assert_eq!(nice_step(3.0), 1.0);
    }
}
