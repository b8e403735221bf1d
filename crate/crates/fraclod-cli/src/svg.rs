//! Static SVG line plots for result tables.

use crate::table::ResultTable;
use crate::CliError;
use std::io::Write;
use std::path::Path;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// Plots the named y-columns against the x-column as polylines, with
/// optional log10 axes. Non-positive values are dropped on log axes.
pub fn emit_svg_plot(
    table: &ResultTable,
    x_column: &str,
    y_columns: &[&str],
    log_x: bool,
    log_y: bool,
    path: impl AsRef<Path>,
) -> Result<(), CliError> {
    let xi = table
        .column_index(x_column)
        .ok_or_else(|| CliError::Config(format!("no column '{x_column}'")))?;
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for &name in y_columns {
        let yi = table
            .column_index(name)
            .ok_or_else(|| CliError::Config(format!("no column '{name}'")))?;
        let mut points = Vec::new();
        for row in table.rows() {
            let (Some(x), Some(y)) = (row[xi].as_f64(), row[yi].as_f64()) else {
                continue;
            };
            if (log_x && x <= 0.0) || (log_y && y <= 0.0) {
                continue;
            }
            points.push((
                if log_x { x.log10() } else { x },
                if log_y { y.log10() } else { y },
            ));
        }
        series.push((name.to_string(), points));
    }
    let all: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    if all.is_empty() {
        return Err(CliError::Config("no plottable points".into()));
    }
    let (mut x0, mut x1) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.0), b.max(p.0))
        });
    let (mut y0, mut y1) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.1), b.max(p.1))
        });
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let file = std::fs::File::create(path.as_ref())
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.as_ref().display())))?;
    let mut out = std::io::BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        )?;
        writeln!(
            out,
            r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
        )?;
        // Axes.
        writeln!(
            out,
            r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>"#,
            m = MARGIN,
            b = HEIGHT - MARGIN,
            r = WIDTH - MARGIN
        )?;
        writeln!(
            out,
            r#"<line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black"/>"#,
            m = MARGIN,
            t = MARGIN,
            b = HEIGHT - MARGIN
        )?;
        // Ticks: five per axis.
        for i in 0..=4 {
            let fx = x0 + (x1 - x0) * i as f64 / 4.0;
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            let label_x = if log_x {
                format!("1e{fx:.2}")
            } else {
                format!("{fx:.3}")
            };
            let label_y = if log_y {
                format!("1e{fy:.2}")
            } else {
                format!("{fy:.3}")
            };
            writeln!(
                out,
                r#"<text x="{x}" y="{y}" font-size="11" text-anchor="middle">{label_x}</text>"#,
                x = sx(fx),
                y = HEIGHT - MARGIN + 18.0
            )?;
            writeln!(
                out,
                r#"<text x="{x}" y="{y}" font-size="11" text-anchor="end">{label_y}</text>"#,
                x = MARGIN - 6.0,
                y = sy(fy) + 4.0
            )?;
        }
        writeln!(
            out,
            r#"<text x="{x}" y="{y}" font-size="12" text-anchor="middle">{x_column}{suffix}</text>"#,
            x = WIDTH / 2.0,
            y = HEIGHT - 12.0,
            suffix = if log_x { " (log)" } else { "" }
        )?;
        for (s, (name, points)) in series.iter().enumerate() {
            let color = COLORS[s % COLORS.len()];
            let path_points: Vec<String> = points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                path_points.join(" ")
            )?;
            for &(x, y) in points {
                writeln!(
                    out,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                    sx(x),
                    sy(y)
                )?;
            }
            writeln!(
                out,
                r#"<text x="{x}" y="{y}" font-size="12" fill="{color}">{name}{suffix}</text>"#,
                x = WIDTH - MARGIN + 6.0,
                y = MARGIN + 16.0 * s as f64,
                suffix = if log_y { " (log)" } else { "" }
            )?;
        }
        writeln!(out, "</svg>")
    };
    write().map_err(|e| CliError::Config(format!("write failed: {e}")))
}
