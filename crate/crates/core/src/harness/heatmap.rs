use std::fmt::Write as _;

use super::summary::{GroupKey, SummaryTable};
use crate::error::{param, Result};

const CELL_W: f64 = 64.0;
const CELL_H: f64 = 40.0;
const LEFT: f64 = 90.0;
const TOP: f64 = 50.0;
const LOW: [f64; 3] = [247.0, 251.0, 255.0];
const HIGH: [f64; 3] = [8.0, 48.0, 107.0];

/// Fill color on a linear scale from 0.5 (lightest) to 1.0 (darkest).
pub fn accuracy_color(value: f64) -> String {
    let t = ((value - 0.5) / 0.5).clamp(0.0, 1.0);
    let c: Vec<u8> = (0..3).map(|i| (LOW[i] + t * (HIGH[i] - LOW[i])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Distinct axis values, numerically sorted when they all parse as numbers,
/// otherwise in order of appearance.
fn axis_values(table: &SummaryTable, col: usize) -> Vec<String> {
    let mut vals: Vec<String> = Vec::new();
    for r in &table.rows {
        if !vals.contains(&r.key[col]) {
            vals.push(r.key[col].clone());
        }
    }
    let nums: Option<Vec<f64>> = vals.iter().map(|v| v.parse::<f64>().ok()).collect();
    if let Some(nums) = nums {
        let mut paired: Vec<(f64, String)> = nums.into_iter().zip(vals).collect();
        paired.sort_by(|a, b| a.0.total_cmp(&b.0));
        vals = paired.into_iter().map(|p| p.1).collect();
    }
    vals
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// SVG grid of mean accuracies with `x_key` across and `y_key` down. Cells
/// without a mean are drawn hollow.
pub fn render_heatmap(table: &SummaryTable, x_key: GroupKey, y_key: GroupKey, title: &str) -> Result<String> {
    let (Some(xi), Some(yi)) = (table.key_index(x_key), table.key_index(y_key)) else {
        return param(format!("summary lacks the '{}' or '{}' column", x_key.as_str(), y_key.as_str()));
    };
    let xs = axis_values(table, xi);
    let ys = axis_values(table, yi);
    let mut grid: Vec<Vec<Option<Option<f64>>>> = vec![vec![None; xs.len()]; ys.len()];
    for r in &table.rows {
        let cx = xs.iter().position(|v| *v == r.key[xi]).expect("collected above");
        let cy = ys.iter().position(|v| *v == r.key[yi]).expect("collected above");
        if grid[cy][cx].is_some() {
            return param(format!(
                "several rows share {}={} and {}={}; summarize by the two axis keys only",
                x_key.as_str(),
                r.key[xi],
                y_key.as_str(),
                r.key[yi]
            ));
        }
        grid[cy][cx] = Some(r.mean);
    }

    let width = LEFT + CELL_W * xs.len() as f64 + 20.0;
    let height = TOP + CELL_H * ys.len() as f64 + 50.0;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="22" font-size="14" text-anchor="middle">{}</text>"#, width / 2.0, escape(title)).unwrap();
    for (cy, yv) in ys.iter().enumerate() {
        let y = TOP + cy as f64 * CELL_H;
        writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + CELL_H / 2.0 + 4.0,
            escape(yv)
        )
        .unwrap();
        for (cx, cell) in grid[cy].iter().enumerate() {
            let x = LEFT + cx as f64 * CELL_W;
            match cell {
                Some(Some(v)) => {
                    let fill = accuracy_color(*v);
                    let ink = if *v > 0.75 { "white" } else { "black" };
                    writeln!(s, r#"<rect x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="{fill}" stroke="white"/>"#).unwrap();
                    writeln!(
                        s,
                        r#"<text x="{}" y="{}" font-size="11" text-anchor="middle" fill="{ink}">{v:.2}</text>"#,
                        x + CELL_W / 2.0,
                        y + CELL_H / 2.0 + 4.0
                    )
                    .unwrap();
                }
                _ => {
                    writeln!(
                        s,
                        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#999999" stroke-dasharray="3,2"/>"##,
                        x + 1.0,
                        y + 1.0,
                        CELL_W - 2.0,
                        CELL_H - 2.0
                    )
                    .unwrap();
                }
            }
        }
    }
    let axis_y = TOP + CELL_H * ys.len() as f64;
    for (cx, xv) in xs.iter().enumerate() {
        writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
            LEFT + cx as f64 * CELL_W + CELL_W / 2.0,
            axis_y + 16.0,
            escape(xv)
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
        LEFT + CELL_W * xs.len() as f64 / 2.0,
        axis_y + 36.0,
        x_key.as_str()
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="14" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        TOP + CELL_H * ys.len() as f64 / 2.0,
        TOP + CELL_H * ys.len() as f64 / 2.0,
        y_key.as_str()
    )
    .unwrap();
    s.push_str("</svg>\n");
    Ok(s)
}
