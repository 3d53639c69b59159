use std::fmt::Write as _;
use std::path::Path;

use nxs_core::fileio::{read_signal_csv, SignalTable};

use crate::{CliError, CliResult};

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 450.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 140.0;
const MARGIN_T: f64 = 20.0;
const MARGIN_B: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Self-contained SVG: one polyline per selected column, time on x.
pub fn render_svg(table: &SignalTable, columns: &[usize]) -> String {
    let (t0, t1) = bounds(table.timestamps.iter().copied());
    let (v0, v1) = bounds(columns.iter().flat_map(|&c| table.data.column(c).to_vec()));
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let x = |t: f64| MARGIN_L + (t - t0) / (t1 - t0) * pw;
    let y = |v: f64| MARGIN_T + (1.0 - (v - v0) / (v1 - v0)) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (bx, by) = (MARGIN_L, MARGIN_T + ph);
    let _ = writeln!(s, r#"<line class="axis" x1="{bx}" y1="{by}" x2="{}" y2="{by}" stroke="black"/>"#, MARGIN_L + pw);
    let _ = writeln!(s, r#"<line class="axis" x1="{bx}" y1="{MARGIN_T}" x2="{bx}" y2="{by}" stroke="black"/>"#);
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (tv, vv) = (t0 + f * (t1 - t0), v0 + f * (v1 - v0));
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{tv:.3}</text>"#, x(tv), by + 16.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{vv:.3}</text>"#, bx - 6.0, y(vv) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">time (s)</text>"#, MARGIN_L + pw / 2.0, HEIGHT - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.1})">value</text>"#,
        MARGIN_T + ph / 2.0,
        MARGIN_T + ph / 2.0
    );
    for (k, &c) in columns.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let name = escape(&table.channel_names[c]);
        let points: Vec<String> = table
            .timestamps
            .iter()
            .zip(table.data.column(c))
            .filter(|(_, v)| v.is_finite())
            .map(|(&t, &v)| format!("{:.2},{:.2}", x(t), y(v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline data-channel="{name}" fill="none" stroke="{colour}" stroke-width="1" points="{}"/>"#,
            points.join(" ")
        );
        let ly = MARGIN_T + 14.0 + 16.0 * k as f64;
        let lx = MARGIN_L + pw + 12.0;
        let _ = writeln!(s, r#"<text x="{lx}" y="{ly}" font-size="12" fill="{colour}">{name}</text>"#);
    }
    s.push_str("</svg>\n");
    s
}

pub fn cmd_plot(csv: &Path, out: &Path, channels: Option<&[String]>) -> CliResult {
    let table = read_signal_csv(csv).map_err(|e| CliError::parse(format!("{}: {e}", csv.display())))?;
    let columns: Vec<usize> = match channels {
        None => (0..table.channel_names.len()).collect(),
        Some(names) => names
            .iter()
            .map(|n| {
                table
                    .channel_names
                    .iter()
                    .position(|c| c == n)
                    .ok_or_else(|| CliError::parse(format!("unknown channel '{n}' (have {})", table.channel_names.join(", "))))
            })
            .collect::<CliResult<_>>()?,
    };
    if columns.is_empty() {
        return Err(CliError::parse("nothing to plot"));
    }
    std::fs::write(out, render_svg(&table, &columns)).map_err(|e| CliError::runtime(format!("{}: {e}", out.display())))?;
    println!("channels={}", columns.len());
    println!("points={}", table.timestamps.len());
    println!("out={}", out.display());
    Ok(())
}
