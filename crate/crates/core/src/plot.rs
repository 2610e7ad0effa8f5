//! Minimal SVG line plots of spectra: raw curves and curves rescaled by `F(L)`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::scaling::ScalingLaw;
use crate::spectrum::SpectrumSeries;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Curve<'a> {
    pub label: String,
    pub x: &'a [f64],
    pub y: Vec<f64>,
}

fn fmt_num(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Renders curves sharing one pair of axes.
pub fn render(title: &str, xlabel: &str, ylabel: &str, curves: &[Curve<'_>]) -> String {
    let (mut x0, mut x1, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for c in curves {
        for (&x, &y) in c.x.iter().zip(&c.y) {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
    }
    if !(x1 > x0) {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if y1 <= 0.0 {
        y1 = 1.0;
    }
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - y / y1 * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 12.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y1 * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, px(fx), HEIGHT - MARGIN + 16.0, fmt_num(fx));
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, MARGIN - 4.0, py(fy) + 4.0, fmt_num(fy));
    }
    for (i, c) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = c
            .x
            .iter()
            .zip(&c.y)
            .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = MARGIN + 16.0 + 16.0 * i as f64;
        let lx = WIDTH - MARGIN - 110.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&c.label));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `<name>_raw.svg` and `<name>_rescaled.svg`.
pub fn write_spectrum_plots(
    dir: &Path,
    name: &str,
    spectra: &[(f64, SpectrumSeries)],
    law: ScalingLaw,
    dimension: usize,
) -> Result<Vec<PathBuf>> {
    let raw: Vec<Curve<'_>> = spectra
        .iter()
        .map(|(l, s)| Curve {
            label: format!("L = {l}"),
            x: &s.omega0,
            y: s.values.clone(),
        })
        .collect();
    let scaled: Vec<Curve<'_>> = spectra
        .iter()
        .map(|(l, s)| {
            let f = law.eval(*l, dimension);
            Curve {
                label: format!("L = {l}"),
                x: &s.omega0,
                y: s.values.iter().map(|v| v / f).collect(),
            }
        })
        .collect();
    let raw_path = dir.join(format!("{name}_raw.svg"));
    let scaled_path = dir.join(format!("{name}_rescaled.svg"));
    std::fs::write(&raw_path, render(name, "ω₀", "S̄(ω₀)", &raw))?;
    std::fs::write(
        &scaled_path,
        render(&format!("{name}, {law} law"), "ω₀", "S̄(ω₀) / F(L)", &scaled),
    )?;
    Ok(vec![raw_path, scaled_path])
}
