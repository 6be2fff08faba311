//! Static SVG plot of sweep results.

use std::fmt::Write as _;

use mcd_core::{Readout, SweepResult};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

fn color(readout: Readout) -> &'static str {
    match readout {
        Readout::ClassicalBalanced => "#1f77b4",
        Readout::Squeezed => "#d62728",
    }
}

/// Round tick spacing giving roughly `target` intervals over `span`.
fn tick_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = tick_step(hi - lo, 6.0);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

/// Ellipticity (mrad) versus field (mT) with error bars, one series per
/// readout.
pub fn sweep_svg(results: &[SweepResult]) -> String {
    let points = results.iter().flat_map(|r| r.points.iter());
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        let (x, y, e) = (p.field * 1e3, p.mean_eta_f * 1e3, p.std_eta_f * 1e3);
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y - e);
        y_hi = y_hi.max(y + e);
    }
    if !(x_hi > x_lo) {
        x_lo -= 1.0;
        x_hi += 1.0;
    }
    if !(y_hi > y_lo) {
        y_lo -= 1.0;
        y_hi += 1.0;
    }
    let pad = 0.05 * (y_hi - y_lo);
    let (y_lo, y_hi) = (y_lo - pad, y_hi + pad);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for t in ticks(x_lo, x_hi) {
        let x = sx(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 20.0,
            mcd_core::io::format_number(t)
        );
    }
    for t in ticks(y_lo, y_hi) {
        let y = sy(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            y + 4.0,
            mcd_core::io::format_number((t * 1e9).round() / 1e9)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Magnetic field (mT)</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(20 {:.2}) rotate(-90)" text-anchor="middle">Faraday ellipticity (mrad)</text>"#,
        TOP + plot_h / 2.0
    );

    for (i, r) in results.iter().enumerate() {
        let c = color(r.readout);
        // offset the series slightly so overlapping error bars stay visible
        let dx = (i as f64 - (results.len() as f64 - 1.0) / 2.0) * 4.0;
        let path: Vec<String> = r
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.field * 1e3) + dx, sy(p.mean_eta_f * 1e3)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1"/>"#,
            path.join(" ")
        );
        for p in &r.points {
            let x = sx(p.field * 1e3) + dx;
            let (y, e) = (p.mean_eta_f * 1e3, p.std_eta_f * 1e3);
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{c}"/><circle cx="{x:.2}" cy="{:.2}" r="3" fill="{c}"/>"#,
                sy(y - e),
                sy(y + e),
                sy(y)
            );
        }
        let ly = TOP + 18.0 + 18.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{ly:.2}" r="4" fill="{c}"/><text x="{:.2}" y="{:.2}">{} ({:.2} dB)</text>"#,
            LEFT + 16.0,
            LEFT + 26.0,
            ly + 4.0,
            r.readout.label(),
            r.points.first().map(|p| p.noise_floor_db).unwrap_or(0.0)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tick_spacing() {
        assert_eq!(tick_step(600.0, 6.0), 100.0);
        assert_eq!(tick_step(0.02, 6.0), 0.005);
        assert_eq!(ticks(0.0, 600.0).len(), 7);
    }
}
