//! Minimal SVG plots of fitted curves and P_SD points.

use std::fmt::Write as _;

use crate::tables::CurveSamples;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 40.0;
const COLORS: [&str; 4] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a"];

/// `(delta_obj, p_sd, support)` of one co-distribution bin.
pub type Point = (f64, f64, u32);

/// File-name-safe form of a range id: `(79,86]` → `79_86`.
pub fn file_stem(range_id: &str) -> String {
    range_id.trim_matches(|c| c == '(' || c == ']').replace(',', "_")
}

/// One plot: every curve of `range_id` plus its P_SD points.
pub fn render_range(range_id: &str, curves: &[&CurveSamples], points: &[Point]) -> String {
    let x_max = curves
        .iter()
        .flat_map(|c| c.points.iter().map(|p| p.0))
        .chain(points.iter().map(|p| p.0))
        .fold(1.0_f64, f64::max);
    let sx = |x: f64| MARGIN + x / x_max * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - y * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="16" text-anchor="middle">{range_id}</text>"#, WIDTH / 2.0);
    let (x0, x1, y0, y1) = (sx(0.0), sx(x_max), sy(0.0), sy(1.0));
    let _ = writeln!(s, r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" stroke="black" fill="none"/>"#);
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{t}</text>"#, x0 - 4.0, sy(t) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">ΔVMAF (max {x_max:.1})</text>"#, WIDTH / 2.0, HEIGHT - 8.0);

    let max_support = points.iter().map(|p| p.2).max().unwrap_or(1).max(1);
    for &(x, y, n) in points {
        let r = 2.0 + 4.0 * (f64::from(n) / f64::from(max_support)).sqrt();
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="{r:.2}" fill="grey" fill-opacity="0.6"/>"#, sx(x), sy(y));
    }
    for (i, c) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let dash = if c.valid { "" } else { r#" stroke-dasharray="4 3""# };
        let pts: Vec<String> = c.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" stroke="{color}" fill="none"{dash}/>"#, pts.join(" "));
        let ly = MARGIN + 14.0 * i as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{ly}" fill="{color}" text-anchor="end">{}</text>"#, x1, c.family);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_well_formed_svg() {
        let c = CurveSamples {
            range_id: "(79,86]".into(),
            family: "glm".into(),
            valid: true,
            points: vec![(0.0, 0.1), (10.0, 0.9)],
        };
        let svg = render_range("(79,86]", &[&c], &[(1.0, 0.0, 3), (9.0, 1.0, 1)]);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(file_stem("(79,86]"), "79_86");
    }
}
