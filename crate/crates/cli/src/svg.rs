//! Minimal SVG heatmaps, one rect per cell, north up.

use std::fmt::Write;

use gfdprop_core::Field;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Palette {
    /// Blue through white to red, symmetric about zero.
    Diverging,
    /// White to dark blue from zero to the maximum.
    Sequential,
}

const CELL: usize = 8;
const MARGIN: usize = 24;

fn lerp(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

fn colour(value: f64, scale: f64, palette: Palette) -> String {
    const WHITE: [f64; 3] = [255.0, 255.0, 255.0];
    const BLUE: [f64; 3] = [33.0, 102.0, 172.0];
    const RED: [f64; 3] = [178.0, 24.0, 43.0];
    const NAVY: [f64; 3] = [8.0, 48.0, 107.0];
    let t = if scale > 0.0 && value.is_finite() { value / scale } else { 0.0 };
    let rgb = match palette {
        Palette::Diverging if t < 0.0 => lerp(WHITE, BLUE, (-t).min(1.0)),
        Palette::Diverging => lerp(WHITE, RED, t.min(1.0)),
        Palette::Sequential => lerp(WHITE, NAVY, t.clamp(0.0, 1.0)),
    };
    format!("#{:02x}{:02x}{:02x}", rgb[0].round() as u8, rgb[1].round() as u8, rgb[2].round() as u8)
}

pub fn heatmap(field: &Field, title: &str, palette: Palette) -> String {
    let (nx, ny) = field.shape();
    let scale = field.max_abs();
    let (w, h) = (nx * CELL + 2 * MARGIN, ny * CELL + 2 * MARGIN);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="16" font-family="monospace" font-size="12">{title}  max|.|={scale:.3e}</text>"#
    );
    for i in 0..nx {
        for j in 0..ny {
            let x = MARGIN + i * CELL;
            let y = MARGIN + (ny - 1 - j) * CELL;
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{}"/>"#,
                colour(field[(i, j)], scale, palette)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_rect_per_cell() {
        let f = Field::from_fn(3, 2, |i, j| i as f64 - j as f64);
        let svg = heatmap(&f, "eta", Palette::Diverging);
        assert_eq!(svg.matches("<rect").count(), 6);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn palette_extremes() {
        assert_eq!(colour(0.0, 1.0, Palette::Diverging), "#ffffff");
        assert_eq!(colour(1.0, 1.0, Palette::Diverging), "#b2182b");
        assert_eq!(colour(-1.0, 1.0, Palette::Diverging), "#2166ac");
        assert_eq!(colour(5.0, 0.0, Palette::Sequential), "#ffffff");
    }
}
