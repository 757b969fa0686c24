//! Heatmaps of grid fields as standalone SVG.

use std::fmt::Write as _;

use crate::grid::Grid2;

/// Diverging blue–white–red map of `values` (one per grid node, `None` for
/// blank cells), symmetric about zero.
pub fn heatmap(grid: &Grid2, values: &[Option<f64>], title: &str) -> String {
    let cell = 6usize;
    let (w, hgt) = (grid.nx * cell, grid.ny * cell + 20);
    let scale = values.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{hgt}\" viewBox=\"0 0 {w} {hgt}\">"
    );
    let _ = writeln!(
        s,
        "<text x=\"2\" y=\"14\" font-family=\"monospace\" font-size=\"12\">{} (max |v| = {:.3e})</text>",
        escape(title),
        scale
    );
    for (k, v) in values.iter().enumerate() {
        let Some(v) = v else { continue };
        let (i, j) = grid.ij(k);
        // row 0 at the bottom
        let y = 20 + (grid.ny - 1 - j) * cell;
        let x = i * cell;
        let t = (v / scale).clamp(-1.0, 1.0);
        let (r, g, b) = if t >= 0.0 {
            (255, (255.0 * (1.0 - t)) as u8, (255.0 * (1.0 - t)) as u8)
        } else {
            ((255.0 * (1.0 + t)) as u8, (255.0 * (1.0 + t)) as u8, 255)
        };
        let _ = writeln!(
            s,
            "<rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" fill=\"#{r:02x}{g:02x}{b:02x}\"/>"
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Marks nodes in `flagged` red over a light grey mask of `present`.
pub fn violation_map(grid: &Grid2, present: &[bool], flagged: &[usize], title: &str) -> String {
    let mut vals: Vec<Option<f64>> = present.iter().map(|p| p.then_some(0.0)).collect();
    for &k in flagged {
        if k < vals.len() {
            vals[k] = Some(1.0);
        }
    }
    heatmap(grid, &vals, title)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_one_rect_per_value() {
        let g = Grid2 {
            offset: [0, 0],
            h: 1.0,
            nx: 3,
            ny: 2,
        };
        let vals = vec![Some(1.0), None, Some(-1.0), Some(0.0), None, None];
        let s = heatmap(&g, &vals, "a<b");
        assert_eq!(s.matches("<rect").count(), 3);
        assert!(s.contains("#ff0000") && s.contains("#0000ff") && s.contains("a&lt;b"));
    }
}
