//! SVG drawing of a mesh: one stroke per canonical meshline, width
//! proportional to multiplicity.

use std::fmt::Write;
use std::path::Path;

use crate::error::Result;
use crate::mesh::{Direction, Mesh};

/// Drawing area side in pixels (the longer side of the domain).
pub const SIZE: f64 = 512.0;
const MARGIN: f64 = 12.0;
const STROKE: f64 = 0.75;

pub fn render_svg(mesh: &Mesh) -> String {
    let [x0, x1, y0, y1] = mesh.domain().to_f64();
    let scale = SIZE / (x1 - x0).max(y1 - y0);
    let (w, h) = ((x1 - x0) * scale + 2.0 * MARGIN, (y1 - y0) * scale + 2.0 * MARGIN);
    let px = |x: f64| MARGIN + (x - x0) * scale;
    let py = |y: f64| MARGIN + (y1 - y) * scale;
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.3} {h:.3}">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(out, r#"<g stroke="black" stroke-linecap="square">"#).unwrap();
    for l in mesh.meshlines() {
        let (a, b) = (l.span.0.to_f64(), l.span.1.to_f64());
        let c = l.fixed.to_f64();
        let (xa, ya, xb, yb) = match l.direction {
            Direction::Vertical => (px(c), py(a), px(c), py(b)),
            Direction::Horizontal => (px(a), py(c), px(b), py(c)),
        };
        writeln!(
            out,
            r#"<line x1="{xa:.3}" y1="{ya:.3}" x2="{xb:.3}" y2="{yb:.3}" stroke-width="{:.3}"/>"#,
            STROKE * l.multiplicity as f64
        )
        .unwrap();
    }
    out.push_str("</g>\n</svg>\n");
    out
}

pub fn write_svg(mesh: &Mesh, path: &Path) -> Result<()> {
    std::fs::write(path, render_svg(mesh))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{LRSpace, Rect};

    #[test]
    fn boundary_only_mesh_has_four_strokes() {
        let s = LRSpace::uniform(Rect::unit_square(), (2, 2), (1, 1)).unwrap();
        let svg = render_svg(s.mesh());
        assert_eq!(svg.matches("<line").count(), 4);
        assert_eq!(svg.matches(r#"stroke-width="2.250""#).count(), 4);
    }

    #[test]
    fn output_is_deterministic() {
        let s = LRSpace::uniform(Rect::unit_square(), (2, 2), (4, 2)).unwrap();
        assert_eq!(render_svg(s.mesh()), render_svg(&s.mesh().clone()));
        // 3 interior vertical and 1 interior horizontal runs.
        assert_eq!(render_svg(s.mesh()).matches("<line").count(), 8);
    }
}
