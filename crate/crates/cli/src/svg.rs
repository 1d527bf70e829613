//! Region map of the manifold test on the `(tau, alpha)` plane.

use std::fmt::Write;

use ddim_core::{RegionGrid, Verdict};

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;

fn fill(v: Verdict) -> &'static str {
    match v {
        Verdict::J1 => "#4e79a7",
        Verdict::J2 => "#f28e2b",
        Verdict::None => "#f4f4f4",
        Verdict::Error => "#e15759",
    }
}

struct Frame {
    tau: (f64, f64),
    alpha: (f64, f64),
}

impl Frame {
    fn x(&self, tau: f64) -> f64 {
        LEFT + (tau - self.tau.0) / (self.tau.1 - self.tau.0) * (WIDTH - LEFT - RIGHT)
    }

    fn y(&self, alpha: f64) -> f64 {
        HEIGHT - BOTTOM - (alpha - self.alpha.0) / (self.alpha.1 - self.alpha.0) * (HEIGHT - TOP - BOTTOM)
    }
}

/// Segments of the zero level of `lambda1 + lambda2`, by marching squares on
/// the sign grid sampled at cell centers. Crossings sit at edge midpoints.
pub fn sign_contour(grid: &RegionGrid) -> Vec<[(f64, f64); 2]> {
    let (nt, na) = (grid.taus.len(), grid.alphas.len());
    let neg = |r: usize, c: usize| grid.cell(r, c).lambda_sum_sign < 0;
    let mid = |a: (usize, usize), b: (usize, usize)| {
        (0.5 * (grid.taus[a.0] + grid.taus[b.0]), 0.5 * (grid.alphas[a.1] + grid.alphas[b.1]))
    };
    let mut segs = Vec::new();
    for r in 0..nt.saturating_sub(1) {
        for c in 0..na.saturating_sub(1) {
            // corners counter-clockwise from (r, c); edges follow the same order
            let k = [(r, c), (r + 1, c), (r + 1, c + 1), (r, c + 1)];
            let inside: Vec<bool> = k.iter().map(|&(a, b)| neg(a, b)).collect();
            let crossings: Vec<(f64, f64)> =
                (0..4).filter(|&e| inside[e] != inside[(e + 1) % 4]).map(|e| mid(k[e], k[(e + 1) % 4])).collect();
            match crossings.len() {
                2 => segs.push([crossings[0], crossings[1]]),
                // saddle: cut off each negative corner on its own
                4 if inside[0] => {
                    segs.push([crossings[3], crossings[0]]);
                    segs.push([crossings[1], crossings[2]]);
                }
                4 => {
                    segs.push([crossings[0], crossings[1]]);
                    segs.push([crossings[2], crossings[3]]);
                }
                _ => {}
            }
        }
    }
    segs
}

/// Renders the map; `stamp` adds a generation-time comment.
pub fn region_svg(grid: &RegionGrid, stamp: Option<u64>) -> String {
    let f = Frame { tau: grid.tau_range, alpha: grid.alpha_range };
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    if let Some(t) = stamp {
        let _ = writeln!(s, "<!-- generated at unix time {t} -->");
    }
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    let dt = (grid.tau_range.1 - grid.tau_range.0) / grid.taus.len() as f64;
    let da = (grid.alpha_range.1 - grid.alpha_range.0) / grid.alphas.len() as f64;
    let _ = writeln!(s, r#"<g id="cells" stroke="none">"#);
    for c in &grid.cells {
        let x0 = f.x(c.tau - 0.5 * dt);
        let x1 = f.x(c.tau + 0.5 * dt);
        let y0 = f.y(c.alpha + 0.5 * da);
        let y1 = f.y(c.alpha - 0.5 * da);
        let _ = writeln!(
            s,
            r#"<rect x="{x0:.3}" y="{y0:.3}" width="{:.3}" height="{:.3}" fill="{}"><title>tau {:.4} alpha {:.4}: {}</title></rect>"#,
            x1 - x0,
            y1 - y0,
            fill(c.verdict),
            c.tau,
            c.alpha,
            c.verdict.as_str()
        );
    }
    let _ = writeln!(s, "</g>");

    let mut d = String::new();
    for [a, b] in sign_contour(grid) {
        let _ = write!(d, "M{:.3} {:.3}L{:.3} {:.3}", f.x(a.0), f.y(a.1), f.x(b.0), f.y(b.1));
    }
    let _ = writeln!(s, r#"<path id="sum-zero" d="{d}" fill="none" stroke="black" stroke-width="2"/>"#);

    // axes and ticks
    let (xa, xb) = (f.x(grid.tau_range.0), f.x(grid.tau_range.1));
    let (ya, yb) = (f.y(grid.alpha_range.0), f.y(grid.alpha_range.1));
    let _ = writeln!(
        s,
        r#"<rect x="{xa:.3}" y="{yb:.3}" width="{:.3}" height="{:.3}" fill="none" stroke="black"/>"#,
        xb - xa,
        ya - yb
    );
    for i in 0..=5 {
        let tau = grid.tau_range.0 + (grid.tau_range.1 - grid.tau_range.0) * i as f64 / 5.0;
        let x = f.x(tau);
        let _ = writeln!(s, r#"<line x1="{x:.3}" y1="{ya:.3}" x2="{x:.3}" y2="{:.3}" stroke="black"/>"#, ya + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.3}" y="{:.3}" text-anchor="middle">{tau:.2}</text>"#, ya + 20.0);
        let alpha = grid.alpha_range.0 + (grid.alpha_range.1 - grid.alpha_range.0) * i as f64 / 5.0;
        let y = f.y(alpha);
        let _ = writeln!(s, r#"<line x1="{:.3}" y1="{y:.3}" x2="{xa:.3}" y2="{y:.3}" stroke="black"/>"#, xa - 5.0);
        let _ = writeln!(s, r#"<text x="{:.3}" y="{:.3}" text-anchor="end">{alpha:.2}</text>"#, xa - 8.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">tau</text>"#, 0.5 * (xa + xb), HEIGHT - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.3}" text-anchor="middle" transform="rotate(-90 20 {:.3})">alpha</text>"#,
        0.5 * (ya + yb),
        0.5 * (ya + yb)
    );

    let lx = WIDTH - RIGHT + 15.0;
    for (i, (label, v)) in
        [("j = 1", Verdict::J1), ("j = 2", Verdict::J2), ("none", Verdict::None), ("error", Verdict::Error)]
            .iter()
            .enumerate()
    {
        let y = TOP + 20.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{lx}" y="{y}" width="14" height="14" fill="{}" stroke="black" stroke-width="0.5"/>"#,
            fill(*v)
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">{label}</text>"#, lx + 20.0, y + 11.0);
    }
    let y = TOP + 90.0;
    let _ = writeln!(s, r#"<line x1="{lx}" y1="{y}" x2="{}" y2="{y}" stroke="black" stroke-width="2"/>"#, lx + 14.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}">l1 + l2 = 0</text>"#, lx + 20.0, y + 4.0);
    let _ = writeln!(s, "</svg>");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use ddim_core::RegionCell;

    fn grid_with_signs(signs: &[[i8; 3]; 3]) -> RegionGrid {
        let taus = vec![0.5, 1.5, 2.5];
        let alphas = vec![0.5, 1.5, 2.5];
        let mut cells = Vec::new();
        for r in 0..3 {
            for c in 0..3 {
                cells.push(RegionCell {
                    row: r,
                    col: c,
                    tau: taus[r],
                    alpha: alphas[c],
                    verdict: Verdict::None,
                    lambda_sum_sign: signs[r][c],
                    nu: None,
                    margin: None,
                    error: None,
                });
            }
        }
        RegionGrid { tau_range: (0.0, 3.0), alpha_range: (0.0, 3.0), taus, alphas, cells }
    }

    #[test]
    fn contour_separates_a_corner() {
        let g = grid_with_signs(&[[-1, 1, 1], [1, 1, 1], [1, 1, 1]]);
        let segs = sign_contour(&g);
        assert_eq!(segs.len(), 1);
        let mut pts = vec![segs[0][0], segs[0][1]];
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(pts, vec![(0.5, 1.0), (1.0, 0.5)]);
    }

    #[test]
    fn uniform_sign_has_no_contour() {
        assert!(sign_contour(&grid_with_signs(&[[1; 3]; 3])).is_empty());
        assert!(sign_contour(&grid_with_signs(&[[-1; 3]; 3])).is_empty());
    }

    #[test]
    fn canvas_and_stamp() {
        let g = grid_with_signs(&[[-1, -1, 1], [-1, 1, 1], [1, 1, 1]]);
        let a = region_svg(&g, None);
        assert!(a.contains(r#"width="800" height="600""#));
        assert!(!a.contains("<!--"));
        let b = region_svg(&g, Some(5));
        assert_eq!(b.replace("<!-- generated at unix time 5 -->\n", ""), a);
        assert_eq!(a.matches("<rect").count(), 9 + 2 + 4);
    }
}
