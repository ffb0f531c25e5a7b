//! Marching-squares level lines and a self-contained SVG contour plot.

use std::fmt::Write as _;

use crate::field::{bounding_box, ScalarField};
use crate::geometry::Vec2;

/// Values on a regular `(nx + 1) × (ny + 1)` node grid; `NaN` marks
/// nodes that are not sampled.
#[derive(Debug, Clone)]
pub struct Grid {
    pub origin: Vec2,
    pub step: Vec2,
    pub nx: usize,
    pub ny: usize,
    /// Row-major, `values[j * (nx + 1) + i]` at `origin + (i, j) ⊙ step`.
    pub values: Vec<f64>,
}

impl Grid {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * (self.nx + 1) + i]
    }

    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        self.origin + Vec2::new(i as f64 * self.step.x, j as f64 * self.step.y)
    }

    /// Samples `f` over the bounding box of its triangle. Nodes slightly
    /// outside are kept so that cells cut by the boundary are complete;
    /// the expansion is smooth across the sides there.
    pub fn sample<F: ScalarField + ?Sized>(f: &F, n: usize) -> Self {
        let t = f.triangle();
        let (lo, hi) = bounding_box(t);
        let step = Vec2::new((hi.x - lo.x) / n as f64, (hi.y - lo.y) / n as f64);
        let band = 1.5 * step.norm();
        let mut values = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                let p = lo + Vec2::new(i as f64 * step.x, j as f64 * step.y);
                values.push(if t.inset_distance(&p) >= -band {
                    f.value_unchecked(&p)
                } else {
                    f64::NAN
                });
            }
        }
        Grid {
            origin: lo,
            step,
            nx: n,
            ny: n,
            values,
        }
    }
}

/// Line segments of `{value = level}`, one per crossing pair in each cell.
/// Saddle cells are resolved by the cell-centre average.
pub fn marching_squares(g: &Grid, level: f64) -> Vec<(Vec2, Vec2)> {
    let mut out = Vec::new();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let v: Vec<f64> = c.iter().map(|&(a, b)| g.value(a, b) - level).collect();
            if v.iter().any(|x| x.is_nan()) {
                continue;
            }
            let p: Vec<Vec2> = c.iter().map(|&(a, b)| g.node(a, b)).collect();
            let cut = |a: usize, b: usize| {
                let s = v[a] / (v[a] - v[b]);
                p[a] + (p[b] - p[a]) * s
            };
            let mut crossings: Vec<(usize, Vec2)> = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (e, (e + 1) % 4);
                if (v[a] < 0.0) != (v[b] < 0.0) {
                    crossings.push((e, cut(a, b)));
                }
            }
            match crossings.len() {
                2 => out.push((crossings[0].1, crossings[1].1)),
                4 => {
                    let centre = v.iter().sum::<f64>() / 4.0;
                    // pair edges so that the centre stays on its own side
                    if (centre < 0.0) == (v[0] < 0.0) {
                        out.push((crossings[0].1, crossings[1].1));
                        out.push((crossings[2].1, crossings[3].1));
                    } else {
                        out.push((crossings[3].1, crossings[0].1));
                        out.push((crossings[1].1, crossings[2].1));
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// Contour plot of `f` with `levels` evenly spaced positive and negative
/// levels, the zero level drawn heavier, clipped to the triangle.
/// `marks` are drawn as small circles.
pub fn contour_svg<F: ScalarField + ?Sized>(
    f: &F,
    n: usize,
    levels: usize,
    marks: &[[f64; 2]],
    header: &str,
) -> String {
    let t = f.triangle();
    let grid = Grid::sample(f, n);
    let (lo, hi) = bounding_box(t);
    let extent = (hi - lo).x.max((hi - lo).y);
    let size = 560.0;
    let pad = 20.0;
    let scale = size / extent;
    let to_page = |p: Vec2| (pad + (p.x - lo.x) * scale, pad + (hi.y - p.y) * scale);
    let width = (hi.x - lo.x) * scale + 2.0 * pad;
    let height = (hi.y - lo.y) * scale + 2.0 * pad;
    let amp = grid
        .values
        .iter()
        .filter(|v| v.is_finite())
        .fold(0.0_f64, |m, v| m.max(v.abs()));

    let mut s = String::new();
    let _ = writeln!(s, "<!-- {header} -->");
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let outline: Vec<String> = t
        .vertices()
        .iter()
        .map(|v| {
            let (x, y) = to_page(*v);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let outline = outline.join(" ");
    let _ = writeln!(
        s,
        r#"<defs><clipPath id="tri"><polygon points="{outline}"/></clipPath></defs>"#
    );
    let _ = writeln!(
        s,
        r##"<polygon points="{outline}" fill="#fafafa" stroke="none"/>"##
    );
    let _ = writeln!(s, r#"<g clip-path="url(#tri)" fill="none">"#);
    for q in 1..=levels {
        let level = amp * q as f64 / (levels + 1) as f64;
        for (sign, colour) in [(1.0, "#c0392b"), (-1.0, "#2c62a8")] {
            let d = path_data(&marching_squares(&grid, sign * level), &to_page);
            if !d.is_empty() {
                let _ = writeln!(s, r#"<path d="{d}" stroke="{colour}" stroke-width="0.8"/>"#);
            }
        }
    }
    let d = path_data(&marching_squares(&grid, 0.0), &to_page);
    if !d.is_empty() {
        let _ = writeln!(s, r##"<path d="{d}" stroke="#111111" stroke-width="2"/>"##);
    }
    s.push_str("</g>\n");
    let _ = writeln!(
        s,
        r##"<polygon points="{outline}" fill="none" stroke="#333333" stroke-width="1.5"/>"##
    );
    for m in marks {
        let (x, y) = to_page(Vec2::new(m[0], m[1]));
        let _ = writeln!(
            s,
            r##"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="#f1c40f" stroke="#111111"/>"##
        );
    }
    for (i, v) in t.vertices().iter().enumerate() {
        let (x, y) = to_page(*v);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">v{}</text>"#,
            x + 4.0,
            y - 4.0,
            i + 1
        );
    }
    s.push_str("</svg>\n");
    s
}

fn path_data(segments: &[(Vec2, Vec2)], to_page: &impl Fn(Vec2) -> (f64, f64)) -> String {
    let mut d = String::new();
    for (a, b) in segments {
        let (ax, ay) = to_page(*a);
        let (bx, by) = to_page(*b);
        let _ = write!(d, "M{ax:.2} {ay:.2}L{bx:.2} {by:.2}");
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ClosedForm;
    use crate::geometry::LabeledTriangle;

    #[test]
    fn linear_field_gives_straight_level_line() {
        let g = Grid {
            origin: Vec2::zeros(),
            step: Vec2::new(0.1, 0.1),
            nx: 10,
            ny: 10,
            values: (0..121).map(|k| (k % 11) as f64 * 0.1 - 0.55).collect(),
        };
        let segs = marching_squares(&g, 0.0);
        assert_eq!(segs.len(), 10);
        for (a, b) in segs {
            assert!((a.x - 0.55).abs() < 1e-12 && (b.x - 0.55).abs() < 1e-12);
        }
    }

    #[test]
    fn nodal_line_of_right_isosceles_is_the_diagonal() {
        let f = ClosedForm::cosine_difference(LabeledTriangle::right_isosceles(), 1.0);
        let g = Grid::sample(&f, 80);
        let segs = marching_squares(&g, 0.0);
        assert!(!segs.is_empty());
        for (a, b) in segs {
            assert!((a.x - a.y).abs() < 1e-9 && (b.x - b.y).abs() < 1e-9);
        }
        let svg = contour_svg(&f, 60, 6, &[[0.5, 0.5]], "config=x seed=1");
        assert!(svg.starts_with("<!-- config=x seed=1 -->"));
        assert!(svg.contains("stroke-width=\"2\""));
    }
}
