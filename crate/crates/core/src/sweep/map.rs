//! SVG picture of a sweep over the angle simplex.
//!
//! The simplex `β1 + β2 + β3 = π` is drawn as an equilateral triangle with
//! the corner `β_i = π` at the i-th corner. Obtuse shapes fill the three
//! corner triangles, acute shapes the central one, and each node gets a
//! hexagonal cell coloured by its verdict.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::analysis::Classification;

use super::SweepRecord;

const SIZE: f64 = 600.0;
const PAD: f64 = 40.0;

fn colour(c: Classification) -> &'static str {
    match c {
        Classification::Crit => "#2e8b57",
        Classification::Nocrit => "#3b6fb6",
        Classification::Ambiguous => "#9a9a9a",
    }
}

/// Page coordinates of the shape with angles `b`.
fn project(b: [f64; 3]) -> (f64, f64) {
    let (w2, w3) = (b[1] / PI, b[2] / PI);
    let x = w2 + 0.5 * w3;
    let y = 0.5 * 3f64.sqrt() * w3;
    (PAD + SIZE * x, PAD + SIZE * 3f64.sqrt() / 2.0 - SIZE * y)
}

fn polygon(out: &mut String, pts: &[(f64, f64)], style: &str) {
    let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let _ = writeln!(out, r#"<polygon points="{}" {style}/>"#, coords.join(" "));
}

/// Renders the records; `header` goes into a leading comment.
pub fn sweep_svg(records: &[SweepRecord], header: &str) -> String {
    let width = SIZE + 2.0 * PAD;
    let height = SIZE * 3f64.sqrt() / 2.0 + 2.0 * PAD + 40.0;
    let mut s = String::new();
    let _ = writeln!(s, "<!-- {header} -->");
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let corner = |i: usize| {
        let mut b = [0.0; 3];
        b[i] = PI;
        project(b)
    };
    let mid = |i: usize, j: usize| {
        let mut b = [0.0; 3];
        b[i] = PI / 2.0;
        b[j] = PI / 2.0;
        project(b)
    };
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        polygon(
            &mut s,
            &[corner(i), mid(i, j), mid(i, k)],
            r##"fill="#d8e8f8" stroke="none""##,
        );
    }
    polygon(
        &mut s,
        &[mid(0, 1), mid(1, 2), mid(2, 0)],
        r##"fill="#dcf2dc" stroke="none""##,
    );

    // hexagonal cells dual to the node lattice
    let spacing = node_spacing(records);
    let radius = SIZE * spacing / PI / 3f64.sqrt();
    for r in records {
        let (cx, cy) = project(r.angles());
        let hex: Vec<(f64, f64)> = (0..6)
            .map(|q| {
                let a = PI / 6.0 + q as f64 * PI / 3.0;
                (cx + radius * a.cos(), cy - radius * a.sin())
            })
            .collect();
        polygon(
            &mut s,
            &hex,
            &format!(
                r##"fill="{}" fill-opacity="0.85" stroke="#ffffff" stroke-width="0.5""##,
                colour(r.verdict)
            ),
        );
    }
    polygon(
        &mut s,
        &[corner(0), corner(1), corner(2)],
        r##"fill="none" stroke="#333333" stroke-width="1.2""##,
    );
    for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
        let mut b = [0.0; 3];
        b[i] = PI / 2.0;
        b[j] = PI / 4.0;
        b[k] = PI / 4.0;
        let (x, y) = project(b);
        let _ = writeln!(
            s,
            r##"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="#d62728"/>"##
        );
    }
    let labels = [
        ("β1 = π", 0, -8.0, 18.0),
        ("β2 = π", 1, 8.0, 18.0),
        ("β3 = π", 2, 0.0, -10.0),
    ];
    for (text, i, dx, dy) in labels {
        let (x, y) = corner(i);
        let anchor = if dx < 0.0 {
            "end"
        } else if dx > 0.0 {
            "start"
        } else {
            "middle"
        };
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="{anchor}">{text}</text>"#,
            x + dx,
            y + dy
        );
    }
    let base = PAD + SIZE * 3f64.sqrt() / 2.0 + 45.0;
    for (q, c) in [
        Classification::Crit,
        Classification::Nocrit,
        Classification::Ambiguous,
    ]
    .into_iter()
    .enumerate()
    {
        let x = PAD + 150.0 * q as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.0}" y="{:.0}" width="14" height="14" fill="{}"/>"#,
            base - 12.0,
            colour(c)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.0}" y="{base:.0}" font-family="sans-serif" font-size="13">{c}</text>"#,
            x + 20.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Smallest positive difference between node angles, the lattice step.
fn node_spacing(records: &[SweepRecord]) -> f64 {
    let mut b1: Vec<f64> = records.iter().map(|r| r.beta1).collect();
    b1.sort_by(f64::total_cmp);
    b1.windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 1e-9)
        .fold(f64::INFINITY, f64::min)
        .min(PI / 8.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ShapeKind;

    fn rec(b1: f64, b2: f64, v: Classification) -> SweepRecord {
        SweepRecord {
            beta1: b1,
            beta2: b2,
            kind: ShapeKind::Acute,
            mu2: None,
            vertex_values: None,
            c1: [None; 3],
            verdict: v,
            crit: None,
            sigma: None,
            normal_residual: None,
            flags: vec![],
            reason: None,
        }
    }

    #[test]
    fn corners_and_cells() {
        let (x0, y0) = project([PI, 0.0, 0.0]);
        let (x1, y1) = project([0.0, PI, 0.0]);
        let (x2, y2) = project([0.0, 0.0, PI]);
        assert!((y0 - y1).abs() < 1e-9 && x1 > x0);
        assert!(y2 < y0 && (x2 - 0.5 * (x0 + x1)).abs() < 1e-9);
        let recs = vec![
            rec(1.0, 1.0, Classification::Crit),
            rec(1.1, 1.0, Classification::Nocrit),
        ];
        let svg = sweep_svg(&recs, "config=abc seed=1");
        assert!(svg.starts_with("<!-- config=abc seed=1 -->"));
        assert_eq!(svg.matches("fill-opacity").count(), 2);
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
