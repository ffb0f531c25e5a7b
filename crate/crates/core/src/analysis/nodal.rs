//! Tracing the zero set of an eigenfunction from its boundary zeros.

use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::error::Result;
use crate::field::ScalarField;
use crate::geometry::{LabeledTriangle, Vec2};

/// `|u(v)| / scale` below this makes a vertex a boundary zero.
pub const VERTEX_ZERO: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Endpoint {
    Edge { edge: usize, s: f64, x: f64, y: f64 },
    Vertex { vertex: usize, x: f64, y: f64 },
}

impl Endpoint {
    pub fn point(&self) -> Vec2 {
        match *self {
            Endpoint::Edge { x, y, .. } | Endpoint::Vertex { x, y, .. } => Vec2::new(x, y),
        }
    }

    /// Edges the endpoint lies on.
    pub fn edges(&self) -> Vec<usize> {
        match *self {
            Endpoint::Edge { edge, .. } => vec![edge],
            Endpoint::Vertex { vertex, .. } => LabeledTriangle::edges_at_vertex(vertex).to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodalArc {
    pub points: Vec<[f64; 2]>,
    pub start: Endpoint,
    pub end: Endpoint,
}

impl NodalArc {
    pub fn polyline(&self) -> impl Iterator<Item = Vec2> + '_ {
        self.points.iter().map(|p| Vec2::new(p[0], p[1]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodalReport {
    pub arcs: Vec<NodalArc>,
    pub boundary_zeros: Vec<Endpoint>,
    /// Boundary zeros no traced arc reached.
    pub unmatched: usize,
    /// The tracer shrank its step below the floor.
    pub stalled: bool,
    /// Largest `|u| / scale` on the polylines.
    pub max_residual: f64,
    /// Tracer step.
    pub step: f64,
}

impl NodalReport {
    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    /// One arc, every zero accounted for, no stall.
    pub fn is_single_arc(&self) -> bool {
        self.arcs.len() == 1 && self.unmatched == 0 && !self.stalled
    }
}

fn boundary_zeros<F: ScalarField + ?Sized>(
    f: &F,
    samples: usize,
    scale: f64,
) -> Result<Vec<Endpoint>> {
    let t = f.triangle();
    let perimeter: f64 = (0..3).map(|e| t.edge_length(e)).sum();
    let vertex_zero: Vec<bool> = t
        .vertices()
        .iter()
        .map(|v| f.value_unchecked(v).abs() < VERTEX_ZERO * scale)
        .collect();
    let mut out: Vec<Endpoint> = vertex_zero
        .iter()
        .enumerate()
        .filter(|(_, z)| **z)
        .map(|(i, _)| {
            let v = t.vertex(i);
            Endpoint::Vertex {
                vertex: i,
                x: v.x,
                y: v.y,
            }
        })
        .collect();
    for e in 0..3 {
        let frame = t.edge_frame(e)?;
        let (va, vb) = frame.end_vertices(t.orientation());
        let n = ((samples as f64 * frame.length / perimeter).round() as usize).max(20);
        let u = |s: f64| f.value_unchecked(&frame.point_at(s));
        let vals: Vec<(f64, f64)> = (0..=n)
            .map(|i| {
                let s = frame.length * i as f64 / n as f64;
                (s, u(s))
            })
            .collect();
        for i in 0..n {
            if (i == 0 && vertex_zero[va]) || (i + 1 == n && vertex_zero[vb]) {
                continue;
            }
            let (mut lo, mut hi) = (vals[i], vals[i + 1]);
            if lo.1 == 0.0 && i > 0 {
                continue;
            }
            if lo.1.signum() == hi.1.signum() && lo.1 != 0.0 {
                continue;
            }
            for _ in 0..60 {
                let m = 0.5 * (lo.0 + hi.0);
                let um = u(m);
                if um == 0.0 {
                    lo = (m, um);
                    hi = (m, um);
                    break;
                }
                if um.signum() == lo.1.signum() {
                    lo = (m, um);
                } else {
                    hi = (m, um);
                }
            }
            let s = if lo.1.abs() <= hi.1.abs() { lo.0 } else { hi.0 };
            let p = frame.point_at(s);
            out.push(Endpoint::Edge {
                edge: e,
                s,
                x: p.x,
                y: p.y,
            });
        }
    }
    Ok(out)
}

/// Newton projection onto `u = 0`.
fn correct<F: ScalarField + ?Sized>(f: &F, mut q: Vec2, tol: f64) -> Option<Vec2> {
    for _ in 0..12 {
        let s = f.eval_unchecked(&q, false);
        if s.u.abs() <= tol {
            return Some(q);
        }
        let g2 = s.grad.norm_squared();
        if g2 == 0.0 {
            return None;
        }
        q -= s.grad * (s.u / g2);
    }
    let u = f.value_unchecked(&q);
    (u.abs() <= tol).then_some(q)
}

/// Traces every arc of `u = 0` that starts at a boundary zero on an edge.
pub fn nodal_arcs<F: ScalarField + ?Sized>(f: &F, cfg: &AnalysisConfig) -> Result<NodalReport> {
    let t = f.triangle();
    let diam = t.diameter();
    let scale = f.scale();
    let zeros = boundary_zeros(f, cfg.nodal_boundary_samples, scale)?;
    let h0 = cfg.nodal_step * diam;
    let floor = 1e-6 * diam;
    let tol = 1e-13 * scale;
    let mut used = vec![false; zeros.len()];
    let mut arcs = Vec::new();
    let mut stalled = false;
    let mut max_residual = 0.0_f64;
    let perimeter: f64 = (0..3).map(|e| t.edge_length(e)).sum();
    let max_steps = (20.0 * perimeter / h0) as usize + 100;
    while let Some(start_idx) =
        (0..zeros.len()).find(|&i| !used[i] && matches!(zeros[i], Endpoint::Edge { .. }))
    {
        used[start_idx] = true;
        let start = zeros[start_idx];
        let Endpoint::Edge { edge, .. } = start else {
            unreachable!()
        };
        let inward = -t.edge_frame(edge)?.normal;
        let mut p = start.point();
        let mut points = vec![[p.x, p.y]];
        let mut dir = {
            let g = f.eval_unchecked(&p, false).grad;
            let d = Vec2::new(-g.y, g.x);
            let d = if d.dot(&inward) < 0.0 { -d } else { d };
            d.normalize()
        };
        let mut h = h0;
        let mut end = None;
        for _ in 0..max_steps {
            // arrive at another boundary zero when it is within reach
            let reach = zeros
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != start_idx && !used[*i])
                .map(|(i, z)| (i, (z.point() - p).norm()))
                .filter(|(_, d)| *d < 1.5 * h0)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((i, _)) = reach {
                if points.len() > 1 || (zeros[i].point() - p).dot(&dir) > 0.0 {
                    used[i] = true;
                    let z = zeros[i].point();
                    points.push([z.x, z.y]);
                    end = Some(zeros[i]);
                    break;
                }
            }
            let q = p + dir * h;
            let corrected = correct(f, q, tol).filter(|c| (c - p).norm() < 2.0 * h);
            let Some(c) = corrected else {
                h *= 0.5;
                if h < floor {
                    stalled = true;
                    break;
                }
                continue;
            };
            if !t.contains(&c, 1e-9 * diam) {
                h *= 0.5;
                if h < floor {
                    stalled = true;
                    break;
                }
                continue;
            }
            let g = f.eval_unchecked(&c, false).grad;
            let mut d = Vec2::new(-g.y, g.x).normalize();
            if d.dot(&dir) < 0.0 {
                d = -d;
            }
            max_residual = max_residual.max(f.value_unchecked(&c).abs() / scale);
            points.push([c.x, c.y]);
            p = c;
            dir = d;
            h = (h * 2.0).min(h0);
        }
        match end {
            Some(end) => arcs.push(NodalArc { points, start, end }),
            None => {
                stalled = true;
            }
        }
    }
    let unmatched = used.iter().filter(|u| !**u).count();
    Ok(NodalReport {
        arcs,
        boundary_zeros: zeros,
        unmatched,
        stalled,
        max_residual,
        step: h0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ClosedForm;

    #[test]
    fn diagonal_of_the_right_isosceles_closed_form() {
        let f = ClosedForm::cosine_difference(LabeledTriangle::right_isosceles(), 1.0);
        let rep = nodal_arcs(&f, &AnalysisConfig::default()).unwrap();
        assert!(rep.is_single_arc(), "{rep:?}");
        let arc = &rep.arcs[0];
        let ends = [arc.start, arc.end];
        assert!(ends
            .iter()
            .any(|e| matches!(e, Endpoint::Vertex { vertex: 0, .. })));
        assert!(ends
            .iter()
            .any(|e| (e.point() - Vec2::new(0.5, 0.5)).norm() < 1e-12));
        for p in arc.polyline() {
            assert!((p.x - p.y).abs() < 1e-10, "{p:?}");
        }
        assert!(rep.max_residual < 1e-12);
    }
}
