//! Where the extrema sit, and whether each vertex is a strict local extremum.

use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::error::Result;
use crate::field::{lattice_points, ScalarField};
use crate::geometry::Vec2;

use super::coefficients::VertexFrame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremumReport {
    pub argmax: [f64; 2],
    pub argmin: [f64; 2],
    pub max: f64,
    pub min: f64,
    /// Vertex holding the largest / smallest vertex value.
    pub max_vertex: usize,
    pub min_vertex: usize,
    /// No non-vertex sample beats the best vertex by more than the tolerance.
    pub max_at_vertex: bool,
    pub min_at_vertex: bool,
    /// Largest excess of a non-vertex sample over the best vertex, relative to scale.
    pub excess: f64,
}

impl ExtremumReport {
    pub fn at_vertices(&self) -> bool {
        self.max_at_vertex && self.min_at_vertex
    }
}

pub fn extremum_locus<F: ScalarField + ?Sized>(
    f: &F,
    cfg: &AnalysisConfig,
) -> Result<ExtremumReport> {
    let t = f.triangle();
    let scale = f.scale();
    let vals: Vec<f64> = t.vertices().iter().map(|v| f.value_unchecked(v)).collect();
    let max_vertex = (0..3).max_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    let min_vertex = (0..3).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    let mut points = lattice_points(t, cfg.extremum_grid);
    let perimeter: f64 = (0..3).map(|e| t.edge_length(e)).sum();
    for e in 0..3 {
        let fr = t.edge_frame(e)?;
        let n = ((cfg.extremum_boundary as f64 * fr.length / perimeter).round() as usize).max(2);
        points.extend((1..n).map(|i| fr.point_at(fr.length * i as f64 / n as f64)));
    }
    let near = |p: &Vec2| {
        t.vertices()
            .iter()
            .any(|v| (p - v).norm() < 1e-14 * t.diameter())
    };
    let (mut best_hi, mut best_lo) = (
        (vals[max_vertex], t.vertex(max_vertex)),
        (vals[min_vertex], t.vertex(min_vertex)),
    );
    let mut excess = 0.0_f64;
    for p in points.iter().filter(|p| !near(p)) {
        let u = f.value_unchecked(p);
        excess = excess
            .max((u - vals[max_vertex]) / scale)
            .max((vals[min_vertex] - u) / scale);
        if u > best_hi.0 {
            best_hi = (u, *p);
        }
        if u < best_lo.0 {
            best_lo = (u, *p);
        }
    }
    let tol = cfg.extremum_tol * scale;
    Ok(ExtremumReport {
        argmax: [best_hi.1.x, best_hi.1.y],
        argmin: [best_lo.1.x, best_lo.1.y],
        max: best_hi.0,
        min: best_lo.0,
        max_vertex,
        min_vertex,
        max_at_vertex: best_hi.0 <= vals[max_vertex] + tol,
        min_at_vertex: best_lo.0 >= vals[min_vertex] - tol,
        excess,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexKind {
    Max,
    Min,
    Neither,
}

/// Compares `u(v)` with samples on a small arc about each vertex.
pub fn vertex_ring_kinds<F: ScalarField + ?Sized>(f: &F, cfg: &AnalysisConfig) -> [VertexKind; 3] {
    let t = f.triangle();
    let r = cfg.ring_radius * t.diameter();
    let n = cfg.ring_samples.max(4);
    std::array::from_fn(|v| {
        let fr = VertexFrame::new(t, v);
        let r = r.min(0.5 * VertexFrame::short_side(t, v));
        let u0 = f.value_unchecked(&fr.origin);
        let (mut above, mut below) = (false, false);
        for i in 0..=n {
            let theta = fr.beta * i as f64 / n as f64;
            let u = f.value_unchecked(&fr.point(r, theta));
            above |= u >= u0;
            below |= u <= u0;
        }
        match (above, below) {
            (false, true) => VertexKind::Max,
            (true, false) => VertexKind::Min,
            _ => VertexKind::Neither,
        }
    })
}
