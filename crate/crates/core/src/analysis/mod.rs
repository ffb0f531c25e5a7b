//! Critical points, vertex coefficients, nodal arcs, extrema and the
//! per-triangle verdict.

pub mod coefficients;
pub mod critical;
pub mod extremum;
pub mod nodal;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::error::Result;
use crate::field::ScalarField;

pub use coefficients::{
    bessel_coefficients, checked_coefficients, CoefficientCheck, VertexCoefficients, VertexFrame,
};
pub use critical::{
    boundary_critical_points, classify_critical_point, interior_critical_points,
    CriticalPointReport, Locus, Morse,
};
pub use extremum::{extremum_locus, vertex_ring_kinds, ExtremumReport, VertexKind};
pub use nodal::{nodal_arcs, Endpoint, NodalArc, NodalReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Classification {
    Crit,
    Nocrit,
    Ambiguous,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Crit => "CRIT",
            Classification::Nocrit => "NOCRIT",
            Classification::Ambiguous => "AMBIGUOUS",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotSpotsVerdict {
    pub crit_count: usize,
    /// Boundary reports followed by interior reports.
    pub reports: Vec<CriticalPointReport>,
    pub interior_count: usize,
    pub scale: f64,
    /// `u(v) / scale`.
    pub vertex_values: [f64; 3],
    pub coefficients: Vec<CoefficientCheck>,
    pub coeff_ok: bool,
    /// `c1` where both probe radii agree.
    pub resolved_c1: [Option<f64>; 3],
    /// Extremum type of each vertex at the smallest scales, from the
    /// leading Bessel coefficients.
    pub vertex_kinds: [VertexKind; 3],
    /// Extremum type on a sampled ring about each vertex.
    pub ring_kinds: [VertexKind; 3],
    /// Critical points closer to a vertex than the exclusion radius,
    /// located from the vertex expansion (included in `reports`).
    pub hidden_count: usize,
    pub extremum: ExtremumReport,
    pub extremum_at_vertices: bool,
    pub nodal: NodalReport,
    pub nodal_arc_ok: bool,
    pub classification: Classification,
    /// Violated margins, empty unless the verdict is ambiguous.
    pub margins: Vec<String>,
}

impl HotSpotsVerdict {
    pub fn critical_point(&self) -> Option<&CriticalPointReport> {
        (self.crit_count == 1).then(|| &self.reports[0])
    }

    /// First coefficient at `vertex`, when resolved.
    pub fn c1(&self, vertex: usize) -> Option<f64> {
        self.resolved_c1[vertex]
    }
}

/// Small-scale behaviour at a vertex from `u ≈ c0 J0(kr) + c1 Jν(kr) cos νθ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexLocal {
    pub vertex: usize,
    /// Extremum type in a neighbourhood small enough that the two leading
    /// terms dominate.
    pub kind: VertexKind,
    /// `|u(v)|` below the zero tolerance.
    pub vanishes: bool,
    /// Critical point on an adjacent edge closer than the vertex exclusion.
    pub hidden: Option<CriticalPointReport>,
}

/// Near the vertex the tangential derivative on the edge `θ = 0` (σ = +1)
/// or `θ = β` (σ = −1) is `A r + σ B r^{ν−1}` with `A = −c0 k²/2` and
/// `B = c1 k (k/2)^{ν−1} / (2Γ(ν))`; its positive root is
/// `r* = (2/k) (2Γ(ν) c0 / (σ c1))^{1/(ν−2)}`. At that root `∂ₜₜu = c0 k² (ν−2)/2`
/// and `∂ₙₙu = −c0 k² ν/2`.
///
/// When `c1` is not resolved, `|c1| J_ν(kr) ≤ 2 scale` on the outer probe
/// bounds how close to the vertex a critical point could sit; a margin is
/// recorded when that bound reaches inside the exclusion radius.
fn vertex_local<F: ScalarField + ?Sized>(
    f: &F,
    check: &CoefficientCheck,
    scale: f64,
    cfg: &AnalysisConfig,
    margins: &mut Vec<String>,
) -> Result<VertexLocal> {
    let t = f.triangle();
    let coeffs = &check.primary;
    let v = coeffs.vertex;
    let fr = VertexFrame::new(t, v);
    let nu = fr.nu;
    let k = f.mu().sqrt();
    let c0 = coeffs.c0();
    let vanishes = c0.abs() / scale < cfg.vertex_zero_tol;
    let c1 = check.resolved_c1(cfg.coefficient_agreement);
    let delta = cfg.vertex_exclusion * t.diameter();
    let gamma2 = 2.0 * crate::specfun::ln_gamma(nu)?.exp();
    if c1.is_none() && !vanishes && (nu - 2.0).abs() > 1e-12 {
        let factor = crate::specfun::bessel_j(nu, k * check.doubled.r_probe)?
            .value
            .abs();
        let c1_max = 2.0 * scale / factor.max(1e-300);
        let excluded = nu > 2.0
            && (2.0 / k).ln() + (gamma2 * c0.abs() / c1_max).ln() / (nu - 2.0) >= delta.ln();
        if !excluded {
            margins.push(format!(
                "vertex {} first coefficient unresolved; a critical point within the exclusion radius is not ruled out",
                v + 1
            ));
        }
    }
    let extremum = if c0 > 0.0 {
        VertexKind::Max
    } else {
        VertexKind::Min
    };
    let kind = if vanishes {
        VertexKind::Neither
    } else if (nu - 2.0).abs() < 1e-12 {
        // u ≈ c0 (1 − k²r²/4) + c1 k²r² cos 2θ / 8
        match c1 {
            Some(c1) if c1.abs() >= 2.0 * c0.abs() => VertexKind::Neither,
            _ => extremum,
        }
    } else if nu > 2.0 {
        extremum
    } else {
        match c1 {
            Some(c1) if c1 != 0.0 => VertexKind::Neither,
            _ => extremum,
        }
    };
    let mut hidden = None;
    if let (false, Some(c1)) = (vanishes, c1) {
        if (nu - 2.0).abs() > 1e-12 && c1 != 0.0 {
            for sigma in [1.0, -1.0] {
                let ratio = gamma2 * c0 / (sigma * c1);
                if ratio <= 0.0 {
                    continue;
                }
                let ln_r = (2.0 / k).ln() + ratio.ln() / (nu - 2.0);
                if ln_r >= delta.ln() {
                    continue;
                }
                let r = ln_r.exp();
                let theta = if sigma > 0.0 { 0.0 } else { fr.beta };
                let edge = if sigma > 0.0 { v } else { (v + 2) % 3 };
                let frame = t.edge_frame(edge)?;
                let p = fr.point(r, theta);
                let h_tt = c0 * k * k * (nu - 2.0) / 2.0;
                let h_nn = -c0 * k * k * nu / 2.0;
                let h = nalgebra::Matrix2::new(h_tt, 0.0, 0.0, h_nn);
                hidden = Some(CriticalPointReport {
                    location: [p.x, p.y],
                    locus: Locus::Edge {
                        edge,
                        s: frame.arc_length_of(&p),
                    },
                    grad_residual: 0.0,
                    hessian: [[h_tt, 0.0], [0.0, h_nn]],
                    morse: classify_critical_point(&h, f.mu(), c0, cfg.degeneracy_tol),
                    det_hessian: h_tt * h_nn,
                    mixed_residual: None,
                    bisection_only: false,
                });
            }
        }
    }
    Ok(VertexLocal {
        vertex: v,
        kind,
        vanishes,
        hidden,
    })
}

pub fn hot_spots_verdict<F: ScalarField + ?Sized>(
    f: &F,
    cfg: &AnalysisConfig,
) -> Result<HotSpotsVerdict> {
    let t = f.triangle();
    let scale = f.scale();
    let mut margins = Vec::new();

    let mut reports = boundary_critical_points(f, cfg)?;
    let interior = interior_critical_points(f, cfg);
    let interior_count = interior.len();
    reports.extend(interior);
    let crit_count = reports.len();

    let vertex_values: [f64; 3] = std::array::from_fn(|i| f.value_unchecked(&t.vertex(i)) / scale);
    let ring_kinds = vertex_ring_kinds(f, cfg);
    let coefficients = (0..3)
        .map(|v| checked_coefficients(f, v, cfg))
        .collect::<Result<Vec<_>>>()?;
    let coeff_ok = coefficients
        .iter()
        .all(|c| c.primary.leading_magnitude() / scale > cfg.coefficient_floor);
    if !coeff_ok {
        margins.push("vertex coefficients below floor".to_string());
    }
    for c in &coefficients {
        if c.agreement_c0 > cfg.coefficient_agreement {
            margins.push(format!(
                "vertex {} coefficients disagree between radii by {:.1e}",
                c.primary.vertex + 1,
                c.agreement
            ));
        }
    }

    let coefficients_c1: Vec<Option<f64>> = coefficients
        .iter()
        .map(|c| c.resolved_c1(cfg.coefficient_agreement))
        .collect();
    let locals = coefficients
        .iter()
        .map(|c| vertex_local(f, c, scale, cfg, &mut margins))
        .collect::<Result<Vec<_>>>()?;
    let vanishing = locals.iter().filter(|l| l.vanishes).count();
    if vanishing > 1 {
        margins.push(format!("{vanishing} vertex values vanish"));
    }
    let mut hidden = Vec::new();
    for l in &locals {
        if let Some(h) = &l.hidden {
            hidden.push(h.clone());
        }
    }
    let hidden_count = hidden.len();
    let crit_count = crit_count + hidden_count;
    reports.extend(hidden);
    let vertex_kinds: [VertexKind; 3] = std::array::from_fn(|i| locals[i].kind);

    let extremum = extremum_locus(f, cfg)?;
    let extremum_at_vertices = extremum.at_vertices();
    if !extremum_at_vertices {
        margins.push(format!(
            "extremum off the vertices by {:.1e} × scale",
            extremum.excess
        ));
    }
    let nodal = nodal_arcs(f, cfg)?;
    let nodal_arc_ok = nodal.is_single_arc();
    if !nodal_arc_ok {
        margins.push(format!(
            "nodal tracer: {} arcs, {} unmatched zeros{}",
            nodal.arc_count(),
            nodal.unmatched,
            if nodal.stalled { ", stalled" } else { "" }
        ));
    }

    let non_extremal = vertex_kinds
        .iter()
        .filter(|k| **k == VertexKind::Neither)
        .count();
    let classification = match crit_count {
        0 => {
            if non_extremal != 1 {
                margins.push(format!(
                    "{non_extremal} vertices fail the strict-extremum ring test"
                ));
            }
            if margins.is_empty() {
                Classification::Nocrit
            } else {
                Classification::Ambiguous
            }
        }
        1 => {
            let r = &reports[0];
            if interior_count > 0 {
                margins.push("critical point in the interior".to_string());
            }
            if r.morse != Morse::Index1 || r.det_hessian >= 0.0 {
                margins.push(format!("critical point is {:?}", r.morse));
            }
            if r.grad_residual > cfg.grad_tol || r.bisection_only {
                margins.push(format!("gradient residual {:.1e}", r.grad_residual));
            }
            if r.mixed_residual.is_some_and(|m| m > cfg.mixed_tol) {
                margins.push(format!(
                    "mixed edge derivative {:.1e}",
                    r.mixed_residual.unwrap()
                ));
            }
            if non_extremal != 0 {
                margins.push(format!(
                    "{non_extremal} vertices fail the strict-extremum ring test"
                ));
            }
            if margins.is_empty() {
                Classification::Crit
            } else {
                Classification::Ambiguous
            }
        }
        n => {
            margins.push(format!("{n} critical points"));
            Classification::Ambiguous
        }
    };

    Ok(HotSpotsVerdict {
        crit_count,
        reports,
        interior_count,
        scale,
        vertex_values,
        vertex_kinds,
        coefficients,
        coeff_ok,
        resolved_c1: std::array::from_fn(|i| coefficients_c1[i]),
        ring_kinds,
        hidden_count,
        extremum,
        extremum_at_vertices,
        nodal,
        nodal_arc_ok,
        classification,
        margins,
    })
}
