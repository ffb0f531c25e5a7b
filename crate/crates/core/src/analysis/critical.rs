//! Critical points on the edges and in the interior, with Morse labels.

use nalgebra::{Matrix2, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{EdgeFrame, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Locus {
    Interior,
    /// Zero-based edge index and arc length from the edge's start.
    Edge {
        edge: usize,
        s: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Morse {
    Index0,
    Index1,
    Index2,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointReport {
    pub location: [f64; 2],
    pub locus: Locus,
    /// `|∇u| / scale`.
    pub grad_residual: f64,
    /// Hessian, in the `(tangent, normal)` frame for edge points.
    pub hessian: [[f64; 2]; 2],
    pub morse: Morse,
    pub det_hessian: f64,
    /// `|∂ₜₙu| / max |H|` for edge points.
    pub mixed_residual: Option<f64>,
    /// Newton did not converge and the root comes from bisection alone.
    pub bisection_only: bool,
}

impl CriticalPointReport {
    pub fn point(&self) -> Vec2 {
        Vec2::new(self.location[0], self.location[1])
    }

    pub fn hessian_matrix(&self) -> Matrix2<f64> {
        let h = self.hessian;
        Matrix2::new(h[0][0], h[0][1], h[1][0], h[1][1])
    }
}

/// Morse label from the eigenvalues of `h`; the index counts negative
/// eigenvalues. Degenerate when the smallest magnitude is below
/// `tol × max(max |λ|, μ|u|)`.
pub fn classify_critical_point(h: &Matrix2<f64>, mu: f64, u: f64, tol: f64) -> Morse {
    let sym = (h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym).eigenvalues;
    let big = eig
        .iter()
        .fold(0.0_f64, |m, l| m.max(l.abs()))
        .max(mu * u.abs());
    let small = eig.iter().fold(f64::INFINITY, |m, l| m.min(l.abs()));
    if small < tol * big || big == 0.0 {
        return Morse::Degenerate;
    }
    match eig.iter().filter(|l| **l < 0.0).count() {
        0 => Morse::Index0,
        1 => Morse::Index1,
        _ => Morse::Index2,
    }
}

fn to_array(m: &Matrix2<f64>) -> [[f64; 2]; 2] {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

/// Zeros of the tangential derivative along each edge away from the vertices.
pub fn boundary_critical_points<F: ScalarField + ?Sized>(
    f: &F,
    cfg: &AnalysisConfig,
) -> Result<Vec<CriticalPointReport>> {
    let t = f.triangle();
    let scale = f.scale();
    let delta = cfg.vertex_exclusion * t.diameter();
    let mut out = Vec::new();
    for e in 0..3 {
        let frame = t.edge_frame(e)?;
        let (a, b) = (delta, frame.length - delta);
        if b <= a {
            continue;
        }
        let g = |s: f64| {
            f.eval_unchecked(&frame.point_at(s), false)
                .grad
                .dot(&frame.tangent)
        };
        let n = cfg.edge_samples.max(2);
        let mut prev = (a, g(a));
        for i in 1..=n {
            let s = a + (b - a) * i as f64 / n as f64;
            let cur = (s, g(s));
            if prev.1 == 0.0 || prev.1.signum() != cur.1.signum() {
                if prev.1 == 0.0 && i > 1 {
                    // already reported as the right end of the previous bracket
                    prev = cur;
                    continue;
                }
                let root = if cur.1 == 0.0 {
                    (cur.0, false)
                } else if prev.1 == 0.0 {
                    (prev.0, false)
                } else {
                    polish_edge_root(f, &frame, prev, cur)
                };
                out.push(edge_report(f, &frame, e, root.0, root.1, scale, cfg));
            }
            prev = cur;
        }
    }
    Ok(out)
}

/// Bisection to a narrow bracket, then Newton on the tangential derivative.
/// Returns the root and whether Newton failed.
fn polish_edge_root<F: ScalarField + ?Sized>(
    f: &F,
    frame: &EdgeFrame,
    mut lo: (f64, f64),
    mut hi: (f64, f64),
) -> (f64, bool) {
    let g = |s: f64| {
        f.eval_unchecked(&frame.point_at(s), false)
            .grad
            .dot(&frame.tangent)
    };
    for _ in 0..30 {
        let m = 0.5 * (lo.0 + hi.0);
        let gm = g(m);
        if gm == 0.0 {
            return (m, false);
        }
        if gm.signum() == lo.1.signum() {
            lo = (m, gm);
        } else {
            hi = (m, gm);
        }
    }
    let (a, b) = (lo.0.min(hi.0), lo.0.max(hi.0));
    let mut s = 0.5 * (a + b);
    for _ in 0..20 {
        let sample = f.eval_unchecked(&frame.point_at(s), true);
        let Some(h) = sample.hessian else { break };
        let d1 = sample.grad.dot(&frame.tangent);
        let d2 = frame.tangent.dot(&(h * frame.tangent));
        if d2 == 0.0 {
            break;
        }
        let next = s - d1 / d2;
        if !(a - (b - a)..=b + (b - a)).contains(&next) {
            break;
        }
        let done = (next - s).abs() <= 1e-15 * frame.length;
        s = next;
        if done {
            return (s, false);
        }
    }
    // keep the Newton iterate when it improved on the bracket midpoint
    let mid = 0.5 * (a + b);
    if (a..=b).contains(&s) && g(s).abs() <= g(mid).abs() {
        (s, false)
    } else {
        (mid, true)
    }
}

fn edge_report<F: ScalarField + ?Sized>(
    f: &F,
    frame: &EdgeFrame,
    edge: usize,
    s: f64,
    bisection_only: bool,
    scale: f64,
    cfg: &AnalysisConfig,
) -> CriticalPointReport {
    let p = frame.point_at(s);
    let sample = f.eval_unchecked(&p, true);
    let h = sample.hessian.unwrap_or_else(Matrix2::zeros);
    // rows/columns: tangent, inward normal
    let basis = Matrix2::from_columns(&[frame.tangent, -frame.normal]);
    let local = basis.transpose() * h * basis;
    let hmax = local.abs().max();
    let morse = if sample.hessian.is_some() {
        classify_critical_point(&local, f.mu(), sample.u, cfg.degeneracy_tol)
    } else {
        Morse::Degenerate
    };
    CriticalPointReport {
        location: [p.x, p.y],
        locus: Locus::Edge { edge, s },
        grad_residual: sample.grad.norm() / scale,
        hessian: to_array(&local),
        morse,
        det_hessian: local.determinant(),
        mixed_residual: Some(if hmax > 0.0 {
            local[(0, 1)].abs() / hmax
        } else {
            0.0
        }),
        bisection_only,
    }
}

/// Newton on `∇u = 0` from a barycentric seed grid; converged points
/// farther than the vertex exclusion from the boundary are reported.
pub fn interior_critical_points<F: ScalarField + ?Sized>(
    f: &F,
    cfg: &AnalysisConfig,
) -> Vec<CriticalPointReport> {
    let t = f.triangle();
    let diam = t.diameter();
    let scale = f.scale();
    let delta = cfg.vertex_exclusion * diam;
    let n = cfg.seed_grid.max(3);
    let mut found: Vec<CriticalPointReport> = Vec::new();
    for i in 1..n {
        for j in 1..(n - i) {
            let a = i as f64 / n as f64;
            let b = j as f64 / n as f64;
            let seed = t.from_barycentric([1.0 - a - b, a, b]);
            let Some(p) = newton_gradient(f, seed, diam) else {
                continue;
            };
            if t.inset_distance(&p) <= delta {
                continue;
            }
            if found.iter().any(|r| (r.point() - p).norm() < 1e-6 * diam) {
                continue;
            }
            let sample = f.eval_unchecked(&p, true);
            let residual = sample.grad.norm() / scale;
            if residual > cfg.grad_tol {
                continue;
            }
            let h = sample.hessian.unwrap_or_else(Matrix2::zeros);
            found.push(CriticalPointReport {
                location: [p.x, p.y],
                locus: Locus::Interior,
                grad_residual: residual,
                hessian: to_array(&h),
                morse: classify_critical_point(&h, f.mu(), sample.u, cfg.degeneracy_tol),
                det_hessian: h.determinant(),
                mixed_residual: None,
                bisection_only: false,
            });
        }
    }
    found
}

fn newton_gradient<F: ScalarField + ?Sized>(f: &F, mut p: Vec2, diam: f64) -> Option<Vec2> {
    let t = f.triangle();
    let max_step = 0.1 * diam;
    for _ in 0..40 {
        let s = f.eval_unchecked(&p, true);
        let h = s.hessian?;
        let step = h.try_inverse()? * s.grad;
        let len = step.norm();
        let step = if len > max_step {
            step * (max_step / len)
        } else {
            step
        };
        p -= step;
        if !t.contains(&p, 0.0) {
            return None;
        }
        if len <= 1e-14 * diam {
            return Some(p);
        }
    }
    let s = f.eval_unchecked(&p, false);
    (s.grad.norm() < 1e-10 * f.scale().max(1e-300)).then_some(p)
}

/// Hessian of a report, or an error when it could not be formed.
pub fn report_hessian(r: &CriticalPointReport) -> Result<Matrix2<f64>> {
    let h = r.hessian_matrix();
    if h.iter().all(|v| *v == 0.0) {
        return Err(Error::HessianUnavailable);
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ClosedForm;
    use crate::geometry::LabeledTriangle;
    use std::f64::consts::PI;

    fn planted() -> ClosedForm {
        let t = LabeledTriangle::from_coords([[-1.0, -1.0], [2.0, -1.0], [-1.0, 2.0]]).unwrap();
        ClosedForm::cosine_difference(t, 1.0)
    }

    #[test]
    fn planted_saddle_is_found() {
        let f = planted();
        let found = interior_critical_points(&f, &AnalysisConfig::default());
        assert_eq!(found.len(), 1, "{found:?}");
        let p = found[0].point();
        assert!(p.norm() < 1e-8, "{p:?}");
        assert_eq!(found[0].morse, Morse::Index1);
        assert!(found[0].det_hessian < 0.0);
        let h = found[0].hessian_matrix();
        assert!((h[(0, 0)] + PI * PI).abs() < 1e-8 && (h[(1, 1)] - PI * PI).abs() < 1e-8);
    }

    #[test]
    fn morse_labels() {
        let cfg = AnalysisConfig::default();
        let saddle = Matrix2::new(-PI * PI, 0.0, 0.0, PI * PI);
        assert_eq!(
            classify_critical_point(&saddle, PI * PI, 0.0, cfg.degeneracy_tol),
            Morse::Index1
        );
        let flat = Matrix2::new(1.0, 0.0, 0.0, 1e-9);
        assert_eq!(
            classify_critical_point(&flat, 1.0, 0.0, cfg.degeneracy_tol),
            Morse::Degenerate
        );
        let bowl = Matrix2::new(2.0, 0.5, 0.5, 3.0);
        assert_eq!(
            classify_critical_point(&bowl, 1.0, 0.1, cfg.degeneracy_tol),
            Morse::Index0
        );
        assert_eq!(
            classify_critical_point(&(-bowl), 1.0, 0.1, cfg.degeneracy_tol),
            Morse::Index2
        );
    }

    #[test]
    fn report_hessian_unavailable() {
        let r = CriticalPointReport {
            location: [0.0, 0.0],
            locus: Locus::Interior,
            grad_residual: 0.0,
            hessian: [[0.0; 2]; 2],
            morse: Morse::Degenerate,
            det_hessian: 0.0,
            mixed_residual: None,
            bisection_only: false,
        };
        assert!(matches!(report_hessian(&r), Err(Error::HessianUnavailable)));
    }
}
