//! Second Neumann eigenpair of a triangle by particular solutions, with a
//! finite-element bracket.

pub mod basis;
pub mod fem;
pub mod mps;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::field::{Field, ScalarField};
use crate::geometry::{LabeledTriangle, Vec2};
use crate::quadrature::halton_points;

pub use basis::{BasisBlock, BasisSpec};
pub use fem::fem_bracket;
pub use mps::{assemble, sigma_min, Discretization, SigmaSample};

/// When the second singular value at a dip is below this, a nearby second
/// eigenvalue may share the scan bracket and the bracket is rescanned.
const NEAR_MULTIPLE: f64 = 0.05;
const REFINE_DIVISIONS: usize = 200;

/// A computed `μ₂` with its Fourier–Bessel coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenpair {
    pub triangle: LabeledTriangle,
    pub mu: f64,
    pub basis: BasisSpec,
    /// Coefficients of the raw basis, normalized to unit RMS over the
    /// interior sample.
    pub coeffs: Vec<f64>,
    pub sigma: f64,
    pub sigma_gap: f64,
    /// Raised when the second singular value is also at the noise floor.
    pub multiplicity_two: bool,
    pub seed: u64,
}

impl Eigenpair {
    pub fn field(&self) -> Field<'_> {
        Field::new(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and checks that the basis still matches the geometry.
    pub fn from_json(text: &str) -> Result<Self> {
        let ep: Eigenpair = serde_json::from_str(text)?;
        ep.validate()?;
        Ok(ep)
    }

    pub fn validate(&self) -> Result<()> {
        self.basis.check_against(&self.triangle, 1e-9)?;
        if self.coeffs.len() != self.basis.total_terms() {
            return Err(Error::StaleBasis(format!(
                "{} coefficients for {} basis terms",
                self.coeffs.len(),
                self.basis.total_terms()
            )));
        }
        if !(self.mu > 0.0) {
            return Err(Error::StaleBasis(format!(
                "eigenvalue {} is not positive",
                self.mu
            )));
        }
        Ok(())
    }

    /// Flips the sign of the eigenfunction.
    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c = -*c);
        out
    }
}

/// Values to follow when the eigenvalue is (nearly) double.
#[derive(Debug, Clone)]
pub struct TrackTarget {
    pub points: Vec<Vec2>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    /// Scan window `[lo, hi]` replacing the finite-element bracket.
    pub window: Option<(f64, f64)>,
    pub track: Option<TrackTarget>,
}

struct Problem<'a> {
    t: &'a LabeledTriangle,
    basis: BasisSpec,
    disc: Discretization,
    cfg: &'a SolverConfig,
}

impl Problem<'_> {
    fn sigma(&self, mu: f64) -> Result<SigmaSample> {
        sigma_min(
            self.t,
            mu,
            &self.basis,
            &self.disc,
            self.cfg.rank_tol,
            false,
        )
    }

    fn golden(&self, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
        const INV_PHI: f64 = 0.618_033_988_749_894_8;
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = self.sigma(c)?.sigma;
        let mut fd = self.sigma(d)?.sigma;
        while b - a > self.cfg.golden_rel_width * 0.5 * (a + b) {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = self.sigma(c)?.sigma;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = self.sigma(d)?.sigma;
            }
        }
        Ok(if fc < fd { (c, fc) } else { (d, fd) })
    }

    /// First dip of σ in `[lo, hi]` whose refined value is below the tolerance.
    fn first_dip(
        &self,
        lo: f64,
        hi: f64,
        steps: usize,
        nested: bool,
        trace: &mut Vec<(f64, f64)>,
    ) -> Result<Option<(f64, f64)>> {
        // samples are taken lazily so the scan stops at the first accepted dip
        let mut samples: Vec<(f64, f64)> = Vec::with_capacity(steps + 1);
        for j in 0..=steps {
            let mu = lo + (hi - lo) * j as f64 / steps as f64;
            let sample = (mu, self.sigma(mu)?.sigma);
            samples.push(sample);
            if !nested {
                trace.push(sample);
            }
            if j < 2 {
                continue;
            }
            let i = j - 1;
            let (s_prev, s, s_next) = (samples[i - 1].1, samples[i].1, samples[i + 1].1);
            if !(s <= s_prev && s <= s_next) {
                continue;
            }
            let (mu, sig) = self.golden(samples[i - 1].0, samples[i + 1].0)?;
            if sig >= self.cfg.sigma_tol {
                continue;
            }
            if !nested {
                let second = self.sigma(mu)?.sigma_second;
                if second < NEAR_MULTIPLE {
                    let fine = self.first_dip(
                        samples[i - 1].0,
                        samples[i + 1].0,
                        REFINE_DIVISIONS,
                        true,
                        trace,
                    )?;
                    if let Some(f) = fine {
                        if f.0 < mu {
                            return Ok(Some(f));
                        }
                    }
                }
            }
            return Ok(Some((mu, sig)));
        }
        Ok(None)
    }
}

/// Builds the default basis and discretization for `t`.
pub fn setup(t: &LabeledTriangle, cfg: &SolverConfig) -> Result<(BasisSpec, Discretization)> {
    let basis = BasisSpec::for_triangle(t, cfg.terms, cfg.smooth_orders)?;
    let n = basis.total_terms();
    let disc = Discretization::new(
        t,
        cfg.boundary_factor * n.div_ceil(3),
        cfg.interior_factor * n,
        cfg.exclusion_radius * t.diameter(),
        cfg.seed,
    )?;
    disc.check_sizes(n)?;
    Ok((basis, disc))
}

pub fn find_mu2(t: &LabeledTriangle, cfg: &SolverConfig) -> Result<Eigenpair> {
    find_mu2_with(t, cfg, &SolveOptions::default())
}

pub fn find_mu2_with(
    t: &LabeledTriangle,
    cfg: &SolverConfig,
    opts: &SolveOptions,
) -> Result<Eigenpair> {
    let (basis, disc) = setup(t, cfg)?;
    let problem = Problem {
        t,
        basis,
        disc,
        cfg,
    };
    let mut trace = Vec::new();
    let (dip, lo, hi) = match opts.window {
        Some((lo, hi)) => {
            let steps = (((hi - lo) / (0.5 * (lo + hi)) * cfg.scan_divisions as f64).ceil()
                as usize)
                .max(8);
            match problem.first_dip(lo, hi, steps, false, &mut trace)? {
                Some(d) => (Some(d), lo, hi),
                None => {
                    let est = fem_bracket(t, cfg.fem_refinement)?;
                    let (lo, hi) = (cfg.scan_lo * est, cfg.scan_hi * est);
                    trace.clear();
                    (
                        problem.first_dip(lo, hi, full_steps(cfg), false, &mut trace)?,
                        lo,
                        hi,
                    )
                }
            }
        }
        None => {
            let est = fem_bracket(t, cfg.fem_refinement)?;
            let (lo, hi) = (cfg.scan_lo * est, cfg.scan_hi * est);
            (
                problem.first_dip(lo, hi, full_steps(cfg), false, &mut trace)?,
                lo,
                hi,
            )
        }
    };
    let (mu, _) = dip.ok_or_else(|| Error::NoDip {
        sigma_tol: cfg.sigma_tol,
        lo,
        hi,
        trace: format_trace(&trace),
    })?;
    let sample = sigma_min(t, mu, &problem.basis, &problem.disc, cfg.rank_tol, true)?;
    let multiplicity_two =
        sample.sigma_second < cfg.sigma_tol || sample.sigma_gap() < 10.0 * sample.sigma;
    let mut coeffs = sample.coeffs.clone().expect("vectors requested");
    if multiplicity_two {
        if let Some(track) = &opts.track {
            let second = sample.second_coeffs.clone().expect("vectors requested");
            coeffs = follow_target(&problem.basis, mu, &coeffs, &second, track);
        }
    }
    let mut ep = Eigenpair {
        triangle: *t,
        mu,
        basis: problem.basis.clone(),
        coeffs: coeffs.iter().copied().collect(),
        sigma: sample.sigma,
        sigma_gap: sample.sigma_gap(),
        multiplicity_two,
        seed: cfg.seed,
    };
    normalize(&mut ep, &problem.disc.interior);
    Ok(ep)
}

fn full_steps(cfg: &SolverConfig) -> usize {
    ((cfg.scan_hi - cfg.scan_lo) * cfg.scan_divisions as f64).ceil() as usize
}

fn format_trace(trace: &[(f64, f64)]) -> String {
    let min = trace.iter().copied().fold(
        (f64::NAN, f64::INFINITY),
        |a, b| if b.1 < a.1 { b } else { a },
    );
    format!(
        "{} samples, smallest sigma {:.3e} at mu = {:.6}",
        trace.len(),
        min.1,
        min.0
    )
}

/// Combination of the two lowest directions that best matches `track`.
fn follow_target(
    basis: &BasisSpec,
    mu: f64,
    first: &DVector<f64>,
    second: &DVector<f64>,
    track: &TrackTarget,
) -> DVector<f64> {
    let k = mu.sqrt();
    let mut jets = Vec::new();
    let (mut aa, mut ab, mut bb, mut ay, mut by) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (p, y) in track.points.iter().zip(&track.values) {
        basis.eval_all(p, k, basis::Jet::Value, &mut jets);
        let a: f64 = jets
            .iter()
            .zip(first.iter())
            .map(|(j, c)| j.value * c)
            .sum();
        let b: f64 = jets
            .iter()
            .zip(second.iter())
            .map(|(j, c)| j.value * c)
            .sum();
        aa += a * a;
        ab += a * b;
        bb += b * b;
        ay += a * y;
        by += b * y;
    }
    let det = aa * bb - ab * ab;
    if det.abs() < 1e-300 {
        return first.clone();
    }
    let x = (bb * ay - ab * by) / det;
    let y = (aa * by - ab * ay) / det;
    let c = first * x + second * y;
    let n = c.norm();
    c / n
}

/// Unit RMS over `interior`, sign fixed by the vertex values.
fn normalize(ep: &mut Eigenpair, interior: &[Vec2]) {
    let rms = {
        let f = ep.field();
        let s: f64 = interior.iter().map(|p| f.value_unchecked(p).powi(2)).sum();
        (s / interior.len() as f64).sqrt()
    };
    ep.coeffs.iter_mut().for_each(|c| *c /= rms);
    let vals: Vec<f64> = {
        let f = ep.field();
        (0..3)
            .map(|i| f.value_unchecked(&ep.triangle.vertex(i)))
            .collect()
    };
    let scale = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let sign = [(2, 1), (2, 0), (1, 0)]
        .iter()
        .map(|&(a, b)| vals[a] - vals[b])
        .find(|d| d.abs() > 1e-6 * scale)
        .map_or(1.0, f64::signum);
    if sign < 0.0 {
        ep.coeffs.iter_mut().for_each(|c| *c = -*c);
    }
}

/// Post-solve residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `max |∂u/∂n|` over the boundary sample divided by `max |u|` inside.
    pub normal_residual: f64,
    /// `max |tr H + μ u| / (|μ u| + max|H| + 1)` at interior points.
    pub helmholtz_residual: f64,
    pub sigma: f64,
    pub certified: bool,
}

/// Dense boundary and interior check of an eigenpair.
pub fn residual_certificate(
    ep: &Eigenpair,
    per_edge: usize,
    cfg: &SolverConfig,
) -> Result<Certificate> {
    let t = &ep.triangle;
    let field = ep.field();
    let exclusion = cfg.exclusion_radius * t.diameter();
    let mut interior_max = 0.0_f64;
    let mut helmholtz = 0.0_f64;
    for p in halton_points(t, 400, cfg.seed ^ 0x5eed) {
        let s = field.eval_unchecked(&p, true);
        interior_max = interior_max.max(s.u.abs());
        if let Some(h) = s.hessian {
            let scale = (ep.mu * s.u).abs() + h.abs().max() + 1.0;
            helmholtz = helmholtz.max((h.trace() + ep.mu * s.u).abs() / scale);
        }
    }
    for v in t.vertices() {
        interior_max = interior_max.max(field.value_unchecked(v).abs());
    }
    let mut normal = 0.0_f64;
    for e in 0..3 {
        let f = t.edge_frame(e)?;
        for j in 0..per_edge {
            let s = f.length * (j as f64 + 0.5) / per_edge as f64;
            let p = f.point_at(s);
            if t.vertices().iter().any(|v| (p - v).norm() < exclusion) {
                continue;
            }
            let g = field.eval_unchecked(&p, false).grad;
            normal = normal.max(g.dot(&f.normal).abs());
        }
    }
    let normal_residual = normal / interior_max;
    Ok(Certificate {
        normal_residual,
        helmholtz_residual: helmholtz,
        sigma: ep.sigma,
        certified: ep.sigma <= cfg.sigma_tol && normal_residual <= cfg.residual_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn right_isosceles_eigenvalue() {
        let ep = find_mu2(
            &LabeledTriangle::right_isosceles(),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!((ep.mu - PI * PI).abs() / (PI * PI) < 1e-8, "mu = {}", ep.mu);
        assert!(!ep.multiplicity_two);
        let cert = residual_certificate(&ep, 1000, &SolverConfig::default()).unwrap();
        assert!(cert.normal_residual < 1e-7, "{cert:?}");
        assert!(cert.helmholtz_residual < 1e-10, "{cert:?}");
        assert!(cert.certified);
    }

    #[test]
    fn scaled_right_isosceles() {
        let t = LabeledTriangle::right_isosceles().scaled(2.0).unwrap();
        let ep = find_mu2(&t, &SolverConfig::default()).unwrap();
        assert!((ep.mu - PI * PI / 4.0).abs() / (PI * PI / 4.0) < 1e-8);
    }

    #[test]
    fn equilateral_is_double() {
        let ep = find_mu2(&LabeledTriangle::equilateral(), &SolverConfig::default()).unwrap();
        let want = 16.0 * PI * PI / 9.0;
        assert!((ep.mu - want).abs() / want < 1e-7, "mu = {}", ep.mu);
        assert!(ep.multiplicity_two);
    }

    #[test]
    fn truncated_basis_has_larger_residual() {
        let t = LabeledTriangle::from_angles(1.0, 0.8).unwrap();
        let full = SolverConfig::default();
        let small = SolverConfig {
            terms: 4,
            smooth_orders: 4,
            ..SolverConfig::default()
        };
        let a = find_mu2(&t, &full).unwrap();
        let b = find_mu2(&t, &small);
        let ra = residual_certificate(&a, 500, &full)
            .unwrap()
            .normal_residual;
        match b {
            Ok(b) => {
                let rb = residual_certificate(&b, 500, &small)
                    .unwrap()
                    .normal_residual;
                assert!(rb > ra, "{rb:e} vs {ra:e}");
            }
            // four terms may not even produce a dip below the tolerance
            Err(Error::NoDip { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn json_roundtrip_and_stale_detection() {
        let ep = find_mu2(
            &LabeledTriangle::right_isosceles(),
            &SolverConfig::default(),
        )
        .unwrap();
        let text = ep.to_json().unwrap();
        let back = Eigenpair::from_json(&text).unwrap();
        assert_eq!(back, ep);
        let mut stale: serde_json::Value = serde_json::from_str(&text).unwrap();
        stale["triangle"]["v"][2] = serde_json::json!([0.1, 1.0]);
        assert!(matches!(
            Eigenpair::from_json(&stale.to_string()),
            Err(Error::StaleBasis(_))
        ));
        let mut short: serde_json::Value = serde_json::from_str(&text).unwrap();
        short["coeffs"].as_array_mut().unwrap().pop();
        assert!(matches!(
            Eigenpair::from_json(&short.to_string()),
            Err(Error::StaleBasis(_))
        ));
    }
}
