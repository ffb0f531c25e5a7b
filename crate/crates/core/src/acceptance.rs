//! The acceptance suite: twelve end-to-end checks, each reported as one
//! pass/fail line. Used by the `acceptance` integration test and by the
//! `selftest` subcommand.

use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, PI};
use std::fmt;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{
    checked_coefficients, hot_spots_verdict, interior_critical_points, Classification, Endpoint,
    HotSpotsVerdict, Locus, Morse,
};
use crate::config::RunConfig;
use crate::eigensolver::fem::fem_bracket;
use crate::eigensolver::{find_mu2, residual_certificate, Certificate, Eigenpair};
use crate::field::{correlation, ClosedForm, ScalarField};
use crate::geometry::{LabeledTriangle, Vec2};
use crate::quadrature::halton_points;
use crate::specfun::bessel_j;
use crate::sweep::{
    continuation, crit_trajectory, isosceles::isosceles_point, isosceles_scan, moduli_sweep,
    summarize, CERTIFICATE_SAMPLES,
};

/// Seed of the random triangle sample.
pub const SAMPLE_SEED: u64 = 20_240_611;
/// Triangles in the shared random sample.
pub const SAMPLE_SIZE: usize = 50;
/// Triangles used for the finite-element comparison.
pub const FEM_SAMPLE: usize = 20;
pub const FEM_REFINEMENT: usize = 48;

pub const CRITERIA: [(u8, &str); 12] = [
    (1, "right isosceles exactness"),
    (2, "scaling covariance"),
    (3, "equilateral closed form"),
    (4, "finite-element agreement"),
    (5, "at most one critical point, an edge saddle"),
    (6, "extrema at vertices"),
    (7, "moduli sweep"),
    (8, "isosceles threshold"),
    (9, "leading vertex coefficients"),
    (10, "single nodal arc"),
    (11, "continuation to the right isosceles triangle"),
    (12, "numerical kernels"),
];

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {}: {} ({:.1} s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

/// `count` angle pairs uniform over `{β1, β2, β3 ≥ margin}`.
pub fn random_angles(count: usize, margin: f64, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = PI - 3.0 * margin;
    (0..count)
        .map(|_| {
            let (mut a, mut b): (f64, f64) = (rng.gen(), rng.gen());
            if a + b > 1.0 {
                a = 1.0 - a;
                b = 1.0 - b;
            }
            (margin + span * a, margin + span * b)
        })
        .collect()
}

/// One solved and analysed triangle of the shared sample.
pub struct Sample {
    pub triangle: LabeledTriangle,
    pub outcome: std::result::Result<(Eigenpair, Certificate, HotSpotsVerdict), String>,
}

impl Sample {
    fn certified(&self) -> Option<(&Eigenpair, &HotSpotsVerdict)> {
        match &self.outcome {
            Ok((ep, c, v)) if c.certified => Some((ep, v)),
            _ => None,
        }
    }
}

/// Shared state so the random sample is solved once per suite.
pub struct Suite {
    pub cfg: RunConfig,
    sample: OnceLock<Vec<Sample>>,
}

impl Suite {
    pub fn new(cfg: RunConfig) -> Self {
        Suite {
            cfg,
            sample: OnceLock::new(),
        }
    }

    pub fn sample(&self) -> &[Sample] {
        self.sample.get_or_init(|| {
            use rayon::prelude::*;
            let angles = random_angles(SAMPLE_SIZE, self.cfg.sweep.margin, SAMPLE_SEED);
            let solve = |&(b1, b2): &(f64, f64)| {
                let t = LabeledTriangle::from_angles(b1, b2).expect("inside the simplex");
                let outcome = (|| {
                    let ep = find_mu2(&t, &self.cfg.solver).map_err(|e| e.to_string())?;
                    let cert = residual_certificate(&ep, CERTIFICATE_SAMPLES, &self.cfg.solver)
                        .map_err(|e| e.to_string())?;
                    let v = hot_spots_verdict(&ep.field(), &self.cfg.analysis)
                        .map_err(|e| e.to_string())?;
                    Ok((ep, cert, v))
                })();
                Sample {
                    triangle: t,
                    outcome,
                }
            };
            match rayon::ThreadPoolBuilder::new()
                .num_threads(self.cfg.worker_count())
                .build()
            {
                Ok(pool) => pool.install(|| angles.par_iter().map(solve).collect()),
                Err(_) => angles.iter().map(solve).collect(),
            }
        })
    }

    pub fn run(&self, id: u8) -> CriterionResult {
        let name = CRITERIA
            .iter()
            .find(|c| c.0 == id)
            .map_or("unknown", |c| c.1);
        let start = Instant::now();
        let outcome = match id {
            1 => self.right_isosceles(),
            2 => self.scaling(),
            3 => self.equilateral(),
            4 => self.fem_agreement(),
            5 => self.critical_points(),
            6 => self.extrema(),
            7 => self.sweep(),
            8 => self.isosceles(),
            9 => self.coefficients(),
            10 => self.nodal(),
            11 => self.continuation(),
            12 => self.kernels(),
            _ => Err(format!("no criterion {id}")),
        };
        let (pass, detail) = match outcome {
            Ok((pass, detail)) => (pass, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        CriterionResult {
            id,
            name,
            pass,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        }
    }

    pub fn run_all(&self) -> Vec<CriterionResult> {
        CRITERIA.iter().map(|c| self.run(c.0)).collect()
    }
}

type Outcome = std::result::Result<(bool, String), String>;

fn err(e: crate::Error) -> String {
    e.to_string()
}

/// Interior points of a 50 × 50 grid over the bounding box.
fn interior_grid(t: &LabeledTriangle, n: usize) -> Vec<Vec2> {
    let (lo, hi) = crate::field::bounding_box(t);
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let p = Vec2::new(
                lo.x + (hi.x - lo.x) * (i as f64 + 0.5) / n as f64,
                lo.y + (hi.y - lo.y) * (j as f64 + 0.5) / n as f64,
            );
            if t.inset_distance(&p) > 0.0 {
                out.push(p);
            }
        }
    }
    out
}

fn right_isosceles_correlation(ep: &Eigenpair) -> f64 {
    let t = ep.triangle;
    let exact = ClosedForm::cosine_difference(t, 1.0);
    correlation(&ep.field(), &exact, &interior_grid(&t, 50)).abs()
}

impl Suite {
    fn right_isosceles(&self) -> Outcome {
        let t = LabeledTriangle::right_isosceles();
        let start = Instant::now();
        let ep = find_mu2(&t, &self.cfg.solver).map_err(err)?;
        let secs = start.elapsed().as_secs_f64();
        let rel = (ep.mu - PI * PI).abs() / (PI * PI);
        let corr = right_isosceles_correlation(&ep);
        let pass = rel <= 1e-8 && corr >= 1.0 - 1e-8 && secs < 5.0;
        Ok((
            pass,
            format!("mu rel err {rel:.2e}, |correlation| {corr:.12}, solve {secs:.2} s"),
        ))
    }

    fn scaling(&self) -> Outcome {
        let shapes = [(1.1, 0.75), (0.9, 0.9), (0.6, 1.2), (1.3, 0.4), (0.5, 2.0)];
        let mut worst = 0.0_f64;
        for (b1, b2) in shapes {
            let t = LabeledTriangle::from_angles(b1, b2).map_err(err)?;
            let mu = find_mu2(&t, &self.cfg.solver).map_err(err)?.mu;
            for s in [0.5, 2.0, 3.7] {
                let ts = t.scaled(s).map_err(err)?;
                let mus = find_mu2(&ts, &self.cfg.solver).map_err(err)?.mu;
                worst = worst.max((mus - mu / (s * s)).abs() / (mu / (s * s)));
            }
        }
        Ok((
            worst <= 1e-7,
            format!("worst relative deviation {worst:.2e} over 5 shapes x 3 scales"),
        ))
    }

    fn equilateral(&self) -> Outcome {
        let t = LabeledTriangle::equilateral();
        let side = (t.vertex(1) - t.vertex(0)).norm();
        let exact = 16.0 * PI * PI / (9.0 * side * side);
        let ep = find_mu2(&t, &self.cfg.solver).map_err(err)?;
        let rel = (ep.mu - exact).abs() / exact;
        Ok((
            rel <= 1e-6 && ep.multiplicity_two,
            format!(
                "mu {:.10} vs 16pi^2/9 = {exact:.10} (rel {rel:.2e}), double flag {}",
                ep.mu, ep.multiplicity_two
            ),
        ))
    }

    fn fem_agreement(&self) -> Outcome {
        let mut worst = 0.0_f64;
        let mut failures = Vec::new();
        for s in &self.sample()[..FEM_SAMPLE] {
            match &s.outcome {
                Ok((ep, _, _)) => {
                    let fem = fem_bracket(&s.triangle, FEM_REFINEMENT).map_err(err)?;
                    worst = worst.max((ep.mu - fem).abs() / ep.mu);
                }
                Err(e) => failures.push(e.clone()),
            }
        }
        Ok((
            worst <= 0.03 && failures.is_empty(),
            format!(
                "worst |mu - mu_fem|/mu {worst:.2e} over {FEM_SAMPLE} triangles, {} solve failures",
                failures.len()
            ),
        ))
    }

    fn critical_points(&self) -> Outcome {
        let mut bad = Vec::new();
        let mut found = 0;
        for (i, s) in self.sample().iter().enumerate() {
            let v = match &s.outcome {
                Ok((_, _, v)) => v,
                Err(e) => {
                    bad.push(format!("#{i}: {e}"));
                    continue;
                }
            };
            found += v.crit_count;
            let ok_points = v.reports.iter().all(|r| {
                matches!(r.locus, Locus::Edge { .. })
                    && r.det_hessian < 0.0
                    && r.morse == Morse::Index1
                    && r.grad_residual <= 1e-7
            });
            if v.crit_count > 1 || v.interior_count > 0 || !ok_points {
                bad.push(format!(
                    "#{i}: {} points, {} interior",
                    v.crit_count, v.interior_count
                ));
            }
        }
        let planted = planted_saddle();
        let planted_ok = planted.is_some_and(|d| d <= 1e-8);
        Ok((
            bad.is_empty() && planted_ok,
            format!(
                "{found} edge saddles over {SAMPLE_SIZE} triangles, {} violations{}; planted saddle offset {}",
                bad.len(),
                first_few(&bad),
                planted.map_or("not found".into(), |d| format!("{d:.1e}"))
            ),
        ))
    }

    fn extrema(&self) -> Outcome {
        let mut bad = Vec::new();
        for (i, s) in self.sample().iter().enumerate() {
            let v = match &s.outcome {
                Ok((_, _, v)) => v,
                Err(e) => {
                    bad.push(format!("#{i}: {e}"));
                    continue;
                }
            };
            let mut ok = v.extremum.at_vertices();
            if let Some(o) = s.triangle.classify().obtuse_vertex {
                ok &= v.extremum.max_vertex != o && v.extremum.min_vertex != o;
            }
            if !ok {
                bad.push(format!("#{i}: excess {:.1e}", v.extremum.excess));
            }
        }
        Ok((
            bad.is_empty(),
            format!(
                "{} of {SAMPLE_SIZE} triangles fail{}",
                bad.len(),
                first_few(&bad)
            ),
        ))
    }

    fn sweep(&self) -> Outcome {
        let recs = moduli_sweep(self.cfg.sweep.resolution, self.cfg.sweep.margin, &self.cfg)
            .map_err(err)?;
        let s = summarize(&recs, &self.cfg);
        let frac = s.acute_crit_fraction();
        Ok((
            s.obtuse_crit == 0 && frac >= 0.9,
            format!(
                "{} nodes; obtuse CRIT {}/{}; generic acute CRIT {}/{} = {:.3} ({} ambiguous)",
                s.nodes,
                s.obtuse_crit,
                s.obtuse,
                s.acute_generic_crit,
                s.acute_generic,
                frac,
                s.acute_generic_ambiguous
            ),
        ))
    }

    fn isosceles(&self) -> Outcome {
        let est = isosceles_scan(0.6, 1.4, 40, &self.cfg).map_err(err)?;
        let off = (est.threshold - FRAC_PI_3).abs();
        let wide = isosceles_point(2.0 * PI / 5.0, &self.cfg);
        let narrow = isosceles_point(FRAC_PI_4, &self.cfg);
        let t = LabeledTriangle::isosceles_with_apex(FRAC_PI_4).map_err(err)?;
        let mid = 0.5 * (t.vertex(0) + t.vertex(1));
        let crit_off = narrow
            .crit
            .map(|c| (Vec2::new(c[0], c[1]) - mid).norm() / t.diameter());
        let apex = wide.apex_value;
        let pass = off <= 0.01
            && apex.is_some_and(|a| a < 1e-4)
            && narrow.verdict == Classification::Crit
            && crit_off.is_some_and(|d| d <= 1e-4);
        Ok((
            pass,
            format!(
                "threshold {:.5} (pi/3 {:+.1e}); |u(apex)|/scale at 2pi/5 {}; pi/4 saddle offset {} x diameter",
                est.threshold,
                est.threshold - FRAC_PI_3,
                apex.map_or("n/a".into(), |a| format!("{a:.1e}")),
                crit_off.map_or("n/a".into(), |d| format!("{d:.1e}"))
            ),
        ))
    }

    fn coefficients(&self) -> Outcome {
        let floor = self.cfg.analysis.coefficient_floor;
        let mut bad = Vec::new();
        let mut certified = 0;
        for (i, s) in self.sample().iter().enumerate() {
            let Some((_, v)) = s.certified() else {
                continue;
            };
            certified += 1;
            let lead_ok = v
                .coefficients
                .iter()
                .all(|c| c.primary.leading_magnitude() > floor * v.scale);
            let zeros = v.vertex_values.iter().filter(|x| x.abs() < 1e-5).count();
            if !lead_ok || zeros > 1 {
                bad.push(format!("#{i}: {zeros} vanishing vertices"));
            }
        }
        Ok((
            bad.is_empty() && certified > 0,
            format!(
                "{certified} certified triangles, {} violations{}",
                bad.len(),
                first_few(&bad)
            ),
        ))
    }

    fn nodal(&self) -> Outcome {
        let mut bad = Vec::new();
        let mut certified = 0;
        for (i, s) in self.sample().iter().enumerate() {
            let Some((_, v)) = s.certified() else {
                continue;
            };
            certified += 1;
            if !v.nodal.is_single_arc() {
                bad.push(format!("#{i}: {} arcs", v.nodal.arc_count()));
            }
        }
        let t = LabeledTriangle::right_isosceles();
        let ep = find_mu2(&t, &self.cfg.solver).map_err(err)?;
        let v = hot_spots_verdict(&ep.field(), &self.cfg.analysis).map_err(err)?;
        let h = if v.nodal.is_single_arc() {
            let arc = &v.nodal.arcs[0];
            let mut pts: Vec<Vec2> = arc.polyline().collect();
            pts.insert(0, arc.start.point());
            pts.push(arc.end.point());
            hausdorff_to_segment(&pts, Vec2::zeros(), Vec2::new(0.5, 0.5))
        } else {
            f64::INFINITY
        };
        let diagonal_end = v.nodal.arcs.first().is_some_and(|a| {
            [a.start, a.end]
                .iter()
                .any(|e| matches!(e, Endpoint::Vertex { vertex: 0, .. }))
        });
        Ok((
            bad.is_empty() && certified > 0 && h <= 1e-6 && diagonal_end,
            format!(
                "{certified} certified triangles, {} without a single arc{}; right isosceles Hausdorff {h:.1e}",
                bad.len(),
                first_few(&bad)
            ),
        ))
    }

    fn continuation(&self) -> Outcome {
        let t0 = LabeledTriangle::from_angles(0.9, 0.9).map_err(err)?;
        let path = continuation(&t0, 100, &self.cfg).map_err(err)?;
        let jump = path
            .windows(2)
            .map(|w| (w[1].eigenpair.mu - w[0].eigenpair.mu).abs() / w[0].eigenpair.mu)
            .fold(0.0_f64, f64::max);
        let last = path.last().ok_or("empty path")?;
        let corr = right_isosceles_correlation(&last.eigenpair);
        let traj = crit_trajectory(&path);
        let vanishing = if traj.disappears {
            traj.last_min_vertex_value.unwrap_or(f64::INFINITY)
        } else {
            0.0
        };
        let flagged = path
            .iter()
            .filter(|r| r.flags.iter().any(|f| f == "alignment"))
            .count();
        Ok((
            jump < 0.05 && corr >= 1.0 - 1e-6 && vanishing < 0.05,
            format!(
                "{} records, max mu jump {jump:.2e}, endpoint correlation {:.12}, {}{} alignment flags",
                path.len(),
                corr,
                match traj.last_present_t {
                    Some(t) if traj.disappears => format!(
                        "critical point last at t = {t:.2} with min |u(v)|/scale {:.1e}, ",
                        vanishing
                    ),
                    Some(_) => "critical point present to the end, ".into(),
                    None => "no critical point, ".into(),
                },
                flagged
            ),
        ))
    }

    fn kernels(&self) -> Outcome {
        let t = LabeledTriangle::from_angles(1.1, 0.75).map_err(err)?;
        let ep = find_mu2(&t, &self.cfg.solver).map_err(err)?;
        let f = ep.field();
        let scale = f.scale();
        let k = ep.mu.sqrt();
        let h = 1e-5 * t.diameter();
        let mut grad_err = 0.0_f64;
        for p in halton_points(&t, 50, 7) {
            let g = f.eval_unchecked(&p, false).grad;
            let fd = Vec2::new(
                (f.value_unchecked(&(p + Vec2::new(h, 0.0)))
                    - f.value_unchecked(&(p - Vec2::new(h, 0.0))))
                    / (2.0 * h),
                (f.value_unchecked(&(p + Vec2::new(0.0, h)))
                    - f.value_unchecked(&(p - Vec2::new(0.0, h))))
                    / (2.0 * h),
            );
            grad_err = grad_err.max((g - fd).norm() / g.norm().max(1e-3 * k * scale));
        }
        let mut trace_err = 0.0_f64;
        for p in halton_points(&t, 100, 11) {
            let s = f.eval_unchecked(&p, true);
            let hs = s.hessian.ok_or("no Hessian")?;
            trace_err = trace_err.max((hs.trace() + ep.mu * s.u).abs() / scale);
        }
        let mut rec_err = 0.0_f64;
        for i in 0..40 {
            let nu = 0.3 + (20.0 - 0.3) * i as f64 / 39.0;
            for j in 0..60 {
                let x = 0.1 + (50.0 - 0.1) * j as f64 / 59.0;
                // below order 1 the three-term window starts at ν itself
                let m = if nu >= 1.0 { nu } else { nu + 1.0 };
                let jm = bessel_j(m - 1.0, x).map_err(err)?.value;
                let j0 = bessel_j(m, x).map_err(err)?.value;
                let jp = bessel_j(m + 1.0, x).map_err(err)?.value;
                let r = (jm + jp - 2.0 * m / x * j0).abs() / j0.abs().max(1.0);
                rec_err = rec_err.max(r);
            }
        }
        let mut agreement = 0.0_f64;
        for vtx in 0..3 {
            let c = checked_coefficients(&f, vtx, &self.cfg.analysis).map_err(err)?;
            agreement = agreement.max(c.agreement);
        }
        Ok((
            grad_err <= 1e-6 && trace_err <= 1e-6 && rec_err <= 1e-9 && agreement <= 1e-5,
            format!(
                "gradient {grad_err:.1e}, trace {trace_err:.1e}, recurrence {rec_err:.1e}, two-radius {agreement:.1e}"
            ),
        ))
    }
}

/// Offset of the saddle found in `s (cos πx − cos πy)` on a triangle
/// containing the origin, where the only critical point sits.
fn planted_saddle() -> Option<f64> {
    let t = LabeledTriangle::from_coords([[-1.0, -1.0], [2.0, -1.0], [-1.0, 2.0]]).ok()?;
    let f = ClosedForm::cosine_difference(t, 1.0);
    let found = interior_critical_points(&f, &crate::config::AnalysisConfig::default());
    match found.as_slice() {
        [one] if one.morse == Morse::Index1 => Some(one.point().norm()),
        _ => None,
    }
}

fn hausdorff_to_segment(pts: &[Vec2], a: Vec2, b: Vec2) -> f64 {
    let seg_dist = |p: &Vec2, a: Vec2, b: Vec2| {
        let d = b - a;
        let s = ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
        (p - (a + d * s)).norm()
    };
    let forward = pts
        .iter()
        .map(|p| seg_dist(p, a, b))
        .fold(0.0_f64, f64::max);
    let backward = (0..=200)
        .map(|i| {
            let q = a + (b - a) * (i as f64 / 200.0);
            pts.windows(2)
                .map(|w| seg_dist(&q, w[0], w[1]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0_f64, f64::max);
    forward.max(backward)
}

fn first_few(items: &[String]) -> String {
    if items.is_empty() {
        String::new()
    } else {
        let shown: Vec<&str> = items.iter().take(3).map(String::as_str).collect();
        format!(
            " ({}{})",
            shown.join(", "),
            if items.len() > 3 { ", ..." } else { "" }
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ShapeKind;

    #[test]
    fn random_angles_respect_margin_and_seed() {
        let a = random_angles(200, 0.05, 3);
        assert_eq!(a, random_angles(200, 0.05, 3));
        assert_ne!(a, random_angles(200, 0.05, 4));
        for (b1, b2) in a {
            assert!(b1 >= 0.05 && b2 >= 0.05 && PI - b1 - b2 >= 0.05 - 1e-12);
        }
    }

    #[test]
    fn hausdorff_of_exact_cover_is_zero() {
        let pts: Vec<Vec2> = (0..=10)
            .map(|i| Vec2::new(0.05 * i as f64, 0.05 * i as f64))
            .collect();
        assert!(hausdorff_to_segment(&pts, Vec2::zeros(), Vec2::new(0.5, 0.5)) < 1e-15);
        assert!(
            (hausdorff_to_segment(&pts[..6], Vec2::zeros(), Vec2::new(0.5, 0.5))
                - 0.25 * 2f64.sqrt())
            .abs()
                < 1e-12
        );
    }

    #[test]
    fn kinds_used_in_sampling() {
        let s = random_angles(400, 0.05, SAMPLE_SEED);
        let obtuse = s
            .iter()
            .filter(|(a, b)| {
                LabeledTriangle::from_angles(*a, *b)
                    .unwrap()
                    .classify()
                    .kind
                    == ShapeKind::Obtuse
            })
            .count();
        assert!(obtuse > 100 && obtuse < 350);
    }
}
