//! Sweeps over the angle simplex, deformation paths and the isosceles family.

pub mod isosceles;
pub mod map;
pub mod path;

use std::f64::consts::{FRAC_PI_3, PI};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analysis::{hot_spots_verdict, Classification};
use crate::config::RunConfig;
use crate::eigensolver::{find_mu2, residual_certificate};
use crate::error::{Error, Result};
use crate::geometry::{LabeledTriangle, ShapeKind};

pub use isosceles::{isosceles_scan, IsoscelesPoint, ThresholdEstimate};
pub use path::{continuation, crit_trajectory, PathRecord, TrajectoryReport};

/// Boundary samples per edge for the residual certificate.
pub const CERTIFICATE_SAMPLES: usize = 1000;

/// One node of a moduli sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub beta1: f64,
    pub beta2: f64,
    pub kind: ShapeKind,
    pub mu2: Option<f64>,
    /// `u(v)/scale`.
    pub vertex_values: Option<[f64; 3]>,
    pub c1: [Option<f64>; 3],
    pub verdict: Classification,
    pub crit: Option<[f64; 2]>,
    pub sigma: Option<f64>,
    pub normal_residual: Option<f64>,
    /// Short tags such as `near-equilateral` or `multiplicity-two`.
    pub flags: Vec<String>,
    /// Why the verdict is ambiguous, when it is.
    pub reason: Option<String>,
}

impl SweepRecord {
    pub fn beta3(&self) -> f64 {
        PI - self.beta1 - self.beta2
    }

    pub fn angles(&self) -> [f64; 3] {
        [self.beta1, self.beta2, self.beta3()]
    }

    fn ambiguous(beta1: f64, beta2: f64, kind: ShapeKind, flag: &str, reason: String) -> Self {
        SweepRecord {
            beta1,
            beta2,
            kind,
            mu2: None,
            vertex_values: None,
            c1: [None; 3],
            verdict: Classification::Ambiguous,
            crit: None,
            sigma: None,
            normal_residual: None,
            flags: vec![flag.to_string()],
            reason: Some(reason),
        }
    }
}

/// Nodes `β = margin + (i, j)·h` with `h = (π − 3·margin)/n` and
/// `i + j ≤ n`, so every angle of every node is at least `margin`.
pub fn simplex_nodes(resolution: usize, margin: f64) -> Result<Vec<(f64, f64)>> {
    if resolution < 8 {
        return Err(Error::InvalidInput(format!(
            "sweep resolution must be at least 8, got {resolution}"
        )));
    }
    if !(margin >= 0.05 && 3.0 * margin < PI) {
        return Err(Error::InvalidInput(format!(
            "sweep margin must lie in [0.05, π/3), got {margin}"
        )));
    }
    let h = (PI - 3.0 * margin) / resolution as f64;
    let mut out = Vec::new();
    for i in 0..=resolution {
        for j in 0..=(resolution - i) {
            out.push((margin + i as f64 * h, margin + j as f64 * h));
        }
    }
    Ok(out)
}

pub fn is_near_equilateral(angles: [f64; 3], tol: f64) -> bool {
    angles.iter().all(|b| (b - FRAC_PI_3).abs() <= tol)
}

pub fn is_near_isosceles(angles: [f64; 3], tol: f64) -> bool {
    (0..3).any(|i| (angles[i] - angles[(i + 1) % 3]).abs() <= tol)
}

/// Solve, certify and classify one node. Failures become ambiguous records.
pub fn sweep_node(beta1: f64, beta2: f64, cfg: &RunConfig) -> SweepRecord {
    let t = match LabeledTriangle::from_angles(beta1, beta2) {
        Ok(t) => t,
        Err(e) => {
            return SweepRecord::ambiguous(beta1, beta2, ShapeKind::Acute, "invalid", e.to_string())
        }
    };
    let kind = t.classify().kind;
    if is_near_equilateral(t.angles(), cfg.sweep.near_equilateral) {
        return SweepRecord::ambiguous(
            beta1,
            beta2,
            kind,
            "near-equilateral",
            "all angles near π/3, second eigenvalue nearly double".into(),
        );
    }
    let ep = match find_mu2(&t, &cfg.solver) {
        Ok(ep) => ep,
        Err(e) => {
            return SweepRecord::ambiguous(beta1, beta2, kind, "solver-failed", e.to_string())
        }
    };
    let mut rec = SweepRecord {
        beta1,
        beta2,
        kind,
        mu2: Some(ep.mu),
        vertex_values: None,
        c1: [None; 3],
        verdict: Classification::Ambiguous,
        crit: None,
        sigma: Some(ep.sigma),
        normal_residual: None,
        flags: Vec::new(),
        reason: None,
    };
    let mut reasons = Vec::new();
    match residual_certificate(&ep, CERTIFICATE_SAMPLES, &cfg.solver) {
        Ok(c) => {
            rec.normal_residual = Some(c.normal_residual);
            if !c.certified {
                rec.flags.push("uncertified".into());
                reasons.push(format!(
                    "certificate failed (sigma {:.3e}, normal residual {:.3e})",
                    c.sigma, c.normal_residual
                ));
            }
        }
        Err(e) => {
            rec.flags.push("uncertified".into());
            reasons.push(e.to_string());
        }
    }
    if ep.multiplicity_two {
        rec.flags.push("multiplicity-two".into());
        reasons.push("second singular value also small".into());
    }
    match hot_spots_verdict(&ep.field(), &cfg.analysis) {
        Ok(v) => {
            rec.vertex_values = Some(v.vertex_values);
            rec.c1 = v.resolved_c1;
            rec.crit = v.critical_point().map(|r| r.location);
            if v.hidden_count > 0 {
                rec.flags.push("near-vertex-critical-point".into());
            }
            reasons.extend(v.margins.iter().cloned());
            rec.verdict = if reasons.is_empty() {
                v.classification
            } else {
                Classification::Ambiguous
            };
        }
        Err(e) => {
            rec.flags.push("analysis-failed".into());
            reasons.push(e.to_string());
        }
    }
    if !reasons.is_empty() {
        rec.verdict = Classification::Ambiguous;
        rec.reason = Some(reasons.join("; "));
    }
    rec
}

/// Classifies every node of the simplex grid on a pool of
/// `cfg.worker_count()` threads. Records come back sorted by `(β1, β2)`.
pub fn moduli_sweep(resolution: usize, margin: f64, cfg: &RunConfig) -> Result<Vec<SweepRecord>> {
    moduli_sweep_with(resolution, margin, cfg, |_, _| {})
}

/// As [`moduli_sweep`], calling `progress(done, total)` after every node.
pub fn moduli_sweep_with<P>(
    resolution: usize,
    margin: f64,
    cfg: &RunConfig,
    progress: P,
) -> Result<Vec<SweepRecord>>
where
    P: Fn(usize, usize) + Sync,
{
    use rayon::prelude::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    let nodes = simplex_nodes(resolution, margin)?;
    let total = nodes.len();
    let done = AtomicUsize::new(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.worker_count())
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let mut records: Vec<SweepRecord> = pool.install(|| {
        nodes
            .par_iter()
            .map(|&(b1, b2)| {
                let r = sweep_node(b1, b2, cfg);
                progress(done.fetch_add(1, Ordering::Relaxed) + 1, total);
                r
            })
            .collect()
    });
    records.sort_by(|a, b| {
        a.beta1
            .total_cmp(&b.beta1)
            .then(a.beta2.total_cmp(&b.beta2))
    });
    Ok(records)
}

/// Counts behind the obtuse-emptiness and acute-density checks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub nodes: usize,
    pub crit: usize,
    pub nocrit: usize,
    pub ambiguous: usize,
    pub obtuse: usize,
    pub obtuse_crit: usize,
    /// Acute nodes that are neither near-isosceles nor near-equilateral.
    pub acute_generic: usize,
    pub acute_generic_crit: usize,
    pub acute_generic_ambiguous: usize,
}

impl SweepSummary {
    pub fn acute_crit_fraction(&self) -> f64 {
        if self.acute_generic == 0 {
            return f64::NAN;
        }
        self.acute_generic_crit as f64 / self.acute_generic as f64
    }
}

pub fn summarize(records: &[SweepRecord], cfg: &RunConfig) -> SweepSummary {
    let mut s = SweepSummary {
        nodes: records.len(),
        ..SweepSummary::default()
    };
    for r in records {
        let crit = r.verdict == Classification::Crit;
        match r.verdict {
            Classification::Crit => s.crit += 1,
            Classification::Nocrit => s.nocrit += 1,
            Classification::Ambiguous => s.ambiguous += 1,
        }
        match r.kind {
            ShapeKind::Obtuse => {
                s.obtuse += 1;
                s.obtuse_crit += crit as usize;
            }
            ShapeKind::Acute => {
                let a = r.angles();
                if !is_near_equilateral(a, cfg.sweep.near_equilateral)
                    && !is_near_isosceles(a, cfg.sweep.near_isosceles)
                {
                    s.acute_generic += 1;
                    s.acute_generic_crit += crit as usize;
                    s.acute_generic_ambiguous += (r.verdict == Classification::Ambiguous) as usize;
                }
            }
            ShapeKind::Right => {}
        }
    }
    s
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Commas would break the CSV, so free text is folded into `;`-separated tags.
fn csv_text(s: &str) -> String {
    s.replace([',', '\n'], ";")
}

/// Writes the sweep CSV, preceded by a `# ` header line.
pub fn write_sweep_csv<W: Write>(w: &mut W, records: &[SweepRecord], header: &str) -> Result<()> {
    writeln!(w, "# {header}")?;
    writeln!(
        w,
        "beta1,beta2,mu2,u_v1,u_v2,u_v3,c1_v1,c1_v2,c1_v3,verdict,crit_x,crit_y,sigma,flags"
    )?;
    for r in records {
        let vals = r.vertex_values.map_or([None; 3], |v| v.map(Some));
        let mut flags = r.flags.clone();
        if let Some(reason) = &r.reason {
            flags.push(format!("reason: {reason}"));
        }
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.beta1,
            r.beta2,
            opt(r.mu2),
            opt(vals[0]),
            opt(vals[1]),
            opt(vals[2]),
            opt(r.c1[0]),
            opt(r.c1[1]),
            opt(r.c1[2]),
            r.verdict,
            opt(r.crit.map(|c| c[0])),
            opt(r.crit.map(|c| c[1])),
            opt(r.sigma),
            csv_text(&flags.join("|")),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_the_inset_simplex() {
        let nodes = simplex_nodes(24, 0.05).unwrap();
        assert_eq!(nodes.len(), 25 * 26 / 2);
        for &(a, b) in &nodes {
            assert!(a >= 0.05 - 1e-12 && b >= 0.05 - 1e-12 && PI - a - b >= 0.05 - 1e-12);
        }
        for w in nodes.windows(2) {
            assert!(w[0].0 < w[1].0 || (w[0].0 == w[1].0 && w[0].1 < w[1].1));
        }
        // the equilateral shape is a node, and no node is right-angled
        assert!(nodes
            .iter()
            .any(|&(a, b)| is_near_equilateral([a, b, PI - a - b], 1e-12)));
        for &(a, b) in &nodes {
            for x in [a, b, PI - a - b] {
                assert!((x - PI / 2.0).abs() > 1e-3);
            }
        }
        assert!(simplex_nodes(7, 0.05).is_err());
        assert!(simplex_nodes(24, 0.01).is_err());
    }

    #[test]
    fn near_equilateral_is_ambiguous_without_solving() {
        let cfg = RunConfig::default();
        let r = sweep_node(PI / 3.0 + 0.01, PI / 3.0 - 0.01, &cfg);
        assert_eq!(r.verdict, Classification::Ambiguous);
        assert_eq!(r.flags, vec!["near-equilateral".to_string()]);
        assert!(r.mu2.is_none());
    }

    #[test]
    fn csv_has_schema_and_header() {
        let cfg = RunConfig::default();
        let recs = vec![SweepRecord::ambiguous(
            0.5,
            0.6,
            ShapeKind::Acute,
            "solver-failed",
            "no dip, trace a,b".into(),
        )];
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &recs, &cfg.header()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# config="));
        assert_eq!(lines[1].split(',').count(), 14);
        assert_eq!(lines[2].split(',').count(), 14);
        assert!(lines[2].contains("AMBIGUOUS"));
    }

    #[test]
    fn summary_counts() {
        let cfg = RunConfig::default();
        let mut a = SweepRecord::ambiguous(1.2, 1.0, ShapeKind::Acute, "x", String::new());
        a.verdict = Classification::Crit;
        let b = SweepRecord::ambiguous(2.0, 0.5, ShapeKind::Obtuse, "x", String::new());
        let mut c = SweepRecord::ambiguous(1.0, 1.0, ShapeKind::Acute, "x", String::new());
        c.verdict = Classification::Nocrit;
        let s = summarize(&[a, b, c], &cfg);
        assert_eq!((s.nodes, s.crit, s.nocrit, s.ambiguous), (3, 1, 1, 1));
        assert_eq!((s.obtuse, s.obtuse_crit), (1, 0));
        assert_eq!((s.acute_generic, s.acute_generic_crit), (1, 1));
        assert_eq!(s.acute_crit_fraction(), 1.0);
    }
}
