//! Critical-point verdicts along the isosceles family with apex at `v3`.

use std::f64::consts::FRAC_PI_3;

use serde::{Deserialize, Serialize};

use crate::analysis::{hot_spots_verdict, Classification};
use crate::config::RunConfig;
use crate::eigensolver::find_mu2;
use crate::error::{Error, Result};
use crate::geometry::LabeledTriangle;

/// Scan endpoints must stay this far from `π/3`.
pub const ENDPOINT_CLEARANCE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoscelesPoint {
    pub apex: f64,
    pub mu2: Option<f64>,
    pub verdict: Classification,
    pub crit: Option<[f64; 2]>,
    /// `|u(apex)| / scale`.
    pub apex_value: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub points: Vec<IsoscelesPoint>,
    /// Bracketing apex angles: CRIT at `lo`, NOCRIT at `hi`.
    pub lo: f64,
    pub hi: f64,
    pub threshold: f64,
    /// Verdicts along the uniform scan change more than once, or an
    /// ambiguous verdict interrupted the bisection.
    pub non_monotone: bool,
    pub bisection_stopped: Option<String>,
}

/// Verdict for the isosceles triangle with apex angle `apex` at `v3`.
pub fn isosceles_point(apex: f64, cfg: &RunConfig) -> IsoscelesPoint {
    let mut point = IsoscelesPoint {
        apex,
        mu2: None,
        verdict: Classification::Ambiguous,
        crit: None,
        apex_value: None,
        note: None,
    };
    let t = match LabeledTriangle::isosceles_with_apex(apex) {
        Ok(t) => t,
        Err(e) => {
            point.note = Some(e.to_string());
            return point;
        }
    };
    let ep = match find_mu2(&t, &cfg.solver) {
        Ok(ep) => ep,
        Err(e) => {
            point.note = Some(e.to_string());
            return point;
        }
    };
    point.mu2 = Some(ep.mu);
    match hot_spots_verdict(&ep.field(), &cfg.analysis) {
        Ok(v) => {
            point.verdict = v.classification;
            point.crit = v.critical_point().map(|r| r.location);
            point.apex_value = Some(v.vertex_values[2].abs());
            if ep.multiplicity_two {
                point.verdict = Classification::Ambiguous;
                point.note = Some("second eigenvalue nearly double".into());
            } else if !v.margins.is_empty() {
                point.note = Some(v.margins.join("; "));
            }
        }
        Err(e) => point.note = Some(e.to_string()),
    }
    point
}

/// Uniform scan of `steps + 1` apex angles over `[lo, hi]`, then
/// bisection of the last CRIT / first NOCRIT pair down to
/// `cfg.sweep.threshold_width`.
pub fn isosceles_scan(
    lo: f64,
    hi: f64,
    steps: usize,
    cfg: &RunConfig,
) -> Result<ThresholdEstimate> {
    if !(lo < FRAC_PI_3 && FRAC_PI_3 < hi) {
        return Err(Error::InvalidInput(format!(
            "apex range [{lo}, {hi}] must contain π/3"
        )));
    }
    if (lo - FRAC_PI_3).abs() < ENDPOINT_CLEARANCE || (hi - FRAC_PI_3).abs() < ENDPOINT_CLEARANCE {
        return Err(Error::InvalidInput(format!(
            "apex range endpoints must stay {ENDPOINT_CLEARANCE} away from π/3"
        )));
    }
    if !(lo > 0.0 && hi < std::f64::consts::PI) || steps < 2 {
        return Err(Error::InvalidInput(
            "apex range must lie in (0, π) with at least 2 steps".into(),
        ));
    }
    let mut points: Vec<IsoscelesPoint> = (0..=steps)
        .map(|i| isosceles_point(lo + (hi - lo) * i as f64 / steps as f64, cfg))
        .collect();
    let decided: Vec<&IsoscelesPoint> = points
        .iter()
        .filter(|p| p.verdict != Classification::Ambiguous)
        .collect();
    let changes = decided
        .windows(2)
        .filter(|w| w[0].verdict != w[1].verdict)
        .count();
    let mut non_monotone = changes != 1
        || decided.first().map(|p| p.verdict) != Some(Classification::Crit)
        || decided.last().map(|p| p.verdict) != Some(Classification::Nocrit);
    let pair = decided
        .windows(2)
        .find(|w| w[0].verdict == Classification::Crit && w[1].verdict == Classification::Nocrit)
        .map(|w| (w[0].apex, w[1].apex));
    let (mut a, mut b) = pair.ok_or_else(|| {
        Error::NonConvergence("no CRIT → NOCRIT change along the isosceles scan".into())
    })?;
    let mut stopped = None;
    while b - a > cfg.sweep.threshold_width {
        let mid = isosceles_point(0.5 * (a + b), cfg);
        match mid.verdict {
            Classification::Crit => a = mid.apex,
            Classification::Nocrit => b = mid.apex,
            Classification::Ambiguous => {
                stopped = Some(format!(
                    "ambiguous verdict at apex {}: {}",
                    mid.apex,
                    mid.note.clone().unwrap_or_default()
                ));
                non_monotone = true;
                points.push(mid);
                break;
            }
        }
        points.push(mid);
    }
    points.sort_by(|x, y| x.apex.total_cmp(&y.apex));
    Ok(ThresholdEstimate {
        points,
        lo: a,
        hi: b,
        threshold: 0.5 * (a + b),
        non_monotone,
        bisection_stopped: stopped,
    })
}

/// Writes one CSV row per apex angle, preceded by a `# ` header line.
pub fn write_isosceles_csv<W: std::io::Write>(
    w: &mut W,
    est: &ThresholdEstimate,
    header: &str,
) -> Result<()> {
    writeln!(w, "# {header}")?;
    writeln!(
        w,
        "# threshold={} bracket=[{},{}]",
        est.threshold, est.lo, est.hi
    )?;
    writeln!(w, "apex,mu2,verdict,crit_x,crit_y,apex_value,note")?;
    for p in &est.points {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            p.apex,
            opt(p.mu2),
            p.verdict,
            opt(p.crit.map(|c| c[0])),
            opt(p.crit.map(|c| c[1])),
            opt(p.apex_value),
            p.note.clone().unwrap_or_default().replace([',', '\n'], ";"),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_checks() {
        let cfg = RunConfig::default();
        assert!(isosceles_scan(1.1, 1.4, 10, &cfg).is_err());
        assert!(isosceles_scan(0.6, 1.05, 10, &cfg).is_err());
        assert!(isosceles_scan(0.6, 1.4, 1, &cfg).is_err());
    }
}
