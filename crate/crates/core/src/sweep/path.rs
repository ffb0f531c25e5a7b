//! Continuation of the eigenfunction along the straight-line path from a
//! triangle to the right isosceles triangle `(0, 1, i)`.

use serde::{Deserialize, Serialize};

use crate::analysis::{hot_spots_verdict, Classification};
use crate::config::RunConfig;
use crate::eigensolver::{find_mu2_with, Eigenpair, SolveOptions, TrackTarget};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{LabeledTriangle, ShapeKind, Vec2};
use crate::quadrature::halton_points;

/// Fewest path steps accepted.
pub const MIN_PATH_STEPS: usize = 50;

/// One solved point of a deformation path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub t: f64,
    pub triangle: LabeledTriangle,
    /// Sign chosen to agree with the previous record.
    pub eigenpair: Eigenpair,
    pub verdict: Classification,
    /// Every critical point the analysis reported.
    pub crit_points: Vec<[f64; 2]>,
    /// `u(v)/scale`.
    pub vertex_values: [f64; 3],
    pub min_vertex_value: f64,
    /// `c1` at the obtuse vertex, when there is one and it is resolved.
    pub obtuse_c1: Option<f64>,
    /// Normalized inner product with the previous record on the shared
    /// reference points, before the sign flip; 1 for the first record.
    pub alignment: f64,
    pub flags: Vec<String>,
}

/// Fixed points of the reference triangle `(0, 1, i)`, carried to each
/// triangle of the path by its affine map.
pub fn reference_points(count: usize, seed: u64) -> Vec<Vec2> {
    halton_points(&LabeledTriangle::right_isosceles(), count, seed)
}

fn values_on(ep: &Eigenpair, refs: &[Vec2]) -> Vec<f64> {
    let f = ep.field();
    refs.iter()
        .map(|p| f.value_unchecked(&ep.triangle.affine_from_reference(p)))
        .collect()
}

fn inner(a: &[f64], b: &[f64]) -> f64 {
    let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let aa: f64 = a.iter().map(|x| x * x).sum();
    let bb: f64 = b.iter().map(|x| x * x).sum();
    ab / (aa * bb).sqrt()
}

struct Solved {
    t: f64,
    ep: Eigenpair,
    values: Vec<f64>,
    alignment: f64,
}

fn solve_step(
    t0: &LabeledTriangle,
    t: f64,
    prev: Option<&Solved>,
    refs: &[Vec2],
    cfg: &RunConfig,
) -> Result<Solved> {
    let tri = t0.straight_line_path(t)?;
    let mut opts = SolveOptions::default();
    if let Some(p) = prev {
        let w = cfg.sweep.path_window;
        opts.window = Some(((1.0 - w) * p.ep.mu, (1.0 + w) * p.ep.mu));
        opts.track = Some(TrackTarget {
            points: refs.iter().map(|r| tri.affine_from_reference(r)).collect(),
            values: p.values.clone(),
        });
    }
    let mut ep = find_mu2_with(&tri, &cfg.solver, &opts)?;
    let mut values = values_on(&ep, refs);
    let alignment = match prev {
        Some(p) => inner(&p.values, &values),
        None => 1.0,
    };
    if alignment < 0.0 {
        ep = ep.negated();
        values.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(Solved {
        t,
        ep,
        values,
        alignment,
    })
}

/// Solves at `t = k/steps` along the path from `t0` to `(0, 1, i)`,
/// warm-starting each scan from the previous eigenvalue and aligning
/// signs on shared reference points. A step whose alignment falls below
/// `cfg.sweep.alignment_min` is bisected once; if the retry still fails
/// the record is flagged.
pub fn continuation(
    t0: &LabeledTriangle,
    steps: usize,
    cfg: &RunConfig,
) -> Result<Vec<PathRecord>> {
    continuation_with(t0, steps, cfg, false)
}

/// As [`continuation`]; with `flip` the first eigenfunction starts with
/// the opposite sign.
pub fn continuation_with(
    t0: &LabeledTriangle,
    steps: usize,
    cfg: &RunConfig,
    flip: bool,
) -> Result<Vec<PathRecord>> {
    if steps < MIN_PATH_STEPS {
        return Err(Error::InvalidInput(format!(
            "continuation needs at least {MIN_PATH_STEPS} steps, got {steps}"
        )));
    }
    let class = t0.classify();
    if class.kind == ShapeKind::Right || class.is_equilateral {
        return Err(Error::InvalidInput(
            "path start must be neither right nor equilateral".into(),
        ));
    }
    let refs = reference_points(cfg.sweep.reference_points, cfg.solver.seed);
    let mut first = solve_step(t0, 0.0, None, &refs, cfg)?;
    if flip {
        first.ep = first.ep.negated();
        first.values.iter_mut().for_each(|v| *v = -*v);
    }
    let mut solved: Vec<(Solved, Vec<String>)> = vec![(first, Vec::new())];
    for k in 1..=steps {
        let t = k as f64 / steps as f64;
        let prev = &solved.last().expect("nonempty").0;
        let attempt = solve_step(t0, t, Some(prev), &refs, cfg)?;
        if attempt.alignment.abs() >= cfg.sweep.alignment_min {
            solved.push((attempt, Vec::new()));
            continue;
        }
        let mid = solve_step(t0, 0.5 * (prev.t + t), Some(prev), &refs, cfg)?;
        let retry = solve_step(t0, t, Some(&mid), &refs, cfg)?;
        let mut flags = Vec::new();
        let mut mid_flags = Vec::new();
        if mid.alignment.abs() < cfg.sweep.alignment_min {
            mid_flags.push("alignment".to_string());
        }
        if retry.alignment.abs() < cfg.sweep.alignment_min {
            flags.push("alignment".to_string());
        }
        solved.push((mid, mid_flags));
        solved.push((retry, flags));
    }
    solved
        .into_iter()
        .map(|(s, flags)| path_record(s, flags, cfg))
        .collect()
}

fn path_record(s: Solved, mut flags: Vec<String>, cfg: &RunConfig) -> Result<PathRecord> {
    let tri = s.ep.triangle;
    if s.ep.multiplicity_two {
        flags.push("multiplicity-two".into());
    }
    let (verdict, crit_points, vertex_values, obtuse_c1) =
        match hot_spots_verdict(&s.ep.field(), &cfg.analysis) {
            Ok(v) => {
                let obtuse_c1 = tri.classify().obtuse_vertex.and_then(|i| v.c1(i));
                let pts = v.reports.iter().map(|r| r.location).collect();
                if !v.margins.is_empty() {
                    flags.extend(v.margins.iter().cloned());
                }
                (v.classification, pts, v.vertex_values, obtuse_c1)
            }
            Err(e) => {
                flags.push(format!("analysis failed: {e}"));
                let f = s.ep.field();
                let vals: Vec<f64> = (0..3).map(|i| f.value_unchecked(&tri.vertex(i))).collect();
                let scale = vals.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
                (
                    Classification::Ambiguous,
                    Vec::new(),
                    [vals[0] / scale, vals[1] / scale, vals[2] / scale],
                    None,
                )
            }
        };
    Ok(PathRecord {
        t: s.t,
        triangle: tri,
        verdict,
        crit_points,
        min_vertex_value: vertex_values
            .iter()
            .fold(f64::INFINITY, |m, x| m.min(x.abs())),
        vertex_values,
        obtuse_c1,
        alignment: s.alignment,
        flags,
        eigenpair: s.ep,
    })
}

/// How critical points move along a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    /// `(t, p)` for every record with exactly one critical point.
    pub points: Vec<(f64, [f64; 2])>,
    /// Whether each record has a critical point.
    pub present: Vec<bool>,
    /// Largest `|Δp| / (Δt · diameter)` over linked consecutive records.
    pub max_speed: f64,
    /// Consecutive records with critical points that could not be linked.
    pub broken_links: usize,
    /// Records where more than one candidate fell inside the gate.
    pub ambiguous_links: usize,
    /// Present at some `t` and absent at a later one.
    pub disappears: bool,
    pub last_present_t: Option<f64>,
    /// Vertex nearest to the critical point at the last present record.
    pub last_vertex: Option<usize>,
    /// Its distance over the diameter.
    pub last_vertex_distance: Option<f64>,
    /// `|u(v)|/scale` at that vertex.
    pub last_vertex_value: Option<f64>,
    /// Smallest `|u(v)|/scale` over all vertices at the last present record.
    pub last_min_vertex_value: Option<f64>,
}

/// Links critical points of consecutive records by nearest neighbour
/// within `10 Δt · diameter`.
pub fn crit_trajectory(path: &[PathRecord]) -> TrajectoryReport {
    let mut rep = TrajectoryReport {
        points: Vec::new(),
        present: path.iter().map(|r| !r.crit_points.is_empty()).collect(),
        max_speed: 0.0,
        broken_links: 0,
        ambiguous_links: 0,
        disappears: false,
        last_present_t: None,
        last_vertex: None,
        last_vertex_distance: None,
        last_vertex_value: None,
        last_min_vertex_value: None,
    };
    for r in path {
        if r.crit_points.len() == 1 {
            rep.points.push((r.t, r.crit_points[0]));
        }
    }
    for w in path.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.crit_points.is_empty() || b.crit_points.is_empty() {
            continue;
        }
        let dt = b.t - a.t;
        let diam = b.triangle.diameter();
        let gate = 10.0 * dt * diam;
        for p in &a.crit_points {
            let p = Vec2::new(p[0], p[1]);
            let dists: Vec<f64> = b
                .crit_points
                .iter()
                .map(|q| (Vec2::new(q[0], q[1]) - p).norm())
                .collect();
            let inside = dists.iter().filter(|d| **d <= gate).count();
            if inside > 1 {
                rep.ambiguous_links += 1;
            }
            let nearest = dists.iter().copied().fold(f64::INFINITY, f64::min);
            if nearest <= gate {
                rep.max_speed = rep.max_speed.max(nearest / (dt * diam));
            } else {
                rep.broken_links += 1;
            }
        }
    }
    if let Some(last) = path.iter().rposition(|r| !r.crit_points.is_empty()) {
        let r = &path[last];
        rep.disappears = last + 1 < path.len();
        rep.last_present_t = Some(r.t);
        let p = Vec2::new(r.crit_points[0][0], r.crit_points[0][1]);
        let (v, d) = (0..3)
            .map(|i| (i, (r.triangle.vertex(i) - p).norm()))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        rep.last_vertex = Some(v);
        rep.last_vertex_distance = Some(d / r.triangle.diameter());
        rep.last_vertex_value = Some(r.vertex_values[v].abs());
        rep.last_min_vertex_value = Some(r.min_vertex_value);
    }
    rep
}

/// Writes one CSV row per record, preceded by a `# ` header line.
pub fn write_path_csv<W: std::io::Write>(
    w: &mut W,
    path: &[PathRecord],
    header: &str,
) -> Result<()> {
    writeln!(w, "# {header}")?;
    writeln!(w, "t,mu,verdict,crit_x,crit_y,u_v1,u_v2,u_v3,min_vertex_value,obtuse_c1,alignment,sigma,flags")?;
    for r in path {
        let crit = r.crit_points.first();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.eigenpair.mu,
            r.verdict,
            crit.map_or_else(String::new, |c| c[0].to_string()),
            crit.map_or_else(String::new, |c| c[1].to_string()),
            r.vertex_values[0],
            r.vertex_values[1],
            r.vertex_values[2],
            r.min_vertex_value,
            r.obtuse_c1.map_or_else(String::new, |c| c.to_string()),
            r.alignment,
            r.eigenpair.sigma,
            r.flags.join("|").replace([',', '\n'], ";"),
        )?;
    }
    Ok(())
}
