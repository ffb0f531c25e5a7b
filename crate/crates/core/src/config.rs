//! Run configuration: one flat-key TOML document (`solver.terms = 20`,
//! `sweep.resolution = 24`, …) whose keys can be overridden one at a time.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Environment variable that overrides `solver.seed`.
pub const SEED_ENV: &str = "HOTSPOTS_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Bessel orders per vertex block.
    pub terms: usize,
    /// Orders of the smooth interior block.
    pub smooth_orders: usize,
    /// Boundary points per edge = `boundary_factor × ⌈total terms / 3⌉`.
    pub boundary_factor: usize,
    /// Interior points = `interior_factor × total terms`.
    pub interior_factor: usize,
    /// Vertex exclusion radius as a fraction of the diameter.
    pub exclusion_radius: f64,
    pub sigma_tol: f64,
    /// Certificate bound on `max |∂u/∂n| / max |u|`.
    pub residual_tol: f64,
    /// Relative singular-value cutoff when orthonormalizing the basis.
    pub rank_tol: f64,
    pub fem_refinement: usize,
    pub scan_lo: f64,
    pub scan_hi: f64,
    /// The scan step is `fem estimate / scan_divisions`.
    pub scan_divisions: usize,
    pub golden_rel_width: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            terms: 20,
            smooth_orders: 12,
            boundary_factor: 3,
            interior_factor: 3,
            exclusion_radius: 1e-3,
            sigma_tol: 1e-5,
            residual_tol: 1e-6,
            rank_tol: 1e-13,
            fem_refinement: 16,
            scan_lo: 0.6,
            scan_hi: 1.4,
            scan_divisions: 200,
            golden_rel_width: 1e-10,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Bound on `|∇u| / scale` at a reported critical point.
    pub grad_tol: f64,
    /// Relative eigenvalue threshold below which a Hessian is degenerate.
    pub degeneracy_tol: f64,
    /// Critical points closer than this fraction of the diameter to a
    /// vertex are not considered.
    pub vertex_exclusion: f64,
    /// Bound on the edge-frame mixed derivative `|∂ₜₙu|` relative to the Hessian.
    pub mixed_tol: f64,
    pub edge_samples: usize,
    pub seed_grid: usize,
    /// `max(|c0|, |c1|)/scale` must exceed this at every vertex.
    pub coefficient_floor: f64,
    /// `|u(v)|/scale` below this counts as a vanishing vertex value.
    pub vertex_zero_tol: f64,
    /// Probe radius for Bessel coefficients, fraction of the shorter adjacent side.
    pub probe_fraction: f64,
    pub quadrature_nodes: usize,
    /// Two-radius coefficient agreement bound.
    pub coefficient_agreement: f64,
    /// Ring radius (fraction of the diameter) for the strict-extremum test.
    pub ring_radius: f64,
    pub ring_samples: usize,
    pub nodal_boundary_samples: usize,
    /// Tracer step as a fraction of the diameter.
    pub nodal_step: f64,
    pub extremum_grid: usize,
    pub extremum_boundary: usize,
    pub extremum_tol: f64,
    /// A critical point closer than this fraction of the diameter to a
    /// vertex makes the verdict ambiguous.
    pub vertex_margin: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            grad_tol: 1e-7,
            degeneracy_tol: 1e-4,
            vertex_exclusion: 1e-3,
            mixed_tol: 1e-6,
            edge_samples: 400,
            seed_grid: 30,
            coefficient_floor: 1e-5,
            vertex_zero_tol: 1e-5,
            probe_fraction: 0.05,
            quadrature_nodes: 64,
            coefficient_agreement: 1e-5,
            ring_radius: 1e-2,
            ring_samples: 64,
            nodal_boundary_samples: 800,
            nodal_step: 1e-2,
            extremum_grid: 200,
            extremum_boundary: 600,
            extremum_tol: 1e-8,
            vertex_margin: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub resolution: usize,
    /// Distance (radians) kept from the boundary of the angle simplex.
    pub margin: f64,
    /// Worker threads; 0 means available parallelism.
    pub workers: usize,
    /// Nodes with every angle within this of π/3 are ambiguous a priori.
    pub near_equilateral: f64,
    /// Nodes with two angles within this of each other are left out of
    /// the acute CRIT fraction.
    pub near_isosceles: f64,
    pub path_steps: usize,
    /// Relative half-width of the warm-started scan window.
    pub path_window: f64,
    pub alignment_min: f64,
    pub reference_points: usize,
    /// Bisection width for the isosceles threshold.
    pub threshold_width: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            resolution: 24,
            margin: 0.05,
            workers: 0,
            near_equilateral: 0.03,
            near_isosceles: 0.05,
            path_steps: 100,
            path_window: 0.1,
            alignment_min: 0.5,
            reference_points: 100,
            threshold_width: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub csv: bool,
    pub svg: bool,
    /// Grid resolution of contour plots.
    pub contour_grid: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "out".into(),
            csv: true,
            svg: true,
            contour_grid: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub solver: SolverConfig,
    pub analysis: AnalysisConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Overrides one flat key such as `solver.sigma_tol`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut doc: toml::Table = toml::from_str(&self.to_toml()).expect("round trip");
        let (section, field) = key
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("key `{key}` must look like section.name")))?;
        let table = doc
            .get_mut(section)
            .and_then(|v| v.as_table_mut())
            .ok_or_else(|| Error::Config(format!("unknown section `{section}`")))?;
        let old = table
            .get(field)
            .ok_or_else(|| Error::Config(format!("unknown key `{key}`")))?;
        let parsed = match old {
            toml::Value::String(_) => toml::Value::String(value.to_string()),
            _ => {
                let probe: toml::Table = toml::from_str(&format!("x = {value}"))
                    .map_err(|e| Error::Config(format!("bad value for `{key}`: {e}")))?;
                let mut v = probe["x"].clone();
                // integers given where floats are expected
                if let (toml::Value::Float(_), toml::Value::Integer(i)) = (old, &v) {
                    v = toml::Value::Float(*i as f64);
                }
                v
            }
        };
        table.insert(field.to_string(), parsed);
        let cfg: RunConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        *self = cfg;
        Ok(())
    }

    /// Applies `HOTSPOTS_SEED` when set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(s) = std::env::var(SEED_ENV) {
            self.solver.seed = s
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={s} is not an integer")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.solver;
        let a = &self.analysis;
        let positive = [
            ("solver.exclusion_radius", s.exclusion_radius),
            ("solver.sigma_tol", s.sigma_tol),
            ("solver.residual_tol", s.residual_tol),
            ("solver.rank_tol", s.rank_tol),
            ("solver.golden_rel_width", s.golden_rel_width),
            ("analysis.grad_tol", a.grad_tol),
            ("analysis.degeneracy_tol", a.degeneracy_tol),
            ("analysis.vertex_exclusion", a.vertex_exclusion),
            ("analysis.mixed_tol", a.mixed_tol),
            ("analysis.coefficient_floor", a.coefficient_floor),
            ("analysis.vertex_zero_tol", a.vertex_zero_tol),
            ("analysis.probe_fraction", a.probe_fraction),
            ("analysis.coefficient_agreement", a.coefficient_agreement),
            ("analysis.ring_radius", a.ring_radius),
            ("analysis.nodal_step", a.nodal_step),
            ("analysis.extremum_tol", a.extremum_tol),
            ("analysis.vertex_margin", a.vertex_margin),
            ("sweep.path_window", self.sweep.path_window),
            ("sweep.alignment_min", self.sweep.alignment_min),
            ("sweep.threshold_width", self.sweep.threshold_width),
            ("sweep.near_equilateral", self.sweep.near_equilateral),
            ("sweep.near_isosceles", self.sweep.near_isosceles),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if s.terms < 4 {
            return Err(Error::Config("solver.terms must be at least 4".into()));
        }
        if s.smooth_orders > crate::eigensolver::basis::MAX_SMOOTH_ORDERS {
            return Err(Error::Config(format!(
                "solver.smooth_orders must not exceed {}",
                crate::eigensolver::basis::MAX_SMOOTH_ORDERS
            )));
        }
        if s.boundary_factor < 2 || s.interior_factor < 1 {
            return Err(Error::Config(
                "solver.boundary_factor ≥ 2 and solver.interior_factor ≥ 1 required".into(),
            ));
        }
        if !(8..=64).contains(&s.fem_refinement) {
            return Err(Error::Config(
                "solver.fem_refinement must lie in [8, 64]".into(),
            ));
        }
        if !(0.0 < s.scan_lo && s.scan_lo < 1.0 && s.scan_hi > 1.0) {
            return Err(Error::Config(
                "scan window must bracket the estimate".into(),
            ));
        }
        if self.sweep.resolution < 8 {
            return Err(Error::Config("sweep.resolution must be at least 8".into()));
        }
        if self.sweep.margin < 0.05 {
            return Err(Error::Config("sweep.margin must be at least 0.05".into()));
        }
        if self.sweep.path_steps < 1 {
            return Err(Error::Config("sweep.path_steps must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML rendering, hex encoded. The output
    /// directory does not affect results and is left out.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output.dir = String::new();
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `config=<hash> seed=<seed>`, embedded in every output file.
    pub fn header(&self) -> String {
        format!("config={} seed={}", &self.hash()[..16], self.solver.seed)
    }

    pub fn worker_count(&self) -> usize {
        if self.sweep.workers == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            self.sweep.workers
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.hash(), back.hash());
    }

    #[test]
    fn flat_keys_parse() {
        let c = RunConfig::from_toml("solver.terms = 12\nsweep.resolution = 10\n").unwrap();
        assert_eq!(c.solver.terms, 12);
        assert_eq!(c.sweep.resolution, 10);
        assert_eq!(c.analysis, AnalysisConfig::default());
    }

    #[test]
    fn overrides_and_errors() {
        let mut c = RunConfig::default();
        c.set("solver.sigma_tol", "1e-6").unwrap();
        assert_eq!(c.solver.sigma_tol, 1e-6);
        c.set("solver.exclusion_radius", "1").unwrap();
        assert_eq!(c.solver.exclusion_radius, 1.0);
        c.set("output.dir", "results").unwrap();
        assert_eq!(c.output.dir, "results");
        assert!(c.set("solver.nope", "1").is_err());
        assert!(c.set("solver.sigma_tol", "-1").is_err());
        assert!(c.set("terms", "3").is_err());
        assert!(RunConfig::from_toml("solver.bogus = 1").is_err());
        let before = c.hash();
        c.set("solver.seed", "99").unwrap();
        assert_ne!(before, c.hash());
    }
}
