//! Method of particular solutions: collocation matrices and the
//! subspace-angle criterion.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{LabeledTriangle, Vec2};
use crate::quadrature::halton_points;

use super::basis::{BasisSpec, Jet, TermJet};

#[derive(Debug, Clone, Copy)]
pub struct BoundaryPoint {
    pub point: Vec2,
    pub edge: usize,
    pub normal: Vec2,
}

/// Collocation and regularization points.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub boundary: Vec<BoundaryPoint>,
    pub interior: Vec<Vec2>,
    pub exclusion_radius: f64,
}

impl Discretization {
    /// `per_edge` Chebyshev points per side clustered toward the vertices,
    /// `interior` seeded Halton points; points within `exclusion` of a vertex
    /// are dropped.
    pub fn new(
        t: &LabeledTriangle,
        per_edge: usize,
        interior: usize,
        exclusion: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut boundary = Vec::with_capacity(3 * per_edge);
        for e in 0..3 {
            let f = t.edge_frame(e)?;
            for j in 0..per_edge {
                let c =
                    0.5 * (1.0 - (std::f64::consts::PI * (j as f64 + 0.5) / per_edge as f64).cos());
                let point = f.point_at(c * f.length);
                if near_vertex(t, &point, exclusion) {
                    continue;
                }
                boundary.push(BoundaryPoint {
                    point,
                    edge: e,
                    normal: f.normal,
                });
            }
        }
        let interior = halton_points(t, interior, seed)
            .into_iter()
            .filter(|p| !near_vertex(t, p, exclusion))
            .collect();
        Ok(Discretization {
            boundary,
            interior,
            exclusion_radius: exclusion,
        })
    }

    pub fn check_sizes(&self, total_terms: usize) -> Result<()> {
        if self.boundary.len() < 2 * total_terms || self.interior.len() < total_terms {
            return Err(Error::InvalidInput(format!(
                "{} boundary / {} interior points are too few for {total_terms} basis terms",
                self.boundary.len(),
                self.interior.len()
            )));
        }
        Ok(())
    }
}

fn near_vertex(t: &LabeledTriangle, p: &Vec2, radius: f64) -> bool {
    t.vertices().iter().any(|v| (p - v).norm() < radius)
}

/// Boundary (normal-derivative) and interior (value) matrices with
/// columns scaled to unit norm over the stacked matrix.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub boundary: DMatrix<f64>,
    pub interior: DMatrix<f64>,
    /// Multiply a scaled-basis coefficient by this to get the raw one.
    pub column_scale: Vec<f64>,
}

pub fn assemble(
    t: &LabeledTriangle,
    mu: f64,
    basis: &BasisSpec,
    disc: &Discretization,
) -> Result<Assembled> {
    if !(mu > 0.0) {
        return Err(Error::InvalidInput(format!(
            "eigenvalue candidate must be positive, got {mu}"
        )));
    }
    let k = mu.sqrt();
    let reach = k * t.diameter();
    if reach > crate::specfun::MAX_ARGUMENT {
        return Err(Error::Envelope(format!(
            "k·diameter = {reach} exceeds the Bessel envelope"
        )));
    }
    let n = basis.total_terms();
    let mut a_b = DMatrix::zeros(disc.boundary.len(), n);
    let mut a_i = DMatrix::zeros(disc.interior.len(), n);
    let mut jets: Vec<TermJet> = Vec::with_capacity(n);
    for (row, bp) in disc.boundary.iter().enumerate() {
        let mut col = 0;
        for block in &basis.blocks {
            let adjacent = LabeledTriangle::edges_at_vertex(block.vertex).contains(&bp.edge);
            if adjacent {
                // cos(nνθ) has zero θ-derivative on both sides of its own sector
                col += block.terms;
                continue;
            }
            jets.clear();
            block.eval_terms(&bp.point, k, Jet::Gradient, &mut jets);
            for j in &jets {
                a_b[(row, col)] = j.grad.dot(&bp.normal);
                col += 1;
            }
        }
        jets.clear();
        for s in &basis.smooth {
            s.eval_terms(&bp.point, k, Jet::Gradient, &mut jets);
        }
        for s in &basis.sources {
            s.eval_terms(&bp.point, k, Jet::Gradient, &mut jets);
        }
        for j in &jets {
            a_b[(row, col)] = j.grad.dot(&bp.normal);
            col += 1;
        }
    }
    for (row, p) in disc.interior.iter().enumerate() {
        basis.eval_all(p, k, Jet::Value, &mut jets);
        for (col, j) in jets.iter().enumerate() {
            a_i[(row, col)] = j.value;
        }
    }
    let mut column_scale = vec![1.0; n];
    for (c, scale) in column_scale.iter_mut().enumerate() {
        let norm = (a_b.column(c).norm_squared() + a_i.column(c).norm_squared()).sqrt();
        if norm > 0.0 && norm.is_finite() {
            a_b.column_mut(c).scale_mut(1.0 / norm);
            a_i.column_mut(c).scale_mut(1.0 / norm);
            *scale = 1.0 / norm;
        } else {
            return Err(Error::RankCollapse {
                condition: f64::INFINITY,
            });
        }
    }
    Ok(Assembled {
        boundary: a_b,
        interior: a_i,
        column_scale,
    })
}

/// Smallest generalized singular values at one `mu`.
#[derive(Debug, Clone)]
pub struct SigmaSample {
    pub mu: f64,
    pub sigma: f64,
    pub sigma_second: f64,
    /// Raw-basis coefficients of the minimizing function (unit norm in
    /// the column-scaled basis), when requested.
    pub coeffs: Option<DVector<f64>>,
    /// Raw-basis coefficients of the second direction, when requested.
    pub second_coeffs: Option<DVector<f64>>,
    pub condition: f64,
    pub rank: usize,
}

impl SigmaSample {
    pub fn sigma_gap(&self) -> f64 {
        self.sigma_second - self.sigma
    }
}

/// Subspace-angle criterion: orthonormalize the stacked matrix by a
/// truncated SVD and return the two smallest singular values of its
/// boundary rows.
pub fn sigma_from_assembled(
    mu: f64,
    asm: &Assembled,
    rank_tol: f64,
    want_vectors: bool,
) -> Result<SigmaSample> {
    // threaded factorizations would make results depend on the thread
    // count; sweeps parallelize over triangles instead
    static SERIAL: std::sync::Once = std::sync::Once::new();
    SERIAL.call_once(|| faer::set_global_parallelism(faer::Parallelism::None));
    let nb = asm.boundary.nrows();
    let ni = asm.interior.nrows();
    let n = asm.boundary.ncols();
    let stacked = faer::Mat::<f64>::from_fn(nb + ni, n, |i, j| {
        if i < nb {
            asm.boundary[(i, j)]
        } else {
            asm.interior[(i - nb, j)]
        }
    });
    let svd = stacked.thin_svd();
    let s = svd.s_diagonal();
    let smax = (0..n).map(|i| s.read(i)).fold(0.0_f64, f64::max);
    let smin = (0..n).map(|i| s.read(i)).fold(f64::INFINITY, f64::min);
    let keep: Vec<usize> = (0..n).filter(|&i| s.read(i) > rank_tol * smax).collect();
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if keep.len() < 2 {
        return Err(Error::RankCollapse { condition });
    }
    let u = svd.u();
    let r = keep.len();
    let qb = faer::Mat::<f64>::from_fn(nb, r, |i, j| u.read(i, keep[j]));
    let (sigma, sigma_second, coeffs, second_coeffs) = if want_vectors {
        let inner = qb.thin_svd();
        let d = inner.s_diagonal();
        let mut order: Vec<usize> = (0..r).collect();
        order.sort_by(|&a, &b| d.read(a).total_cmp(&d.read(b)));
        let w = inner.v();
        let v = svd.v();
        let lift = |idx: usize| {
            let mut c = DVector::zeros(n);
            for (j, &i) in keep.iter().enumerate() {
                let y = w.read(j, idx) / s.read(i);
                for row in 0..n {
                    c[row] += v.read(row, i) * y;
                }
            }
            let norm = c.norm();
            c /= norm;
            for (ci, sc) in c.iter_mut().zip(&asm.column_scale) {
                *ci *= sc;
            }
            c
        };
        (
            d.read(order[0]),
            d.read(order[1]),
            Some(lift(order[0])),
            Some(lift(order[1])),
        )
    } else {
        let mut d = qb.singular_values();
        d.sort_by(f64::total_cmp);
        (d[0], d[1], None, None)
    };
    // Q_B has more rows than columns, so all r singular values are genuine
    Ok(SigmaSample {
        mu,
        sigma,
        sigma_second,
        coeffs,
        second_coeffs,
        condition,
        rank: r,
    })
}

pub fn sigma_min(
    t: &LabeledTriangle,
    mu: f64,
    basis: &BasisSpec,
    disc: &Discretization,
    rank_tol: f64,
    want_vectors: bool,
) -> Result<SigmaSample> {
    let asm = assemble(t, mu, basis, disc)?;
    sigma_from_assembled(mu, &asm, rank_tol, want_vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn setup(t: &LabeledTriangle, terms: usize) -> (BasisSpec, Discretization) {
        let basis = BasisSpec::for_triangle(t, terms, terms).unwrap();
        let n = basis.total_terms();
        let disc = Discretization::new(t, n, 3 * n, 1e-3 * t.diameter(), 11).unwrap();
        (basis, disc)
    }

    #[test]
    fn adjacent_edges_are_exact_zeros_and_columns_unit() {
        let t = LabeledTriangle::from_angles(1.0, 0.8).unwrap();
        let (basis, disc) = setup(&t, 8);
        let asm = assemble(&t, 20.0, &basis, &disc).unwrap();
        for (row, bp) in disc.boundary.iter().enumerate() {
            let mut col = 0;
            for b in &basis.blocks {
                let adj = LabeledTriangle::edges_at_vertex(b.vertex).contains(&bp.edge);
                for _ in 0..b.terms {
                    if adj {
                        assert_eq!(asm.boundary[(row, col)], 0.0);
                    }
                    col += 1;
                }
            }
        }
        for c in 0..basis.total_terms() {
            let norm = (asm.boundary.column(c).norm_squared()
                + asm.interior.column(c).norm_squared())
            .sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sizes_checked() {
        let t = LabeledTriangle::right_isosceles();
        let basis = BasisSpec::for_triangle(&t, 20, 20).unwrap();
        let disc = Discretization::new(&t, 10, 10, 1e-3, 1).unwrap();
        assert!(disc.check_sizes(basis.total_terms()).is_err());
        assert!(assemble(&t, -1.0, &basis, &disc).is_err());
    }

    #[test]
    fn right_isosceles_dip() {
        let t = LabeledTriangle::right_isosceles();
        let (basis, disc) = setup(&t, 20);
        let on = sigma_min(&t, PI * PI, &basis, &disc, 1e-13, false).unwrap();
        assert!(on.sigma < 1e-6, "sigma at pi^2 = {:e}", on.sigma);
        let off = sigma_min(&t, 0.8 * PI * PI, &basis, &disc, 1e-13, false).unwrap();
        assert!(off.sigma > 1e-2, "sigma off eigenvalue = {:e}", off.sigma);
    }

    #[test]
    fn equilateral_has_two_small_values() {
        let t = LabeledTriangle::equilateral();
        let (basis, disc) = setup(&t, 20);
        let mu = 16.0 * PI * PI / 9.0;
        let s = sigma_min(&t, mu, &basis, &disc, 1e-13, false).unwrap();
        assert!(
            s.sigma < 1e-6 && s.sigma_second < 1e-6,
            "{:e} {:e}",
            s.sigma,
            s.sigma_second
        );
    }
}
