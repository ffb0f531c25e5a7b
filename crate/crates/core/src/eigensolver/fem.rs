//! Linear finite elements for the Neumann pencil `K x = μ M x`, used as an
//! independent bracket for the particular-solutions eigenvalue.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::LabeledTriangle;

/// Compressed sparse rows for a symmetric matrix stored in full.
#[derive(Debug, Clone)]
struct Csr {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    fn from_triplets(n: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(trip.len());
        let mut vals: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            if last == Some((r, c)) {
                *vals.last_mut().expect("entry exists") += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr {
            row_ptr,
            cols,
            vals,
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[idx] * x[self.cols[idx]];
            }
            *yi = s;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.row_ptr.len() - 1)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .find(|&idx| self.cols[idx] == i)
                    .map_or(0.0, |idx| self.vals[idx])
            })
            .collect()
    }
}

/// Stiffness and mass matrices on the structured `n²`-cell mesh.
pub struct FemProblem {
    stiffness: Csr,
    mass: Csr,
    ones_mass: Vec<f64>,
    total_mass: f64,
    coords: Vec<(f64, f64)>,
}

impl FemProblem {
    pub fn new(t: &LabeledTriangle, n: usize) -> Self {
        let index = |i: usize, j: usize| -> usize {
            // row j holds n + 1 − j nodes
            j * (n + 1) - j * (j.saturating_sub(1)) / 2 + i
        };
        let node_count = (n + 1) * (n + 2) / 2;
        let mut coords = vec![(0.0, 0.0); node_count];
        for j in 0..=n {
            for i in 0..=(n - j) {
                let p = t.from_barycentric([
                    1.0 - (i + j) as f64 / n as f64,
                    i as f64 / n as f64,
                    j as f64 / n as f64,
                ]);
                coords[index(i, j)] = (p.x, p.y);
            }
        }
        let mut k_trip = Vec::with_capacity(9 * 2 * n * n);
        let mut m_trip = Vec::with_capacity(9 * 2 * n * n);
        let mut add_cell = |a: usize, b: usize, c: usize| {
            let ids = [a, b, c];
            let p: Vec<(f64, f64)> = ids.iter().map(|&i| coords[i]).collect();
            let area2 =
                (p[1].0 - p[0].0) * (p[2].1 - p[0].1) - (p[2].0 - p[0].0) * (p[1].1 - p[0].1);
            let area = 0.5 * area2.abs();
            let bx = [p[1].1 - p[2].1, p[2].1 - p[0].1, p[0].1 - p[1].1];
            let cy = [p[2].0 - p[1].0, p[0].0 - p[2].0, p[1].0 - p[0].0];
            for r in 0..3 {
                for c in 0..3 {
                    let kval = (bx[r] * bx[c] + cy[r] * cy[c]) / (4.0 * area);
                    let mval = area / 12.0 * if r == c { 2.0 } else { 1.0 };
                    k_trip.push((ids[r], ids[c], kval));
                    m_trip.push((ids[r], ids[c], mval));
                }
            }
        };
        for j in 0..n {
            for i in 0..(n - j) {
                add_cell(index(i, j), index(i + 1, j), index(i, j + 1));
                if i + j + 1 < n {
                    add_cell(index(i + 1, j), index(i + 1, j + 1), index(i, j + 1));
                }
            }
        }
        let stiffness = Csr::from_triplets(node_count, k_trip);
        let mass = Csr::from_triplets(node_count, m_trip);
        let ones = vec![1.0; node_count];
        let mut ones_mass = vec![0.0; node_count];
        mass.apply(&ones, &mut ones_mass);
        let total_mass = ones_mass.iter().sum();
        FemProblem {
            stiffness,
            mass,
            ones_mass,
            total_mass,
            coords,
        }
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    /// Removes the constant component in the mass inner product.
    fn deflate(&self, x: &mut [f64]) {
        let c = dot(&self.ones_mass, x) / self.total_mass;
        x.iter_mut().for_each(|v| *v -= c);
    }

    /// Solves `K x = b` for `b ⟂ 1` with Jacobi-preconditioned CG,
    /// keeping the iterate free of constants.
    fn solve(&self, b: &[f64], x: &mut [f64], diag: &[f64]) -> Result<()> {
        let n = b.len();
        let mut r: Vec<f64> = b.to_vec();
        let mean = r.iter().sum::<f64>() / n as f64;
        r.iter_mut().for_each(|v| *v -= mean);
        x.iter_mut().for_each(|v| *v = 0.0);
        let bnorm = norm(&r);
        if bnorm == 0.0 {
            return Ok(());
        }
        let mut z: Vec<f64> = r.iter().zip(diag).map(|(a, d)| a / d).collect();
        let mut p = z.clone();
        let mut kp = vec![0.0; n];
        let mut rz = dot(&r, &z);
        for _ in 0..(20 * n).max(200) {
            self.stiffness.apply(&p, &mut kp);
            let alpha = rz / dot(&p, &kp);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * kp[i];
            }
            // rounding leaks a constant into r that K cannot remove
            let drift = r.iter().sum::<f64>() / n as f64;
            r.iter_mut().for_each(|v| *v -= drift);
            if norm(&r) <= 1e-12 * bnorm {
                self.deflate(x);
                return Ok(());
            }
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        // rounding stalls CG on slivers; a modest residual still serves
        // inverse iteration
        if norm(&r) <= 1e-6 * bnorm {
            self.deflate(x);
            return Ok(());
        }
        Err(Error::NonConvergence("finite-element CG solve".into()))
    }

    /// Smallest nonzero eigenvalue by deflated block inverse iteration with
    /// a Rayleigh–Ritz step on three vectors.
    pub fn second_eigenvalue(&self) -> Result<f64> {
        const BLOCK: usize = 3;
        let n = self.node_count();
        let diag = self.stiffness.diagonal();
        let (cx, cy) = self
            .coords
            .iter()
            .fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let (cx, cy) = (cx / n as f64, cy / n as f64);
        let mut block: Vec<Vec<f64>> = vec![
            self.coords.iter().map(|p| p.0 - cx).collect(),
            self.coords.iter().map(|p| p.1 - cy).collect(),
            self.coords
                .iter()
                .map(|p| (p.0 - cx) * (p.1 - cy))
                .collect(),
        ];
        let mut previous = f64::INFINITY;
        let mut tmp = vec![0.0; n];
        for _ in 0..500 {
            for v in block.iter_mut() {
                self.deflate(v);
            }
            // Rayleigh–Ritz on span(block)
            let mut kr = DMatrix::zeros(BLOCK, BLOCK);
            let mut mr = DMatrix::zeros(BLOCK, BLOCK);
            let mut kv = vec![vec![0.0; n]; BLOCK];
            let mut mv = vec![vec![0.0; n]; BLOCK];
            for a in 0..BLOCK {
                self.stiffness.apply(&block[a], &mut kv[a]);
                self.mass.apply(&block[a], &mut mv[a]);
            }
            for a in 0..BLOCK {
                for b in 0..BLOCK {
                    kr[(a, b)] = dot(&block[a], &kv[b]);
                    mr[(a, b)] = dot(&block[a], &mv[b]);
                }
            }
            let chol = mr
                .clone()
                .cholesky()
                .ok_or_else(|| Error::NonConvergence("finite-element block lost rank".into()))?;
            let linv = chol
                .l()
                .try_inverse()
                .ok_or_else(|| Error::NonConvergence("finite-element block lost rank".into()))?;
            let reduced = &linv * kr * linv.transpose();
            let reduced = (&reduced + reduced.transpose()) * 0.5;
            let eig = SymmetricEigen::new(reduced);
            let mut order: Vec<usize> = (0..BLOCK).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let lowest = eig.eigenvalues[order[0]];
            // Ritz vectors in the original basis
            let coeff = linv.transpose() * &eig.eigenvectors;
            let mut ritz = vec![vec![0.0; n]; BLOCK];
            for (slot, &o) in order.iter().enumerate() {
                for a in 0..BLOCK {
                    let w = coeff[(a, o)];
                    for i in 0..n {
                        ritz[slot][i] += w * block[a][i];
                    }
                }
            }
            if (lowest - previous).abs() <= 1e-11 * lowest.abs() {
                return Ok(lowest);
            }
            previous = lowest;
            // inverse iteration: K x = M y
            for (slot, y) in ritz.iter().enumerate() {
                self.mass.apply(y, &mut tmp);
                self.solve(&tmp, &mut block[slot], &diag)?;
            }
            for v in block.iter_mut() {
                let s = norm(v);
                v.iter_mut().for_each(|x| *x /= s);
            }
        }
        Err(Error::NonConvergence(
            "finite-element inverse iteration".into(),
        ))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// P1 finite-element estimate of `μ₂` on the `n²`-cell mesh, `8 ≤ n ≤ 64`.
pub fn fem_bracket(t: &LabeledTriangle, n: usize) -> Result<f64> {
    if !(8..=64).contains(&n) {
        return Err(Error::InvalidInput(format!(
            "refinement {n} outside [8, 64]"
        )));
    }
    FemProblem::new(t, n).second_eigenvalue()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn mesh_and_matrices_are_consistent() {
        let t = LabeledTriangle::from_angles(0.7, 1.1).unwrap();
        let fem = FemProblem::new(&t, 8);
        assert_eq!(fem.node_count(), 45);
        // total mass equals the area, stiffness annihilates constants
        assert!((fem.total_mass - t.area()).abs() < 1e-14);
        let ones = vec![1.0; fem.node_count()];
        let mut out = vec![0.0; fem.node_count()];
        fem.stiffness.apply(&ones, &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn right_isosceles_within_two_percent() {
        let mu = fem_bracket(&LabeledTriangle::right_isosceles(), 32).unwrap();
        assert!((mu - PI * PI).abs() / (PI * PI) < 0.02, "{mu}");
        assert!(mu >= PI * PI, "conforming elements bound from above");
    }

    #[test]
    fn equilateral_within_two_percent() {
        // Lamé: μ₂ = 16π²/(9 a²) for side a
        let want = 16.0 * PI * PI / 9.0;
        let mu = fem_bracket(&LabeledTriangle::equilateral(), 32).unwrap();
        assert!((mu - want).abs() / want < 0.02, "{mu} vs {want}");
    }

    #[test]
    fn second_order_convergence() {
        let exact = PI * PI;
        let t = LabeledTriangle::right_isosceles();
        let e16 = fem_bracket(&t, 16).unwrap() - exact;
        let e32 = fem_bracket(&t, 32).unwrap() - exact;
        let ratio = e16 / e32;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn converges_on_obtuse_sliver() {
        let t = LabeledTriangle::from_angles(2.3040052234945754, 0.05565338449486792).unwrap();
        let mut last = f64::INFINITY;
        for n in [16, 24, 32] {
            let mu = fem_bracket(&t, n).unwrap();
            assert!(mu < last, "refinement {n} raised μ to {mu}");
            last = mu;
        }
    }

    #[test]
    fn refinement_range_enforced() {
        let t = LabeledTriangle::right_isosceles();
        assert!(fem_bracket(&t, 4).is_err());
        assert!(fem_bracket(&t, 65).is_err());
    }
}
