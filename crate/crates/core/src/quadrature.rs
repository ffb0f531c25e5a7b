//! Gauss–Legendre rules and seeded low-discrepancy points in a triangle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{LabeledTriangle, Vec2};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// `∫_a^b f`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// `count` Halton points (bases 2, 3) with a seeded Cranley–Patterson
/// shift, folded into the triangle.
pub fn halton_points(t: &LabeledTriangle, count: usize, seed: u64) -> Vec<Vec2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: (f64, f64) = (rng.gen(), rng.gen());
    (1..=count as u64)
        .map(|i| {
            let mut a = (radical_inverse(i, 2) + shift.0).fract();
            let mut b = (radical_inverse(i, 3) + shift.1).fract();
            if a + b > 1.0 {
                a = 1.0 - a;
                b = 1.0 - b;
            }
            t.from_barycentric([1.0 - a - b, a, b])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn integrates_polynomials_exactly() {
        let g = GaussLegendre::new(64);
        assert_abs_diff_eq!(g.weights.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
        assert_abs_diff_eq!(g.integrate(0.0, 2.0, |x| x.powi(7)), 32.0, epsilon = 1e-12);
        let g5 = GaussLegendre::new(5);
        assert_abs_diff_eq!(
            g5.integrate(-1.0, 1.0, |x| x.powi(8)),
            2.0 / 9.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            g.integrate(0.0, std::f64::consts::PI, f64::sin),
            2.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn halton_points_are_inside_and_reproducible() {
        let t = LabeledTriangle::equilateral();
        let a = halton_points(&t, 200, 7);
        let b = halton_points(&t, 200, 7);
        assert_eq!(a, b);
        assert_ne!(a, halton_points(&t, 200, 8));
        assert!(a.iter().all(|p| t.contains(p, 1e-12)));
    }
}
