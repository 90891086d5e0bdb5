//! Gauss–Hermite quadrature for expectations over Gaussian innovations.

use crate::error::{Error, Result};

/// Nodes and weights for ∫ f(x)·exp(-x²) dx (physicists' convention).
/// Symmetric by construction: nodes come in exact ± pairs and odd counts
/// place a node exactly at zero.
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Compute an `n`-point rule by Newton iteration on the orthonormal
    /// Hermite recurrence (stable for the node counts used here).
    pub fn new(n: usize) -> Result<GaussHermite> {
        if n == 0 || n > 128 {
            return Err(Error::Usage(format!(
                "Gauss-Hermite node count must be in 1..=128, got {n}"
            )));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        let nf = n as f64;
        let mut z = 0.0f64;
        for i in 0..half {
            // Initial guesses follow the classic descending-root scheme.
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let center = n % 2 == 1 && i == half - 1;
            if center {
                z = 0.0; // the middle root is exactly zero by symmetry
            }
            let mut pp = 0.0;
            for iter in 0..200 {
                let (p1, deriv) = orthonormal_hermite(n, z);
                pp = deriv;
                let step = p1 / pp;
                z -= step;
                if center || step.abs() < 1e-15 * (1.0 + z.abs()) {
                    break;
                }
                if iter == 199 {
                    return Err(Error::Numeric(format!(
                        "Gauss-Hermite Newton iteration failed to converge for n = {n}"
                    )));
                }
            }
            if center {
                z = 0.0;
                let (_, deriv) = orthonormal_hermite(n, 0.0);
                pp = deriv;
            }
            let w = 2.0 / (pp * pp);
            if center {
                nodes[i] = 0.0;
                weights[i] = w;
            } else {
                nodes[i] = z;
                nodes[n - 1 - i] = -z;
                weights[i] = w;
                weights[n - 1 - i] = w;
            }
        }
        nodes.reverse(); // ascending order
        weights.reverse();
        Ok(GaussHermite { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `(point, weight)` pairs rescaled so that `Σ wᵢ·f(xᵢ) ≈ E[f(N)]` for a
    /// standard normal `N`; weights sum to 1.
    pub fn std_normal_points(&self) -> Vec<(f64, f64)> {
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        let sqrt2 = std::f64::consts::SQRT_2;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| (sqrt2 * x, w * inv_sqrt_pi))
            .collect()
    }
}

/// Value and derivative of the degree-`n` orthonormal Hermite polynomial.
fn orthonormal_hermite(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = std::f64::consts::PI.powf(-0.25);
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    let deriv = (2.0 * n as f64).sqrt() * p2;
    (p1, deriv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_sqrt_pi() {
        for n in [1, 2, 3, 7, 21, 41] {
            let gh = GaussHermite::new(n).unwrap();
            let total: f64 = gh.weights().iter().sum();
            assert!(
                (total - std::f64::consts::PI.sqrt()).abs() < 1e-12,
                "n = {n}: sum = {total}"
            );
        }
    }

    #[test]
    fn three_point_rule_is_the_textbook_one() {
        let gh = GaussHermite::new(3).unwrap();
        let s = (1.5f64).sqrt();
        assert!((gh.nodes()[0] + s).abs() < 1e-14);
        assert!(gh.nodes()[1].abs() == 0.0);
        assert!((gh.nodes()[2] - s).abs() < 1e-14);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert!((gh.weights()[0] - sqrt_pi / 6.0).abs() < 1e-14);
        assert!((gh.weights()[1] - 2.0 * sqrt_pi / 3.0).abs() < 1e-14);
    }

    #[test]
    fn standard_normal_moments_are_exact() {
        let gh = GaussHermite::new(21).unwrap();
        let pts = gh.std_normal_points();
        let moment = |p: u32| pts.iter().map(|&(x, w)| w * x.powi(p as i32)).sum::<f64>();
        assert!((moment(0) - 1.0).abs() < 1e-13);
        assert!(moment(1).abs() < 1e-14);
        assert!((moment(2) - 1.0).abs() < 1e-12);
        assert!((moment(4) - 3.0).abs() < 1e-11);
        assert!((moment(6) - 15.0).abs() < 1e-10);
        assert!((moment(8) - 105.0).abs() < 1e-9);
    }

    #[test]
    fn nodes_are_exactly_symmetric() {
        for n in [5, 20, 21, 41] {
            let gh = GaussHermite::new(n).unwrap();
            let nodes = gh.nodes();
            let weights = gh.weights();
            for i in 0..n / 2 {
                assert_eq!(nodes[i].to_bits(), (-nodes[n - 1 - i]).to_bits());
                assert_eq!(weights[i].to_bits(), weights[n - 1 - i].to_bits());
            }
            if n % 2 == 1 {
                assert_eq!(nodes[n / 2].to_bits(), 0.0f64.to_bits());
            }
        }
    }
}
