//! Collapsed Gauss-Jacobi quadrature on reference simplices.
//!
//! A rule exact to total degree `p` uses `m = floor(p/2) + 1` points per
//! direction on the unit square/cube, mapped onto the simplex by the Duffy
//! collapse `x = xi (1 - eta) (1 - zeta)`, `y = eta (1 - zeta)`, `z = zeta`.
//! The collapse Jacobian `(1 - eta)(1 - zeta)^2` is absorbed into Jacobi
//! weights `(1 - t)^alpha` in the collapsed directions.

mod tridiag;

use serde::Serialize;
use thiserror::Error;

use crate::elements::ReferenceCell;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("tridiagonal eigensolver did not converge within {iterations} iterations (n = {n})")]
    NonConvergence { n: usize, iterations: usize },
    #[error("invalid Gauss-Jacobi request: n = {n}, alpha = {alpha}")]
    InvalidRequest { n: usize, alpha: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureRule {
    pub cell: ReferenceCell,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Total polynomial degree integrated exactly.
    pub degree: usize,
    /// Points per collapsed direction.
    pub points_per_direction: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Applies the rule to `f` on the reference cell.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }
}

/// `n`-point Gauss rule on `[0, 1]` for the weight `(1 - x)^alpha`.
pub fn gauss_jacobi_1d(n: usize, alpha: u32) -> Result<(Vec<f64>, Vec<f64>), QuadratureError> {
    if n == 0 || alpha > 2 {
        return Err(QuadratureError::InvalidRequest { n, alpha });
    }
    let a = alpha as f64;
    // Jacobi P^(a, 0) recurrence on [-1, 1]
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + a;
        diag[k] = if k == 0 {
            -a / (a + 2.0)
        } else {
            -(a * a) / (s * (s + 2.0))
        };
        if k + 1 < n {
            let j = kf + 1.0;
            let t = 2.0 * j + a;
            off[k] = (4.0 * j * (j + a) * j * (j + a) / (t * t * (t + 1.0) * (t - 1.0))).sqrt();
        }
    }
    let (nodes, first) = tridiag::eigen_first_components(&diag, &off)?;
    // mu0 = int_{-1}^{1} (1 - t)^a dt, then map to [0, 1]
    let mu0 = 2f64.powi(alpha as i32 + 1) / (a + 1.0);
    let map_scale = 2f64.powi(-(alpha as i32 + 1));
    let mut pairs: Vec<(f64, f64)> = nodes
        .iter()
        .zip(&first)
        .map(|(&t, &v)| ((1.0 + t) / 2.0, mu0 * v * v * map_scale))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(pairs.into_iter().unzip())
}

/// Points per direction needed for exactness at total degree `degree`.
pub fn points_per_direction(degree: usize) -> usize {
    degree / 2 + 1
}

/// Collapsed tensor-product rule with `m` points per direction.
pub fn collapsed_rule(cell: ReferenceCell, m: usize) -> Result<QuadratureRule, QuadratureError> {
    let m = m.max(1);
    let (x0, w0) = gauss_jacobi_1d(m, 0)?;
    let (x1, w1) = gauss_jacobi_1d(m, 1)?;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match cell {
        ReferenceCell::Triangle => {
            for i in 0..m {
                for j in 0..m {
                    let (xi, eta) = (x0[i], x1[j]);
                    points.push(vec![xi * (1.0 - eta), eta]);
                    weights.push(w0[i] * w1[j]);
                }
            }
        }
        ReferenceCell::Tetrahedron => {
            let (x2, w2) = gauss_jacobi_1d(m, 2)?;
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        let (xi, eta, zeta) = (x0[i], x1[j], x2[k]);
                        points.push(vec![
                            xi * (1.0 - eta) * (1.0 - zeta),
                            eta * (1.0 - zeta),
                            zeta,
                        ]);
                        weights.push(w0[i] * w1[j] * w2[k]);
                    }
                }
            }
        }
    }
    Ok(QuadratureRule {
        cell,
        points,
        weights,
        degree: 2 * m - 1,
        points_per_direction: m,
    })
}

/// Rule integrating every polynomial of total degree `<= degree` exactly.
pub fn simplex_rule(cell: ReferenceCell, degree: usize) -> QuadratureRule {
    let mut rule = collapsed_rule(cell, points_per_direction(degree))
        .expect("Gauss-Jacobi with alpha <= 2 converges for every supported size");
    rule.degree = degree.max(rule.degree);
    rule
}

/// Rule for a form of estimated degree, or with an explicit number of points
/// per direction when the user overrides it (possibly inexact).
pub fn rule_for_form(
    cell: ReferenceCell,
    estimated_degree: usize,
    points_override: Option<usize>,
) -> Result<QuadratureRule, QuadratureError> {
    match points_override {
        Some(m) => collapsed_rule(cell, m),
        None => Ok(simplex_rule(cell, estimated_degree)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    /// Exact integral of x^a y^b (z^c) over the reference simplex.
    fn moment(exps: &[usize]) -> f64 {
        let d = exps.len();
        let num: f64 = exps.iter().map(|&e| factorial(e)).product();
        num / factorial(exps.iter().sum::<usize>() + d)
    }

    #[test]
    fn midpoint_rule() {
        let (x, w) = gauss_jacobi_1d(1, 0).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_point_legendre() {
        let (x, w) = gauss_jacobi_1d(2, 0).unwrap();
        let h = 1.0 / (2.0 * 3f64.sqrt());
        assert!((x[0] - (0.5 - h)).abs() < 1e-15);
        assert!((x[1] - (0.5 + h)).abs() < 1e-15);
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);
        let cubic: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(3)).sum();
        assert!((cubic - 0.25).abs() < 1e-15);
    }

    #[test]
    fn one_point_jacobi() {
        // moments: int (1-x) = 1/2, int x (1-x) = 1/6  =>  x = 1/3, w = 1/2
        let (x, w) = gauss_jacobi_1d(1, 1).unwrap();
        assert!((x[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((w[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn jacobi_rules_are_exact_against_weight() {
        for alpha in 0..=2u32 {
            for n in 1..=10 {
                let (x, w) = gauss_jacobi_1d(n, alpha).unwrap();
                for k in 0..=(2 * n - 1) {
                    let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                    // int_0^1 x^k (1-x)^a = k! a! / (k + a + 1)!
                    let exact = factorial(k) * factorial(alpha as usize) / factorial(k + alpha as usize + 1);
                    assert!((q - exact).abs() < 1e-14 * exact.max(1.0), "n={n} a={alpha} k={k}");
                }
            }
        }
    }

    #[test]
    fn simplex_rule_examples() {
        let r = simplex_rule(ReferenceCell::Triangle, 1);
        assert_eq!(r.len(), 1);
        assert_eq!(r.weights[0], 0.5);
        assert_eq!(simplex_rule(ReferenceCell::Tetrahedron, 2).len(), 8);
        let r4 = simplex_rule(ReferenceCell::Triangle, 4);
        assert_eq!(r4.len(), 9);
        let q = r4.integrate(|x| x[0] * x[0] * x[1] * x[1]);
        assert!((q - 1.0 / 180.0).abs() < 1e-14);
    }

    #[test]
    fn weights_sum_to_volume_and_are_positive() {
        for cell in [ReferenceCell::Triangle, ReferenceCell::Tetrahedron] {
            for p in 0..=12 {
                let r = simplex_rule(cell, p);
                assert!((r.weights.iter().sum::<f64>() - cell.volume()).abs() < 1e-12);
                assert!(r.weights.iter().all(|&w| w > 0.0));
            }
        }
    }

    #[test]
    fn exactness_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for cell in [ReferenceCell::Triangle, ReferenceCell::Tetrahedron] {
            let d = cell.dim();
            for p in 0..=8 {
                let rule = simplex_rule(cell, p);
                for _ in 0..30 {
                    let total = rng.gen_range(0..=p);
                    let mut exps = vec![0usize; d];
                    for _ in 0..total {
                        exps[rng.gen_range(0..d)] += 1;
                    }
                    let q = rule.integrate(|x| (0..d).map(|k| x[k].powi(exps[k] as i32)).product());
                    let exact = moment(&exps);
                    assert!((q - exact).abs() <= 1e-12 * exact, "{cell} p={p} {exps:?}");
                }
            }
        }
    }

    #[test]
    fn points_per_direction_rule() {
        assert_eq!(points_per_direction(0), 1);
        assert_eq!(points_per_direction(2), 2);
        for p in 0..20 {
            assert!(points_per_direction(p + 1) >= points_per_direction(p));
        }
    }

    #[test]
    fn override_wins() {
        let r = rule_for_form(ReferenceCell::Triangle, 4, Some(1)).unwrap();
        assert_eq!(r.len(), 1);
        let r = rule_for_form(ReferenceCell::Triangle, 1, None).unwrap();
        assert_eq!(r.len(), 1);
        let r = rule_for_form(ReferenceCell::Triangle, 0, None).unwrap();
        assert_eq!(r.points_per_direction, 1);
    }

    #[test]
    fn invalid_requests() {
        assert!(gauss_jacobi_1d(0, 0).is_err());
        assert!(gauss_jacobi_1d(2, 3).is_err());
    }
}
