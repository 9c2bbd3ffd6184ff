use super::QuadratureError;

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `diag` and
/// off-diagonal `off`, together with the first component of each normalized
/// eigenvector. Implicit QL with Wilkinson shifts.
pub(super) fn eigen_first_components(
    diag: &[f64],
    off: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), QuadratureError> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..off.len()].copy_from_slice(off);
    // z[k][i]: component k of eigenvector i; only row 0 is needed but the
    // rotations mix rows, so carry the full matrix.
    let mut z: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let cap = 100 * n;
    let mut total_iterations = 0usize;
    for l in 0..n {
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            total_iterations += 1;
            if total_iterations > cap {
                return Err(QuadratureError::NonConvergence {
                    n,
                    iterations: cap,
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in z.iter_mut() {
                    f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok((d, z[0].clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        // [[2, 1], [1, 2]] has eigenvalues 1 and 3, eigenvectors (1,-1)/sqrt2, (1,1)/sqrt2
        let (mut vals, first) = eigen_first_components(&[2.0, 2.0], &[1.0]).unwrap();
        vals.sort_by(|a, b| a.total_cmp(b));
        assert!((vals[0] - 1.0).abs() < 1e-14);
        assert!((vals[1] - 3.0).abs() < 1e-14);
        for v in first {
            assert!((v.abs() - 0.5f64.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_matrix() {
        let (vals, first) = eigen_first_components(&[1.0, 5.0, -2.0], &[0.0, 0.0]).unwrap();
        assert_eq!(vals, vec![1.0, 5.0, -2.0]);
        assert_eq!(first, vec![1.0, 0.0, 0.0]);
    }
}
