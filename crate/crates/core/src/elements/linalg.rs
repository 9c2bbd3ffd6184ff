//! Dense inverse for the small generalized Vandermonde systems.

/// Neumaier-compensated sum of products.
fn compensated_dot(a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (x, y) in a.zip(b) {
        let p = x * y;
        // exact error of the product via fma
        let perr = x.mul_add(y, -p);
        let t = sum + p;
        if sum.abs() >= p.abs() {
            comp += (sum - t) + p;
        } else {
            comp += (p - t) + sum;
        }
        comp += perr;
        sum = t;
    }
    sum + comp
}

/// Inverts a square row-major matrix by Gauss-Jordan elimination with partial
/// pivoting followed by one compensated refinement step. Returns `None` when a
/// pivot falls below `1e-13` relative to the largest entry.
pub(crate) fn invert(matrix: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = matrix.len();
    let scale = matrix
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if n == 0 || scale == 0.0 {
        return None;
    }
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-13 * scale {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col];
        for j in 0..n {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row][col];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                a[row][j] -= f * a[col][j];
                inv[row][j] -= f * inv[col][j];
            }
        }
    }

    // X <- X + X (I - A X)
    let mut residual = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let ax = compensated_dot(matrix[i].iter().copied(), (0..n).map(|k| inv[k][j]));
            residual[i][j] = if i == j { 1.0 - ax } else { -ax };
        }
    }
    let mut refined = inv.clone();
    for i in 0..n {
        for j in 0..n {
            let corr = compensated_dot(inv[i].iter().copied(), (0..n).map(|k| residual[k][j]));
            refined[i][j] += corr;
        }
    }
    Some(refined)
}
