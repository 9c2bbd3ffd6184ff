use serde::Serialize;

use super::KernelError;

/// Affine map `x = v0 + J X` from the reference simplex onto a cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellGeometry {
    pub vertices: Vec<Vec<f64>>,
    /// `J[i][k] = dx_i / dX_k`
    pub j: Vec<Vec<f64>>,
    /// `jinv[k][i] = dX_k / dx_i`
    pub jinv: Vec<Vec<f64>>,
    pub det: f64,
}

impl CellGeometry {
    pub fn dim(&self) -> usize {
        self.j.len()
    }

    /// Physical point of a reference point.
    pub fn map_point(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|i| self.vertices[0][i] + (0..d).map(|k| self.j[i][k] * x[k]).sum::<f64>())
            .collect()
    }

    /// Reference point of a physical point.
    pub fn pullback(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|k| (0..d).map(|i| self.jinv[k][i] * (x[i] - self.vertices[0][i])).sum())
            .collect()
    }
}

pub fn affine_map(vertices: &[Vec<f64>]) -> Result<CellGeometry, KernelError> {
    let d = vertices.first().map_or(0, |v| v.len());
    if !(d == 2 || d == 3) || vertices.len() != d + 1 || vertices.iter().any(|v| v.len() != d) {
        return Err(KernelError::BadVertices {
            expected: d + 1,
            dim: d,
            got: vertices.len(),
        });
    }
    let j: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|k| vertices[k + 1][i] - vertices[0][i]).collect())
        .collect();
    let (det, adj) = if d == 2 {
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        (det, vec![vec![j[1][1], -j[0][1]], vec![-j[1][0], j[0][0]]])
    } else {
        let c = |r: usize, s: usize| {
            let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
            let (s1, s2) = ((s + 1) % 3, (s + 2) % 3);
            j[r1][s1] * j[r2][s2] - j[r1][s2] * j[r2][s1]
        };
        let det = j[0][0] * c(0, 0) + j[0][1] * c(0, 1) + j[0][2] * c(0, 2);
        // adjugate is the transposed cofactor matrix
        let adj = (0..3).map(|k| (0..3).map(|i| c(i, k)).collect()).collect();
        (det, adj)
    };
    if det.abs() < 1e-14 {
        return Err(KernelError::DegenerateCell { det });
    }
    if det < 0.0 {
        return Err(KernelError::NegativeOrientation { det });
    }
    let jinv = adj
        .into_iter()
        .map(|row: Vec<f64>| row.into_iter().map(|x| x / det).collect())
        .collect();
    Ok(CellGeometry {
        vertices: vertices.to_vec(),
        j,
        jinv,
        det,
    })
}
