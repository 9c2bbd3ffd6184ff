use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::elements::ReferenceCell;
use crate::kernel::affine_map;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mesh {
    pub cell: ReferenceCell,
    pub vertices: Vec<Vec<f64>>,
    /// Vertex indices per cell, positively oriented.
    pub cells: Vec<Vec<usize>>,
}

impl Mesh {
    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_vertices(&self, c: usize) -> Vec<Vec<f64>> {
        self.cells[c].iter().map(|&v| self.vertices[v].clone()).collect()
    }
}

/// Uniform triangulation of the unit square: `n x n` squares, each split
/// along its lower-left to upper-right diagonal.
pub fn unit_square_mesh(n: usize) -> Mesh {
    let n = n.max(1);
    let h = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(vec![i as f64 * h, j as f64 * h]);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            cells.push(vec![id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh {
        cell: ReferenceCell::Triangle,
        vertices,
        cells,
    }
}

/// Random affine images of the reference simplex with `det` in `[0.1, 10]`.
/// The same seed always gives the same cells.
pub fn random_cells(cell: ReferenceCell, count: usize, seed: u64) -> Vec<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = cell.dim();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let scale: f64 = rng.gen_range(0.5..2.0);
        let shift: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let verts: Vec<Vec<f64>> = cell
            .vertices()
            .into_iter()
            .map(|v| {
                v.iter()
                    .zip(&shift)
                    .map(|(x, s)| scale * (x + rng.gen_range(-0.3..0.3)) + s)
                    .collect()
            })
            .collect();
        match affine_map(&verts) {
            Ok(g) if (0.1..=10.0).contains(&g.det) => out.push(verts),
            _ => {}
        }
    }
    out
}
