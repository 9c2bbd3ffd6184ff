use super::ReferenceCell;

/// Barycentric multi-indices `(i_0, ..., i_d)` with `sum = degree` of the
/// equispaced principal lattice, in node order.
///
/// Order: vertices (cell vertex order), then points on edges (edges in
/// lexicographic vertex-pair order, increasing parameter from the lower to
/// the higher vertex), then faces, then the cell interior. Points interior to
/// the same sub-simplex are ordered by their indices on that sub-simplex's
/// vertices read from the highest vertex down.
pub fn lattice_multi_indices(cell: ReferenceCell, degree: usize) -> Vec<Vec<usize>> {
    let nv = cell.num_vertices();
    let mut all = Vec::new();
    let mut current = vec![0usize; nv];
    compositions(degree, 0, &mut current, &mut all);

    let key = |mi: &Vec<usize>| {
        let support: Vec<usize> = (0..nv).filter(|&k| mi[k] > 0).collect();
        let along: Vec<usize> = support.iter().rev().map(|&k| mi[k]).collect();
        (support.len(), support, along)
    };
    all.sort_by_key(key);
    all
}

fn compositions(remaining: usize, slot: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if slot + 1 == current.len() {
        current[slot] = remaining;
        out.push(current.clone());
        return;
    }
    for v in 0..=remaining {
        current[slot] = v;
        compositions(remaining - v, slot + 1, current, out);
    }
}

/// Reference coordinates of the lattice nodes; degree 0 gives the barycenter.
pub fn lattice_points(cell: ReferenceCell, degree: usize) -> Vec<Vec<f64>> {
    let d = cell.dim();
    if degree == 0 {
        return vec![vec![1.0 / (d as f64 + 1.0); d]];
    }
    lattice_multi_indices(cell, degree)
        .into_iter()
        .map(|mi| (1..=d).map(|k| mi[k] as f64 / degree as f64).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_triangle_is_vertices() {
        let pts = lattice_points(ReferenceCell::Triangle, 1);
        assert_eq!(pts, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn counts() {
        assert_eq!(lattice_points(ReferenceCell::Triangle, 2).len(), 6);
        assert_eq!(lattice_points(ReferenceCell::Tetrahedron, 3).len(), 20);
        assert_eq!(lattice_points(ReferenceCell::Tetrahedron, 0).len(), 1);
        assert_eq!(lattice_points(ReferenceCell::Triangle, 4).len(), 15);
    }

    #[test]
    fn quadratic_triangle_order() {
        let pts = lattice_points(ReferenceCell::Triangle, 2);
        let expect = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.5, 0.0], // edge (0,1)
            vec![0.0, 0.5], // edge (0,2)
            vec![0.5, 0.5], // edge (1,2)
        ];
        assert_eq!(pts, expect);
    }

    #[test]
    fn edge_points_increase_along_edge() {
        let pts = lattice_points(ReferenceCell::Triangle, 4);
        // edge (0,1): points 3,4,5 run from vertex 0 to vertex 1
        assert_eq!(pts[3], vec![0.25, 0.0]);
        assert_eq!(pts[4], vec![0.5, 0.0]);
        assert_eq!(pts[5], vec![0.75, 0.0]);
        // edge (1,2) runs from vertex 1 to vertex 2
        assert_eq!(pts[9], vec![0.75, 0.25]);
        assert_eq!(pts[11], vec![0.25, 0.75]);
    }
}
