use std::collections::HashMap;

use serde::Serialize;

use super::{HarnessError, Mesh};
use crate::elements::{lattice_multi_indices, Family, FiniteElement, ReferenceCell};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DofMap {
    /// Global dof of every local dof, per cell.
    pub cell_dofs: Vec<Vec<usize>>,
    pub global_dim: usize,
}

/// A lattice node named by the global vertices it lies between and its
/// barycentric counts on them, sorted by vertex. Shared between cells.
type NodeKey = Vec<(usize, usize)>;

fn order_key(k: &NodeKey) -> (usize, Vec<usize>, Vec<usize>) {
    // vertices first, then edges, then interiors; along an edge from the
    // lower global vertex to the higher one
    (
        k.len(),
        k.iter().map(|p| p.0).collect(),
        k.iter().rev().map(|p| p.1).collect(),
    )
}

pub fn build_dofmap(mesh: &Mesh, element: &FiniteElement) -> Result<DofMap, HarnessError> {
    if mesh.cell != ReferenceCell::Triangle || element.cell != ReferenceCell::Triangle {
        return Err(HarnessError::UnsupportedCell(
            "assembly supports triangle meshes only".into(),
        ));
    }
    let ns = element.scalar_dim();
    let nc = element.value_size();
    if element.family == Family::DiscontinuousLagrange {
        let n = ns * nc;
        return Ok(DofMap {
            cell_dofs: (0..mesh.num_cells()).map(|c| (c * n..(c + 1) * n).collect()).collect(),
            global_dim: n * mesh.num_cells(),
        });
    }
    let lattice = lattice_multi_indices(element.cell, element.degree);
    let cell_keys: Vec<Vec<NodeKey>> = mesh
        .cells
        .iter()
        .map(|verts| {
            lattice
                .iter()
                .map(|mi| {
                    let mut k: NodeKey = mi
                        .iter()
                        .zip(verts)
                        .filter(|(c, _)| **c > 0)
                        .map(|(c, v)| (*v, *c))
                        .collect();
                    k.sort_unstable();
                    k
                })
                .collect()
        })
        .collect();
    let mut unique: Vec<&NodeKey> = cell_keys.iter().flatten().collect();
    unique.sort_by_key(|k| order_key(k));
    unique.dedup();
    let index: HashMap<&NodeKey, usize> = unique.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    let scalar_dim = unique.len();
    let cell_dofs = cell_keys
        .iter()
        .map(|keys| {
            (0..nc)
                .flat_map(|c| keys.iter().map(move |k| (c, k)))
                .map(|(c, k)| c * scalar_dim + index[k])
                .collect()
        })
        .collect();
    Ok(DofMap {
        cell_dofs,
        global_dim: scalar_dim * nc,
    })
}
