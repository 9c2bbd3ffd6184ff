use std::collections::HashMap;

use super::{IndexMap, Kernel, MapId, Representation, SlotId, Stmt, Table, TableId, VarId};
use crate::elements::ReferenceCell;

/// Incrementally assembles a [`Kernel`], sharing identical tables and maps.
#[derive(Debug)]
pub struct KernelBuilder {
    kernel: Kernel,
    tables_by_content: HashMap<(Vec<usize>, Vec<u64>), TableId>,
    maps_by_content: HashMap<Vec<usize>, MapId>,
}

impl KernelBuilder {
    pub fn new(
        name: impl Into<String>,
        representation: Representation,
        cell: ReferenceCell,
        rows: usize,
        cols: Option<usize>,
        coefficient_dims: Vec<usize>,
    ) -> Self {
        KernelBuilder {
            kernel: Kernel {
                name: name.into(),
                representation,
                cell,
                rows,
                cols,
                coefficient_dims,
                tables: Vec::new(),
                maps: Vec::new(),
                slots: Vec::new(),
                loop_vars: Vec::new(),
                body: Vec::new(),
                notes: Vec::new(),
            },
            tables_by_content: HashMap::new(),
            maps_by_content: HashMap::new(),
        }
    }

    /// Adds a constant table, or returns an existing one with identical
    /// shape and bit-identical data.
    pub fn table(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> TableId {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        let key = (shape.clone(), data.iter().map(|v| v.to_bits()).collect());
        if let Some(&id) = self.tables_by_content.get(&key) {
            return id;
        }
        let id = self.kernel.tables.len();
        self.kernel.tables.push(Table {
            name: name.into(),
            shape,
            data,
        });
        self.tables_by_content.insert(key, id);
        id
    }

    pub fn table_count(&self) -> usize {
        self.kernel.tables.len()
    }

    /// Adds an index map named `nzc<k>`, shared between identical maps.
    pub fn map(&mut self, indices: Vec<usize>) -> MapId {
        if let Some(&id) = self.maps_by_content.get(&indices) {
            return id;
        }
        let id = self.kernel.maps.len();
        self.kernel.maps.push(IndexMap {
            name: format!("nzc{id}"),
            indices: indices.clone(),
        });
        self.maps_by_content.insert(indices, id);
        id
    }

    pub fn slot(&mut self, name: impl Into<String>) -> SlotId {
        self.kernel.slots.push(name.into());
        self.kernel.slots.len() - 1
    }

    pub fn var(&mut self, name: impl Into<String>) -> VarId {
        self.kernel.loop_vars.push(name.into());
        self.kernel.loop_vars.len() - 1
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.kernel.notes.push(note.into());
    }

    pub fn finish(mut self, body: Vec<Stmt>) -> Kernel {
        self.kernel.body = body;
        self.kernel
    }
}
