//! Reference simplices, Lagrange finite elements and basis tabulation.

mod basis;
mod lattice;
mod linalg;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use basis::{tabulate, DerivCounts, LagrangeBasis, TabulatedBasis};
pub use lattice::{lattice_multi_indices, lattice_points};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElementError {
    #[error("continuous Lagrange elements need degree >= 1 (got {0})")]
    DegreeTooLow(usize),
    #[error("element degree {0} exceeds the supported maximum of {MAX_DEGREE}")]
    DegreeTooHigh(usize),
    #[error("vector value shape with {components} components does not match a {dim}D cell")]
    BadValueShape { components: usize, dim: usize },
    #[error("generalized Vandermonde matrix is singular (degree {degree} on {cell})")]
    SingularVandermonde { cell: ReferenceCell, degree: usize },
    #[error("component {component} out of range for element with {size} components")]
    BadComponent { component: usize, size: usize },
}

/// Highest polynomial degree accepted for Lagrange elements.
pub const MAX_DEGREE: usize = 8;

/// Unit reference simplex: the origin plus the unit vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ReferenceCell {
    Triangle,
    Tetrahedron,
}

impl ReferenceCell {
    pub fn dim(self) -> usize {
        match self {
            ReferenceCell::Triangle => 2,
            ReferenceCell::Tetrahedron => 3,
        }
    }

    pub fn num_vertices(self) -> usize {
        self.dim() + 1
    }

    pub fn vertices(self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut out = vec![vec![0.0; d]];
        for k in 0..d {
            let mut v = vec![0.0; d];
            v[k] = 1.0;
            out.push(v);
        }
        out
    }

    /// Volume of the reference simplex, `1/d!`.
    pub fn volume(self) -> f64 {
        match self {
            ReferenceCell::Triangle => 0.5,
            ReferenceCell::Tetrahedron => 1.0 / 6.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ReferenceCell::Triangle => "triangle",
            ReferenceCell::Tetrahedron => "tetrahedron",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "triangle" => Some(ReferenceCell::Triangle),
            "tetrahedron" => Some(ReferenceCell::Tetrahedron),
            _ => None,
        }
    }
}

impl fmt::Display for ReferenceCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Family {
    Lagrange,
    DiscontinuousLagrange,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Lagrange => "Lagrange",
            Family::DiscontinuousLagrange => "Discontinuous Lagrange",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "Lagrange" | "CG" => Some(Family::Lagrange),
            "Discontinuous Lagrange" | "DG" => Some(Family::DiscontinuousLagrange),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ValueShape {
    Scalar,
    Vector(usize),
}

/// A (possibly vector-valued) Lagrange element on a reference simplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct FiniteElement {
    pub family: Family,
    pub cell: ReferenceCell,
    pub degree: usize,
    pub value_shape: ValueShape,
}

impl FiniteElement {
    pub fn new(
        family: Family,
        cell: ReferenceCell,
        degree: usize,
        value_shape: ValueShape,
    ) -> Result<Self, ElementError> {
        if family == Family::Lagrange && degree == 0 {
            return Err(ElementError::DegreeTooLow(degree));
        }
        if degree > MAX_DEGREE {
            return Err(ElementError::DegreeTooHigh(degree));
        }
        if let ValueShape::Vector(n) = value_shape {
            if n != cell.dim() {
                return Err(ElementError::BadValueShape {
                    components: n,
                    dim: cell.dim(),
                });
            }
        }
        Ok(Self {
            family,
            cell,
            degree,
            value_shape,
        })
    }

    pub fn scalar(family: Family, cell: ReferenceCell, degree: usize) -> Result<Self, ElementError> {
        Self::new(family, cell, degree, ValueShape::Scalar)
    }

    pub fn vector(family: Family, cell: ReferenceCell, degree: usize) -> Result<Self, ElementError> {
        Self::new(family, cell, degree, ValueShape::Vector(cell.dim()))
    }

    pub fn dim(&self) -> usize {
        self.cell.dim()
    }

    /// Number of value components (1 for scalars).
    pub fn value_size(&self) -> usize {
        match self.value_shape {
            ValueShape::Scalar => 1,
            ValueShape::Vector(n) => n,
        }
    }

    pub fn is_vector(&self) -> bool {
        matches!(self.value_shape, ValueShape::Vector(_))
    }

    /// Dimension of the scalar polynomial space, `C(degree + d, d)`.
    pub fn scalar_dim(&self) -> usize {
        binomial(self.degree + self.dim(), self.dim())
    }

    /// Number of local basis functions (degrees of freedom) on one cell.
    pub fn space_dim(&self) -> usize {
        self.scalar_dim() * self.value_size()
    }

    /// The scalar element this element is built from.
    pub fn scalar_element(&self) -> FiniteElement {
        FiniteElement {
            value_shape: ValueShape::Scalar,
            ..*self
        }
    }
}

impl fmt::Display for FiniteElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ctor = if self.is_vector() {
            "VectorElement"
        } else {
            "FiniteElement"
        };
        write!(
            f,
            "{}(\"{}\", \"{}\", {})",
            ctor,
            self.family.name(),
            self.cell.name(),
            self.degree
        )
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1usize;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}
