//! Kernel IR shared by both representations.
//!
//! A kernel is a straight-line program of constant definitions, counted
//! loops and accumulations into the element tensor `A`. It has no
//! conditionals, so static flop counts are exact.

mod builder;
mod emit;
mod geometry;
mod interp;
mod validate;

use serde::Serialize;
use thiserror::Error;

use crate::elements::ReferenceCell;

pub use builder::KernelBuilder;
pub use emit::{emit_source, write_source};
pub use geometry::{affine_map, CellGeometry};
pub use interp::{count_flops, interpret, interpret_counting, interpret_into, FlopTally, Scratch};
pub use validate::validate;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("degenerate cell (|det J| = {det:e})")]
    DegenerateCell { det: f64 },
    #[error("negatively oriented cell (det J = {det})")]
    NegativeOrientation { det: f64 },
    #[error("expected {expected} vertices in {dim}D, got {got}")]
    BadVertices { expected: usize, dim: usize, got: usize },
    #[error("division by zero at {location}")]
    DivisionByZero { location: String },
    #[error("coefficient input mismatch: {0}")]
    BadCoefficients(String),
    #[error("cell dimension {got} does not match kernel dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid kernel: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Representation {
    Quadrature,
    Tensor,
}

impl Representation {
    pub fn name(self) -> &'static str {
        match self {
            Representation::Quadrature => "quadrature",
            Representation::Tensor => "tensor",
        }
    }
}

pub type SlotId = usize;
pub type VarId = usize;
pub type TableId = usize;
pub type MapId = usize;

/// Named constant array, row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Index array of surviving (nonzero) columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndexMap {
    pub name: String,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Index {
    Fixed(usize),
    Var(VarId),
    Mapped { map: MapId, var: VarId },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Expr {
    Lit(f64),
    Slot(SlotId),
    Table { table: TableId, index: Vec<Index> },
    /// Degree of freedom `dof` of coefficient `id`.
    Coefficient { id: usize, dof: Index },
    /// `dX_a / dx_b`
    Jinv(u8, u8),
    Det,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    /// `sum_k c_k * slot_k`; coefficients of +-1 skip the multiply.
    Contract(Vec<(f64, SlotId)>),
}

impl Expr {
    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Div(Box::new(a), Box::new(b))
    }

    /// Left-folded product; `None` for an empty list.
    pub fn product(factors: Vec<Expr>) -> Option<Expr> {
        factors.into_iter().reduce(Expr::mul)
    }

    /// Left-folded sum; `None` for an empty list.
    pub fn sum(terms: Vec<Expr>) -> Option<Expr> {
        terms.into_iter().reduce(Expr::add)
    }

    /// Stable textual key used to share identical subexpressions.
    pub fn key(&self) -> String {
        format!("{self:?}")
    }
}

/// Flat position in `A` from one index per argument.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Entry(pub Vec<Index>);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Stmt {
    /// Cell-scope constant, `const double name = value;`.
    Const { slot: SlotId, value: Expr },
    /// Mutable scalar, `double name = value;`.
    Declare { slot: SlotId, value: Expr },
    /// `name += value;` (the `+=` counts as one operation).
    Update { slot: SlotId, value: Expr },
    Loop { var: VarId, extent: usize, body: Vec<Stmt> },
    /// `A[entry] += value;`
    Accumulate { entry: Entry, value: Expr },
    /// `A[entry] = value;`
    Assign { entry: Entry, value: Expr },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Kernel {
    pub name: String,
    pub representation: Representation,
    pub cell: ReferenceCell,
    /// Test-space dimension.
    pub rows: usize,
    /// Trial-space dimension for bilinear forms.
    pub cols: Option<usize>,
    /// Local dimension of each coefficient's space.
    pub coefficient_dims: Vec<usize>,
    pub tables: Vec<Table>,
    pub maps: Vec<IndexMap>,
    pub slots: Vec<String>,
    pub loop_vars: Vec<String>,
    pub body: Vec<Stmt>,
    /// Free-form notes carried into reports and emitted comments.
    pub notes: Vec<String>,
}

impl Kernel {
    /// Number of entries of the element tensor.
    pub fn tensor_len(&self) -> usize {
        self.rows * self.cols.unwrap_or(1)
    }

    pub fn dim(&self) -> usize {
        self.cell.dim()
    }

    /// Row-major strides of the element tensor per argument.
    pub fn strides(&self) -> Vec<usize> {
        match self.cols {
            Some(c) => vec![c, 1],
            None => vec![1],
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("kernel IR serializes")
    }
}
