//! Lowering of typed forms to sums of monomials in reference coordinates.
//!
//! Physical derivatives are rewritten with the affine chain rule
//! `d/dx_b = sum_a Jinv(a, b) d/dX_a`. The reference direction `a` becomes a
//! bound index of the monomial (summed over `0..d`), while the physical
//! direction `b` stays concrete, so a contraction over `b` produces one
//! monomial per physical direction.

mod expand;
mod simplify;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::dsl::TypedForm;
use crate::elements::{DerivCounts, FiniteElement, ReferenceCell};

pub use expand::expand;
pub use simplify::simplify;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoweringError {
    #[error("unsupported operator: {0}")]
    UnsupportedOperator(String),
    #[error("form is not multilinear in its arguments: {0}")]
    NotMultilinear(String),
}

/// Which function a basis factor belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Role {
    Test,
    Trial,
    Coefficient(usize),
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Test => f.write_str("v"),
            Role::Trial => f.write_str("u"),
            Role::Coefficient(id) => write!(f, "w{id}"),
        }
    }
}

/// A reference direction: either fixed or a bound (summed) index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum RefIndex {
    Fixed(u8),
    Bound(u8),
}

impl RefIndex {
    fn resolve(self, assignment: &[u8]) -> u8 {
        match self {
            RefIndex::Fixed(k) => k,
            RefIndex::Bound(b) => assignment[b as usize],
        }
    }
}

impl fmt::Display for RefIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RefIndex::Fixed(k) => write!(f, "{k}"),
            RefIndex::Bound(b) => write!(f, "a{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct BasisFactor {
    pub role: Role,
    pub component: usize,
    /// Reference derivative directions, sorted; empty for values.
    pub deriv: Vec<RefIndex>,
}

impl BasisFactor {
    pub fn order(&self) -> usize {
        self.deriv.len()
    }
}

impl fmt::Display for BasisFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.deriv.is_empty() {
            f.write_str("D(")?;
            for (k, d) in self.deriv.iter().enumerate() {
                if k > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{d}")?;
            }
            f.write_str(")")?;
        }
        write!(f, "{}[{}]", self.role, self.component)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum GeometryFactor {
    /// `dX_reference / dx_physical`
    Jinv { reference: RefIndex, physical: u8 },
    Det,
}

impl fmt::Display for GeometryFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryFactor::Jinv { reference, physical } => write!(f, "Jinv({reference},{physical})"),
            GeometryFactor::Det => f.write_str("det"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Monomial {
    pub constant: f64,
    pub basis: Vec<BasisFactor>,
    pub geometry: Vec<GeometryFactor>,
    /// Coefficient factors dividing the monomial.
    pub denominators: Vec<BasisFactor>,
    /// Bound indices are `Bound(0)..Bound(bound)`.
    pub bound: u8,
}

impl Monomial {
    pub fn bound_indices(&self) -> Vec<u8> {
        (0..self.bound).collect()
    }

    pub fn has_denominators(&self) -> bool {
        !self.denominators.is_empty()
    }

    /// Expands every bound-index assignment into concrete terms.
    pub fn concretize(&self, dim: usize) -> Vec<ConcreteTerm> {
        let n = self.bound as usize;
        let total = dim.pow(n as u32);
        let mut out = Vec::with_capacity(total);
        let mut assignment = vec![0u8; n];
        for flat in 0..total {
            let mut r = flat;
            for slot in assignment.iter_mut().rev() {
                *slot = (r % dim) as u8;
                r /= dim;
            }
            out.push(self.concrete_for(&assignment));
        }
        out
    }

    fn concrete_for(&self, assignment: &[u8]) -> ConcreteTerm {
        let conc = |f: &BasisFactor| {
            let mut counts = DerivCounts::NONE;
            for d in &f.deriv {
                counts = counts.with(d.resolve(assignment) as usize);
            }
            ConcreteFactor {
                role: f.role,
                component: f.component,
                deriv: counts,
            }
        };
        let mut jinv: Vec<(u8, u8)> = self
            .geometry
            .iter()
            .filter_map(|g| match g {
                GeometryFactor::Jinv { reference, physical } => Some((reference.resolve(assignment), *physical)),
                GeometryFactor::Det => None,
            })
            .collect();
        jinv.sort_unstable();
        ConcreteTerm {
            constant: self.constant,
            basis: self.basis.iter().map(conc).collect(),
            jinv,
            denominators: self.denominators.iter().map(conc).collect(),
            det_power: self.geometry.iter().filter(|g| **g == GeometryFactor::Det).count(),
        }
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.constant)?;
        for b in &self.basis {
            write!(f, " * {b}")?;
        }
        for g in &self.geometry {
            write!(f, " * {g}")?;
        }
        for d in &self.denominators {
            write!(f, " / {d}")?;
        }
        if self.bound > 0 {
            f.write_str("  [sum")?;
            for b in 0..self.bound {
                write!(f, " a{b}")?;
            }
            f.write_str("]")?;
        }
        Ok(())
    }
}

/// A basis factor with every reference direction fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ConcreteFactor {
    pub role: Role,
    pub component: usize,
    pub deriv: DerivCounts,
}

/// A monomial at one assignment of its bound indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcreteTerm {
    pub constant: f64,
    pub basis: Vec<ConcreteFactor>,
    /// `(reference, physical)` pairs of Jacobian-inverse entries, sorted.
    pub jinv: Vec<(u8, u8)>,
    pub denominators: Vec<ConcreteFactor>,
    /// Number of `det` factors (1 for every integrand monomial).
    pub det_power: usize,
}

/// Elements of the form's functions, indexed by role.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElementTable {
    pub cell: ReferenceCell,
    pub test: FiniteElement,
    pub trial: Option<FiniteElement>,
    pub coefficients: Vec<FiniteElement>,
}

impl ElementTable {
    pub fn from_form(form: &TypedForm) -> Self {
        ElementTable {
            cell: form.cell,
            test: form.test_element,
            trial: form.trial_element,
            coefficients: form.coefficients.iter().map(|c| c.element).collect(),
        }
    }

    pub fn element(&self, role: Role) -> &FiniteElement {
        match role {
            Role::Test => &self.test,
            Role::Trial => self.trial.as_ref().expect("trial role only occurs in bilinear forms"),
            Role::Coefficient(id) => &self.coefficients[id],
        }
    }

    pub fn dim(&self) -> usize {
        self.cell.dim()
    }

    pub fn arity(&self) -> usize {
        if self.trial.is_some() {
            2
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonomialSum {
    pub monomials: Vec<Monomial>,
    pub elements: ElementTable,
}

impl MonomialSum {
    pub fn has_denominators(&self) -> bool {
        self.monomials.iter().any(Monomial::has_denominators)
    }

    /// Evaluates the sum pointwise. `basis` gives the value of a factor for
    /// one fixed choice of test/trial basis functions and coefficient values.
    pub fn evaluate(
        &self,
        basis: &dyn Fn(&ConcreteFactor) -> f64,
        jinv: &[Vec<f64>],
        det: f64,
    ) -> f64 {
        let d = self.elements.dim();
        let mut total = 0.0;
        for m in &self.monomials {
            for t in m.concretize(d) {
                let mut v = t.constant * det.powi(t.det_power as i32);
                for f in &t.basis {
                    v *= basis(f);
                }
                for &(a, b) in &t.jinv {
                    v *= jinv[a as usize][b as usize];
                }
                for f in &t.denominators {
                    v /= basis(f);
                }
                total += v;
            }
        }
        total
    }
}

impl fmt::Display for MonomialSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.monomials {
            writeln!(f, "{m}")?;
        }
        Ok(())
    }
}

/// Quadrature degree estimate: per monomial, the sum over basis factors of
/// `degree - derivative order` (floored at 0) plus the full degree of every
/// denominator factor; the maximum over monomials.
pub fn estimate_degree(ms: &MonomialSum) -> usize {
    ms.monomials
        .iter()
        .map(|m| {
            let num: usize = m
                .basis
                .iter()
                .map(|b| ms.elements.element(b.role).degree.saturating_sub(b.order()))
                .sum();
            let den: usize = m
                .denominators
                .iter()
                .map(|b| ms.elements.element(b.role).degree)
                .sum();
            num + den
        })
        .max()
        .unwrap_or(0)
}

/// Expands and simplifies a typed form.
pub fn lower(form: &TypedForm) -> Result<MonomialSum, LoweringError> {
    Ok(simplify(&expand(form)?))
}
