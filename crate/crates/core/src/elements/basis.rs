use serde::Serialize;

use super::{lattice_points, linalg, ElementError, FiniteElement};

/// Number of reference derivatives taken in each direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize)]
pub struct DerivCounts(pub [u8; 3]);

impl DerivCounts {
    pub const NONE: DerivCounts = DerivCounts([0; 3]);

    pub fn order(&self) -> usize {
        self.0.iter().map(|&c| c as usize).sum()
    }

    pub fn along(dir: usize) -> Self {
        let mut c = [0u8; 3];
        c[dir] = 1;
        DerivCounts(c)
    }

    pub fn with(mut self, dir: usize) -> Self {
        self.0[dir] += 1;
        self
    }

    /// Directions with multiplicity, e.g. `[0, 0, 1]` for d^3/dX0^2 dX1.
    pub fn directions(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (dir, &c) in self.0.iter().enumerate() {
            out.extend(std::iter::repeat(dir).take(c as usize));
        }
        out
    }
}

/// Nodal Lagrange basis on the reference simplex, expanded in monomials.
#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    element: FiniteElement,
    exponents: Vec<[usize; 3]>,
    /// `coeffs[n][m]`: coefficient of monomial `m` in scalar basis function `n`.
    coeffs: Vec<Vec<f64>>,
}

fn monomial_exponents(dim: usize, degree: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for total in 0..=degree {
        match dim {
            2 => {
                for i in (0..=total).rev() {
                    out.push([i, total - i, 0]);
                }
            }
            _ => {
                for i in (0..=total).rev() {
                    for j in (0..=total - i).rev() {
                        out.push([i, j, total - i - j]);
                    }
                }
            }
        }
    }
    out
}

fn monomial_derivative(exp: &[usize; 3], deriv: DerivCounts, x: &[f64]) -> f64 {
    let mut v = 1.0;
    for k in 0..x.len() {
        let c = deriv.0[k] as usize;
        let e = exp[k];
        if c > e {
            return 0.0;
        }
        for t in 0..c {
            v *= (e - t) as f64;
        }
        v *= x[k].powi((e - c) as i32);
    }
    v
}

impl LagrangeBasis {
    pub fn new(element: FiniteElement) -> Result<Self, ElementError> {
        let dim = element.dim();
        let exponents = monomial_exponents(dim, element.degree);
        let nodes = lattice_points(element.cell, element.degree);
        debug_assert_eq!(nodes.len(), exponents.len());
        // V[node][monomial]
        let vandermonde: Vec<Vec<f64>> = nodes
            .iter()
            .map(|x| {
                exponents
                    .iter()
                    .map(|e| monomial_derivative(e, DerivCounts::NONE, x))
                    .collect()
            })
            .collect();
        let inv = linalg::invert(&vandermonde).ok_or(ElementError::SingularVandermonde {
            cell: element.cell,
            degree: element.degree,
        })?;
        // basis_n = sum_m inv[m][n] * mono_m
        let n = exponents.len();
        let coeffs = (0..n)
            .map(|b| (0..n).map(|m| inv[m][b]).collect())
            .collect();
        Ok(Self {
            element,
            exponents,
            coeffs,
        })
    }

    pub fn element(&self) -> &FiniteElement {
        &self.element
    }

    /// Derivatives (or values) of every scalar basis function at `point`.
    pub fn eval_scalar(&self, point: &[f64], deriv: DerivCounts) -> Vec<f64> {
        let monos: Vec<f64> = self
            .exponents
            .iter()
            .map(|e| monomial_derivative(e, deriv, point))
            .collect();
        self.coeffs
            .iter()
            .map(|c| c.iter().zip(&monos).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Table `[point][basis]` over the full local space for one value component.
    /// Basis functions of other components appear as zero columns.
    pub fn table(
        &self,
        component: usize,
        deriv: DerivCounts,
        points: &[Vec<f64>],
    ) -> Result<Vec<Vec<f64>>, ElementError> {
        let size = self.element.value_size();
        if component >= size {
            return Err(ElementError::BadComponent { component, size });
        }
        let ns = self.element.scalar_dim();
        Ok(points
            .iter()
            .map(|x| {
                let scalar = self.eval_scalar(x, deriv);
                let mut row = vec![0.0; ns * size];
                row[component * ns..(component + 1) * ns].copy_from_slice(&scalar);
                row
            })
            .collect())
    }
}

/// Basis values and first reference derivatives at a set of points.
#[derive(Debug, Clone)]
pub struct TabulatedBasis {
    pub element: FiniteElement,
    pub points: Vec<Vec<f64>>,
    /// `values[component][point][basis]`
    pub values: Vec<Vec<Vec<f64>>>,
    /// `derivs[component][point][basis][direction]`
    pub derivs: Vec<Vec<Vec<Vec<f64>>>>,
}

pub fn tabulate(element: &FiniteElement, points: &[Vec<f64>]) -> Result<TabulatedBasis, ElementError> {
    let basis = LagrangeBasis::new(*element)?;
    let d = element.dim();
    let mut values = Vec::new();
    let mut derivs = Vec::new();
    for comp in 0..element.value_size() {
        values.push(basis.table(comp, DerivCounts::NONE, points)?);
        let per_dir: Vec<Vec<Vec<f64>>> = (0..d)
            .map(|dir| basis.table(comp, DerivCounts::along(dir), points))
            .collect::<Result<_, _>>()?;
        let mut by_point = Vec::with_capacity(points.len());
        for p in 0..points.len() {
            let row: Vec<Vec<f64>> = (0..element.space_dim())
                .map(|b| (0..d).map(|dir| per_dir[dir][p][b]).collect())
                .collect();
            by_point.push(row);
        }
        derivs.push(by_point);
    }
    Ok(TabulatedBasis {
        element: *element,
        points: points.to_vec(),
        values,
        derivs,
    })
}
