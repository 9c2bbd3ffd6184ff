//! Helpers shared by unit tests of the representation backends.

use rand::Rng;

use crate::dsl::compile_source;
use crate::elements::{LagrangeBasis, ReferenceCell};
use crate::kernel::{affine_map, CellGeometry};
use crate::lowering::{lower, ConcreteFactor, MonomialSum, Role};
use crate::quadrature::simplex_rule;

pub fn lowered(src: &str) -> MonomialSum {
    lower(&compile_source(src).expect("test form compiles")).expect("test form lowers")
}

pub fn scalar_form(cell: &str, degree: usize, body: &str) -> String {
    format!(
        "e = FiniteElement(\"Lagrange\", \"{cell}\", {degree})\n\
         ve = VectorElement(\"Lagrange\", \"{cell}\", {degree})\n\
         v = TestFunction(e)\nu = TrialFunction(e)\n\
         f = Function(e)\ng = Function(e)\nb = Function(ve)\n\
         a = ({body})*dx\n"
    )
}

pub fn vector_form(cell: &str, degree: usize, body: &str) -> String {
    format!(
        "ve = VectorElement(\"Lagrange\", \"{cell}\", {degree})\n\
         e = FiniteElement(\"Lagrange\", \"{cell}\", {degree})\n\
         v = TestFunction(ve)\nu = TrialFunction(ve)\n\
         f = Function(e)\nb = Function(ve)\n\
         a = ({body})*dx\n"
    )
}

pub const WEIGHTED_LAPLACIAN_P1: &str = "element = FiniteElement(\"Lagrange\", \"triangle\", 1)\n\
v = TestFunction(element)\nu = TrialFunction(element)\nw = Function(element)\n\
a = w*dot(grad(v), grad(u))*dx\n";

pub fn mass(cell: &str, degree: usize) -> String {
    format!(
        "element = FiniteElement(\"Lagrange\", \"{cell}\", {degree})\n\
         v = TestFunction(element)\nu = TrialFunction(element)\na = v*u*dx\n"
    )
}

/// Division-free forms covering scalar, vector, linear and 3D cases.
pub fn multilinear_forms() -> Vec<String> {
    let mut forms = vec![WEIGHTED_LAPLACIAN_P1.to_string(), mass("triangle", 2)];
    for (cell, q) in [("triangle", 1), ("triangle", 2), ("tetrahedron", 1)] {
        forms.push(scalar_form(cell, q, "dot(grad(v), grad(u))"));
        forms.push(scalar_form(cell, q, "f*g*u*v + dot(b, grad(u))*v"));
        forms.push(scalar_form(cell, q, "f*v + dot(b, grad(v))"));
        forms.push(vector_form(cell, q, "0.25*dot(grad(v) + transp(grad(v)), grad(u) + transp(grad(u)))"));
        forms.push(vector_form(cell, q, "f*div(u)*div(v) - dot(dot(grad(u), b), v)"));
    }
    forms.push(scalar_form("triangle", 2, "div(grad(u))*v*f"));
    forms
}

/// Forms with coefficient division.
pub fn division_forms() -> Vec<String> {
    vec![
        scalar_form("triangle", 1, "f*u*v/g"),
        scalar_form("triangle", 2, "dot(grad(v), grad(u))/(2*g) - f*v*u"),
        scalar_form("tetrahedron", 1, "f*v/g"),
    ]
}

pub fn random_geometry(rng: &mut impl Rng, cell: ReferenceCell) -> CellGeometry {
    loop {
        let mut verts: Vec<Vec<f64>> = cell
            .vertices()
            .into_iter()
            .map(|v| v.iter().map(|x| x + rng.gen_range(-0.3..0.3)).collect())
            .collect();
        let scale = rng.gen_range(0.5..2.0);
        for v in &mut verts {
            for x in v.iter_mut() {
                *x *= scale;
            }
        }
        if let Ok(g) = affine_map(&verts) {
            if g.det > 0.05 {
                return g;
            }
        }
    }
}

pub fn random_coefficients(rng: &mut impl Rng, sum: &MonomialSum) -> Vec<Vec<f64>> {
    sum.elements
        .coefficients
        .iter()
        .map(|e| (0..e.space_dim()).map(|_| rng.gen_range(0.5..1.5)).collect())
        .collect()
}

/// Element tensor by direct pointwise evaluation of the monomial sum on a
/// rule of the given degree, independent of any generated kernel.
pub fn element_tensor_oracle(sum: &MonomialSum, g: &CellGeometry, w: &[Vec<f64>], degree: usize) -> Vec<f64> {
    let els = &sum.elements;
    let rule = simplex_rule(els.cell, degree);
    let basis_for = |role: Role| LagrangeBasis::new(*els.element(role)).unwrap();
    let test = basis_for(Role::Test);
    let trial = els.trial.map(|_| basis_for(Role::Trial));
    let coeffs: Vec<LagrangeBasis> = (0..els.coefficients.len()).map(|c| basis_for(Role::Coefficient(c))).collect();
    let rows = els.test.space_dim();
    let cols = els.trial.map_or(1, |e| e.space_dim());
    let mut out = vec![0.0; rows * cols];
    let value = |basis: &LagrangeBasis, f: &ConcreteFactor, x: &[f64], k: usize| {
        let ns = basis.element().scalar_dim();
        if k / ns != f.component {
            0.0
        } else {
            basis.eval_scalar(x, f.deriv)[k % ns]
        }
    };
    for (x, wq) in rule.points.iter().zip(&rule.weights) {
        for a in 0..rows {
            for bcol in 0..cols {
                let factor = |f: &ConcreteFactor| match f.role {
                    Role::Test => value(&test, f, x, a),
                    Role::Trial => value(trial.as_ref().unwrap(), f, x, bcol),
                    Role::Coefficient(id) => (0..w[id].len()).map(|k| w[id][k] * value(&coeffs[id], f, x, k)).sum(),
                };
                out[a * cols + bcol] += wq * sum.evaluate(&factor, &g.jinv, g.det);
            }
        }
    }
    out
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
