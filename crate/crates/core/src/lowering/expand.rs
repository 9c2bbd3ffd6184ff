use super::{BasisFactor, ElementTable, GeometryFactor, LoweringError, Monomial, MonomialSum, RefIndex, Role};
use crate::dsl::{ArgumentRole, FormExpr, TypedForm};

type Poly = Vec<Monomial>;

/// Row-major tensor of polynomials.
struct Tensor {
    shape: Vec<usize>,
    data: Vec<Poly>,
}

impl Tensor {
    fn scalar(p: Poly) -> Self {
        Tensor {
            shape: vec![],
            data: vec![p],
        }
    }

    fn into_scalar(mut self) -> Poly {
        debug_assert!(self.shape.is_empty());
        self.data.pop().unwrap()
    }
}

fn constant(c: f64) -> Poly {
    if c == 0.0 {
        return vec![];
    }
    vec![Monomial {
        constant: c,
        basis: vec![],
        geometry: vec![],
        denominators: vec![],
        bound: 0,
    }]
}

fn leaf(role: Role, component: usize) -> Poly {
    vec![Monomial {
        constant: 1.0,
        basis: vec![BasisFactor {
            role,
            component,
            deriv: vec![],
        }],
        geometry: vec![],
        denominators: vec![],
        bound: 0,
    }]
}

fn shift(idx: RefIndex, by: u8) -> RefIndex {
    match idx {
        RefIndex::Bound(b) => RefIndex::Bound(b + by),
        fixed => fixed,
    }
}

fn mul_monomials(a: &Monomial, b: &Monomial) -> Monomial {
    let off = a.bound;
    let shift_basis = |f: &BasisFactor| BasisFactor {
        role: f.role,
        component: f.component,
        deriv: f.deriv.iter().map(|&d| shift(d, off)).collect(),
    };
    let mut basis = a.basis.clone();
    basis.extend(b.basis.iter().map(shift_basis));
    let mut geometry = a.geometry.clone();
    geometry.extend(b.geometry.iter().map(|g| match *g {
        GeometryFactor::Jinv { reference, physical } => GeometryFactor::Jinv {
            reference: shift(reference, off),
            physical,
        },
        GeometryFactor::Det => GeometryFactor::Det,
    }));
    let mut denominators = a.denominators.clone();
    denominators.extend(b.denominators.iter().map(shift_basis));
    Monomial {
        constant: a.constant * b.constant,
        basis,
        geometry,
        denominators,
        bound: a.bound + b.bound,
    }
}

fn mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(mul_monomials(x, y));
        }
    }
    out
}

fn add(mut a: Poly, b: Poly) -> Poly {
    a.extend(b);
    a
}

fn scale(mut a: Poly, s: f64) -> Poly {
    for m in &mut a {
        m.constant *= s;
    }
    a
}

/// `d/dx_physical` of a polynomial by the affine chain rule.
fn derivative(p: &Poly, physical: u8) -> Result<Poly, LoweringError> {
    let mut out = Vec::new();
    for m in p {
        if m.has_denominators() {
            return Err(LoweringError::UnsupportedOperator(
                "derivative of a quotient of coefficients".into(),
            ));
        }
        let a = RefIndex::Bound(m.bound);
        for k in 0..m.basis.len() {
            let mut t = m.clone();
            let f = &mut t.basis[k];
            if f.order() >= 2 {
                return Err(LoweringError::UnsupportedOperator(
                    "reference derivatives of order above 2".into(),
                ));
            }
            f.deriv.push(a);
            f.deriv.sort_unstable();
            t.geometry.push(GeometryFactor::Jinv { reference: a, physical });
            t.bound += 1;
            out.push(t);
        }
    }
    Ok(out)
}

fn expand_expr(e: &FormExpr, dim: usize) -> Result<Tensor, LoweringError> {
    match e {
        FormExpr::Argument { role, element } => {
            let role = match role {
                ArgumentRole::Test => Role::Test,
                ArgumentRole::Trial => Role::Trial,
            };
            Ok(leaf_tensor(role, element.is_vector(), element.value_size()))
        }
        FormExpr::Coefficient { id, element } => Ok(leaf_tensor(
            Role::Coefficient(*id),
            element.is_vector(),
            element.value_size(),
        )),
        FormExpr::ScalarLiteral(v) => Ok(Tensor::scalar(constant(*v))),
        FormExpr::CellIntegral(inner) => expand_expr(inner, dim),
        FormExpr::Grad(inner) => {
            let t = expand_expr(inner, dim)?;
            let mut data = Vec::with_capacity(t.data.len() * dim);
            for p in &t.data {
                for b in 0..dim {
                    data.push(derivative(p, b as u8)?);
                }
            }
            let mut shape = t.shape;
            shape.push(dim);
            Ok(Tensor { shape, data })
        }
        FormExpr::Div(inner) => {
            let t = expand_expr(inner, dim)?;
            let last = *t.shape.last().expect("typechecked div operand has rank >= 1");
            let rows = t.data.len() / last;
            let mut data = Vec::with_capacity(rows);
            for i in 0..rows {
                let mut acc = Vec::new();
                for b in 0..last {
                    acc = add(acc, derivative(&t.data[i * last + b], b as u8)?);
                }
                data.push(acc);
            }
            let mut shape = t.shape;
            shape.pop();
            Ok(Tensor { shape, data })
        }
        FormExpr::Transp(inner) => {
            let t = expand_expr(inner, dim)?;
            let (r, c) = (t.shape[0], t.shape[1]);
            let mut data = Vec::with_capacity(r * c);
            for j in 0..c {
                for i in 0..r {
                    data.push(t.data[i * c + j].clone());
                }
            }
            Ok(Tensor { shape: vec![c, r], data })
        }
        FormExpr::Add(a, b) | FormExpr::Sub(a, b) => {
            let ta = expand_expr(a, dim)?;
            let tb = expand_expr(b, dim)?;
            let sign = if matches!(e, FormExpr::Add(..)) { 1.0 } else { -1.0 };
            let data = ta
                .data
                .into_iter()
                .zip(tb.data)
                .map(|(x, y)| add(x, scale(y, sign)))
                .collect();
            Ok(Tensor { shape: ta.shape, data })
        }
        FormExpr::Mult(a, b) => {
            let ta = expand_expr(a, dim)?;
            let tb = expand_expr(b, dim)?;
            if ta.shape.is_empty() {
                let s = ta.into_scalar();
                let data = tb.data.iter().map(|p| mul(&s, p)).collect();
                Ok(Tensor { shape: tb.shape, data })
            } else {
                let s = tb.into_scalar();
                let data = ta.data.iter().map(|p| mul(p, &s)).collect();
                Ok(Tensor { shape: ta.shape, data })
            }
        }
        FormExpr::Dot(a, b) => {
            let ta = expand_expr(a, dim)?;
            let tb = expand_expr(b, dim)?;
            Ok(dot(&ta, &tb))
        }
        FormExpr::DivOp(a, b) => {
            let ta = expand_expr(a, dim)?;
            let den = expand_expr(b, dim)?.into_scalar();
            let den = match den.as_slice() {
                [] => {
                    return Err(LoweringError::UnsupportedOperator(
                        "division by an identically zero expression".into(),
                    ))
                }
                [m] => m.clone(),
                _ => {
                    return Err(LoweringError::UnsupportedOperator(
                        "division by a sum; denominators must be products of coefficients".into(),
                    ))
                }
            };
            if den.bound > 0 || !den.geometry.is_empty() || den.has_denominators() {
                return Err(LoweringError::UnsupportedOperator(
                    "denominators must be underived coefficient products".into(),
                ));
            }
            if den
                .basis
                .iter()
                .any(|f| matches!(f.role, Role::Test | Role::Trial))
            {
                return Err(LoweringError::NotMultilinear("argument in a denominator".into()));
            }
            let data = ta
                .data
                .into_iter()
                .map(|p| {
                    p.into_iter()
                        .map(|mut m| {
                            m.constant /= den.constant;
                            m.denominators.extend(den.basis.iter().cloned());
                            m
                        })
                        .collect()
                })
                .collect();
            Ok(Tensor { shape: ta.shape, data })
        }
    }
}

fn leaf_tensor(role: Role, vector: bool, size: usize) -> Tensor {
    if vector {
        Tensor {
            shape: vec![size],
            data: (0..size).map(|c| leaf(role, c)).collect(),
        }
    } else {
        Tensor::scalar(leaf(role, 0))
    }
}

fn dot(a: &Tensor, b: &Tensor) -> Tensor {
    match (a.shape.as_slice(), b.shape.as_slice()) {
        ([], []) => Tensor::scalar(mul(&a.data[0], &b.data[0])),
        ([r, n], [_]) => {
            let data = (0..*r)
                .map(|i| {
                    (0..*n).fold(Vec::new(), |acc, k| add(acc, mul(&a.data[i * n + k], &b.data[k])))
                })
                .collect();
            Tensor { shape: vec![*r], data }
        }
        ([n], [_, c]) => {
            let data = (0..*c)
                .map(|j| {
                    (0..*n).fold(Vec::new(), |acc, k| add(acc, mul(&a.data[k], &b.data[k * c + j])))
                })
                .collect();
            Tensor { shape: vec![*c], data }
        }
        // vectors, or full contraction of two matrices
        _ => {
            let p = a
                .data
                .iter()
                .zip(&b.data)
                .fold(Vec::new(), |acc, (x, y)| add(acc, mul(x, y)));
            Tensor::scalar(p)
        }
    }
}

/// Distributes the typed integrand into a sum of monomials, each multiplied
/// by one `det` factor from the change of variables.
pub fn expand(form: &TypedForm) -> Result<MonomialSum, LoweringError> {
    let elements = ElementTable::from_form(form);
    let dim = elements.dim();
    let poly = expand_expr(&form.integrand, dim)?.into_scalar();
    let mut monomials = Vec::with_capacity(poly.len());
    for mut m in poly {
        let tests = m.basis.iter().filter(|f| f.role == Role::Test).count();
        let trials = m.basis.iter().filter(|f| f.role == Role::Trial).count();
        let want_trial = usize::from(form.arity == 2);
        if tests != 1 || trials != want_trial {
            return Err(LoweringError::NotMultilinear(format!(
                "term {m} has {tests} test and {trials} trial factors"
            )));
        }
        m.geometry.push(GeometryFactor::Det);
        monomials.push(m);
    }
    Ok(MonomialSum { monomials, elements })
}
