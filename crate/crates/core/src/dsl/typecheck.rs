use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use super::ast::{BinOp, Builtin, Expr, FormProgram, FunctionKind, Statement};
use super::DslError;
use crate::elements::{FiniteElement, ReferenceCell};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ArgumentRole {
    Test,
    Trial,
}

/// Typed integrand tree. Leaves carry their elements.
#[derive(Debug, Clone, PartialEq)]
pub enum FormExpr {
    Argument {
        role: ArgumentRole,
        element: FiniteElement,
    },
    Coefficient {
        id: usize,
        element: FiniteElement,
    },
    ScalarLiteral(f64),
    Grad(Box<FormExpr>),
    Div(Box<FormExpr>),
    Transp(Box<FormExpr>),
    Dot(Box<FormExpr>, Box<FormExpr>),
    Mult(Box<FormExpr>, Box<FormExpr>),
    Add(Box<FormExpr>, Box<FormExpr>),
    Sub(Box<FormExpr>, Box<FormExpr>),
    DivOp(Box<FormExpr>, Box<FormExpr>),
    CellIntegral(Box<FormExpr>),
}

impl FormExpr {
    /// Tensor shape of a well-typed expression.
    pub fn shape(&self) -> Vec<usize> {
        match self {
            FormExpr::Argument { element, .. } | FormExpr::Coefficient { element, .. } => {
                if element.is_vector() {
                    vec![element.value_size()]
                } else {
                    vec![]
                }
            }
            FormExpr::ScalarLiteral(_) => vec![],
            FormExpr::Grad(e) => {
                let mut s = e.shape();
                s.push(e.cell().map_or(0, |c| c.dim()));
                s
            }
            FormExpr::Div(e) => {
                let mut s = e.shape();
                s.pop();
                s
            }
            FormExpr::Transp(e) => {
                let mut s = e.shape();
                s.reverse();
                s
            }
            FormExpr::Dot(a, b) => dot_shape(&a.shape(), &b.shape()).unwrap_or_default(),
            FormExpr::Mult(a, b) => {
                let sa = a.shape();
                if sa.is_empty() {
                    b.shape()
                } else {
                    sa
                }
            }
            FormExpr::Add(a, _) | FormExpr::Sub(a, _) | FormExpr::DivOp(a, _) => a.shape(),
            FormExpr::CellIntegral(e) => e.shape(),
        }
    }

    /// Cell of any leaf element, if the tree has one.
    pub fn cell(&self) -> Option<ReferenceCell> {
        match self {
            FormExpr::Argument { element, .. } | FormExpr::Coefficient { element, .. } => Some(element.cell),
            FormExpr::ScalarLiteral(_) => None,
            FormExpr::Grad(e) | FormExpr::Div(e) | FormExpr::Transp(e) | FormExpr::CellIntegral(e) => e.cell(),
            FormExpr::Dot(a, b)
            | FormExpr::Mult(a, b)
            | FormExpr::Add(a, b)
            | FormExpr::Sub(a, b)
            | FormExpr::DivOp(a, b) => a.cell().or_else(|| b.cell()),
        }
    }

    pub fn contains_derivative(&self) -> bool {
        match self {
            FormExpr::Grad(_) | FormExpr::Div(_) => true,
            _ => self.children().iter().any(|c| c.contains_derivative()),
        }
    }

    pub fn contains_role(&self, role: ArgumentRole) -> bool {
        match self {
            FormExpr::Argument { role: r, .. } => *r == role,
            _ => self.children().iter().any(|c| c.contains_role(role)),
        }
    }

    /// Whether a `DivOp` occurs anywhere in the tree.
    pub fn contains_division(&self) -> bool {
        match self {
            FormExpr::DivOp(..) => true,
            _ => self.children().iter().any(|c| c.contains_division()),
        }
    }

    pub fn children(&self) -> Vec<&FormExpr> {
        match self {
            FormExpr::Argument { .. } | FormExpr::Coefficient { .. } | FormExpr::ScalarLiteral(_) => vec![],
            FormExpr::Grad(e) | FormExpr::Div(e) | FormExpr::Transp(e) | FormExpr::CellIntegral(e) => vec![e],
            FormExpr::Dot(a, b)
            | FormExpr::Mult(a, b)
            | FormExpr::Add(a, b)
            | FormExpr::Sub(a, b)
            | FormExpr::DivOp(a, b) => vec![a, b],
        }
    }
}

/// Result shape of `dot(a, b)`. Two rank-2 operands contract fully (`A:B`).
fn dot_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    match (a, b) {
        ([], []) => Some(vec![]),
        ([n], [m]) if n == m => Some(vec![]),
        ([r, n], [m]) if n == m => Some(vec![*r]),
        ([n], [m, c]) if n == m => Some(vec![*c]),
        ([r1, c1], [r2, c2]) if r1 == r2 && c1 == c2 => Some(vec![]),
        _ => None,
    }
}

impl fmt::Display for FormExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormExpr::Argument { role, .. } => f.write_str(match role {
                ArgumentRole::Test => "v",
                ArgumentRole::Trial => "u",
            }),
            FormExpr::Coefficient { id, .. } => write!(f, "w{id}"),
            FormExpr::ScalarLiteral(v) => write!(f, "{v}"),
            FormExpr::Grad(e) => write!(f, "grad({e})"),
            FormExpr::Div(e) => write!(f, "div({e})"),
            FormExpr::Transp(e) => write!(f, "transp({e})"),
            FormExpr::Dot(a, b) => write!(f, "dot({a}, {b})"),
            FormExpr::Mult(a, b) => write!(f, "({a} * {b})"),
            FormExpr::Add(a, b) => write!(f, "({a} + {b})"),
            FormExpr::Sub(a, b) => write!(f, "({a} - {b})"),
            FormExpr::DivOp(a, b) => write!(f, "({a} / {b})"),
            FormExpr::CellIntegral(e) => write!(f, "{e}*dx"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientInfo {
    pub name: String,
    pub element: FiniteElement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypedForm {
    /// 1 for linear forms, 2 for bilinear forms.
    pub arity: usize,
    pub cell: ReferenceCell,
    pub test_element: FiniteElement,
    pub trial_element: Option<FiniteElement>,
    /// Coefficients in declaration order; the index is the coefficient id.
    pub coefficients: Vec<CoefficientInfo>,
    /// `CellIntegral` of a scalar expression.
    pub integrand: FormExpr,
}

impl TypedForm {
    pub fn integrand_body(&self) -> &FormExpr {
        match &self.integrand {
            FormExpr::CellIntegral(e) => e,
            e => e,
        }
    }
}

#[derive(Clone)]
enum Binding<'p> {
    Element(FiniteElement),
    Value(FormExpr),
    Macro(&'p [String], &'p Expr),
}

struct Checker<'p> {
    env: HashMap<String, Binding<'p>>,
    dim: usize,
}

pub fn typecheck(program: &FormProgram) -> Result<TypedForm, DslError> {
    let mut checker = Checker {
        env: HashMap::new(),
        dim: 0,
    };
    let mut cell: Option<(ReferenceCell, String)> = None;
    let mut test: Option<(String, FiniteElement)> = None;
    let mut trial: Option<(String, FiniteElement)> = None;
    let mut coefficients = Vec::new();
    let mut integrand = None;

    for stmt in &program.statements {
        match stmt {
            Statement::Element { name, element } => {
                match &cell {
                    None => cell = Some((element.cell, name.clone())),
                    Some((c, first)) if *c != element.cell => {
                        return Err(DslError::CellMismatch {
                            first: format!("{first}: {c}"),
                            second: format!("{name}: {}", element.cell),
                        })
                    }
                    _ => {}
                }
                checker.dim = element.dim();
                checker.env.insert(name.clone(), Binding::Element(*element));
            }
            Statement::Function { name, kind, element } => {
                let Some(Binding::Element(el)) = checker.env.get(element).cloned() else {
                    unreachable!("parser guarantees `{element}` names an element");
                };
                let leaf = match kind {
                    FunctionKind::Test => {
                        if let Some((first, _)) = &test {
                            return Err(DslError::TwoTestFunctions {
                                first: first.clone(),
                                second: name.clone(),
                            });
                        }
                        test = Some((name.clone(), el));
                        FormExpr::Argument {
                            role: ArgumentRole::Test,
                            element: el,
                        }
                    }
                    FunctionKind::Trial => {
                        if let Some((first, _)) = &trial {
                            return Err(DslError::TwoTrialFunctions {
                                first: first.clone(),
                                second: name.clone(),
                            });
                        }
                        trial = Some((name.clone(), el));
                        FormExpr::Argument {
                            role: ArgumentRole::Trial,
                            element: el,
                        }
                    }
                    FunctionKind::Coefficient => {
                        coefficients.push(CoefficientInfo {
                            name: name.clone(),
                            element: el,
                        });
                        FormExpr::Coefficient {
                            id: coefficients.len() - 1,
                            element: el,
                        }
                    }
                };
                checker.env.insert(name.clone(), Binding::Value(leaf));
            }
            Statement::Def { name, params, body } => {
                checker.env.insert(name.clone(), Binding::Macro(params, body));
            }
            Statement::Let { name, value } => {
                let typed = checker.check(value)?;
                checker.env.insert(name.clone(), Binding::Value(typed));
            }
            Statement::Form { integrand: e, .. } => {
                integrand = Some(checker.check(e)?);
            }
        }
    }

    let integrand = integrand.expect("parser guarantees one form statement");
    let shape = integrand.shape();
    if !shape.is_empty() {
        return Err(DslError::NonScalarIntegrand { shape });
    }
    if !integrand.contains_role(ArgumentRole::Test) {
        return Err(DslError::MissingTestFunction);
    }
    let (_, test_element) = test.expect("a test argument implies a declaration");
    let uses_trial = integrand.contains_role(ArgumentRole::Trial);
    Ok(TypedForm {
        arity: if uses_trial { 2 } else { 1 },
        cell: test_element.cell,
        test_element,
        trial_element: if uses_trial { trial.map(|t| t.1) } else { None },
        coefficients,
        integrand: FormExpr::CellIntegral(Box::new(integrand)),
    })
}

impl<'p> Checker<'p> {
    fn check(&mut self, e: &'p Expr) -> Result<FormExpr, DslError> {
        match e {
            Expr::Number(v) => Ok(FormExpr::ScalarLiteral(*v)),
            Expr::Name(n) => match self.env.get(n) {
                Some(Binding::Value(v)) => Ok(v.clone()),
                _ => unreachable!("parser resolves value names"),
            },
            Expr::Call(name, args) => {
                let Some(Binding::Macro(params, body)) = self.env.get(name).cloned() else {
                    unreachable!("parser resolves macro names");
                };
                let typed: Vec<FormExpr> = args.iter().map(|a| self.check(a)).collect::<Result<_, _>>()?;
                let saved: Vec<(String, Option<Binding<'p>>)> = params
                    .iter()
                    .zip(typed)
                    .map(|(p, t)| (p.clone(), self.env.insert(p.clone(), Binding::Value(t))))
                    .collect();
                let result = self.check(body);
                for (p, old) in saved {
                    match old {
                        Some(b) => self.env.insert(p, b),
                        None => self.env.remove(&p),
                    };
                }
                result
            }
            Expr::Builtin(b, args) => {
                let ops: Vec<FormExpr> = args.iter().map(|a| self.check(a)).collect::<Result<_, _>>()?;
                self.builtin(*b, ops)
            }
            Expr::Binary(op, l, r) => {
                let a = self.check(l)?;
                let b = self.check(r)?;
                let (sa, sb) = (a.shape(), b.shape());
                match op {
                    BinOp::Add | BinOp::Sub => {
                        if sa != sb {
                            return Err(DslError::RankMismatch {
                                op: op.symbol(),
                                detail: format!("operands have shapes {sa:?} and {sb:?}"),
                            });
                        }
                        let (a, b) = (Box::new(a), Box::new(b));
                        Ok(if *op == BinOp::Add {
                            FormExpr::Add(a, b)
                        } else {
                            FormExpr::Sub(a, b)
                        })
                    }
                    BinOp::Mul => self.builtin(Builtin::Mult, vec![a, b]),
                    BinOp::Div => {
                        if !sb.is_empty() {
                            return Err(DslError::DivisionByNonScalar { shape: sb });
                        }
                        Ok(FormExpr::DivOp(Box::new(a), Box::new(b)))
                    }
                }
            }
        }
    }

    fn builtin(&self, b: Builtin, mut ops: Vec<FormExpr>) -> Result<FormExpr, DslError> {
        let name = b.name();
        match b {
            Builtin::Grad => {
                let x = ops.pop().unwrap();
                if x.contains_derivative() {
                    return Err(DslError::UnsupportedDerivative(format!(
                        "grad of an expression that already contains derivatives: grad({x})"
                    )));
                }
                if x.cell().is_none() {
                    return Err(DslError::RankMismatch {
                        op: name,
                        detail: "gradient of a constant".into(),
                    });
                }
                if x.shape().len() >= 2 {
                    return Err(DslError::RankMismatch {
                        op: name,
                        detail: "gradient of a rank-2 expression".into(),
                    });
                }
                Ok(FormExpr::Grad(Box::new(x)))
            }
            Builtin::Div => {
                let x = ops.pop().unwrap();
                let s = x.shape();
                if s.is_empty() {
                    return Err(DslError::RankMismatch {
                        op: name,
                        detail: "divergence of a scalar".into(),
                    });
                }
                if *s.last().unwrap() != self.dim {
                    return Err(DslError::RankMismatch {
                        op: name,
                        detail: format!("last extent {} differs from the cell dimension {}", s.last().unwrap(), self.dim),
                    });
                }
                let allowed = match &x {
                    FormExpr::Grad(inner) => inner.shape().is_empty() && !inner.contains_derivative(),
                    other => !other.contains_derivative(),
                };
                if !allowed {
                    return Err(DslError::UnsupportedDerivative(format!(
                        "second derivatives are only supported as div(grad(scalar)), got div({x})"
                    )));
                }
                Ok(FormExpr::Div(Box::new(x)))
            }
            Builtin::Transp => {
                let x = ops.pop().unwrap();
                if x.shape().len() != 2 {
                    return Err(DslError::RankMismatch {
                        op: name,
                        detail: format!("transpose of shape {:?}", x.shape()),
                    });
                }
                Ok(FormExpr::Transp(Box::new(x)))
            }
            Builtin::Dot => {
                let y = ops.pop().unwrap();
                let x = ops.pop().unwrap();
                let (sx, sy) = (x.shape(), y.shape());
                if dot_shape(&sx, &sy).is_none() {
                    return Err(DslError::RankMismatch {
                        op: name,
                        detail: format!("cannot contract shapes {sx:?} and {sy:?}"),
                    });
                }
                Ok(FormExpr::Dot(Box::new(x), Box::new(y)))
            }
            Builtin::Mult => {
                let y = ops.pop().unwrap();
                let x = ops.pop().unwrap();
                let (sx, sy) = (x.shape(), y.shape());
                if !sx.is_empty() && !sy.is_empty() {
                    return Err(DslError::RankMismatch {
                        op: "*",
                        detail: format!("product of non-scalars {sx:?} and {sy:?}; use dot"),
                    });
                }
                Ok(FormExpr::Mult(Box::new(x), Box::new(y)))
            }
        }
    }
}
