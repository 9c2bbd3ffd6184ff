//! Untyped syntax tree of a form program.
//!
//! The tree carries no source spans so that two parses of equivalent text
//! compare equal; diagnostics are produced while parsing.

use std::fmt;

use crate::elements::FiniteElement;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Grad,
    Div,
    Dot,
    Transp,
    Mult,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Grad => "grad",
            Builtin::Div => "div",
            Builtin::Dot => "dot",
            Builtin::Transp => "transp",
            Builtin::Mult => "mult",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Grad | Builtin::Div | Builtin::Transp => 1,
            Builtin::Dot | Builtin::Mult => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Name(String),
    Number(f64),
    Builtin(Builtin, Vec<Expr>),
    /// Call of a user `def`.
    Call(String, Vec<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FunctionKind {
    Test,
    Trial,
    Coefficient,
}

impl FunctionKind {
    pub fn constructor(self) -> &'static str {
        match self {
            FunctionKind::Test => "TestFunction",
            FunctionKind::Trial => "TrialFunction",
            FunctionKind::Coefficient => "Function",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Element {
        name: String,
        element: FiniteElement,
    },
    Function {
        name: String,
        kind: FunctionKind,
        element: String,
    },
    Def {
        name: String,
        params: Vec<String>,
        body: Expr,
    },
    Let {
        name: String,
        value: Expr,
    },
    /// `name = integrand*dx`
    Form {
        name: String,
        integrand: Expr,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FormProgram {
    pub statements: Vec<Statement>,
}

impl FormProgram {
    pub fn elements(&self) -> impl Iterator<Item = (&str, &FiniteElement)> {
        self.statements.iter().filter_map(|s| match s {
            Statement::Element { name, element } => Some((name.as_str(), element)),
            _ => None,
        })
    }

    pub fn functions(&self) -> impl Iterator<Item = (&str, FunctionKind, &str)> {
        self.statements.iter().filter_map(|s| match s {
            Statement::Function {
                name,
                kind,
                element,
            } => Some((name.as_str(), *kind, element.as_str())),
            _ => None,
        })
    }

    /// The integrand of the single `*dx` statement.
    pub fn integrand(&self) -> Option<&Expr> {
        self.statements.iter().find_map(|s| match s {
            Statement::Form { integrand, .. } => Some(integrand),
            _ => None,
        })
    }
}

fn fmt_number(v: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        write!(f, "{}", v as i64)
    } else {
        write!(f, "{v:?}")
    }
}

impl Expr {
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8, right_operand: bool) -> fmt::Result {
        match self {
            Expr::Name(n) => f.write_str(n),
            Expr::Number(v) => fmt_number(*v, f),
            Expr::Builtin(b, args) => {
                write!(f, "{}(", b.name())?;
                fmt_args(args, f)?;
                f.write_str(")")
            }
            Expr::Call(name, args) => {
                write!(f, "{name}(")?;
                fmt_args(args, f)?;
                f.write_str(")")
            }
            Expr::Binary(op, lhs, rhs) => {
                let p = op.precedence();
                // operators are left associative, so a right operand of equal
                // precedence needs parentheses
                let paren = p < parent || (p == parent && right_operand);
                if paren {
                    f.write_str("(")?;
                }
                lhs.fmt_prec(f, p, false)?;
                write!(f, " {} ", op.symbol())?;
                rhs.fmt_prec(f, p, true)?;
                if paren {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

fn fmt_args(args: &[Expr], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    for (k, a) in args.iter().enumerate() {
        if k > 0 {
            f.write_str(", ")?;
        }
        a.fmt_prec(f, 0, false)?;
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0, false)
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Element { name, element } => write!(f, "{name} = {element}"),
            Statement::Function {
                name,
                kind,
                element,
            } => write!(f, "{name} = {}({element})", kind.constructor()),
            Statement::Def { name, params, body } => {
                writeln!(f, "def {name}({}):", params.join(", "))?;
                write!(f, "    return {body}")
            }
            Statement::Let { name, value } => write!(f, "{name} = {value}"),
            Statement::Form { name, integrand } => {
                // the measure binds like a trailing factor
                write!(f, "{name} = ")?;
                integrand.fmt_prec(f, 2, false)?;
                f.write_str("*dx")
            }
        }
    }
}

impl fmt::Display for FormProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.statements {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}
