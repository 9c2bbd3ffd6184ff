use std::fmt::{self, Write};

use super::{Entry, Expr, Index, Kernel, Stmt, Table};

/// Renders the kernel as C-flavoured source text. The output is
/// deterministic for a given kernel.
pub fn emit_source(k: &Kernel) -> String {
    let mut s = String::new();
    write_source(k, &mut s).expect("writing to a String cannot fail");
    s
}

pub fn write_source(k: &Kernel, out: &mut impl Write) -> fmt::Result {
    writeln!(out, "// {} ({} representation)", k.name, k.representation.name())?;
    for note in &k.notes {
        writeln!(out, "// {note}")?;
    }
    writeln!(
        out,
        "// Inputs: w[c][k] coefficient dofs; Jinv_ij = dX_i/dx_j and det from the cell."
    )?;
    writeln!(
        out,
        "void tabulate_tensor(double* A, const double* const* w, const cell_geometry& c)"
    )?;
    writeln!(out, "{{")?;
    let weights: Vec<&Table> = k.tables.iter().filter(|t| t.name.starts_with('W')).collect();
    if !weights.is_empty() {
        writeln!(out, "  // Quadrature weight{}", if weights[0].shape.is_empty() { "" } else { "s" })?;
        for t in &weights {
            write_table(out, t)?;
        }
        writeln!(out)?;
    }
    let others: Vec<&Table> = k.tables.iter().filter(|t| !t.name.starts_with('W')).collect();
    if !others.is_empty() || !k.maps.is_empty() {
        writeln!(out, "  // Tabulated basis functions and arrays of non-zero columns")?;
        for t in &others {
            write_table(out, t)?;
        }
        for m in &k.maps {
            writeln!(
                out,
                "  static const unsigned int {}[{}] = {{{}}};",
                m.name,
                m.indices.len(),
                join(m.indices.iter().map(|i| i.to_string()))
            )?;
        }
        writeln!(out)?;
    }
    let mut em = Emitter { k, out };
    em.block(&k.body, 1)?;
    writeln!(em.out, "}}")
}

fn join(items: impl Iterator<Item = String>) -> String {
    items.collect::<Vec<_>>().join(", ")
}

fn write_table(out: &mut impl Write, t: &Table) -> fmt::Result {
    let dims: String = t.shape.iter().map(|n| format!("[{n}]")).collect();
    write!(out, "  const static double {}{} = ", t.name, dims)?;
    write_nested(out, &t.shape, &t.data)?;
    writeln!(out, ";")
}

fn write_nested(out: &mut impl Write, shape: &[usize], data: &[f64]) -> fmt::Result {
    match shape {
        [] => write!(out, "{}", data[0]),
        [_] => write!(out, "{{{}}}", join(data.iter().map(|v| v.to_string()))),
        [n, rest @ ..] => {
            let chunk = rest.iter().product::<usize>();
            write!(out, "{{")?;
            for i in 0..*n {
                if i > 0 {
                    write!(out, ", ")?;
                }
                write_nested(out, rest, &data[i * chunk..(i + 1) * chunk])?;
            }
            write!(out, "}}")
        }
    }
}

struct Emitter<'a, W: Write> {
    k: &'a Kernel,
    out: &'a mut W,
}

impl<W: Write> Emitter<'_, W> {
    fn indent(&mut self, depth: usize) -> fmt::Result {
        for _ in 0..depth {
            self.out.write_str("  ")?;
        }
        Ok(())
    }

    fn block(&mut self, stmts: &[Stmt], depth: usize) -> fmt::Result {
        for s in stmts {
            self.stmt(s, depth)?;
        }
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt, depth: usize) -> fmt::Result {
        self.indent(depth)?;
        match s {
            Stmt::Const { slot, value } => {
                write!(self.out, "const double {} = ", self.k.slots[*slot])?;
                self.expr(value, 0, false)?;
                writeln!(self.out, ";")
            }
            Stmt::Declare { slot, value } => {
                write!(self.out, "double {} = ", self.k.slots[*slot])?;
                self.expr(value, 0, false)?;
                writeln!(self.out, ";")
            }
            Stmt::Update { slot, value } => {
                write!(self.out, "{} += ", self.k.slots[*slot])?;
                self.expr(value, 0, false)?;
                writeln!(self.out, ";")
            }
            Stmt::Loop { var, extent, body } => {
                let v = &self.k.loop_vars[*var];
                writeln!(self.out, "for (unsigned int {v} = 0; {v} < {extent}; {v}++)")?;
                self.indent(depth)?;
                writeln!(self.out, "{{")?;
                self.block(body, depth + 1)?;
                self.indent(depth)?;
                writeln!(self.out, "}}")
            }
            Stmt::Accumulate { entry, value } => {
                self.entry(entry)?;
                write!(self.out, " += ")?;
                self.expr(value, 0, false)?;
                writeln!(self.out, ";")
            }
            Stmt::Assign { entry, value } => {
                self.entry(entry)?;
                write!(self.out, " = ")?;
                self.expr(value, 0, false)?;
                writeln!(self.out, ";")
            }
        }
    }

    fn index(&mut self, i: &Index) -> fmt::Result {
        match *i {
            Index::Fixed(n) => write!(self.out, "{n}"),
            Index::Var(v) => write!(self.out, "{}", self.k.loop_vars[v]),
            Index::Mapped { map, var } => write!(self.out, "{}[{}]", self.k.maps[map].name, self.k.loop_vars[var]),
        }
    }

    fn entry(&mut self, e: &Entry) -> fmt::Result {
        let strides = self.k.strides();
        if let Some(flat) = e
            .0
            .iter()
            .zip(&strides)
            .map(|(i, s)| match i {
                Index::Fixed(n) => Some(n * s),
                _ => None,
            })
            .sum::<Option<usize>>()
        {
            return write!(self.out, "A[{flat}]");
        }
        write!(self.out, "A[")?;
        for (n, (i, s)) in e.0.iter().zip(&strides).enumerate() {
            if n > 0 {
                write!(self.out, " + ")?;
            }
            self.index(i)?;
            if *s != 1 {
                write!(self.out, "*{s}")?;
            }
        }
        write!(self.out, "]")
    }

    /// `parent` is the binding strength of the enclosing operator (0 none,
    /// 1 additive, 2 multiplicative); `right` marks a right operand.
    fn expr(&mut self, e: &Expr, parent: u8, right: bool) -> fmt::Result {
        let (prec, paren) = match e {
            Expr::Add(..) | Expr::Sub(..) | Expr::Contract(_) => (1, parent > 1 || (parent == 1 && right)),
            Expr::Mul(..) | Expr::Div(..) => (2, parent == 2 && right),
            Expr::Neg(_) => (3, parent > 0),
            Expr::Lit(v) if *v < 0.0 => (3, parent > 0),
            _ => (3, false),
        };
        if paren {
            self.out.write_str("(")?;
        }
        match e {
            Expr::Lit(v) => write!(self.out, "{v}")?,
            Expr::Slot(s) => self.out.write_str(&self.k.slots[*s])?,
            Expr::Table { table, index } => {
                self.out.write_str(&self.k.tables[*table].name)?;
                for i in index {
                    self.out.write_str("[")?;
                    self.index(i)?;
                    self.out.write_str("]")?;
                }
            }
            Expr::Coefficient { id, dof } => {
                write!(self.out, "w[{id}][")?;
                self.index(dof)?;
                self.out.write_str("]")?;
            }
            Expr::Jinv(a, b) => write!(self.out, "Jinv_{a}{b}")?,
            Expr::Det => self.out.write_str("det")?,
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                self.expr(a, prec, false)?;
                self.out.write_str(if matches!(e, Expr::Add(..)) { " + " } else { " - " })?;
                self.expr(b, prec, true)?;
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                self.expr(a, prec, false)?;
                self.out.write_str(if matches!(e, Expr::Mul(..)) { "*" } else { "/" })?;
                self.expr(b, prec, true)?;
            }
            Expr::Neg(a) => {
                self.out.write_str("-")?;
                self.expr(a, 3, false)?;
            }
            Expr::Contract(terms) => {
                if terms.is_empty() {
                    self.out.write_str("0")?;
                }
                for (n, &(c, slot)) in terms.iter().enumerate() {
                    let name = &self.k.slots[slot];
                    match (n, c) {
                        (0, c) if c == 1.0 => write!(self.out, "{name}")?,
                        (0, c) if c == -1.0 => write!(self.out, "-{name}")?,
                        (0, c) => write!(self.out, "{c}*{name}")?,
                        (_, c) if c == 1.0 => write!(self.out, " + {name}")?,
                        (_, c) if c == -1.0 => write!(self.out, " - {name}")?,
                        (_, c) if c < 0.0 => write!(self.out, " - {}*{name}", -c)?,
                        (_, c) => write!(self.out, " + {c}*{name}")?,
                    }
                }
            }
        }
        if paren {
            self.out.write_str(")")?;
        }
        Ok(())
    }
}
