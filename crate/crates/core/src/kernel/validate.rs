use super::{Entry, Expr, Index, Kernel, KernelError, Stmt};

struct Scope {
    defined: Vec<bool>,
    /// Extent of each bound loop variable, `None` when unbound.
    bound: Vec<Option<usize>>,
}

/// Checks that a kernel is well formed: every slot is defined before use,
/// loop variables are bound where used, and all constant indices are in
/// range for their tables, maps, coefficients and the element tensor.
pub fn validate(k: &Kernel) -> Result<(), KernelError> {
    for t in &k.tables {
        if t.shape.iter().product::<usize>() != t.data.len() {
            return Err(KernelError::Invalid(format!(
                "table {} has shape {:?} but {} values",
                t.name,
                t.shape,
                t.data.len()
            )));
        }
    }
    let mut scope = Scope {
        defined: vec![false; k.slots.len()],
        bound: vec![None; k.loop_vars.len()],
    };
    block(k, &k.body, &mut scope)
}

fn invalid(msg: String) -> KernelError {
    KernelError::Invalid(msg)
}

fn block(k: &Kernel, stmts: &[Stmt], scope: &mut Scope) -> Result<(), KernelError> {
    for s in stmts {
        match s {
            Stmt::Const { slot, value } | Stmt::Declare { slot, value } => {
                check_slot(k, *slot)?;
                expr(k, value, scope)?;
                scope.defined[*slot] = true;
            }
            Stmt::Update { slot, value } => {
                check_slot(k, *slot)?;
                if !scope.defined[*slot] {
                    return Err(invalid(format!("update of undefined `{}`", k.slots[*slot])));
                }
                expr(k, value, scope)?;
            }
            Stmt::Loop { var, extent, body } => {
                if *var >= k.loop_vars.len() {
                    return Err(invalid(format!("unknown loop variable {var}")));
                }
                if scope.bound[*var].is_some() {
                    return Err(invalid(format!("loop variable `{}` rebound", k.loop_vars[*var])));
                }
                scope.bound[*var] = Some(*extent);
                block(k, body, scope)?;
                scope.bound[*var] = None;
            }
            Stmt::Accumulate { entry, value } | Stmt::Assign { entry, value } => {
                check_entry(k, entry, scope)?;
                expr(k, value, scope)?;
            }
        }
    }
    Ok(())
}

fn check_slot(k: &Kernel, slot: usize) -> Result<(), KernelError> {
    if slot >= k.slots.len() {
        return Err(invalid(format!("unknown slot {slot}")));
    }
    Ok(())
}

/// Largest value the index can take, checking bindings along the way.
fn max_index(k: &Kernel, i: &Index, scope: &Scope) -> Result<Option<usize>, KernelError> {
    let extent = |v: usize| -> Result<usize, KernelError> {
        match scope.bound.get(v) {
            Some(Some(n)) => Ok(*n),
            Some(None) => Err(invalid(format!("loop variable `{}` used outside its loop", k.loop_vars[v]))),
            None => Err(invalid(format!("unknown loop variable {v}"))),
        }
    };
    match *i {
        Index::Fixed(n) => Ok(Some(n)),
        Index::Var(v) => Ok(extent(v)?.checked_sub(1)),
        Index::Mapped { map, var } => {
            let n = extent(var)?;
            let m = k.maps.get(map).ok_or_else(|| invalid(format!("unknown map {map}")))?;
            if n > m.indices.len() {
                return Err(invalid(format!(
                    "loop of extent {n} over {} of length {}",
                    m.name,
                    m.indices.len()
                )));
            }
            Ok(m.indices[..n].iter().copied().max())
        }
    }
}

fn in_range(k: &Kernel, i: &Index, len: usize, what: &str, scope: &Scope) -> Result<(), KernelError> {
    if let Some(max) = max_index(k, i, scope)? {
        if max >= len {
            return Err(invalid(format!("index {max} out of range for {what} of length {len}")));
        }
    }
    Ok(())
}

fn check_entry(k: &Kernel, e: &Entry, scope: &Scope) -> Result<(), KernelError> {
    let dims: Vec<usize> = match k.cols {
        Some(c) => vec![k.rows, c],
        None => vec![k.rows],
    };
    if e.0.len() != dims.len() {
        return Err(invalid(format!(
            "tensor entry has {} indices, expected {}",
            e.0.len(),
            dims.len()
        )));
    }
    for (i, &n) in e.0.iter().zip(&dims) {
        in_range(k, i, n, "A", scope)?;
    }
    Ok(())
}

fn expr(k: &Kernel, e: &Expr, scope: &Scope) -> Result<(), KernelError> {
    match e {
        Expr::Lit(_) | Expr::Det => Ok(()),
        Expr::Jinv(a, b) => {
            let d = k.dim() as u8;
            if *a >= d || *b >= d {
                return Err(invalid(format!("Jinv_{a}{b} out of range in {d}D")));
            }
            Ok(())
        }
        Expr::Slot(s) => use_slot(k, *s, scope),
        Expr::Table { table, index } => {
            let t = k.tables.get(*table).ok_or_else(|| invalid(format!("unknown table {table}")))?;
            if index.len() != t.shape.len() {
                return Err(invalid(format!(
                    "table {} indexed with {} indices, has rank {}",
                    t.name,
                    index.len(),
                    t.shape.len()
                )));
            }
            for (i, &n) in index.iter().zip(&t.shape) {
                in_range(k, i, n, &t.name, scope)?;
            }
            Ok(())
        }
        Expr::Coefficient { id, dof } => {
            let n = *k
                .coefficient_dims
                .get(*id)
                .ok_or_else(|| invalid(format!("unknown coefficient w{id}")))?;
            in_range(k, dof, n, &format!("w[{id}]"), scope)
        }
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            expr(k, a, scope)?;
            expr(k, b, scope)
        }
        Expr::Neg(a) => expr(k, a, scope),
        Expr::Contract(terms) => terms.iter().try_for_each(|&(_, s)| use_slot(k, s, scope)),
    }
}

fn use_slot(k: &Kernel, s: usize, scope: &Scope) -> Result<(), KernelError> {
    check_slot(k, s)?;
    if !scope.defined[s] {
        return Err(invalid(format!("`{}` used before definition", k.slots[s])));
    }
    Ok(())
}
