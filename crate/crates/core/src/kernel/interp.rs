use serde::Serialize;

use super::{CellGeometry, Entry, Expr, Index, Kernel, KernelError, Stmt};

/// Operation counts: `+`/`-` (including `+=` and negation) and `*`/`/`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FlopTally {
    pub adds: u64,
    pub muls: u64,
}

impl FlopTally {
    pub fn total(&self) -> u64 {
        self.adds + self.muls
    }
}

trait Tally {
    fn add(&mut self);
    fn mul(&mut self);
}

struct NoTally;

impl Tally for NoTally {
    #[inline(always)]
    fn add(&mut self) {}
    #[inline(always)]
    fn mul(&mut self) {}
}

impl Tally for FlopTally {
    #[inline(always)]
    fn add(&mut self) {
        self.adds += 1;
    }
    #[inline(always)]
    fn mul(&mut self) {
        self.muls += 1;
    }
}

/// Reusable interpreter state for one kernel.
#[derive(Debug, Clone)]
pub struct Scratch {
    slots: Vec<f64>,
    vars: Vec<usize>,
}

impl Scratch {
    pub fn for_kernel(k: &Kernel) -> Scratch {
        Scratch {
            slots: vec![0.0; k.slots.len()],
            vars: vec![0; k.loop_vars.len()],
        }
    }
}

/// Statement path (indices into nested bodies) of a failing division.
struct DivZero {
    path: Vec<usize>,
}

struct Ctx<'a> {
    k: &'a Kernel,
    g: &'a CellGeometry,
    w: &'a [Vec<f64>],
    strides: Vec<usize>,
}

fn check_inputs(k: &Kernel, g: &CellGeometry, w: &[Vec<f64>]) -> Result<(), KernelError> {
    if g.dim() != k.dim() {
        return Err(KernelError::DimensionMismatch {
            expected: k.dim(),
            got: g.dim(),
        });
    }
    if w.len() != k.coefficient_dims.len() {
        return Err(KernelError::BadCoefficients(format!(
            "kernel takes {} coefficients, got {}",
            k.coefficient_dims.len(),
            w.len()
        )));
    }
    for (i, (dofs, &n)) in w.iter().zip(&k.coefficient_dims).enumerate() {
        if dofs.len() != n {
            return Err(KernelError::BadCoefficients(format!(
                "coefficient {i} needs {n} dofs, got {}",
                dofs.len()
            )));
        }
    }
    Ok(())
}

fn run<T: Tally>(
    k: &Kernel,
    g: &CellGeometry,
    w: &[Vec<f64>],
    scratch: &mut Scratch,
    out: &mut [f64],
    tally: &mut T,
) -> Result<(), KernelError> {
    check_inputs(k, g, w)?;
    if out.len() != k.tensor_len() {
        return Err(KernelError::Invalid(format!(
            "output buffer has {} entries, kernel writes {}",
            out.len(),
            k.tensor_len()
        )));
    }
    out.fill(0.0);
    let ctx = Ctx {
        k,
        g,
        w,
        strides: k.strides(),
    };
    exec_block(&ctx, &k.body, scratch, out, tally).map_err(|e| KernelError::DivisionByZero {
        location: describe(k, &e.path),
    })
}

fn describe(k: &Kernel, path: &[usize]) -> String {
    let mut body = &k.body;
    let mut parts = Vec::new();
    let mut last = String::new();
    for &i in path {
        parts.push(i.to_string());
        match &body[i] {
            Stmt::Loop { body: b, var, .. } => {
                last = format!("loop {}", k.loop_vars[*var]);
                body = b;
            }
            Stmt::Const { slot, .. } | Stmt::Declare { slot, .. } | Stmt::Update { slot, .. } => {
                last = k.slots[*slot].clone();
            }
            Stmt::Accumulate { .. } | Stmt::Assign { .. } => last = "A".into(),
        }
    }
    format!("statement {} (`{}`)", parts.join("."), last)
}

fn exec_block<T: Tally>(
    ctx: &Ctx,
    stmts: &[Stmt],
    s: &mut Scratch,
    out: &mut [f64],
    tally: &mut T,
) -> Result<(), DivZero> {
    for (i, stmt) in stmts.iter().enumerate() {
        exec(ctx, stmt, s, out, tally).map_err(|mut e| {
            e.path.insert(0, i);
            e
        })?;
    }
    Ok(())
}

fn exec<T: Tally>(ctx: &Ctx, stmt: &Stmt, s: &mut Scratch, out: &mut [f64], tally: &mut T) -> Result<(), DivZero> {
    match stmt {
        Stmt::Const { slot, value } | Stmt::Declare { slot, value } => {
            s.slots[*slot] = eval(ctx, value, s, tally)?;
        }
        Stmt::Update { slot, value } => {
            let v = eval(ctx, value, s, tally)?;
            tally.add();
            s.slots[*slot] += v;
        }
        Stmt::Loop { var, extent, body } => {
            for it in 0..*extent {
                s.vars[*var] = it;
                exec_block(ctx, body, s, out, tally)?;
            }
        }
        Stmt::Accumulate { entry, value } => {
            let v = eval(ctx, value, s, tally)?;
            tally.add();
            out[flat(ctx, entry, s)] += v;
        }
        Stmt::Assign { entry, value } => {
            let v = eval(ctx, value, s, tally)?;
            out[flat(ctx, entry, s)] = v;
        }
    }
    Ok(())
}

#[inline]
fn index(ctx: &Ctx, i: &Index, s: &Scratch) -> usize {
    match *i {
        Index::Fixed(k) => k,
        Index::Var(v) => s.vars[v],
        Index::Mapped { map, var } => ctx.k.maps[map].indices[s.vars[var]],
    }
}

#[inline]
fn flat(ctx: &Ctx, entry: &Entry, s: &Scratch) -> usize {
    entry
        .0
        .iter()
        .zip(&ctx.strides)
        .map(|(i, st)| index(ctx, i, s) * st)
        .sum()
}

fn eval<T: Tally>(ctx: &Ctx, e: &Expr, s: &Scratch, tally: &mut T) -> Result<f64, DivZero> {
    Ok(match e {
        Expr::Lit(v) => *v,
        Expr::Slot(k) => s.slots[*k],
        Expr::Table { table, index: idx } => {
            let t = &ctx.k.tables[*table];
            let mut off = 0;
            for (dim, i) in t.shape.iter().zip(idx) {
                off = off * dim + index(ctx, i, s);
            }
            t.data[off]
        }
        Expr::Coefficient { id, dof } => ctx.w[*id][index(ctx, dof, s)],
        Expr::Jinv(a, b) => ctx.g.jinv[*a as usize][*b as usize],
        Expr::Det => ctx.g.det,
        Expr::Add(a, b) => {
            let x = eval(ctx, a, s, tally)?;
            let y = eval(ctx, b, s, tally)?;
            tally.add();
            x + y
        }
        Expr::Sub(a, b) => {
            let x = eval(ctx, a, s, tally)?;
            let y = eval(ctx, b, s, tally)?;
            tally.add();
            x - y
        }
        Expr::Mul(a, b) => {
            let x = eval(ctx, a, s, tally)?;
            let y = eval(ctx, b, s, tally)?;
            tally.mul();
            x * y
        }
        Expr::Div(a, b) => {
            let x = eval(ctx, a, s, tally)?;
            let y = eval(ctx, b, s, tally)?;
            if y == 0.0 {
                return Err(DivZero { path: vec![] });
            }
            tally.mul();
            x / y
        }
        Expr::Neg(a) => {
            let x = eval(ctx, a, s, tally)?;
            tally.add();
            -x
        }
        Expr::Contract(terms) => {
            let mut acc = 0.0;
            for (n, &(c, slot)) in terms.iter().enumerate() {
                let v = s.slots[slot];
                if n == 0 {
                    acc = if c == 1.0 {
                        v
                    } else if c == -1.0 {
                        tally.add();
                        -v
                    } else {
                        tally.mul();
                        c * v
                    };
                } else {
                    tally.add();
                    if c == 1.0 {
                        acc += v;
                    } else if c == -1.0 {
                        acc -= v;
                    } else {
                        tally.mul();
                        acc += c * v;
                    }
                }
            }
            acc
        }
    })
}

/// Runs the kernel on one cell and returns the element tensor.
pub fn interpret(k: &Kernel, g: &CellGeometry, w: &[Vec<f64>]) -> Result<Vec<f64>, KernelError> {
    let mut out = vec![0.0; k.tensor_len()];
    let mut scratch = Scratch::for_kernel(k);
    run(k, g, w, &mut scratch, &mut out, &mut NoTally)?;
    Ok(out)
}

/// Like [`interpret`] but reusing caller-owned buffers.
pub fn interpret_into(
    k: &Kernel,
    g: &CellGeometry,
    w: &[Vec<f64>],
    scratch: &mut Scratch,
    out: &mut [f64],
) -> Result<(), KernelError> {
    run(k, g, w, scratch, out, &mut NoTally)
}

/// Runs the kernel while counting every arithmetic operation performed.
pub fn interpret_counting(
    k: &Kernel,
    g: &CellGeometry,
    w: &[Vec<f64>],
) -> Result<(Vec<f64>, FlopTally), KernelError> {
    let mut out = vec![0.0; k.tensor_len()];
    let mut scratch = Scratch::for_kernel(k);
    let mut tally = FlopTally::default();
    run(k, g, w, &mut scratch, &mut out, &mut tally)?;
    Ok((out, tally))
}

fn expr_flops(e: &Expr) -> FlopTally {
    let mut t = FlopTally::default();
    let mut stack = vec![e];
    while let Some(e) = stack.pop() {
        match e {
            Expr::Lit(_) | Expr::Slot(_) | Expr::Table { .. } | Expr::Coefficient { .. } | Expr::Jinv(..) | Expr::Det => {}
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                t.adds += 1;
                stack.push(a);
                stack.push(b);
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                t.muls += 1;
                stack.push(a);
                stack.push(b);
            }
            Expr::Neg(a) => {
                t.adds += 1;
                stack.push(a);
            }
            Expr::Contract(terms) => {
                for (n, &(c, _)) in terms.iter().enumerate() {
                    if n > 0 {
                        t.adds += 1;
                    }
                    if c.abs() != 1.0 {
                        t.muls += 1;
                    } else if n == 0 && c == -1.0 {
                        t.adds += 1;
                    }
                }
            }
        }
    }
    t
}

fn block_flops(stmts: &[Stmt]) -> FlopTally {
    let mut t = FlopTally::default();
    for s in stmts {
        let st = match s {
            Stmt::Const { value, .. } | Stmt::Declare { value, .. } | Stmt::Assign { value, .. } => expr_flops(value),
            Stmt::Update { value, .. } | Stmt::Accumulate { value, .. } => {
                let mut f = expr_flops(value);
                f.adds += 1;
                f
            }
            Stmt::Loop { extent, body, .. } => {
                let b = block_flops(body);
                FlopTally {
                    adds: b.adds * *extent as u64,
                    muls: b.muls * *extent as u64,
                }
            }
        };
        t.adds += st.adds;
        t.muls += st.muls;
    }
    t
}

/// Static operation count: loop bodies multiplied by their extents, `+=`
/// counted as one operation, `-` as `+` and `/` as `*`.
pub fn count_flops(k: &Kernel) -> FlopTally {
    block_flops(&k.body)
}
