//! Quadrature representation: a loop over integration points with tabulated
//! basis functions, zero-column elimination and loop-invariant hoisting.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::elements::{ElementError, FiniteElement, LagrangeBasis};
use crate::kernel::{Entry, Expr, Index, Kernel, KernelBuilder, MapId, Representation, SlotId, Stmt, TableId, VarId};
use crate::lowering::{ConcreteFactor, MonomialSum, Role};
use crate::quadrature::QuadratureRule;


/// Tabulated values below this magnitude count as zero.
pub const ZERO_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureBuildError {
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error("quadrature rule has no points")]
    EmptyRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QuadratureOptions {
    /// Drop basis functions that vanish at every point.
    pub zero_elimination: bool,
    /// Compute geometry and coefficient values outside the `i, j` loops.
    pub hoisting: bool,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            zero_elimination: true,
            hoisting: true,
        }
    }
}

/// Surviving columns of a `[point][basis]` table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonzeroColumnMap {
    pub columns: usize,
    /// Strictly increasing indices of the kept columns.
    pub nonzero: Vec<usize>,
    /// `[point][kept column]`
    pub table: Vec<Vec<f64>>,
}

impl NonzeroColumnMap {
    pub fn is_identity(&self) -> bool {
        self.nonzero.len() == self.columns
    }
}

/// Removes every column that is below [`ZERO_TOLERANCE`] at all points.
pub fn eliminate_zero_columns(table: &[Vec<f64>]) -> NonzeroColumnMap {
    let columns = table.first().map_or(0, Vec::len);
    let nonzero: Vec<usize> = (0..columns)
        .filter(|&c| table.iter().any(|row| row[c].abs() >= ZERO_TOLERANCE))
        .collect();
    let table = table
        .iter()
        .map(|row| nonzero.iter().map(|&c| row[c]).collect())
        .collect();
    NonzeroColumnMap {
        columns,
        nonzero,
        table,
    }
}

/// A tabulated factor: the table, its optional column map and loop extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Tab {
    table: TableId,
    map: Option<MapId>,
    extent: usize,
}

impl Tab {
    fn value(&self, ip: VarId, var: VarId) -> Expr {
        Expr::Table {
            table: self.table,
            index: vec![Index::Var(ip), Index::Var(var)],
        }
    }

    fn index(&self, var: VarId) -> Index {
        match self.map {
            Some(map) => Index::Mapped { map, var },
            None => Index::Var(var),
        }
    }
}

/// One integrand term at fixed reference directions.
#[derive(Debug, Clone)]
struct Term {
    constant: f64,
    test: ConcreteFactor,
    trial: Option<ConcreteFactor>,
    coefficients: Vec<ConcreteFactor>,
    denominators: Vec<ConcreteFactor>,
    jinv: Vec<(u8, u8)>,
    det_power: usize,
}

type TermKey = (Vec<ConcreteFactor>, Vec<(u8, u8)>, Vec<ConcreteFactor>, usize);

/// Concrete terms of the sum with identical factors merged and zeros dropped.
fn concrete_terms(sum: &MonomialSum) -> Vec<Term> {
    let d = sum.elements.dim();
    let mut merged: BTreeMap<TermKey, f64> = BTreeMap::new();
    for m in &sum.monomials {
        for t in m.concretize(d) {
            let mut basis = t.basis;
            basis.sort();
            let mut den = t.denominators;
            den.sort();
            *merged.entry((basis, t.jinv, den, t.det_power)).or_insert(0.0) += t.constant;
        }
    }
    let mut merged: Vec<_> = merged.into_iter().filter(|(_, c)| *c != 0.0).collect();
    // x-derivatives before y-derivatives, so tables and maps number naturally
    let order = |fs: &[ConcreteFactor]| -> Vec<(Role, usize, Vec<usize>)> {
        fs.iter().map(|f| (f.role, f.component, f.deriv.directions())).collect()
    };
    merged.sort_by(|(a, _), (b, _)| (order(&a.0), &a.1, order(&a.2)).cmp(&(order(&b.0), &b.1, order(&b.2))));
    merged
        .into_iter()
        .map(|((basis, jinv, denominators, det_power), constant)| {
            let test = *basis.iter().find(|f| f.role == Role::Test).expect("every term has a test factor");
            let trial = basis.iter().find(|f| f.role == Role::Trial).copied();
            let coefficients = basis
                .iter()
                .filter(|f| matches!(f.role, Role::Coefficient(_)))
                .copied()
                .collect();
            Term {
                constant,
                test,
                trial,
                coefficients,
                denominators,
                jinv,
                det_power,
            }
        })
        .collect()
}

struct Ctx<'a> {
    sum: &'a MonomialSum,
    rule: &'a QuadratureRule,
    opts: QuadratureOptions,
    b: KernelBuilder,
    bases: HashMap<FiniteElement, LagrangeBasis>,
    tabs: HashMap<ConcreteFactor, Option<Tab>>,
    /// Role letters using each table, for naming.
    users: BTreeMap<TableId, String>,
    ip: VarId,
    i: VarId,
    j: VarId,
    r: VarId,
    weights: TableId,
}

impl Ctx<'_> {
    /// Tabulates a factor at the rule points. `None` when elimination
    /// removed every column.
    fn tab(&mut self, f: &ConcreteFactor) -> Result<Option<Tab>, QuadratureBuildError> {
        if let Some(t) = self.tabs.get(f) {
            return Ok(*t);
        }
        let element = *self.sum.elements.element(f.role);
        if !self.bases.contains_key(&element) {
            self.bases.insert(element, LagrangeBasis::new(element)?);
        }
        let full = self.bases[&element].table(f.component, f.deriv, &self.rule.points)?;
        let (data, map) = if self.opts.zero_elimination {
            let nz = eliminate_zero_columns(&full);
            if nz.nonzero.is_empty() {
                self.tabs.insert(*f, None);
                return Ok(None);
            }
            let map = (!nz.is_identity()).then(|| self.b.map(nz.nonzero.clone()));
            (nz.table, map)
        } else {
            (full, None)
        };
        let extent = data[0].len();
        let shape = vec![data.len(), extent];
        let table = self.b.table("Psi", shape, data.concat());
        let letter = match f.role {
            Role::Test => 'v',
            Role::Trial => 'u',
            Role::Coefficient(_) => 'w',
        };
        let users = self.users.entry(table).or_default();
        if !users.contains(letter) {
            users.push(letter);
        }
        let tab = Tab { table, map, extent };
        self.tabs.insert(*f, Some(tab));
        Ok(Some(tab))
    }

    /// Statements computing a coefficient value at the current point.
    fn coefficient_stmts(&mut self, f: &ConcreteFactor, slot: SlotId) -> Result<Vec<Stmt>, QuadratureBuildError> {
        let Role::Coefficient(id) = f.role else {
            unreachable!("only coefficient factors are interpolated")
        };
        let mut out = vec![Stmt::Declare {
            slot,
            value: Expr::Lit(0.0),
        }];
        if let Some(tab) = self.tab(f)? {
            out.push(Stmt::Loop {
                var: self.r,
                extent: tab.extent,
                body: vec![Stmt::Update {
                    slot,
                    value: Expr::mul(
                        tab.value(self.ip, self.r),
                        Expr::Coefficient {
                            id,
                            dof: tab.index(self.r),
                        },
                    ),
                }],
            });
        }
        Ok(out)
    }

    fn weight(&self) -> Expr {
        if self.rule.len() == 1 {
            Expr::Table {
                table: self.weights,
                index: vec![],
            }
        } else {
            Expr::Table {
                table: self.weights,
                index: vec![Index::Var(self.ip)],
            }
        }
    }

    /// `c * Jinv... * det...`, without the weight.
    fn geometry_factors(&self, t: &Term) -> Vec<Expr> {
        let mut f = Vec::new();
        if t.constant != 1.0 {
            f.push(Expr::Lit(t.constant));
        }
        f.extend(t.jinv.iter().map(|&(a, b)| Expr::Jinv(a, b)));
        f.extend(std::iter::repeat(Expr::Det).take(t.det_power));
        f
    }

    /// Whether a term vanishes because one of its numerator tables is empty.
    fn term_tabs(&mut self, t: &Term) -> Result<Option<(Tab, Option<Tab>)>, QuadratureBuildError> {
        let Some(test) = self.tab(&t.test)? else { return Ok(None) };
        let trial = match &t.trial {
            Some(f) => match self.tab(f)? {
                Some(tab) => Some(tab),
                None => return Ok(None),
            },
            None => None,
        };
        for f in &t.coefficients {
            if self.tab(f)?.is_none() {
                return Ok(None);
            }
        }
        Ok(Some((test, trial)))
    }

    fn entry(&self, test: &Tab, trial: Option<&Tab>) -> Entry {
        let mut idx = vec![test.index(self.i)];
        if let Some(tr) = trial {
            idx.push(tr.index(self.j));
        }
        Entry(idx)
    }

    fn nest(&self, test_extent: usize, trial_extent: Option<usize>, body: Vec<Stmt>) -> Stmt {
        let inner = match trial_extent {
            Some(n) => vec![Stmt::Loop {
                var: self.j,
                extent: n,
                body,
            }],
            None => body,
        };
        Stmt::Loop {
            var: self.i,
            extent: test_extent,
            body: inner,
        }
    }
}

fn factor_product(slots: &[SlotId]) -> Option<Expr> {
    Expr::product(slots.iter().map(|&s| Expr::Slot(s)).collect())
}

type NestKey = (usize, Option<usize>);

/// Builds the quadrature kernel of a lowered form on the given rule.
pub fn build_quadrature_kernel(
    sum: &MonomialSum,
    rule: &QuadratureRule,
    opts: QuadratureOptions,
) -> Result<Kernel, QuadratureBuildError> {
    if rule.is_empty() {
        return Err(QuadratureBuildError::EmptyRule);
    }
    let els = &sum.elements;
    let mut b = KernelBuilder::new(
        "tabulate_tensor",
        Representation::Quadrature,
        els.cell,
        els.test.space_dim(),
        els.trial.map(|e| e.space_dim()),
        els.coefficients.iter().map(FiniteElement::space_dim).collect(),
    );
    let npts = rule.len();
    let weights = if npts == 1 {
        b.table("W0", vec![], rule.weights.clone())
    } else {
        b.table(format!("W{npts}"), vec![npts], rule.weights.clone())
    };
    b.note(format!(
        "{npts} integration point{}, exact to degree {}",
        if npts == 1 { "" } else { "s" },
        rule.degree
    ));
    let ip = b.var("ip");
    let i = b.var("i");
    let j = b.var("j");
    let r = b.var("r");
    let mut cx = Ctx {
        sum,
        rule,
        opts,
        b,
        bases: HashMap::new(),
        tabs: HashMap::new(),
        users: BTreeMap::new(),
        ip,
        i,
        j,
        r,
        weights,
    };
    let terms = concrete_terms(sum);
    let body = if opts.hoisting {
        hoisted(&mut cx, &terms)?
    } else {
        inlined(&mut cx, &terms)?
    };
    let Ctx { b, users, .. } = cx;
    let mut k = b.finish(body);
    let mut taken: HashMap<String, usize> = HashMap::new();
    for (id, letters) in users {
        let base = format!("Psi_{letters}");
        let n = taken.entry(base.clone()).or_insert(0);
        k.tables[id].name = if *n == 0 { base } else { format!("{base}_{n}") };
        *n += 1;
    }
    Ok(k)
}

/// Geometry constants at cell scope, coefficients and point scalars at
/// point scope, and only `Psi * Psi * Gip` in the innermost loops.
fn hoisted(cx: &mut Ctx, terms: &[Term]) -> Result<Vec<Stmt>, QuadratureBuildError> {
    let single_point = cx.rule.len() == 1;
    let mut cell = Vec::new();
    let mut g_slots: HashMap<String, SlotId> = HashMap::new();
    let mut point_f = Vec::new();
    let mut f_slots: HashMap<ConcreteFactor, SlotId> = HashMap::new();

    // (test, trial) -> F-key -> geometry constants
    type FKey = (Vec<SlotId>, Vec<SlotId>);
    let mut groups: Vec<((Tab, Option<Tab>), Vec<(FKey, Vec<SlotId>)>)> = Vec::new();

    for t in terms {
        let Some((test, trial)) = cx.term_tabs(t)? else { continue };
        let mut g = cx.geometry_factors(t);
        if single_point {
            // weight folded into the constant, after the Jacobian entries
            let at = g.len() - t.det_power;
            g.insert(at, cx.weight());
        }
        let value = Expr::product(g).expect("every term carries det");
        let key = value.key();
        let g_slot = match g_slots.get(&key) {
            Some(&s) => s,
            None => {
                let s = cx.b.slot(format!("G{}", g_slots.len()));
                cell.push(Stmt::Const { slot: s, value });
                g_slots.insert(key, s);
                s
            }
        };
        let mut fkey: FKey = (Vec::new(), Vec::new());
        for (f, dst) in t
            .coefficients
            .iter()
            .map(|f| (f, 0))
            .chain(t.denominators.iter().map(|f| (f, 1)))
        {
            let slot = match f_slots.get(f) {
                Some(&s) => s,
                None => {
                    let s = cx.b.slot(format!("F{}", f_slots.len()));
                    point_f.extend(cx.coefficient_stmts(f, s)?);
                    f_slots.insert(*f, s);
                    s
                }
            };
            if dst == 0 {
                fkey.0.push(slot);
            } else {
                fkey.1.push(slot);
            }
        }
        let gkey = (test, trial);
        let pos = match groups.iter().position(|(k, _)| *k == gkey) {
            Some(p) => p,
            None => {
                groups.push((gkey, Vec::new()));
                groups.len() - 1
            }
        };
        let by_f = &mut groups[pos].1;
        match by_f.iter_mut().find(|(k, _)| *k == fkey) {
            Some((_, gs)) => gs.push(g_slot),
            None => by_f.push((fkey, vec![g_slot])),
        }
    }

    let mut point_g = Vec::new();
    let mut gip_slots: HashMap<String, SlotId> = HashMap::new();
    let mut nests: Vec<(NestKey, Vec<Stmt>)> = Vec::new();
    for ((test, trial), by_f) in groups {
        let parts: Vec<Expr> = by_f
            .into_iter()
            .map(|((num, den), gs)| {
                let g = Expr::sum(gs.into_iter().map(Expr::Slot).collect()).expect("group is non-empty");
                let mut e = match factor_product(&num) {
                    Some(f) => Expr::mul(g, f),
                    None => g,
                };
                if let Some(d) = factor_product(&den) {
                    e = Expr::div(e, d);
                }
                e
            })
            .collect();
        let mut scalar = Expr::sum(parts).expect("group is non-empty");
        if !single_point {
            scalar = Expr::mul(scalar, cx.weight());
        }
        let scalar = match scalar {
            Expr::Slot(s) => s,
            value => {
                let key = value.key();
                match gip_slots.get(&key) {
                    Some(&s) => s,
                    None => {
                        let s = cx.b.slot(format!("Gip{}", gip_slots.len()));
                        point_g.push(Stmt::Const { slot: s, value });
                        gip_slots.insert(key, s);
                        s
                    }
                }
            }
        };
        let mut value = test.value(cx.ip, cx.i);
        if let Some(tr) = &trial {
            value = Expr::mul(value, tr.value(cx.ip, cx.j));
        }
        let stmt = Stmt::Accumulate {
            entry: cx.entry(&test, trial.as_ref()),
            value: Expr::mul(value, Expr::Slot(scalar)),
        };
        push_nest(&mut nests, (test.extent, trial.map(|t| t.extent)), stmt);
    }

    let mut point = point_f;
    point.extend(point_g);
    point.extend(nests.into_iter().map(|((n, m), body)| cx.nest(n, m, body)));
    cell.push(Stmt::Loop {
        var: cx.ip,
        extent: cx.rule.len(),
        body: point,
    });
    Ok(cell)
}

fn push_nest(nests: &mut Vec<(NestKey, Vec<Stmt>)>, key: NestKey, stmt: Stmt) {
    match nests.iter_mut().find(|(k, _)| *k == key) {
        Some((_, body)) => body.push(stmt),
        None => nests.push((key, vec![stmt])),
    }
}

/// Every term evaluated in full inside the innermost loop.
fn inlined(cx: &mut Ctx, terms: &[Term]) -> Result<Vec<Stmt>, QuadratureBuildError> {
    // nest -> (coefficient factors needed, accumulations)
    let mut nests: Vec<(NestKey, Vec<ConcreteFactor>, Vec<(Tab, Option<Tab>, &Term)>)> = Vec::new();
    for t in terms {
        let Some((test, trial)) = cx.term_tabs(t)? else { continue };
        let key = (test.extent, trial.map(|t| t.extent));
        let pos = match nests.iter().position(|(k, _, _)| *k == key) {
            Some(p) => p,
            None => {
                nests.push((key, Vec::new(), Vec::new()));
                nests.len() - 1
            }
        };
        let (_, fs, accs) = &mut nests[pos];
        for f in t.coefficients.iter().chain(&t.denominators) {
            if !fs.contains(f) {
                fs.push(*f);
            }
        }
        accs.push((test, trial, t));
    }
    let mut f_slots: HashMap<ConcreteFactor, SlotId> = HashMap::new();
    let mut point = Vec::new();
    for ((n, m), fs, accs) in nests {
        let mut inner = Vec::new();
        for f in &fs {
            let slot = match f_slots.get(f) {
                Some(&s) => s,
                None => {
                    let s = cx.b.slot(format!("F{}", f_slots.len()));
                    f_slots.insert(*f, s);
                    s
                }
            };
            inner.extend(cx.coefficient_stmts(f, slot)?);
        }
        for (test, trial, t) in accs {
            let mut factors = vec![test.value(cx.ip, cx.i)];
            if let Some(tr) = &trial {
                factors.push(tr.value(cx.ip, cx.j));
            }
            factors.extend(cx.geometry_factors(t));
            factors.push(cx.weight());
            factors.extend(t.coefficients.iter().map(|f| Expr::Slot(f_slots[f])));
            let mut value = Expr::product(factors).expect("non-empty");
            if let Some(d) = Expr::product(t.denominators.iter().map(|f| Expr::Slot(f_slots[f])).collect()) {
                value = Expr::div(value, d);
            }
            inner.push(Stmt::Accumulate {
                entry: cx.entry(&test, trial.as_ref()),
                value,
            });
        }
        point.push(cx.nest(n, m, inner));
    }
    Ok(vec![Stmt::Loop {
        var: cx.ip,
        extent: cx.rule.len(),
        body: point,
    }])
}
