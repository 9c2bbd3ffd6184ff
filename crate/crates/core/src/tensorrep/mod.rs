//! Tensor contraction representation: the element tensor as a contraction
//! of a precomputed reference tensor with a per-cell geometry tensor.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::elements::{DerivCounts, ElementError, FiniteElement, LagrangeBasis};
use crate::kernel::{CellGeometry, Entry, Expr, Index, Kernel, KernelBuilder, Representation, SlotId, Stmt};
use crate::lowering::{BasisFactor, ElementTable, GeometryFactor, Monomial, MonomialSum, RefIndex, Role};
use crate::quadrature::simplex_rule;


/// Reference-tensor entries below this magnitude are set to exactly zero.
pub const SNAP_TOLERANCE: f64 = 1e-12;

/// Largest number of stored reference-tensor entries per monomial, and of
/// contraction terms per kernel.
pub const ENTRY_BUDGET: usize = 12_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("coefficient division cannot be expressed in the tensor representation")]
    UnsupportedDivision,
    #[error("tensor representation needs {entries} entries, over the budget of {limit}")]
    TooLarge { entries: usize, limit: usize },
    #[error(transparent)]
    Element(#[from] ElementError),
}

/// Nonzero block of one basis-function index: a value component only
/// touches the dofs of that component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Slice {
    pub offset: usize,
    pub len: usize,
    pub full: usize,
}

impl Slice {
    fn of(element: &FiniteElement, component: usize) -> Slice {
        let ns = element.scalar_dim();
        Slice {
            offset: component * ns,
            len: ns,
            full: element.space_dim(),
        }
    }

    fn local(&self, i: usize) -> Option<usize> {
        (i >= self.offset && i < self.offset + self.len).then(|| i - self.offset)
    }
}

/// `A0[i1, i2, k..., a...]`: integral over the reference cell of the
/// product of basis factors, indexed by test dof, trial dof, one dof per
/// coefficient factor and one reference direction per bound index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceTensor {
    /// Basis factors in index order: test, trial, then coefficients.
    pub factors: Vec<BasisFactor>,
    pub slices: Vec<Slice>,
    pub dim: usize,
    pub bound: u8,
    /// Compact storage `[assignment][factor dofs...]`, row-major.
    data: Vec<f64>,
    /// Degree of the rule used to integrate it.
    pub degree: usize,
}

impl ReferenceTensor {
    /// Full extents: one per factor, then `dim` per bound index.
    pub fn extents(&self) -> Vec<usize> {
        let mut e: Vec<usize> = self.slices.iter().map(|s| s.full).collect();
        e.extend(std::iter::repeat(self.dim).take(self.bound as usize));
        e
    }

    pub fn rank(&self) -> usize {
        self.slices.len() + self.bound as usize
    }

    fn block(&self) -> usize {
        self.slices.iter().map(|s| s.len).product()
    }

    /// Number of stored entries (the nonzero component blocks).
    pub fn stored_len(&self) -> usize {
        self.data.len()
    }

    /// Entry at a full multi-index; zero outside the component blocks.
    pub fn get(&self, index: &[usize]) -> f64 {
        assert_eq!(index.len(), self.rank(), "reference tensor index rank");
        let nf = self.slices.len();
        let mut flat = 0;
        for (s, &i) in self.slices.iter().zip(index) {
            match s.local(i) {
                Some(l) => flat = flat * s.len + l,
                None => return 0.0,
            }
        }
        let b = index[nf..].iter().fold(0, |acc, &a| acc * self.dim + a);
        self.data[b * self.block() + flat]
    }
}

fn ordered_factors(m: &Monomial) -> Vec<BasisFactor> {
    let mut out: Vec<BasisFactor> = m.basis.iter().filter(|f| f.role == Role::Test).cloned().collect();
    out.extend(m.basis.iter().filter(|f| f.role == Role::Trial).cloned());
    out.extend(m.basis.iter().filter(|f| matches!(f.role, Role::Coefficient(_))).cloned());
    out
}

fn deriv_counts(f: &BasisFactor, assignment: &[u8]) -> DerivCounts {
    f.deriv.iter().fold(DerivCounts::NONE, |c, d| {
        c.with(match *d {
            RefIndex::Fixed(k) => k as usize,
            RefIndex::Bound(b) => assignment[b as usize] as usize,
        })
    })
}

fn assignment_of(mut flat: usize, dim: usize, bound: u8) -> Vec<u8> {
    let mut a = vec![0u8; bound as usize];
    for slot in a.iter_mut().rev() {
        *slot = (flat % dim) as u8;
        flat /= dim;
    }
    a
}

/// Integrates the basis factors of a monomial on the reference cell.
pub fn reference_tensor(m: &Monomial, elements: &ElementTable) -> Result<ReferenceTensor, TensorError> {
    if m.has_denominators() {
        return Err(TensorError::UnsupportedDivision);
    }
    let dim = elements.dim();
    let factors = ordered_factors(m);
    let slices: Vec<Slice> = factors
        .iter()
        .map(|f| Slice::of(elements.element(f.role), f.component))
        .collect();
    let block: usize = slices.iter().map(|s| s.len).product();
    let na = dim.pow(m.bound as u32);
    let entries = block.saturating_mul(na);
    if entries > ENTRY_BUDGET {
        return Err(TensorError::TooLarge {
            entries,
            limit: ENTRY_BUDGET,
        });
    }
    let degree = factors
        .iter()
        .map(|f| elements.element(f.role).degree.saturating_sub(f.order()))
        .sum::<usize>()
        + 2;
    let rule = simplex_rule(elements.cell, degree);
    let mut bases: HashMap<FiniteElement, LagrangeBasis> = HashMap::new();
    for f in &factors {
        let el = *elements.element(f.role);
        if !bases.contains_key(&el) {
            bases.insert(el, LagrangeBasis::new(el)?);
        }
    }
    let mut data = vec![0.0; entries];
    let mut prod = Vec::with_capacity(block);
    let mut next = Vec::with_capacity(block);
    for b in 0..na {
        let assignment = assignment_of(b, dim, m.bound);
        let counts: Vec<DerivCounts> = factors.iter().map(|f| deriv_counts(f, &assignment)).collect();
        let out = &mut data[b * block..(b + 1) * block];
        for (x, wq) in rule.points.iter().zip(&rule.weights) {
            prod.clear();
            prod.push(*wq);
            for (f, c) in factors.iter().zip(&counts) {
                let vals = bases[elements.element(f.role)].eval_scalar(x, *c);
                next.clear();
                for p in &prod {
                    next.extend(vals.iter().map(|v| p * v));
                }
                std::mem::swap(&mut prod, &mut next);
            }
            for (o, p) in out.iter_mut().zip(&prod) {
                *o += p;
            }
        }
    }
    for v in &mut data {
        if v.abs() < SNAP_TOLERANCE {
            *v = 0.0;
        }
    }
    Ok(ReferenceTensor {
        factors,
        slices,
        dim,
        bound: m.bound,
        data,
        degree,
    })
}

/// `constant * prod Jinv * det^det_power` at one bound-index assignment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryTerm {
    pub constant: f64,
    /// `(reference, physical)` pairs, sorted.
    pub jinv: Vec<(u8, u8)>,
    pub det_power: usize,
}

/// `G^alpha = K_b(J) * prod_c w[id_c][k_c]` for `alpha = (k..., b)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryTensorSpec {
    pub dim: usize,
    pub bound: u8,
    /// `(coefficient id, dof block)` per coefficient factor.
    pub coefficients: Vec<(usize, Slice)>,
    /// Terms of `K_b` per bound assignment (last bound index fastest);
    /// physical directions are summed here.
    pub geometry: Vec<Vec<GeometryTerm>>,
}

impl GeometryTensorSpec {
    /// Full alpha extents: coefficient dofs then reference directions.
    pub fn extents(&self) -> Vec<usize> {
        let mut e: Vec<usize> = self.coefficients.iter().map(|(_, s)| s.full).collect();
        e.extend(std::iter::repeat(self.dim).take(self.bound as usize));
        e
    }

    /// Number of alpha entries.
    pub fn len(&self) -> usize {
        self.extents().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `K_b` on a cell.
    pub fn geometry_factor(&self, b: usize, g: &CellGeometry) -> f64 {
        self.geometry[b]
            .iter()
            .map(|t| {
                t.jinv.iter().fold(t.constant, |acc, &(a, p)| acc * g.jinv[a as usize][p as usize])
                    * g.det.powi(t.det_power as i32)
            })
            .sum()
    }

    /// `G^alpha` on a cell for a full alpha multi-index.
    pub fn evaluate(&self, alpha: &[usize], g: &CellGeometry, w: &[Vec<f64>]) -> f64 {
        let nc = self.coefficients.len();
        let b = alpha[nc..].iter().fold(0, |acc, &a| acc * self.dim + a);
        let coef: f64 = self.coefficients.iter().zip(alpha).map(|(&(id, _), &k)| w[id][k]).product();
        self.geometry_factor(b, g) * coef
    }
}

/// Geometry tensor of monomials sharing one list of basis factors. Their
/// bound indices line up, and their geometry factors add.
pub fn geometry_tensor_spec(monomials: &[Monomial], elements: &ElementTable) -> Result<GeometryTensorSpec, TensorError> {
    let first = monomials.first().expect("at least one monomial");
    if monomials.iter().any(Monomial::has_denominators) {
        return Err(TensorError::UnsupportedDivision);
    }
    debug_assert!(monomials.iter().all(|m| m.basis == first.basis && m.bound == first.bound));
    let dim = elements.dim();
    let coefficients = ordered_factors(first)
        .into_iter()
        .filter_map(|f| match f.role {
            Role::Coefficient(id) => Some((id, Slice::of(elements.element(f.role), f.component))),
            _ => None,
        })
        .collect();
    let na = dim.pow(first.bound as u32);
    let geometry = (0..na)
        .map(|b| {
            let assignment = assignment_of(b, dim, first.bound);
            monomials
                .iter()
                .map(|m| {
                    let mut jinv: Vec<(u8, u8)> = m
                        .geometry
                        .iter()
                        .filter_map(|g| match g {
                            GeometryFactor::Jinv { reference, physical } => Some((
                                match *reference {
                                    RefIndex::Fixed(k) => k,
                                    RefIndex::Bound(i) => assignment[i as usize],
                                },
                                *physical,
                            )),
                            GeometryFactor::Det => None,
                        })
                        .collect();
                    jinv.sort_unstable();
                    GeometryTerm {
                        constant: m.constant,
                        jinv,
                        det_power: m.geometry.iter().filter(|g| **g == GeometryFactor::Det).count(),
                    }
                })
                .collect()
        })
        .collect();
    Ok(GeometryTensorSpec {
        dim,
        bound: first.bound,
        coefficients,
        geometry,
    })
}

/// Monomials grouped by their basis factors, in canonical order.
pub fn group_monomials(sum: &MonomialSum) -> Vec<Vec<Monomial>> {
    let mut groups: BTreeMap<(Vec<BasisFactor>, u8), Vec<Monomial>> = BTreeMap::new();
    for m in &sum.monomials {
        groups.entry((m.basis.clone(), m.bound)).or_default().push(m.clone());
    }
    groups.into_values().collect()
}

/// One reference/geometry tensor pair of the contraction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorTerm {
    pub reference: ReferenceTensor,
    pub geometry: GeometryTensorSpec,
}

pub fn tensor_terms(sum: &MonomialSum) -> Result<Vec<TensorTerm>, TensorError> {
    if sum.has_denominators() {
        return Err(TensorError::UnsupportedDivision);
    }
    group_monomials(sum)
        .iter()
        .map(|ms| {
            Ok(TensorTerm {
                reference: reference_tensor(&ms[0], &sum.elements)?,
                geometry: geometry_tensor_spec(ms, &sum.elements)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TensorOptions {
    /// Omit contraction terms whose reference entry is exactly zero.
    pub drop_zeros: bool,
}

impl Default for TensorOptions {
    fn default() -> Self {
        TensorOptions { drop_zeros: true }
    }
}

struct Slots {
    b: KernelBuilder,
    stmts: Vec<Stmt>,
    by_key: HashMap<String, SlotId>,
    geometry_count: usize,
    weighted_count: usize,
}

impl Slots {
    fn get(&mut self, value: Expr, weighted: bool) -> SlotId {
        let key = value.key();
        if let Some(&s) = self.by_key.get(&key) {
            return s;
        }
        let name = if weighted {
            self.weighted_count += 1;
            format!("Gw{}", self.weighted_count - 1)
        } else {
            self.geometry_count += 1;
            format!("G{}", self.geometry_count - 1)
        };
        let s = self.b.slot(name);
        self.stmts.push(Stmt::Const { slot: s, value });
        self.by_key.insert(key, s);
        s
    }
}

fn geometry_expr(terms: &[GeometryTerm]) -> Expr {
    let p = terms[0].det_power;
    let factored = terms.iter().all(|t| t.det_power == p);
    let parts: Vec<Expr> = terms
        .iter()
        .map(|t| {
            let mut f = Vec::new();
            if t.constant != 1.0 || t.jinv.is_empty() {
                f.push(Expr::Lit(t.constant));
            }
            f.extend(t.jinv.iter().map(|&(a, b)| Expr::Jinv(a, b)));
            if !factored {
                f.extend(std::iter::repeat(Expr::Det).take(t.det_power));
            }
            Expr::product(f).expect("non-empty")
        })
        .collect();
    let sum = Expr::sum(parts).expect("at least one term");
    if !factored {
        return sum;
    }
    let mut f = Vec::new();
    if sum != Expr::Lit(1.0) {
        f.push(sum);
    }
    f.extend(std::iter::repeat(Expr::Det).take(p));
    Expr::product(f).unwrap_or(Expr::Lit(1.0))
}

/// Builds the unrolled contraction kernel.
pub fn build_tensor_kernel(sum: &MonomialSum, opts: TensorOptions) -> Result<Kernel, TensorError> {
    let terms = tensor_terms(sum)?;
    let els = &sum.elements;
    let rows = els.test.space_dim();
    let cols = els.trial.map(|e| e.space_dim());
    let ncols = cols.unwrap_or(1);

    // contraction length bound before unrolling anything: with dropping
    // only the stored blocks are visited, otherwise every (entry, alpha)
    let work: usize = terms
        .iter()
        .map(|t| {
            if opts.drop_zeros {
                t.reference.stored_len()
            } else {
                t.geometry.len().saturating_mul(rows * ncols)
            }
        })
        .fold(0usize, usize::saturating_add);
    if work > ENTRY_BUDGET {
        return Err(TensorError::TooLarge {
            entries: work,
            limit: ENTRY_BUDGET,
        });
    }

    let mut b = KernelBuilder::new(
        "tabulate_tensor",
        Representation::Tensor,
        els.cell,
        rows,
        cols,
        els.coefficients.iter().map(FiniteElement::space_dim).collect(),
    );
    b.note(format!("{} reference tensor{}", terms.len(), if terms.len() == 1 { "" } else { "s" }));
    let mut slots = Slots {
        b,
        stmts: Vec::new(),
        by_key: HashMap::new(),
        geometry_count: 0,
        weighted_count: 0,
    };
    // per term: lazily created G^alpha slots keyed by full alpha
    let mut g_alpha: Vec<HashMap<Vec<usize>, SlotId>> = vec![HashMap::new(); terms.len()];
    // alphas visited per term; with dropping only those inside the
    // coefficient component blocks
    let alphas: Vec<Vec<Vec<usize>>> = terms
        .iter()
        .map(|t| {
            let ext = t.geometry.extents();
            let n: usize = ext.iter().product();
            (0..n)
                .map(|flat| unflatten(flat, &ext))
                .filter(|a| {
                    !opts.drop_zeros || t.geometry.coefficients.iter().zip(a).all(|((_, s), &k)| s.local(k).is_some())
                })
                .collect()
        })
        .collect();
    let mut assigns = Vec::with_capacity(rows * ncols);
    for i1 in 0..rows {
        for i2 in 0..ncols {
            let mut contraction: Vec<(f64, SlotId)> = Vec::new();
            let mut position: HashMap<SlotId, usize> = HashMap::new();
            let mut zeros: Vec<SlotId> = Vec::new();
            for ((t, cache), term_alphas) in terms.iter().zip(g_alpha.iter_mut()).zip(&alphas) {
                let rt = &t.reference;
                let arg: Vec<usize> = if cols.is_some() { vec![i1, i2] } else { vec![i1] };
                if opts.drop_zeros && rt.slices.iter().zip(&arg).any(|(s, &i)| s.local(i).is_none()) {
                    continue;
                }
                let nc = t.geometry.coefficients.len();
                let mut index = arg.clone();
                for alpha in term_alphas {
                    index.truncate(arg.len());
                    index.extend_from_slice(alpha);
                    let v = rt.get(&index);
                    if opts.drop_zeros && v == 0.0 {
                        continue;
                    }
                    let slot = match cache.get(alpha) {
                        Some(&s) => s,
                        None => {
                            let bflat = alpha[nc..].iter().fold(0, |acc, &a| acc * t.geometry.dim + a);
                            let k = slots.get(geometry_expr(&t.geometry.geometry[bflat]), false);
                            let s = if nc == 0 {
                                k
                            } else {
                                let mut f = vec![Expr::Slot(k)];
                                f.extend(t.geometry.coefficients.iter().zip(alpha).map(|(&(id, _), &kd)| {
                                    Expr::Coefficient {
                                        id,
                                        dof: Index::Fixed(kd),
                                    }
                                }));
                                slots.get(Expr::product(f).expect("non-empty"), true)
                            };
                            cache.insert(alpha.clone(), s);
                            s
                        }
                    };
                    if v == 0.0 {
                        if !zeros.contains(&slot) {
                            zeros.push(slot);
                        }
                        continue;
                    }
                    match position.get(&slot) {
                        Some(&p) => contraction[p].0 += v,
                        None => {
                            position.insert(slot, contraction.len());
                            contraction.push((v, slot));
                        }
                    }
                }
            }
            if opts.drop_zeros {
                contraction.retain(|(c, _)| *c != 0.0);
            } else {
                // zero products go last so the nonzero sum is evaluated in
                // the same order as with dropping
                zeros.retain(|s| !position.contains_key(s));
                contraction.extend(zeros.into_iter().map(|s| (0.0, s)));
            }
            let entry = if cols.is_some() {
                Entry(vec![Index::Fixed(i1), Index::Fixed(i2)])
            } else {
                Entry(vec![Index::Fixed(i1)])
            };
            let value = if contraction.is_empty() {
                Expr::Lit(0.0)
            } else {
                Expr::Contract(contraction)
            };
            assigns.push(Stmt::Assign { entry, value });
        }
    }
    let Slots { b, mut stmts, .. } = slots;
    stmts.extend(assigns);
    Ok(b.finish(stmts))
}

fn unflatten(mut flat: usize, extents: &[usize]) -> Vec<usize> {
    let mut out = vec![0; extents.len()];
    for (o, &e) in out.iter_mut().zip(extents).rev() {
        *o = flat % e;
        flat /= e;
    }
    out
}
