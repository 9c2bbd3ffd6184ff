//! Parameter sweeps over form families, comparing flop counts of the two
//! representations.

use std::fmt::Write as _;

use serde::Serialize;

use super::{compile_form, generate, Availability, BuildOptions, HarnessError};
use crate::elements::ReferenceCell;
use crate::kernel::{count_flops, Representation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FormFamily {
    /// `f0*...*v*u`, coefficients of degree `p` (piecewise constant for 0).
    Mass,
    /// Symmetric-gradient elasticity premultiplied by scalar coefficients.
    Elasticity,
    /// Vector Poisson premultiplied by coefficient divergences.
    VectorPoissonDiv,
}

impl FormFamily {
    pub fn name(self) -> &'static str {
        match self {
            FormFamily::Mass => "mass",
            FormFamily::Elasticity => "elasticity",
            FormFamily::VectorPoissonDiv => "vector_poisson_div",
        }
    }
}

fn element(vector: bool, cell: ReferenceCell, degree: usize) -> String {
    let family = if degree == 0 { "Discontinuous Lagrange" } else { "Lagrange" };
    let kind = if vector { "VectorElement" } else { "FiniteElement" };
    format!("{kind}(\"{family}\", \"{}\", {degree})", cell.name())
}

/// Form source for one sweep point: test and trial degree `q`, `nf`
/// coefficients of degree `p`.
pub fn family_form(family: FormFamily, cell: ReferenceCell, p: usize, q: usize, nf: usize) -> String {
    let vector_u = family != FormFamily::Mass;
    let vector_f = family == FormFamily::VectorPoissonDiv;
    let mut s = format!(
        "element = {}\nelement_f = {}\nv = TestFunction(element)\nu = TrialFunction(element)\n",
        element(vector_u, cell, q),
        element(vector_f, cell, p)
    );
    let mut factors = Vec::new();
    for k in 0..nf {
        let _ = writeln!(s, "f{k} = Function(element_f)");
        factors.push(if vector_f { format!("div(f{k})") } else { format!("f{k}") });
    }
    match family {
        FormFamily::Mass => factors.push("v*u".into()),
        FormFamily::Elasticity => {
            s.push_str("def eps(w):\n    return grad(w) + transp(grad(w))\n");
            factors.push("0.25*dot(eps(v), eps(u))".into());
        }
        FormFamily::VectorPoissonDiv => factors.push("dot(grad(v), grad(u))".into()),
    }
    let _ = writeln!(s, "a = {}*dx", factors.join("*"));
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendEntry {
    pub p: usize,
    pub q: usize,
    pub nf: usize,
    pub flops_q: Option<u64>,
    pub flops_t: Option<u64>,
    pub tensor: Availability,
}

impl TrendEntry {
    pub fn ratio(&self) -> Option<f64> {
        match (self.flops_q, self.flops_t) {
            (Some(q), Some(t)) if t > 0 => Some(q as f64 / t as f64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendTable {
    pub family: FormFamily,
    pub cell: ReferenceCell,
    pub entries: Vec<TrendEntry>,
}

impl TrendTable {
    pub fn title(&self) -> String {
        format!("{} ({})", self.family.name(), self.cell.name())
    }

    pub fn get(&self, p: usize, q: usize, nf: usize) -> Option<&TrendEntry> {
        self.entries.iter().find(|e| e.p == p && e.q == q && e.nf == nf)
    }
}

/// Flop counts of both representations at one sweep point. Tensor
/// failures (over budget) are recorded rather than returned.
pub fn trend_entry(family: FormFamily, cell: ReferenceCell, p: usize, q: usize, nf: usize) -> Result<TrendEntry, HarnessError> {
    let src = family_form(family, cell, p, q, nf);
    let name = format!("{}_p{p}_q{q}_nf{nf}", family.name());
    let form = compile_form(&name, &src)?;
    let opts = BuildOptions::default();
    let flops_q = generate(&form, Representation::Quadrature, &opts)
        .ok()
        .map(|g| count_flops(&g.kernel).total());
    let (flops_t, tensor) = match generate(&form, Representation::Tensor, &opts) {
        Ok(g) => (Some(count_flops(&g.kernel).total()), Availability::Ok),
        Err(e) => (None, Availability::of(&e)),
    };
    Ok(TrendEntry {
        p,
        q,
        nf,
        flops_q,
        flops_t,
        tensor,
    })
}

/// Sweep ranges `(p, q, nf)` of one table.
pub(crate) struct Sweep {
    pub family: FormFamily,
    pub cell: ReferenceCell,
    pub points: Vec<(usize, usize, usize)>,
}

fn grid(ps: &[usize], qs: &[usize], nfs: &[usize]) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for &p in ps {
        for &q in qs {
            for &nf in nfs {
                out.push((p, q, nf));
            }
        }
    }
    out
}

pub(crate) fn sweeps(quick: bool) -> Vec<Sweep> {
    use FormFamily::*;
    use ReferenceCell::*;
    if quick {
        let mut mass = grid(&[0], &[1, 2, 3, 4], &[1, 2, 3, 4]);
        mass.extend(grid(&[2, 3], &[1, 2, 3, 4], &[4]));
        return vec![
            Sweep {
                family: Mass,
                cell: Triangle,
                points: mass,
            },
            Sweep {
                family: Elasticity,
                cell: Triangle,
                points: vec![(1, 1, 1), (1, 4, 1)],
            },
        ];
    }
    let full2d = grid(&[0, 1, 2, 3], &[1, 2, 3, 4], &[1, 2, 3, 4]);
    let full3d = grid(&[0, 1, 2, 3], &[1, 2, 3], &[1, 2]);
    vec![
        Sweep {
            family: Mass,
            cell: Triangle,
            points: full2d.clone(),
        },
        Sweep {
            family: Mass,
            cell: Tetrahedron,
            points: full3d.clone(),
        },
        Sweep {
            family: Elasticity,
            cell: Triangle,
            points: full2d,
        },
        Sweep {
            family: Elasticity,
            cell: Tetrahedron,
            points: full3d,
        },
        Sweep {
            family: VectorPoissonDiv,
            cell: Triangle,
            points: grid(&[1, 2, 3], &[1, 2, 3, 4], &[1, 2]),
        },
    ]
}

/// Runs the trend sweeps. The quick subset covers the corner cases of each
/// trend; the full one the complete parameter grids.
pub fn trend_suite(quick: bool) -> Result<Vec<TrendTable>, HarnessError> {
    sweeps(quick)
        .into_iter()
        .map(|s| {
            let entries = s
                .points
                .iter()
                .map(|&(p, q, nf)| trend_entry(s.family, s.cell, p, q, nf))
                .collect::<Result<_, _>>()?;
            Ok(TrendTable {
                family: s.family,
                cell: s.cell,
                entries,
            })
        })
        .collect()
}

/// Text table with one row per `(p, q)` and one column group per `nf`.
pub fn render_trend_table(t: &TrendTable) -> String {
    let mut nfs: Vec<usize> = t.entries.iter().map(|e| e.nf).collect();
    nfs.sort_unstable();
    nfs.dedup();
    let mut pq: Vec<(usize, usize)> = t.entries.iter().map(|e| (e.p, e.q)).collect();
    pq.sort_unstable();
    pq.dedup();
    let mut s = format!("{}\n{:>3} {:>3}", t.title(), "p", "q");
    for nf in &nfs {
        let _ = write!(s, " | {:>24}", format!("nf={nf}: tensor  q/t"));
    }
    s.push('\n');
    for (p, q) in pq {
        let _ = write!(s, "{p:>3} {q:>3}");
        for &nf in &nfs {
            let cell = match t.get(p, q, nf) {
                None => String::new(),
                Some(e) => match (e.flops_t, e.ratio()) {
                    (Some(ft), Some(r)) => format!("{ft:>12} {r:>10.2}"),
                    _ => format!("{:>12} {:>10}", e.tensor.marker(), "-"),
                },
            };
            let _ = write!(s, " | {cell:>24}");
        }
        s.push('\n');
    }
    s
}
