//! Compilation pipeline, cross-checks, benchmarks, assembly and trend
//! sweeps.
//!
//! Kernels are run through the IR interpreter, so absolute run times are
//! not those of compiled code; flop counts are exact and ratios between the
//! two representations remain meaningful.

mod dofmap;
mod mesh;
mod sparse;
mod trends;

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::dsl::{compile_source, DslError, TypedForm};
use crate::kernel::{
    affine_map, count_flops, emit_source, interpret, interpret_into, CellGeometry, Kernel, KernelError, Representation,
    Scratch,
};
use crate::lowering::{estimate_degree, lower, LoweringError, MonomialSum};
use crate::quadrature::{rule_for_form, simplex_rule, QuadratureError};
use crate::quadrep::{build_quadrature_kernel, QuadratureBuildError, QuadratureOptions};
use crate::tensorrep::{build_tensor_kernel, TensorError, TensorOptions};

pub use dofmap::{build_dofmap, DofMap};
pub use mesh::{random_cells, unit_square_mesh, Mesh};
pub use sparse::CsrMatrix;
pub use trends::{family_form, render_trend_table, trend_entry, trend_suite, FormFamily, TrendEntry, TrendTable};

/// Relative agreement required between the two representations.
pub const CROSS_CHECK_TOLERANCE: f64 = 1e-10;
/// Relative agreement required between two quadrature degrees for forms
/// with coefficient division.
pub const SELF_CONSISTENCY_TOLERANCE: f64 = 1e-8;
/// Extra degrees of the two rules compared for division-bearing forms.
pub const SELF_CONSISTENCY_EXTRA: (usize, usize) = (10, 12);
/// Default number of element-tensor evaluations in a benchmark.
pub const DEFAULT_BENCH_N: usize = 10_000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error(transparent)]
    Lowering(#[from] LoweringError),
    #[error(transparent)]
    Rule(#[from] QuadratureError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureBuildError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("cell {cell}: {source}")]
    Cell { cell: usize, source: KernelError },
    #[error("unsupported cell: {0}")]
    UnsupportedCell(String),
    #[error("assembly needs a bilinear form")]
    NotBilinear,
    #[error("form rejected by both representations (quadrature: {quadrature}; tensor: {tensor})")]
    FormRejected { quadrature: String, tensor: String },
}

/// Process exit code for a command that failed with this error: 2 when the
/// form is rejected (parse, type, lowering or representation errors).
pub fn exit_code(_e: &HarnessError) -> u8 {
    EXIT_REJECTED
}

pub const EXIT_REJECTED: u8 = 2;
pub const EXIT_CHECK_FAILED: u8 = 3;

/// A parsed, checked and lowered form.
#[derive(Debug, Clone)]
pub struct CompiledForm {
    pub name: String,
    pub form: TypedForm,
    pub sum: MonomialSum,
    /// Estimated total polynomial degree of the integrand.
    pub degree: usize,
}

pub fn compile_form(name: &str, source: &str) -> Result<CompiledForm, HarnessError> {
    let form = compile_source(source)?;
    let sum = lower(&form)?;
    let degree = estimate_degree(&sum);
    Ok(CompiledForm {
        name: name.to_string(),
        form,
        sum,
        degree,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct BuildOptions {
    /// Quadrature points per direction, overriding the degree estimate.
    pub points: Option<usize>,
    pub quadrature: QuadratureOptions,
    pub tensor: TensorOptions,
}

/// A generated kernel with its emitted source and generation time.
#[derive(Debug, Clone)]
pub struct GeneratedKernel {
    pub kernel: Kernel,
    pub source: String,
    pub seconds: f64,
}

impl GeneratedKernel {
    pub fn bytes(&self) -> usize {
        self.source.len()
    }
}

pub fn generate(
    form: &CompiledForm,
    repr: Representation,
    opts: &BuildOptions,
) -> Result<GeneratedKernel, HarnessError> {
    let start = Instant::now();
    let mut kernel = match repr {
        Representation::Quadrature => {
            let rule = rule_for_form(form.form.cell, form.degree, opts.points)?;
            build_quadrature_kernel(&form.sum, &rule, opts.quadrature)?
        }
        Representation::Tensor => build_tensor_kernel(&form.sum, opts.tensor)?,
    };
    kernel.name = format!("{}_{}", form.name, repr.name());
    let source = emit_source(&kernel);
    Ok(GeneratedKernel {
        kernel,
        source,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Quadrature kernel on a rule of the given degree.
pub fn quadrature_kernel_at(form: &CompiledForm, degree: usize) -> Result<Kernel, HarnessError> {
    let rule = simplex_rule(form.form.cell, degree);
    Ok(build_quadrature_kernel(&form.sum, &rule, QuadratureOptions::default())?)
}

/// Coefficient dofs drawn uniformly from `[0.5, 1.5]`, away from zero so
/// that coefficient division stays well defined.
pub fn random_coefficients(rng: &mut impl Rng, form: &CompiledForm) -> Vec<Vec<f64>> {
    form.sum
        .elements
        .coefficients
        .iter()
        .map(|e| (0..e.space_dim()).map(|_| rng.gen_range(0.5..1.5)).collect())
        .collect()
}

/// Cells and coefficient values for checks and benchmarks.
pub fn sample_inputs(form: &CompiledForm, cells: usize, seed: u64) -> Vec<(CellGeometry, Vec<Vec<f64>>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    random_cells(form.form.cell, cells.max(1), seed)
        .into_iter()
        .map(|v| {
            let g = affine_map(&v).expect("random cells are valid");
            (g, random_coefficients(&mut rng, form))
        })
        .collect()
}

/// `max |a - b| / max |b|`, or the absolute difference when `b` is zero.
pub fn relative_difference(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = b.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Largest relative difference between two kernels over the inputs.
pub fn max_relative_difference(
    a: &Kernel,
    b: &Kernel,
    inputs: &[(CellGeometry, Vec<Vec<f64>>)],
) -> Result<f64, HarnessError> {
    let mut worst = 0.0f64;
    for (cell, (g, w)) in inputs.iter().enumerate() {
        let x = interpret(a, g, w).map_err(|source| HarnessError::Cell { cell, source })?;
        let y = interpret(b, g, w).map_err(|source| HarnessError::Cell { cell, source })?;
        worst = worst.max(relative_difference(&x, &y));
    }
    Ok(worst)
}

/// Seconds to evaluate the kernel `n` times, cycling through the inputs.
pub fn bench_kernel(k: &Kernel, inputs: &[(CellGeometry, Vec<Vec<f64>>)], n: usize) -> Result<f64, HarnessError> {
    let mut scratch = Scratch::for_kernel(k);
    let mut out = vec![0.0; k.tensor_len()];
    let start = Instant::now();
    for it in 0..n {
        let cell = it % inputs.len();
        let (g, w) = &inputs[cell];
        interpret_into(k, g, w, &mut scratch, &mut out).map_err(|source| HarnessError::Cell { cell, source })?;
    }
    std::hint::black_box(&out);
    Ok(start.elapsed().as_secs_f64())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CheckKind {
    /// Quadrature against tensor kernel.
    CrossRepresentation,
    /// Quadrature at two elevated degrees.
    QuadratureSelfConsistency,
    None,
}

/// Outcome of generating one representation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Availability {
    Ok,
    /// The representation cannot express the form (coefficient division).
    Unsupported(String),
    /// Generation failed, e.g. over the resource budget.
    Failed(String),
}

impl Availability {
    fn of(e: &HarnessError) -> Availability {
        match e {
            HarnessError::Tensor(TensorError::UnsupportedDivision) => Availability::Unsupported(e.to_string()),
            _ => Availability::Failed(e.to_string()),
        }
    }

    pub fn is_ok(&self) -> bool {
        *self == Availability::Ok
    }

    /// Short marker used in tables.
    pub fn marker(&self) -> &'static str {
        match self {
            Availability::Ok => "ok",
            Availability::Unsupported(_) => "unsupported",
            Availability::Failed(_) => "failure",
        }
    }
}

/// Per-representation columns of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Side {
    pub status: Availability,
    pub flops: Option<u64>,
    pub runtime: Option<f64>,
    pub gen_seconds: Option<f64>,
    pub bytes: Option<usize>,
}

impl Side {
    fn unavailable(status: Availability) -> Side {
        Side {
            status,
            flops: None,
            runtime: None,
            gen_seconds: None,
            bytes: None,
        }
    }

    fn of(g: &GeneratedKernel) -> Side {
        Side {
            status: Availability::Ok,
            flops: Some(count_flops(&g.kernel).total()),
            runtime: None,
            gen_seconds: Some(g.seconds),
            bytes: Some(g.bytes()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub form: String,
    pub quadrature: Side,
    pub tensor: Side,
    pub check: CheckKind,
    pub cells: usize,
    pub max_difference: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
    pub bench_n: Option<usize>,
    /// Sparse-matrix insertion seconds on a unit-square mesh (2D bilinear
    /// forms, sequential insertion).
    pub insertion: Option<f64>,
}

fn ratio<T: Into<f64> + Copy>(q: Option<T>, t: Option<T>) -> Option<f64> {
    match (q, t) {
        (Some(q), Some(t)) if t.into() != 0.0 => Some(q.into() / t.into()),
        _ => None,
    }
}

impl ComparisonReport {
    pub fn flops_ratio(&self) -> Option<f64> {
        ratio(self.quadrature.flops.map(|f| f as f64), self.tensor.flops.map(|f| f as f64))
    }

    pub fn runtime_ratio(&self) -> Option<f64> {
        ratio(self.quadrature.runtime, self.tensor.runtime)
    }

    /// 0 when the check passed, 3 otherwise.
    pub fn exit_code(&self) -> u8 {
        if self.passed {
            0
        } else {
            EXIT_CHECK_FAILED
        }
    }

    pub const CSV_HEADER: &'static str =
        "form,flops_q,flops_t,ratio,runtime_q,runtime_t,maxdiff,gen_time_q,gen_time_t,bytes_q,bytes_t";

    /// One machine-readable row; unavailable values are `NA`.
    pub fn csv_row(&self) -> String {
        fn opt<T: fmt::Display>(v: Option<T>) -> String {
            v.map_or_else(|| "NA".to_string(), |v| v.to_string())
        }
        fn sci(v: Option<f64>) -> String {
            v.map_or_else(|| "NA".to_string(), |v| format!("{v:.3e}"))
        }
        [
            self.form.clone(),
            opt(self.quadrature.flops),
            opt(self.tensor.flops),
            self.flops_ratio().map_or_else(|| "NA".into(), |r| format!("{r:.2}")),
            sci(self.quadrature.runtime),
            sci(self.tensor.runtime),
            sci(self.max_difference),
            sci(self.quadrature.gen_seconds),
            sci(self.tensor.gen_seconds),
            opt(self.quadrature.bytes),
            opt(self.tensor.bytes),
        ]
        .join(",")
    }
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "form: {}", self.form)?;
        for (name, s) in [("quadrature", &self.quadrature), ("tensor", &self.tensor)] {
            match &s.status {
                Availability::Ok => {
                    write!(f, "  {name:<10} flops {:>10}", s.flops.unwrap_or(0))?;
                    if let Some(r) = s.runtime {
                        write!(f, "  run time {r:.4e} s")?;
                    }
                    if let (Some(g), Some(b)) = (s.gen_seconds, s.bytes) {
                        write!(f, "  generated in {g:.3e} s, {b} bytes")?;
                    }
                    writeln!(f)?;
                }
                Availability::Unsupported(why) => writeln!(f, "  {name:<10} unsupported: {why}")?,
                Availability::Failed(why) => writeln!(f, "  {name:<10} failure: {why}")?,
            }
        }
        if let Some(r) = self.flops_ratio() {
            writeln!(f, "  flops q/t      {r:.2}")?;
        }
        if let Some(r) = self.runtime_ratio() {
            writeln!(f, "  run time q/t   {r:.2}  (N = {})", self.bench_n.unwrap_or(0))?;
        }
        if let Some(ins) = self.insertion {
            writeln!(f, "  insertion      {ins:.4e} s (sequential)")?;
        }
        let what = match self.check {
            CheckKind::CrossRepresentation => "quadrature vs tensor",
            CheckKind::QuadratureSelfConsistency => "quadrature self-consistency",
            CheckKind::None => "no check",
        };
        match self.max_difference {
            Some(d) => writeln!(
                f,
                "  check ({what}, {} cells): max relative difference {d:.3e}, tolerance {:.0e}: {}",
                self.cells,
                self.tolerance,
                if self.passed { "PASS" } else { "FAIL" }
            )?,
            None => writeln!(f, "  check: {what}")?,
        }
        if self.quadrature.runtime.is_some() {
            writeln!(f, "  note: run times are interpreter timings, not native code")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompareOptions {
    pub cells: usize,
    pub seed: u64,
    /// Benchmark with this many evaluations per representation.
    pub bench_n: Option<usize>,
    /// Assemble on a unit-square mesh of this size to time insertion.
    pub insertion_mesh: Option<usize>,
    pub build: BuildOptions,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            cells: 100,
            seed: 0,
            bench_n: None,
            insertion_mesh: None,
            build: BuildOptions::default(),
        }
    }
}

/// Compiles both representations, cross-checks them on random cells and
/// optionally benchmarks them.
pub fn compare(form: &CompiledForm, opts: &CompareOptions) -> Result<ComparisonReport, HarnessError> {
    let q = generate(form, Representation::Quadrature, &opts.build);
    let t = generate(form, Representation::Tensor, &opts.build);
    if let (Err(eq), Err(et)) = (&q, &t) {
        return Err(HarnessError::FormRejected {
            quadrature: eq.to_string(),
            tensor: et.to_string(),
        });
    }
    let inputs = sample_inputs(form, opts.cells, opts.seed);
    let (check, max_difference, tolerance) = match (&q, &t) {
        (Ok(q), Ok(t)) => (
            CheckKind::CrossRepresentation,
            Some(max_relative_difference(&q.kernel, &t.kernel, &inputs)?),
            CROSS_CHECK_TOLERANCE,
        ),
        (Ok(_), Err(_)) => {
            let (a, b) = SELF_CONSISTENCY_EXTRA;
            let lo = quadrature_kernel_at(form, form.degree + a)?;
            let hi = quadrature_kernel_at(form, form.degree + b)?;
            (
                CheckKind::QuadratureSelfConsistency,
                Some(max_relative_difference(&lo, &hi, &inputs)?),
                SELF_CONSISTENCY_TOLERANCE,
            )
        }
        _ => (CheckKind::None, None, 0.0),
    };
    let passed = max_difference.is_none_or(|d| d <= tolerance);
    let mut quadrature = match &q {
        Ok(g) => Side::of(g),
        Err(e) => Side::unavailable(Availability::of(e)),
    };
    let mut tensor = match &t {
        Ok(g) => Side::of(g),
        Err(e) => Side::unavailable(Availability::of(e)),
    };
    if let Some(n) = opts.bench_n {
        if let Ok(g) = &q {
            quadrature.runtime = Some(bench_kernel(&g.kernel, &inputs, n)?);
        }
        if let Ok(g) = &t {
            tensor.runtime = Some(bench_kernel(&g.kernel, &inputs, n)?);
        }
    }
    let insertion = match (opts.insertion_mesh, &q, &t) {
        (Some(n), Ok(g), _) | (Some(n), Err(_), Ok(g))
            if form.form.cell == crate::elements::ReferenceCell::Triangle && g.kernel.cols.is_some() =>
        {
            let mesh = unit_square_mesh(n);
            let spaces = FormSpaces::new(form, &mesh)?;
            let w = spaces.random_coefficients(opts.seed);
            Some(assemble(&g.kernel, &mesh, &spaces, &w)?.timings.insertion)
        }
        _ => None,
    };
    Ok(ComparisonReport {
        form: form.name.clone(),
        quadrature,
        tensor,
        check,
        cells: inputs.len(),
        max_difference,
        tolerance,
        passed,
        bench_n: opts.bench_n,
        insertion,
    })
}

/// Dofmaps of a form's functions on a mesh.
#[derive(Debug, Clone)]
pub struct FormSpaces {
    pub test: DofMap,
    pub trial: DofMap,
    pub coefficients: Vec<DofMap>,
}

impl FormSpaces {
    pub fn new(form: &CompiledForm, mesh: &Mesh) -> Result<FormSpaces, HarnessError> {
        let els = &form.sum.elements;
        let trial = els.trial.ok_or(HarnessError::NotBilinear)?;
        Ok(FormSpaces {
            test: build_dofmap(mesh, &els.test)?,
            trial: build_dofmap(mesh, &trial)?,
            coefficients: els
                .coefficients
                .iter()
                .map(|e| build_dofmap(mesh, e))
                .collect::<Result<_, _>>()?,
        })
    }

    /// Global coefficient vectors with values in `[0.5, 1.5]`.
    pub fn random_coefficients(&self, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.coefficients
            .iter()
            .map(|d| (0..d.global_dim).map(|_| rng.gen_range(0.5..1.5)).collect())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct AssemblyTimings {
    /// Seconds spent computing element tensors.
    pub compute: f64,
    /// Seconds spent adding element tensors into the matrix.
    pub insertion: f64,
}

#[derive(Debug, Clone)]
pub struct Assembled {
    pub matrix: CsrMatrix,
    pub timings: AssemblyTimings,
}

/// Sequential assembly over all cells in mesh order.
pub fn assemble(
    kernel: &Kernel,
    mesh: &Mesh,
    spaces: &FormSpaces,
    coefficients: &[Vec<f64>],
) -> Result<Assembled, HarnessError> {
    let order: Vec<usize> = (0..mesh.num_cells()).collect();
    assemble_in_order(kernel, mesh, spaces, coefficients, &order)
}

/// Sequential assembly visiting cells in the given order.
pub fn assemble_in_order(
    kernel: &Kernel,
    mesh: &Mesh,
    spaces: &FormSpaces,
    coefficients: &[Vec<f64>],
    order: &[usize],
) -> Result<Assembled, HarnessError> {
    let cols = kernel.cols.ok_or(HarnessError::NotBilinear)?;
    let mut matrix = CsrMatrix::from_dofmaps(&spaces.test, &spaces.trial);
    let mut scratch = Scratch::for_kernel(kernel);
    let mut a = vec![0.0; kernel.tensor_len()];
    let mut w: Vec<Vec<f64>> = spaces.coefficients.iter().map(|d| vec![0.0; d.cell_dofs[0].len()]).collect();
    let mut timings = AssemblyTimings::default();
    for &cell in order {
        let start = Instant::now();
        let g = affine_map(&mesh.cell_vertices(cell)).map_err(|source| HarnessError::Cell { cell, source })?;
        for ((local, map), global) in w.iter_mut().zip(&spaces.coefficients).zip(coefficients) {
            for (l, &dof) in local.iter_mut().zip(&map.cell_dofs[cell]) {
                *l = global[dof];
            }
        }
        interpret_into(kernel, &g, &w, &mut scratch, &mut a).map_err(|source| HarnessError::Cell { cell, source })?;
        let mid = Instant::now();
        let rows = &spaces.test.cell_dofs[cell];
        let cdofs = &spaces.trial.cell_dofs[cell];
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cdofs.iter().enumerate() {
                matrix.add(r, c, a[i * cols + j]);
            }
        }
        timings.compute += (mid - start).as_secs_f64();
        timings.insertion += mid.elapsed().as_secs_f64();
    }
    Ok(Assembled { matrix, timings })
}

#[cfg(test)]
mod tests;
