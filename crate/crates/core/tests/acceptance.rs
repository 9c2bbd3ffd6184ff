//! Acceptance suite: one PASS/FAIL line per criterion.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use formkernel::elements::ReferenceCell;
use formkernel::harness::{
    assemble, compare, compile_form, exit_code, family_form, generate, quadrature_kernel_at, render_trend_table,
    sample_inputs, trend_entry, trend_suite, unit_square_mesh, BuildOptions, CheckKind, CompareOptions, CompiledForm,
    FormFamily, FormSpaces, HarnessError, TrendTable, CROSS_CHECK_TOLERANCE, SELF_CONSISTENCY_TOLERANCE,
};
use formkernel::kernel::{affine_map, count_flops, interpret, interpret_counting, Kernel, Representation, Stmt};
use formkernel::quadrep::QuadratureOptions;
use formkernel::tensorrep::TensorError;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn forms_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("forms")
}

fn load(name: &str) -> CompiledForm {
    let src = fs::read_to_string(forms_dir().join(format!("{name}.form"))).expect("example form exists");
    compile_form(name, &src).expect("example form compiles")
}

fn scalar(cell: &str, q: usize, body: &str) -> String {
    let w = if body.contains("w*") { "w = Function(element)\n" } else { "" };
    format!(
        "element = FiniteElement(\"Lagrange\", \"{cell}\", {q})\n\
         v = TestFunction(element)\nu = TrialFunction(element)\n{w}\
         a = {body}*dx\n"
    )
}

fn elasticity(cell: &str, q: usize) -> String {
    format!(
        "element = VectorElement(\"Lagrange\", \"{cell}\", {q})\n\
         v = TestFunction(element)\nu = TrialFunction(element)\n\
         def eps(v):\n    return grad(v) + transp(grad(v))\n\
         a = 0.25*dot(eps(v), eps(u))*dx\n"
    )
}

/// The division-free form suite shared by the cross-check, optimisation
/// and flop-count criteria.
fn suite() -> Vec<CompiledForm> {
    let mut out = Vec::new();
    for (cell, tag) in [("triangle", "2d"), ("tetrahedron", "3d")] {
        for q in 1..=4 {
            out.push((format!("mass_{tag}_q{q}"), scalar(cell, q, "v*u")));
        }
    }
    for q in 1..=3 {
        out.push((format!("weighted_laplacian_q{q}"), scalar("triangle", q, "w*dot(grad(v), grad(u))")));
    }
    for (cell, tag) in [("triangle", "2d"), ("tetrahedron", "3d")] {
        for q in 1..=3 {
            out.push((format!("elasticity_{tag}_q{q}"), elasticity(cell, q)));
        }
    }
    for p in 0..=3 {
        for nf in 1..=3 {
            out.push((
                format!("mass_premultiplied_p{p}_nf{nf}"),
                family_form(FormFamily::Mass, ReferenceCell::Triangle, p, 2, nf),
            ));
        }
    }
    out.into_iter()
        .map(|(name, src)| compile_form(&name, &src).expect("suite form compiles"))
        .collect()
}

fn kernel(form: &CompiledForm, repr: Representation, opts: &BuildOptions) -> Result<Kernel, String> {
    generate(form, repr, opts)
        .map(|g| g.kernel)
        .map_err(|e| format!("{}: {e}", form.name))
}

fn criterion_1(suite: &[CompiledForm]) -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for f in suite {
        let r = compare(
            f,
            &CompareOptions {
                cells: 100,
                seed: 1,
                ..Default::default()
            },
        )
        .map_err(|e| format!("{}: {e}", f.name))?;
        ensure(r.check == CheckKind::CrossRepresentation, || {
            format!("{}: no cross-representation check", f.name)
        })?;
        let d = r.max_difference.unwrap_or(f64::INFINITY);
        ensure(d <= CROSS_CHECK_TOLERANCE, || format!("{}: max relative difference {d:.3e}", f.name))?;
        worst = worst.max(d);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs <= 300.0, || format!("suite took {secs:.1} s"))?;
    Ok(format!(
        "{} forms x 100 cells, worst relative difference {worst:.2e}, {secs:.1} s",
        suite.len()
    ))
}

fn criterion_2() -> Outcome {
    let g = generate(&load("weighted_laplacian"), Representation::Quadrature, &BuildOptions::default())
        .map_err(|e| e.to_string())?;
    let golden_path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/weighted_laplacian_quadrature.c");
    let golden = fs::read_to_string(&golden_path).map_err(|e| e.to_string())?;
    ensure(g.source == golden, || "emitted source differs from the golden file".into())?;
    let k = &g.kernel;
    let w0 = k.tables.iter().find(|t| t.name == "W0").ok_or("no W0 table")?;
    ensure(w0.data == [0.5], || format!("weights {:?}", w0.data))?;
    ensure(g.source.contains("const static double W0 = 0.5;"), || "W0 not emitted".into())?;
    ensure(k.maps.len() == 2 && k.maps.iter().all(|m| m.indices.len() == 2), || {
        format!("maps {:?}", k.maps)
    })?;
    let consts = k.body.iter().filter(|s| matches!(s, Stmt::Const { .. })).count();
    ensure(consts == 6, || format!("{consts} geometry constants"))?;
    let accs = accumulations(&k.body);
    ensure(!accs.is_empty(), || "no accumulation".into())?;
    for acc in accs {
        let single = Kernel {
            body: vec![acc],
            ..k.clone()
        };
        let ops = count_flops(&single).total();
        ensure(ops == 3, || format!("accumulation with {ops} operations"))?;
    }
    Ok("1 point of weight 0.5, 2 maps of length 2, 6 geometry constants, 3-operation accumulation".into())
}

fn accumulations(body: &[Stmt]) -> Vec<Stmt> {
    let mut out = Vec::new();
    for s in body {
        match s {
            Stmt::Accumulate { .. } => out.push(s.clone()),
            Stmt::Loop { body, .. } => out.extend(accumulations(body)),
            _ => {}
        }
    }
    out
}

fn criterion_3() -> Outcome {
    let reference = affine_map(&ReferenceCell::Triangle.vertices()).map_err(|e| e.to_string())?;
    let exact = |i: usize, j: usize| if i == j { 1.0 / 12.0 } else { 1.0 / 24.0 };
    let mass = compile_form("mass_p1", &scalar("triangle", 1, "v*u")).map_err(|e| e.to_string())?;
    for repr in [Representation::Quadrature, Representation::Tensor] {
        let k = kernel(&mass, repr, &BuildOptions::default())?;
        let a = interpret(&k, &reference, &[]).map_err(|e| e.to_string())?;
        for i in 0..3 {
            for j in 0..3 {
                let d = (a[i * 3 + j] - exact(i, j)).abs();
                ensure(d <= 1e-14, || format!("{} entry ({i},{j}) off by {d:.2e}", repr.name()))?;
            }
        }
    }
    let mesh = unit_square_mesh(4);
    let mut worst_sum = 0.0f64;
    let mut worst_row = 0.0f64;
    for q in 1..=3 {
        for repr in [Representation::Quadrature, Representation::Tensor] {
            for (body, is_mass) in [("v*u", true), ("dot(grad(v), grad(u))", false)] {
                let f = compile_form("f", &scalar("triangle", q, body)).map_err(|e| e.to_string())?;
                let k = kernel(&f, repr, &BuildOptions::default())?;
                let spaces = FormSpaces::new(&f, &mesh).map_err(|e| e.to_string())?;
                let m = assemble(&k, &mesh, &spaces, &[]).map_err(|e| e.to_string())?.matrix;
                if is_mass {
                    let d = (m.total() - 1.0).abs();
                    ensure(d <= 1e-12, || format!("P{q} mass sums to 1 {d:+.2e}"))?;
                    worst_sum = worst_sum.max(d);
                } else {
                    let r = m.row_sums().iter().fold(0.0f64, |s, r| s.max(r.abs()));
                    ensure(r <= 1e-12, || format!("P{q} stiffness row sum {r:.2e}"))?;
                    worst_row = worst_row.max(r);
                }
            }
        }
    }
    Ok(format!(
        "reference P1 mass exact; n=4 mesh: mass sum error {worst_sum:.1e}, max Poisson row sum {worst_row:.1e}"
    ))
}

const REFERENCE_MASS_TENSOR: [u64; 4] = [10, 25, 89, 214];
const REFERENCE_MASS_RATIO: [f64; 4] = [11.30, 39.28, 54.12, 78.98];

fn within_factor_two(x: f64, reference: f64) -> bool {
    x >= reference / 2.0 && x <= reference * 2.0
}

fn criterion_4() -> Outcome {
    let mut cols = Vec::new();
    for q in 1..=4 {
        let e = trend_entry(FormFamily::Mass, ReferenceCell::Triangle, 0, q, 1).map_err(|e| e.to_string())?;
        let t = e.flops_t.ok_or("tensor failed")?;
        let r = e.ratio().ok_or("no ratio")?;
        ensure(within_factor_two(t as f64, REFERENCE_MASS_TENSOR[q - 1] as f64), || {
            format!("q={q}: tensor flops {t}")
        })?;
        ensure(within_factor_two(r, REFERENCE_MASS_RATIO[q - 1]), || format!("q={q}: q/t {r:.2}"))?;
        cols.push(format!("q{q} {t} {r:.2}"));
    }
    Ok(format!("tensor flops and q/t: {}", cols.join(", ")))
}

fn table(tables: &[TrendTable], family: FormFamily, cell: ReferenceCell) -> &TrendTable {
    tables
        .iter()
        .find(|t| t.family == family && t.cell == cell)
        .expect("sweep present")
}

fn criterion_5(tables: &[TrendTable]) -> Outcome {
    let mass = table(tables, FormFamily::Mass, ReferenceCell::Triangle);
    let mut low = f64::INFINITY;
    let mut high = 0.0f64;
    for e in &mass.entries {
        let r = e.ratio();
        if e.p == 0 {
            let r = r.ok_or_else(|| format!("p=0 q={} nf={}: no ratio", e.q, e.nf))?;
            ensure(r > 5.0, || format!("p=0 q={} nf={}: q/t {r:.2}", e.q, e.nf))?;
            low = low.min(r);
        }
        if e.p >= 2 && e.nf == 4 {
            // a tensor failure would also favour quadrature, but every
            // entry of this sweep is expected to build
            let r = r.ok_or_else(|| format!("p={} q={} nf=4: {}", e.p, e.q, e.tensor.marker()))?;
            ensure(r < 0.2, || format!("p={} q={} nf=4: q/t {r:.2}", e.p, e.q))?;
            high = high.max(r);
        }
    }
    let el = table(tables, FormFamily::Elasticity, ReferenceCell::Triangle);
    let mut el11 = Vec::new();
    for e in el.entries.iter().filter(|e| e.p == 1 && e.q == 1) {
        let r = e.ratio().ok_or("elasticity p=1 q=1: no ratio")?;
        ensure(r < 1.0, || format!("elasticity p=1 q=1 nf={}: q/t {r:.2}", e.nf))?;
        el11.push(r);
    }
    let e14 = el.get(1, 4, 1).and_then(|e| e.ratio()).ok_or("elasticity p=1 q=4 nf=1 missing")?;
    ensure(e14 > 1.0, || format!("elasticity p=1 q=4 nf=1: q/t {e14:.2}"))?;
    Ok(format!(
        "mass p=0 min q/t {low:.2}, p>=2 nf=4 max q/t {high:.2}; elasticity p=1 q=1 q/t {:.2}, p=1 q=4 q/t {e14:.2}",
        el11.first().copied().unwrap_or(f64::NAN)
    ))
}

fn innermost_extents(body: &[Stmt], out: &mut Vec<usize>) {
    for s in body {
        if let Stmt::Loop { extent, body, .. } = s {
            if body.iter().any(|s| matches!(s, Stmt::Loop { .. })) {
                innermost_extents(body, out);
            } else {
                out.push(*extent);
            }
        }
    }
}

fn criterion_6(suite: &[CompiledForm]) -> Outcome {
    let variants = [
        QuadratureOptions {
            zero_elimination: false,
            hoisting: true,
        },
        QuadratureOptions {
            zero_elimination: true,
            hoisting: false,
        },
    ];
    let mut worst = 0.0f64;
    for f in suite {
        let inputs = sample_inputs(f, 5, 2);
        let base = kernel(f, Representation::Quadrature, &BuildOptions::default())?;
        let base_flops = count_flops(&base).total();
        for v in variants {
            let opts = BuildOptions {
                quadrature: v,
                ..Default::default()
            };
            let k = kernel(f, Representation::Quadrature, &opts)?;
            let flops = count_flops(&k).total();
            ensure(flops >= base_flops, || format!("{}: {v:?} has {flops} < {base_flops} flops", f.name))?;
            let d = formkernel::harness::max_relative_difference(&base, &k, &inputs).map_err(|e| e.to_string())?;
            ensure(d <= 1e-13, || format!("{}: {v:?} differs by {d:.2e}", f.name))?;
            worst = worst.max(d);
        }
    }
    let wl = load("weighted_laplacian");
    let mut with = Vec::new();
    let mut without = Vec::new();
    innermost_extents(&kernel(&wl, Representation::Quadrature, &BuildOptions::default())?.body, &mut with);
    innermost_extents(
        &kernel(
            &wl,
            Representation::Quadrature,
            &BuildOptions {
                quadrature: variants[0],
                ..Default::default()
            },
        )?
        .body,
        &mut without,
    );
    // innermost loops are the j loops over basis functions; the coefficient
    // loop r keeps its full extent 3 either way
    let basis = |v: &[usize]| v.last().copied();
    ensure(basis(&with) == Some(2) && basis(&without) == Some(3), || {
        format!("inner extents with {with:?}, without {without:?}")
    })?;
    Ok(format!(
        "{} forms, worst relative difference {worst:.1e}; weighted Laplacian inner extent 3 -> 2",
        suite.len()
    ))
}

fn criterion_7(suite: &[CompiledForm]) -> Outcome {
    let mut kernels = 0;
    for f in suite.iter().chain(std::iter::once(&load("pressure"))) {
        let (g, w) = sample_inputs(f, 1, 3).remove(0);
        for repr in [Representation::Quadrature, Representation::Tensor] {
            for (ze, ho) in [(true, true), (false, true), (true, false)] {
                if repr == Representation::Tensor && !(ze && ho) {
                    continue;
                }
                let opts = BuildOptions {
                    quadrature: QuadratureOptions {
                        zero_elimination: ze,
                        hoisting: ho,
                    },
                    ..Default::default()
                };
                let k = match generate(f, repr, &opts) {
                    Ok(g) => g.kernel,
                    Err(HarnessError::Tensor(TensorError::UnsupportedDivision)) => continue,
                    Err(e) => return Err(format!("{}: {e}", f.name)),
                };
                let stat = count_flops(&k);
                let (_, dynamic) = interpret_counting(&k, &g, &w).map_err(|e| e.to_string())?;
                ensure(stat == dynamic, || format!("{}: static {stat:?}, dynamic {dynamic:?}", k.name))?;
                kernels += 1;
            }
        }
    }
    Ok(format!("{kernels} kernels, static and dynamic counts equal"))
}

fn criterion_8() -> Outcome {
    let f = load("pressure");
    match generate(&f, Representation::Tensor, &BuildOptions::default()) {
        Err(e @ HarnessError::Tensor(TensorError::UnsupportedDivision)) => {
            ensure(exit_code(&e) == 2, || "tensor rejection does not exit with 2".into())?
        }
        Err(e) => return Err(format!("tensor backend failed with {e}")),
        Ok(_) => return Err("tensor backend accepted a division form".into()),
    }
    let r = compare(
        &f,
        &CompareOptions {
            cells: 100,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    ensure(r.check == CheckKind::QuadratureSelfConsistency, || "not a self-consistency check".into())?;
    let d = r.max_difference.unwrap_or(f64::INFINITY);
    ensure(d <= SELF_CONSISTENCY_TOLERANCE, || format!("self-consistency difference {d:.2e}"))?;
    ensure(r.tensor.status.marker() == "unsupported", || "tensor column not marked".into())?;
    ensure(r.csv_row().contains(",NA,"), || "tensor CSV columns not NA".into())?;
    ensure(r.exit_code() == 0, || "check exit code".into())?;
    // the compiled kernel itself is close to the converged values too
    let inputs = sample_inputs(&f, 20, 0);
    let base = kernel(&f, Representation::Quadrature, &BuildOptions::default())?;
    let fine = quadrature_kernel_at(&f, f.degree + 12).map_err(|e| e.to_string())?;
    let coarse = formkernel::harness::max_relative_difference(&base, &fine, &inputs).map_err(|e| e.to_string())?;
    Ok(format!(
        "tensor: UnsupportedDivision (exit 2, marked unsupported); quadrature self-consistency {d:.1e}, estimated-degree rule within {coarse:.1e}"
    ))
}

fn main() {
    let start = Instant::now();
    let suite = suite();
    let trends = trend_suite(false);
    let results: Vec<(&str, Outcome)> = vec![
        ("cross-representation agreement", criterion_1(&suite)),
        ("weighted Laplacian kernel structure", criterion_2()),
        ("exactness of mass and stiffness", criterion_3()),
        ("mass flop-count bands", criterion_4()),
        (
            "trend reversal",
            trends.as_ref().map_err(|e| e.to_string()).and_then(|t| criterion_5(t)),
        ),
        ("optimisation soundness and benefit", criterion_6(&suite)),
        ("static and dynamic flop agreement", criterion_7(&suite)),
        ("division asymmetry", criterion_8()),
    ];
    if std::env::var_os("ACCEPTANCE_TABLES").is_some() {
        if let Ok(tables) = &trends {
            for t in tables {
                println!("{}", render_trend_table(t));
            }
        }
    }
    let mut failed = 0;
    for (i, (name, r)) in results.iter().enumerate() {
        match r {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed in {:.1} s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
