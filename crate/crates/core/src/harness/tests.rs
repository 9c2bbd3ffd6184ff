use super::*;
use crate::elements::{FiniteElement, ReferenceCell};
use crate::testutil::{mass, scalar_form, vector_form, WEIGHTED_LAPLACIAN_P1};

fn compiled(src: &str) -> CompiledForm {
    compile_form("test", src).unwrap()
}

#[test]
fn unit_square_mesh_counts_and_area() {
    let m = unit_square_mesh(4);
    assert_eq!(m.vertices.len(), 25);
    assert_eq!(m.num_cells(), 32);
    let area: f64 = (0..m.num_cells())
        .map(|c| affine_map(&m.cell_vertices(c)).unwrap().det / 2.0)
        .sum();
    assert!((area - 1.0).abs() < 1e-14);
    for c in 0..m.num_cells() {
        assert!(affine_map(&m.cell_vertices(c)).unwrap().det > 0.0);
    }
}

#[test]
fn random_cells_are_deterministic_and_bounded() {
    let a = random_cells(ReferenceCell::Tetrahedron, 20, 7);
    assert_eq!(a, random_cells(ReferenceCell::Tetrahedron, 20, 7));
    assert_ne!(a, random_cells(ReferenceCell::Tetrahedron, 20, 8));
    for v in &a {
        let det = affine_map(v).unwrap().det;
        assert!((0.1..=10.0).contains(&det));
    }
}

#[test]
fn dofmap_dimensions() {
    let m = unit_square_mesh(1);
    let el = |deg| FiniteElement::scalar(crate::elements::Family::Lagrange, ReferenceCell::Triangle, deg).unwrap();
    assert_eq!(build_dofmap(&m, &el(1)).unwrap().global_dim, 4);
    assert_eq!(build_dofmap(&m, &el(2)).unwrap().global_dim, 9);
    let dg = FiniteElement::scalar(crate::elements::Family::DiscontinuousLagrange, ReferenceCell::Triangle, 1).unwrap();
    assert_eq!(build_dofmap(&m, &dg).unwrap().global_dim, 6);
    let m4 = unit_square_mesh(4);
    // (2n + 1)^2 nodes for P2, twice that for the vector space
    assert_eq!(build_dofmap(&m4, &el(2)).unwrap().global_dim, 81);
    let vp2 = FiniteElement::vector(crate::elements::Family::Lagrange, ReferenceCell::Triangle, 2).unwrap();
    assert_eq!(build_dofmap(&m4, &vp2).unwrap().global_dim, 162);
    let p3 = build_dofmap(&m4, &el(3)).unwrap();
    assert_eq!(p3.global_dim, 13 * 13);
}

#[test]
fn shared_dofs_sit_at_the_same_point() {
    // every global dof must map to one physical node from all its cells
    let m = unit_square_mesh(3);
    for deg in 1..=3 {
        let el = FiniteElement::scalar(crate::elements::Family::Lagrange, ReferenceCell::Triangle, deg).unwrap();
        let d = build_dofmap(&m, &el).unwrap();
        let nodes = crate::elements::lattice_points(ReferenceCell::Triangle, deg);
        let mut at: Vec<Option<Vec<f64>>> = vec![None; d.global_dim];
        for c in 0..m.num_cells() {
            let g = affine_map(&m.cell_vertices(c)).unwrap();
            for (l, &dof) in d.cell_dofs[c].iter().enumerate() {
                let x = g.map_point(&nodes[l]);
                match &at[dof] {
                    None => at[dof] = Some(x),
                    Some(y) => assert!(x.iter().zip(y).all(|(a, b)| (a - b).abs() < 1e-12)),
                }
            }
        }
        assert!(at.iter().all(Option::is_some));
    }
}

#[test]
fn tetrahedral_assembly_is_unsupported() {
    let m = Mesh {
        cell: ReferenceCell::Tetrahedron,
        vertices: ReferenceCell::Tetrahedron.vertices(),
        cells: vec![vec![0, 1, 2, 3]],
    };
    let f = compiled(&mass("tetrahedron", 1));
    assert!(matches!(FormSpaces::new(&f, &m), Err(HarnessError::UnsupportedCell(_))));
}

#[test]
fn linear_forms_cannot_be_assembled() {
    let f = compiled(&scalar_form("triangle", 1, "f*v"));
    let m = unit_square_mesh(2);
    assert!(matches!(FormSpaces::new(&f, &m), Err(HarnessError::NotBilinear)));
}

fn assembled(src: &str, repr: Representation, n: usize) -> CsrMatrix {
    let f = compiled(src);
    let m = unit_square_mesh(n);
    let spaces = FormSpaces::new(&f, &m).unwrap();
    let w = spaces.random_coefficients(3);
    let k = generate(&f, repr, &BuildOptions::default()).unwrap().kernel;
    assemble(&k, &m, &spaces, &w).unwrap().matrix
}

#[test]
fn mass_matrix_sums_to_area() {
    for deg in 1..=3 {
        for repr in [Representation::Quadrature, Representation::Tensor] {
            let a = assembled(&mass("triangle", deg), repr, 4);
            assert!((a.total() - 1.0).abs() < 1e-13, "degree {deg}: {}", a.total());
        }
    }
}

#[test]
fn stiffness_rows_sum_to_zero() {
    for deg in 1..=3 {
        let a = assembled(&scalar_form("triangle", deg, "dot(grad(v), grad(u))"), Representation::Tensor, 3);
        for s in a.row_sums() {
            assert!(s.abs() < 1e-12);
        }
        // symmetric
        for r in 0..a.rows {
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                let c = a.col_idx[k];
                assert!((a.values[k] - a.get(c, r)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn p1_stiffness_on_uniform_mesh_is_five_point_stencil() {
    let a = assembled(&scalar_form("triangle", 1, "dot(grad(v), grad(u))"), Representation::Quadrature, 4);
    // interior vertex (2, 2) of the 5 x 5 grid
    let c = 2 * 5 + 2;
    assert!((a.get(c, c) - 4.0).abs() < 1e-12);
    for nb in [c - 1, c + 1, c - 5, c + 5] {
        assert!((a.get(c, nb) + 1.0).abs() < 1e-12);
    }
    assert!(a.get(c, c + 6).abs() < 1e-12);
}

#[test]
fn representations_assemble_the_same_matrix() {
    let forms = [
        WEIGHTED_LAPLACIAN_P1.to_string(),
        scalar_form("triangle", 2, "f*g*u*v + dot(b, grad(u))*v"),
        vector_form("triangle", 2, "f*div(u)*div(v) - dot(dot(grad(u), b), v)"),
    ];
    for src in &forms {
        let q = assembled(src, Representation::Quadrature, 3);
        let t = assembled(src, Representation::Tensor, 3);
        assert_eq!(q.col_idx, t.col_idx);
        assert!(relative_difference(&q.values, &t.values) <= 1e-10);
    }
}

#[test]
fn assembly_does_not_depend_on_cell_order() {
    let f = compiled(&scalar_form("triangle", 2, "f*dot(grad(v), grad(u))"));
    let m = unit_square_mesh(4);
    let spaces = FormSpaces::new(&f, &m).unwrap();
    let w = spaces.random_coefficients(1);
    let k = generate(&f, Representation::Tensor, &BuildOptions::default()).unwrap().kernel;
    let a = assemble(&k, &m, &spaces, &w).unwrap().matrix;
    let rev: Vec<usize> = (0..m.num_cells()).rev().collect();
    let b = assemble_in_order(&k, &m, &spaces, &w, &rev).unwrap().matrix;
    let scale = a.values.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() <= 1e-12 * scale);
    }
}

#[test]
fn compare_reports_cross_check() {
    let f = compiled(WEIGHTED_LAPLACIAN_P1);
    let r = compare(
        &f,
        &CompareOptions {
            cells: 20,
            bench_n: Some(100),
            insertion_mesh: Some(4),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(r.check, CheckKind::CrossRepresentation);
    assert!(r.passed);
    assert!(r.max_difference.unwrap() <= CROSS_CHECK_TOLERANCE);
    assert!(r.quadrature.runtime.is_some() && r.tensor.runtime.is_some());
    assert!(r.insertion.is_some());
    let row = r.csv_row();
    assert_eq!(row.split(',').count(), ComparisonReport::CSV_HEADER.split(',').count());
    assert!(row.starts_with("test,"));
    assert!(r.to_string().contains("interpreter"));
}

#[test]
fn division_forms_use_self_consistency() {
    let f = compiled(&scalar_form("triangle", 1, "f*u*v/g"));
    let r = compare(&f, &CompareOptions { cells: 10, ..Default::default() }).unwrap();
    assert_eq!(r.tensor.status.marker(), "unsupported");
    assert_eq!(r.check, CheckKind::QuadratureSelfConsistency);
    assert!(r.passed, "{r}");
    let row = r.csv_row();
    assert!(row.contains(",NA,"));
}

#[test]
fn pressure_form_is_self_consistent() {
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/forms/pressure.form")).unwrap();
    let f = compiled(&src);
    let r = compare(&f, &CompareOptions { cells: 20, ..Default::default() }).unwrap();
    assert!(r.passed, "{r}");
    assert!(r.max_difference.unwrap() <= SELF_CONSISTENCY_TOLERANCE);
}

#[test]
fn family_forms_compile() {
    for fam in [FormFamily::Mass, FormFamily::Elasticity, FormFamily::VectorPoissonDiv] {
        for cell in [ReferenceCell::Triangle, ReferenceCell::Tetrahedron] {
            let p = if fam == FormFamily::VectorPoissonDiv { 1 } else { 0 };
            compile_form("f", &family_form(fam, cell, p, 1, 2)).unwrap();
        }
    }
}

#[test]
fn premultiplied_mass_flops() {
    // P1..P4 mass with one piecewise-constant coefficient
    let tensor: Vec<u64> = (1..=4)
        .map(|q| trend_entry(FormFamily::Mass, ReferenceCell::Triangle, 0, q, 1).unwrap().flops_t.unwrap())
        .collect();
    assert_eq!(tensor, vec![10, 25, 89, 214]);
}

#[test]
fn trend_table_marks_failures() {
    let t = TrendTable {
        family: FormFamily::Mass,
        cell: ReferenceCell::Triangle,
        entries: vec![
            TrendEntry {
                p: 0,
                q: 1,
                nf: 1,
                flops_q: Some(20),
                flops_t: Some(10),
                tensor: Availability::Ok,
            },
            TrendEntry {
                p: 0,
                q: 2,
                nf: 1,
                flops_q: Some(50),
                flops_t: None,
                tensor: Availability::Failed("too large".into()),
            },
        ],
    };
    let s = render_trend_table(&t);
    assert!(s.contains("2.00"));
    assert!(s.contains("failure"));
}
