use super::*;
use crate::geom::ShapeSpec;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

fn sigma_d_bottom() -> Vec<Side> {
    vec![Side::Bottom]
}

#[test]
fn smallest_grid_counts() {
    let mesh = generate_square_mesh::<f64>(1, &sigma_d_bottom());
    assert_eq!(mesh.num_vertices(), 4);
    assert_eq!(mesh.num_triangles(), 2);
    assert_eq!(mesh.boundary_edges().len(), 4);
    let d_count = mesh
        .boundary_edges()
        .iter()
        .filter(|e| e.label == BoundaryLabel::SigmaD)
        .count();
    assert_eq!(d_count, 1);
    mesh.audit().unwrap();
}

#[test]
fn grid_counts_n2() {
    let mesh = generate_square_mesh::<f64>(2, &sigma_d_bottom());
    assert_eq!(mesh.num_vertices(), 9);
    assert_eq!(mesh.num_triangles(), 8);
    assert_eq!(mesh.boundary_edges().len(), 8);
}

#[test]
fn uniform_grid_areas_n64() {
    let mesh = generate_square_mesh::<f64>(64, &sigma_d_bottom());
    assert_eq!(mesh.num_triangles(), 8192);
    for t in 0..mesh.num_triangles() {
        let area = mesh.triangle_area(t);
        assert!(area > 0.0);
        assert!((area - 1.0 / 2048.0).abs() < 1e-15);
    }
    assert!((mesh.total_area() - 4.0).abs() < 1e-12);
}

#[test]
fn hole_mesh_disk_removed_area() {
    let disk = ShapeSpec::Disk { center: [0.0, 0.0], r: 0.3 };
    let mesh = generate_hole_mesh::<f64>(128, &[disk], &sigma_d_bottom(), 0.1).unwrap();
    let removed = 4.0 - mesh.total_area();
    let exact = std::f64::consts::PI * 0.09;
    assert!((removed - exact).abs() < 0.05 * exact, "removed {removed} vs {exact}");
    mesh.audit().unwrap();
    assert!(mesh
        .boundary_edges()
        .iter()
        .any(|e| e.label == BoundaryLabel::CavityWall));
}

#[test]
fn hole_mesh_empty_shape_list_is_noop() {
    let with = generate_hole_mesh::<f64>(8, &[], &sigma_d_bottom(), 0.1).unwrap();
    let without = generate_square_mesh::<f64>(8, &sigma_d_bottom());
    assert_eq!(with.vertices(), without.vertices());
    assert_eq!(with.triangles(), without.triangles());
    assert_eq!(with.boundary_edges(), without.boundary_edges());
}

#[test]
fn hole_mesh_staircase_stays_near_rectangle() {
    let rect = ShapeSpec::Rectangle { center: [0.0, 0.0], hx: 0.2, hy: 0.1 };
    let mesh = generate_hole_mesh::<f64>(128, &[rect], &sigma_d_bottom(), 0.1).unwrap();
    let cell_diam = (2.0f64 / 128.0) * 2.0f64.sqrt();
    for e in mesh.boundary_edges() {
        if e.label != BoundaryLabel::CavityWall {
            continue;
        }
        for &v in &[e.a, e.b] {
            let p = mesh.vertex(v);
            // distance from p to the rectangle boundary
            let dx = p.x.abs() - 0.2;
            let dy = p.y.abs() - 0.1;
            let dist = if dx <= 0.0 && dy <= 0.0 {
                (-dx).min(-dy)
            } else {
                let ox = dx.max(0.0);
                let oy = dy.max(0.0);
                (ox * ox + oy * oy).sqrt()
            };
            assert!(dist <= cell_diam, "staircase vertex {dist} from rectangle");
        }
    }
}

#[test]
fn hole_mesh_rejects_shape_near_boundary() {
    let disk = ShapeSpec::Disk { center: [0.7, 0.0], r: 0.2 };
    let err = generate_hole_mesh::<f64>(32, &[disk], &sigma_d_bottom(), 0.1).unwrap_err();
    assert!(matches!(err, MeshError::ShapeTouchesBoundary { .. }));
}

#[test]
fn hole_mesh_rejects_overlapping_shapes() {
    let a = ShapeSpec::Disk { center: [0.0, 0.0], r: 0.3 };
    let b = ShapeSpec::Disk { center: [0.2, 0.0], r: 0.3 };
    let err = generate_hole_mesh::<f64>(32, &[a, b], &sigma_d_bottom(), 0.1).unwrap_err();
    assert!(matches!(err, MeshError::ShapesOverlap));
}

#[test]
fn refine_empty_marking_is_identity() {
    let mesh = generate_square_mesh::<f64>(4, &sigma_d_bottom());
    let (refined, prolong) = refine(&mesh, &BTreeSet::new());
    assert_eq!(refined.num_triangles(), mesh.num_triangles());
    assert_eq!(refined.num_vertices(), mesh.num_vertices());
    assert!(prolong.added.is_empty());
}

#[test]
fn refine_single_triangle_conforming() {
    let mesh = generate_square_mesh::<f64>(2, &sigma_d_bottom());
    let marked: BTreeSet<usize> = [3].into_iter().collect();
    let (refined, _) = refine(&mesh, &marked);
    refined.audit().unwrap();
    // edge-incidence census: interior edges twice, boundary edges once
    let incidence = refined.edge_incidence();
    for tris in incidence.values() {
        assert!(tris.len() <= 2);
    }
    assert!((refined.total_area() - 4.0).abs() < 1e-12);
    // old vertices persisted
    for (i, &p) in mesh.vertices().iter().enumerate() {
        assert_eq!(refined.vertex(i), p);
    }
}

#[test]
fn refine_all_doubles_triangle_count() {
    let mesh = generate_square_mesh::<f64>(4, &sigma_d_bottom());
    let marked: BTreeSet<usize> = (0..mesh.num_triangles()).collect();
    let (refined, _) = refine(&mesh, &marked);
    assert_eq!(refined.num_triangles(), 2 * mesh.num_triangles());
    refined.audit().unwrap();
    // once more, on the already-bisected family
    let marked: BTreeSet<usize> = (0..refined.num_triangles()).collect();
    let (again, _) = refine(&refined, &marked);
    assert_eq!(again.num_triangles(), 2 * refined.num_triangles());
    again.audit().unwrap();
    assert!((again.total_area() - 4.0).abs() < 1e-12);
}

#[test]
fn prolongation_is_exact_for_p1_fields() {
    let mesh = generate_square_mesh::<f64>(3, &sigma_d_bottom());
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let field = NodalField::scalar(
        (0..mesh.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    );
    let marked: BTreeSet<usize> = [0, 5, 7].into_iter().collect();
    let (refined, prolong) = refine(&mesh, &marked);
    let coarse_eval = Locator::new(&mesh);
    let prolonged = prolong.apply(&field);
    // refine-then-evaluate == evaluate-then-refine at quadrature points
    for t in 0..refined.num_triangles() {
        let [a, b, c] = refined.triangle_points(t);
        let tri = refined.triangles()[t];
        for (m, (i, j)) in [((a + b) * 0.5, (tri[0], tri[1])), ((b + c) * 0.5, (tri[1], tri[2])), ((c + a) * 0.5, (tri[2], tri[0]))] {
            let fine_val = (prolonged.data[i] + prolonged.data[j]) * 0.5;
            let coarse_val = coarse_eval.evaluate(&field, m).expect("inside")[0];
            assert!((fine_val - coarse_val).abs() < 1e-12);
        }
    }
}

#[test]
fn mark_by_gradient_constant_field_tie_break() {
    let mesh = generate_square_mesh::<f64>(4, &sigma_d_bottom());
    let v = NodalField::scalar(vec![0.0; mesh.num_vertices()]);
    let marked = mesh.mark_by_gradient(&v, 0.25);
    let expect = ((0.25 * mesh.num_triangles() as f64).ceil()) as usize;
    assert_eq!(marked.len(), expect);
    assert_eq!(marked, (0..expect).collect::<Vec<_>>());
}

#[test]
fn mark_by_gradient_full_fraction_marks_all() {
    let mesh = generate_square_mesh::<f64>(4, &sigma_d_bottom());
    let v = NodalField::scalar(mesh.vertices().iter().map(|p| p.x).collect());
    let marked = mesh.mark_by_gradient(&v, 1.0);
    assert_eq!(marked.len(), mesh.num_triangles());
}

#[test]
fn mark_by_gradient_matches_brute_force_sort() {
    let mesh = generate_square_mesh::<f64>(12, &sigma_d_bottom());
    // indicator-like bump: 1 inside a disk, 0 outside, linear P1 transition
    let v = NodalField::scalar(
        mesh.vertices()
            .iter()
            .map(|p| if p.x * p.x + p.y * p.y < 0.16 { 1.0 } else { 0.0 })
            .collect(),
    );
    let fraction = 0.1;
    let marked = mesh.mark_by_gradient(&v, fraction);

    let grads = mesh.gradient_magnitudes(&v);
    let mut order: Vec<usize> = (0..mesh.num_triangles()).collect();
    order.sort_by(|&i, &j| grads[j].partial_cmp(&grads[i]).unwrap().then(i.cmp(&j)));
    let k = (fraction * mesh.num_triangles() as f64).ceil() as usize;
    let mut expect: Vec<usize> = order.into_iter().take(k).collect();
    expect.sort_unstable();
    assert_eq!(marked, expect);
    // all marked triangles sit on the transition band (nonzero gradient)
    for &t in &marked {
        assert!(grads[t] > 0.0);
    }
}

#[test]
fn interpolate_same_mesh_identity() {
    let mesh = generate_square_mesh::<f64>(5, &sigma_d_bottom());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let field = NodalField::vector(
        (0..2 * mesh.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    );
    let out = interpolate_nodal(&mesh, &field, &mesh).unwrap();
    assert_eq!(out.field.data, field.data);
    assert!(out.uncovered.is_empty());
}

#[test]
fn interpolate_reproduces_affine() {
    let fine = generate_square_mesh::<f64>(16, &sigma_d_bottom());
    let coarse = generate_square_mesh::<f64>(7, &sigma_d_bottom());
    let affine = |p: crate::geom::Point2<f64>| 0.3 + 1.7 * p.x - 0.9 * p.y;
    let field = NodalField::scalar(fine.vertices().iter().map(|&p| affine(p)).collect());
    let out = interpolate_nodal(&fine, &field, &coarse).unwrap();
    for (i, &p) in coarse.vertices().iter().enumerate() {
        assert!((out.field.data[i] - affine(p)).abs() < 1e-12);
    }
}

#[test]
fn interpolate_roundtrip_preserves_coarse_values() {
    let fine = generate_square_mesh::<f64>(16, &sigma_d_bottom());
    let coarse = generate_square_mesh::<f64>(8, &sigma_d_bottom());
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let field = NodalField::scalar(
        (0..fine.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    );
    let c1 = interpolate_nodal(&fine, &field, &coarse).unwrap().field;
    let f2 = interpolate_nodal(&coarse, &c1, &fine).unwrap().field;
    let c2 = interpolate_nodal(&fine, &f2, &coarse).unwrap().field;
    assert_eq!(c1.data, c2.data);
}

#[test]
fn interpolate_reports_hole_vertices() {
    let disk = ShapeSpec::Disk { center: [0.0, 0.0], r: 0.3 };
    let src = generate_hole_mesh::<f64>(64, &[disk], &sigma_d_bottom(), 0.1).unwrap();
    let dst = generate_square_mesh::<f64>(16, &sigma_d_bottom());
    let field = NodalField::scalar(vec![1.0; src.num_vertices()]);
    let out = interpolate_nodal(&src, &field, &dst).unwrap();
    assert!(!out.uncovered.is_empty());
    for &v in &out.uncovered {
        let p = dst.vertex(v);
        assert!(p.x * p.x + p.y * p.y < 0.16);
        assert_eq!(out.field.data[v], 0.0);
    }
}

#[test]
fn inner_band_two_rings() {
    let mesh = generate_square_mesh::<f64>(20, &sigma_d_bottom());
    let band = mesh.inner_band(0.1);
    // outermost two rings of a 21x21 grid
    assert_eq!(band.len(), 21 * 21 - 17 * 17);
    for &v in &band {
        let p = mesh.vertex(v);
        let dist = (1.0 - p.x.abs()).min(1.0 - p.y.abs());
        assert!(dist <= 0.1 + 1e-9);
    }
}

#[test]
fn inner_band_thin_and_near_total() {
    let mesh = generate_square_mesh::<f64>(10, &sigma_d_bottom());
    let thin = mesh.inner_band(0.1); // below one cell (h = 0.2)
    assert_eq!(thin.len(), 4 * 10);
    let wide = mesh.inner_band(0.999);
    assert_eq!(wide.len(), mesh.num_vertices() - 1); // all but the center

    // monotone in d0
    let band_a: BTreeSet<_> = mesh.inner_band(0.2).into_iter().collect();
    let band_b: BTreeSet<_> = mesh.inner_band(0.5).into_iter().collect();
    assert!(band_a.is_subset(&band_b));
}

#[test]
fn boundary_trace_sawtooth() {
    let mesh = generate_square_mesh::<f64>(6, &sigma_d_bottom());
    let field = NodalField::scalar(mesh.vertices().iter().map(|p| p.x).collect());
    let trace = BoundaryTrace::extract(&mesh, &field, TraceSelect::Outer);
    assert_eq!(trace.samples.len(), 4 * 6);
    for &(s, v) in &trace.samples {
        let expect = if s <= 2.0 {
            s - 1.0
        } else if s <= 4.0 {
            1.0
        } else if s <= 6.0 {
            5.0 - s
        } else {
            -1.0
        };
        assert!((v[0] - expect).abs() < 1e-12, "s={s} v={} expect={expect}", v[0]);
    }
}

#[test]
fn boundary_trace_missing_label_is_empty() {
    let mesh = generate_square_mesh::<f64>(4, &sigma_d_bottom());
    let field = NodalField::scalar(vec![1.0; mesh.num_vertices()]);
    let trace = BoundaryTrace::extract(&mesh, &field, TraceSelect::Label(BoundaryLabel::CavityWall));
    assert!(trace.is_empty());
}

#[test]
fn boundary_trace_interplay_with_interpolation() {
    // fine-mesh trace sampled at coarse boundary nodes reproduces the coarse
    // trace of the interpolated field
    let fine = generate_square_mesh::<f64>(16, &sigma_d_bottom());
    let coarse = generate_square_mesh::<f64>(8, &sigma_d_bottom());
    let field = NodalField::scalar(fine.vertices().iter().map(|p| p.x * p.y + 0.5 * p.x).collect());
    let fine_trace = BoundaryTrace::extract(&fine, &field, TraceSelect::Outer);
    let coarse_field = interpolate_nodal(&fine, &field, &coarse).unwrap().field;
    let coarse_trace = BoundaryTrace::extract(&coarse, &coarse_field, TraceSelect::Outer);
    for &(s, v) in &coarse_trace.samples {
        let expect = fine_trace.eval(s);
        assert!((v[0] - expect[0]).abs() < 1e-12);
    }
}

#[test]
fn kvmesh_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.kvmesh");
    let mesh = generate_square_mesh::<f64>(3, &sigma_d_bottom());
    write_mesh(&mesh, &path).unwrap();
    let back = read_mesh::<f64>(&path).unwrap();
    assert_eq!(back.vertices(), mesh.vertices());
    assert_eq!(back.triangles(), mesh.triangles());
    assert_eq!(back.boundary_edges(), mesh.boundary_edges());
}

#[test]
fn kvmesh_truncated_file_names_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.kvmesh");
    std::fs::write(&path, "KVMESH 1\n4 2 4\n0 0\n1 0\n").unwrap();
    let err = read_mesh::<f64>(&path).unwrap_err();
    match err {
        MeshError::Parse { line, .. } => assert_eq!(line, 5),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn kvmesh_clockwise_triangle_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cw.kvmesh");
    // single triangle listed clockwise
    std::fs::write(
        &path,
        "KVMESH 1\n3 1 3\n0 0\n1 0\n0 1\n0 2 1\n0 1 SIGMA_D\n1 2 SIGMA_N\n2 0 SIGMA_N\n",
    )
    .unwrap();
    let err = read_mesh::<f64>(&path).unwrap_err();
    assert!(matches!(err, MeshError::Orientation { .. }));
}

#[test]
fn kvmesh_comments_allowed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.kvmesh");
    std::fs::write(
        &path,
        "# header\nKVMESH 1\n3 1 3 # counts\n0 0\n1 0\n0 1\n0 1 2\n0 1 SIGMA_D\n1 2 SIGMA_N\n2 0 SIGMA_N\n",
    )
    .unwrap();
    let mesh = read_mesh::<f64>(&path).unwrap();
    assert_eq!(mesh.num_triangles(), 1);
}

#[test]
fn audit_catches_unlabeled_boundary() {
    let vertices = vec![
        crate::geom::Point2::new(0.0, 0.0),
        crate::geom::Point2::new(1.0, 0.0),
        crate::geom::Point2::new(0.0, 1.0),
    ];
    let triangles = vec![[0, 1, 2]];
    let boundary = vec![
        BoundaryEdge { a: 0, b: 1, label: BoundaryLabel::SigmaD },
        BoundaryEdge { a: 1, b: 2, label: BoundaryLabel::SigmaN },
    ];
    let err = Mesh::new(vertices, triangles, boundary, vec![0]).unwrap_err();
    assert!(matches!(err, MeshError::UnlabeledBoundary { .. }));
}
