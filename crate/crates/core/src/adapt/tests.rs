use super::*;
use crate::mesh::BoxDomain;
use crate::metric::Tensor;

fn iso(mesh: &SimplicialMesh, s: f64) -> MetricField {
    MetricField::isotropic(mesh.dim(), mesh.num_nodes(), s)
}

fn on_box(mesh: &SimplicialMesh) -> bool {
    let d = mesh.domain();
    (0..mesh.num_nodes()).filter(|&i| mesh.is_boundary_node(i)).all(|i| {
        let x = mesh.point(i);
        (0..mesh.dim()).any(|k| (x[k] - d.lo[k]).abs() < 1e-9 || (x[k] - d.hi[k]).abs() < 1e-9)
    })
}

#[test]
fn sw_table() {
    let names = ["m", "r", "c", "s"];
    for sw in 0..16u32 {
        let m = decode_sw(sw).unwrap();
        let got = [m.r#move, m.refine, m.coarsen, m.swap];
        for (bit, name) in names.iter().enumerate() {
            assert_eq!(got[bit], sw >> bit & 1 == 1, "sw={sw} action {name}");
        }
        assert_eq!(encode_sw(m), sw);
    }
    assert_eq!(decode_sw(5).unwrap(), ActionMask { r#move: true, refine: false, coarsen: true, swap: false });
    assert_eq!(decode_sw(3).unwrap(), ActionMask { r#move: true, refine: true, coarsen: false, swap: false });
    assert!(decode_sw(16).is_err());
}

#[test]
fn options_defaults_and_validation() {
    let o = AdaptOptions::for_dim(2);
    assert_eq!((o.innerit, o.sw, o.qual_p, o.ppar), (2, 15, 0.0, 1000.0));
    assert!((o.l_low * o.l_up - 1.0).abs() < 1e-15);
    assert_eq!(AdaptOptions::for_dim(3).qual_p, 2.0);
    let c = CoarsenOptions::for_dim(2);
    assert_eq!((c.base.sw, c.crmax, c.npb), (5, 10, 0));
    assert!(AdaptOptions { l_low: 2.0, ..o }.validate().is_err());
    assert!(AdaptOptions { innerit: 0, ..o }.validate().is_err());
    assert!(AdaptOptions { qual_p: -1.0, ..o }.validate().is_err());
}

#[test]
fn combined_quality_examples() {
    let h = 3f64.sqrt() / 2.0;
    let dom = BoxDomain { lo: [-1.0, -1.0, 0.0], hi: [1.0, 1.0, 0.0] };
    let eq = SimplicialMesh::from_parts(2, dom, vec![[-0.5, 0.0, 0.0], [0.5, 0.0, 0.0], [0.0, h, 0.0]], vec![[0, 1, 2, 0]])
        .unwrap();
    for qp in [0.0, 1.0, 2.0] {
        assert!((combined_quality(&eq, &iso(&eq, 1.0), 0, qp) - 1.0).abs() < 1e-12);
    }
    // equilateral mapped through diag(1/2, 1) is equilateral under diag(4, 1)
    let an = SimplicialMesh::from_parts(
        2,
        dom,
        vec![[-0.25, 0.0, 0.0], [0.25, 0.0, 0.0], [0.0, h, 0.0]],
        vec![[0, 1, 2, 0]],
    )
    .unwrap();
    let psi = MetricField::uniform(2, 3, Tensor::from_diagonal(&nalgebra::Vector3::new(4.0, 1.0, 0.0)));
    assert!((combined_quality(&an, &psi, 0, 0.0) - 1.0).abs() < 1e-10);
    let qe = an.element_quality_euclidean(0);
    assert!((combined_quality(&an, &iso(&an, 1.0), 0, 2.0) - qe.powi(3)).abs() < 1e-12);
}

#[test]
fn coarsen_examples() {
    let mesh = SimplicialMesh::rect(1.0, 1.0, 11, 11).unwrap();
    let u = vec![0.0; mesh.num_nodes()];
    let o = AdaptOptions::default();
    let out = coarsen_pass(&mesh, &u, &iso(&mesh, 25.0), &o).unwrap();
    assert_eq!(out.count, 0);
    assert_eq!(out.mesh, mesh);

    let h = 0.2;
    let s = (o.l_low / (2.0 * h)).powi(2);
    let out = coarsen_pass(&mesh, &u, &iso(&mesh, s), &o).unwrap();
    assert!(out.mesh.num_nodes() < mesh.num_nodes());
    assert!(out.mesh.validate().is_valid());
    assert!(on_box(&out.mesh));
    for c in [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]] {
        assert!((0..out.mesh.num_nodes()).any(|i| {
            let x = out.mesh.point(i);
            x[0] == c[0] && x[1] == c[1]
        }));
    }
}

#[test]
fn refine_examples() {
    let mesh = SimplicialMesh::rect(1.0, 1.0, 2, 2).unwrap();
    let u = vec![1.0, 2.0, 3.0, 4.0];
    let o = AdaptOptions::default();
    let out = refine_pass(&mesh, &u, &iso(&mesh, 0.2), &o).unwrap();
    assert_eq!((out.count, out.mesh.num_nodes()), (0, 4));

    let h = 2.0;
    let out = refine_pass(&mesh, &u, &iso(&mesh, (2.0 * o.l_up / h).powi(2)), &o).unwrap();
    assert!(out.mesh.num_nodes() > 5);
    assert!(out.mesh.validate().is_valid());
    assert!(on_box(&out.mesh));
    assert!(out.mesh.edges().len() > mesh.edges().len());
    // P1 field stays linear along edges
    assert!(out.u.iter().all(|v| (1.0..=4.0).contains(v)));

    // only the diagonal exceeds l_up: two triangles become four
    let s = (1.2f64 / h).powi(2);
    let out = refine_pass(&mesh, &u, &iso(&mesh, s), &o).unwrap();
    assert_eq!((out.count, out.mesh.num_elements(), out.mesh.num_nodes()), (1, 4, 5));
}

#[test]
fn move_examples() {
    let mesh = SimplicialMesh::rect(1.0, 1.0, 7, 7).unwrap();
    let u = vec![0.0; mesh.num_nodes()];
    let o = AdaptOptions::default();
    let out = move_pass(&mesh, &u, &iso(&mesh, 1.0), &o).unwrap();
    for i in 0..mesh.num_nodes() {
        assert!(crate::mesh::dist(&mesh.point(i), &out.mesh.point(i)) < 1e-10);
    }

    let centre = 3 + 7 * 3;
    let mut pts = mesh.points().to_vec();
    pts[centre][0] += 0.08;
    pts[centre][1] -= 0.05;
    let pert = SimplicialMesh::from_parts(2, *mesh.domain(), pts, mesh.raw_elements().to_vec()).unwrap();
    let out = move_pass(&pert, &u, &iso(&pert, 1.0), &o).unwrap();
    let d0 = crate::mesh::dist(&pert.point(centre), &mesh.point(centre));
    let d1 = crate::mesh::dist(&out.mesh.point(centre), &mesh.point(centre));
    assert!(d1 < d0, "{d1} >= {d0}");
    assert!(out.mesh.validate().is_valid());
}

#[test]
fn swap_examples() {
    let mesh = SimplicialMesh::rect(1.0, 1.0, 5, 5).unwrap();
    let u = vec![0.0; mesh.num_nodes()];
    let o = AdaptOptions::default();
    assert_eq!(swap_pass(&mesh, &u, &iso(&mesh, 1.0), &o).unwrap().count, 0);

    // convex quad split along its long diagonal
    let dom = BoxDomain { lo: [-2.0, -1.0, 0.0], hi: [2.0, 1.0, 0.0] };
    let pts = vec![[-2.0, 0.0, 0.0], [0.0, -1.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
    let quad = SimplicialMesh::from_parts(2, dom, pts.clone(), vec![[0, 1, 2, 0], [0, 2, 3, 0]]).unwrap();
    // the pair is not a box-conforming mesh, so drive the editor directly
    let mut ed = editor::Editor::new(&quad, &[0.0; 4], &iso(&quad, 1.0), 0.0);
    let q_old = ed.quality(&[0, 1, 2, 0]).min(ed.quality(&[0, 2, 3, 0]));
    assert_eq!(passes::swap(&mut ed), 1);
    assert!(ed.shell(0, 2).is_empty());
    let alive: Vec<[usize; 4]> = (0..ed.elems.len()).filter(|&e| ed.elem_alive[e]).map(|e| ed.elems[e]).collect();
    assert_eq!(alive.len(), 2);
    assert!(alive.iter().all(|t| ed.quality(t) > q_old && t[..3].contains(&1) && t[..3].contains(&3)));

    // non-convex pair: flipping would invert
    let pts = vec![[-2.0, 0.0, 0.0], [0.0, -1.0, 0.0], [-1.5, 0.0, 0.0], [0.0, 1.0, 0.0]];
    let dart = SimplicialMesh::from_parts(2, dom, pts, vec![[0, 1, 2, 0], [0, 2, 3, 0]]).unwrap();
    let mut ed = editor::Editor::new(&dart, &[0.0; 4], &iso(&dart, 1.0), 0.0);
    assert_eq!(passes::swap(&mut ed), 0);

    // skewed interior node: flips improve the worst element and keep validity
    let mut pts = SimplicialMesh::rect(1.0, 1.0, 3, 3).unwrap().points().to_vec();
    pts[4] = [0.6, 0.55, 0.0];
    let skew = SimplicialMesh::rect(1.0, 1.0, 3, 3).unwrap();
    let skew = SimplicialMesh::from_parts(2, *skew.domain(), pts, skew.raw_elements().to_vec()).unwrap();
    let out = swap_pass(&skew, &[0.0; 9], &iso(&skew, 1.0), &o).unwrap();
    let worst = |m: &SimplicialMesh| (0..m.num_elements()).map(|e| m.element_quality_euclidean(e)).fold(1.0, f64::min);
    assert!(out.count > 0 && worst(&out.mesh) > worst(&skew));
}

#[test]
fn swap_3d_keeps_validity() {
    let mesh = SimplicialMesh::cuboid(1.0, 1.0, 1.0, 4, 4, 4).unwrap();
    let u = vec![0.0; mesh.num_nodes()];
    let psi = MetricField::uniform(3, mesh.num_nodes(), Tensor::from_diagonal(&nalgebra::Vector3::new(1.0, 9.0, 1.0)));
    let out = swap_pass(&mesh, &u, &psi, &AdaptOptions::for_dim(3)).unwrap();
    assert!(out.mesh.validate().is_valid());
    assert!((out.mesh.measure() - 8.0).abs() < 1e-10);
}

#[test]
fn tradapt_sw_zero_is_identity() {
    let mesh = SimplicialMesh::rect(2.0, 2.0, 9, 9).unwrap();
    let u = mesh.sample(|x| (x[0] * x[1]).sin());
    let out = tradapt(&mesh, &u, &AdaptOptions { sw: 0, ..Default::default() }).unwrap();
    assert_eq!(out.mesh, mesh);
    assert_eq!(out.u, u);
}

#[test]
fn tradapt_full_changes_mesh() {
    let mesh = SimplicialMesh::rect(2.0, 2.0, 15, 15).unwrap();
    let f = |x: &[f64]| (10.0 * (x[0] - 1.0)).tanh();
    let out = tradapt_to_function(&mesh, &f, &AdaptOptions { eta_policy: EtaPolicy::Constant(0.01), ..Default::default() })
        .unwrap();
    let s = &out.stats;
    assert_ne!(s.np_after, s.np_before);
    assert!(s.splits > 0 && s.collapses > 0 && s.moves > 0, "{s}");
    assert!(out.mesh.validate().is_valid());
    assert!(on_box(&out.mesh));
    assert!(s.iterations <= 2);
    assert!(s.to_string().starts_with("np_before=225 "));
}

#[test]
fn coarsen_only_never_grows() {
    let mesh = SimplicialMesh::rect(2.0, 2.0, 21, 21).unwrap();
    let mut u = mesh.sample(|x| (-(x[0] * x[0] + x[1] * x[1])).exp());
    let mut m = mesh;
    let o = CoarsenOptions::default().base;
    for _ in 0..3 {
        let np = m.num_nodes();
        let out = tradapt(&m, &u, &o).unwrap();
        assert!(out.mesh.num_nodes() <= np);
        m = out.mesh;
        u = out.u;
    }
}

#[test]
fn two_step_guard() {
    let mesh = SimplicialMesh::rect(2.0, 2.0, 13, 13).unwrap();
    let u = mesh.sample(|x| (2.0 * x[0]).sin());
    let trop = AdaptOptions { eta_policy: EtaPolicy::Constant(0.01), ..Default::default() };
    let plain = tradapt(&mesh, &u, &trop).unwrap();
    let two = two_step_adapt(&mesh, &u, &trop, &CoarsenOptions::default()).unwrap();
    assert_eq!(plain.mesh, two.mesh);
    let huge = CoarsenOptions { npb: 1_000_000, ..Default::default() };
    let (two, np1) = two_step_adapt_detailed(&mesh, &u, &trop, &huge).unwrap();
    assert_eq!(np1, mesh.num_nodes());
    assert_eq!(plain.mesh, two.mesh);
}

#[test]
fn split_single_edge() {
    let mesh = SimplicialMesh::rect(1.0, 1.0, 3, 3).unwrap();
    let u = mesh.sample(|x| x[0] + 2.0 * x[1]);
    let (m, v) = split_edge(&mesh, &u, 0, 1).unwrap();
    assert_eq!(m.num_nodes(), 10);
    assert_eq!(m.num_elements(), 9);
    let x = m.point(9);
    assert!((v[9] - (x[0] + 2.0 * x[1])).abs() < 1e-14);
    assert!(split_edge(&mesh, &u, 0, 8).is_err());
}
