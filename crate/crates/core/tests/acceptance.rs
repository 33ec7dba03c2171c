//! End-to-end acceptance checks. Each test writes one `PASS`/`FAIL` line to
//! stdout (bypassing the capture of the test harness) before asserting.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use anisocont::adapt::{decode_sw, tradapt_to_function, two_step_adapt, two_step_adapt_detailed, AdaptOptions, CoarsenOptions};
use anisocont::continuation::{
    critical_eigenvector, newton_solve, run_branch, stability_index, AdaptPlan, BifFlag, ContinuationSettings,
    ContinuationState, Event,
};
use anisocont::driver::RunConfig;
use anisocont::fem::{FemOperator, ProblemDef};
use anisocont::mesh::{face_of_segment, Locator, SimplicialMesh};
use anisocont::metric::{all_edge_lengths, metric_for_field, EtaPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(name: &str, ok: bool, detail: &str, elapsed: Duration) {
    let line = format!(
        "acceptance {name:<28} {} {detail} ({:.1} s)\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn check(name: &str, start: Instant, budget: Duration, ok: bool, detail: String) {
    let elapsed = start.elapsed();
    let ok = ok && elapsed <= budget;
    report(name, ok, &detail, elapsed);
    assert!(ok, "{name}: {detail} in {:.1} s (budget {:.0} s)", elapsed.as_secs_f64(), budget.as_secs_f64());
}

/// Dirichlet eigenvalues `(j/4)² + (l/2)²` of `-Δ` on the (4π × 2π) box, sorted.
fn box_eigenvalues(below: f64) -> Vec<f64> {
    let mut v = Vec::new();
    for j in 1..40 {
        for l in 1..40 {
            let e = (j as f64 / 4.0).powi(2) + (l as f64 / 2.0).powi(2);
            if e < below {
                v.push(e);
            }
        }
    }
    v.sort_by(f64::total_cmp);
    v
}

/// 85 × 43 nodes on (-2π, 2π) × (-π, π): h = 4π/84 < 0.15.
fn cos_mesh() -> SimplicialMesh {
    SimplicialMesh::rect(2.0 * PI, PI, 85, 43).unwrap()
}

#[test]
fn trivial_branch_bifurcations() {
    let start = Instant::now();
    let mesh = cos_mesh();
    let h = 4.0 * PI / 84.0;
    let want: Vec<f64> = box_eigenvalues(10.0).into_iter().take(3).collect();
    let settings = ContinuationSettings { ds0: 0.03, ds_max: 0.04, nsteps: 100, param_max: 0.9, ..Default::default() };
    let st = ContinuationState::new(mesh.clone(), vec![0.0; mesh.num_nodes()], ProblemDef::cos_profile(0.1, 0.0)).unwrap();
    let run = run_branch(st, &settings, None, &mut |_| {}).unwrap();
    let got: Vec<f64> = run.bifurcations.iter().map(|b| b.param_value).collect();
    let ok = h <= 0.15
        && got.len() >= 3
        && got.windows(2).all(|w| w[0] < w[1])
        && got.iter().zip(&want).all(|(g, w)| (g - w).abs() <= 5e-3);
    let detail = format!("h={h:.4} detected={got:.5?} expected={want:?} tol=5e-3");
    check("trivial-branch BPs", start, Duration::from_secs(120), ok, detail);
}

#[test]
fn critical_eigenvector_shape() {
    let start = Instant::now();
    let mesh = cos_mesh();
    let u = vec![0.0; mesh.num_nodes()];
    let phi = mesh.sample(|x| ((x[0] + 2.0 * PI) / 4.0).sin() * ((x[1] + PI) / 2.0).sin());
    let v = critical_eigenvector(&mesh, &u, &ProblemDef::cos_profile(0.3125, 0.0)).unwrap();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let corr = dot(&v, &phi).abs() / (dot(&v, &v) * dot(&phi, &phi)).sqrt();
    check("critical eigenvector", start, Duration::from_secs(60), corr > 0.99, format!("correlation={corr:.6} min=0.99"));
}

#[test]
fn action_mask_table() {
    let start = Instant::now();
    let mut mismatches = 0;
    for sw in 0..16u32 {
        let m = decode_sw(sw).unwrap();
        let want = [sw % 2 == 1, (sw / 2) % 2 == 1, (sw / 4) % 2 == 1, (sw / 8) % 2 == 1];
        if [m.r#move, m.refine, m.coarsen, m.swap] != want {
            mismatches += 1;
        }
    }
    let rejected = (16..64u32).chain([u32::MAX]).all(|sw| decode_sw(sw).is_err());
    check(
        "action mask table",
        start,
        Duration::from_secs(5),
        mismatches == 0 && rejected,
        format!("mismatches={mismatches} out_of_range_rejected={rejected}"),
    );
}

#[test]
fn two_step_coarsening_bound() {
    let start = Instant::now();
    let mesh = SimplicialMesh::rect(2.0, 2.0, 81, 81).unwrap();
    let u = mesh.sample(|x| (10.0 * (x[0] - 1.0)).tanh() + (-4.0 * (x[0] * x[0] + x[1] * x[1])).exp());
    let trop = AdaptOptions { eta_policy: EtaPolicy::Constant(1e-3), ..AdaptOptions::for_dim(2) };
    let trcop = CoarsenOptions { base: AdaptOptions { eta_policy: EtaPolicy::Constant(1e-4), ..CoarsenOptions::for_dim(2).base }, npb: 3000, crmax: 10 };
    let (out, np1) = two_step_adapt_detailed(&mesh, &u, &trop, &trcop).unwrap();
    let ok = mesh.num_nodes() >= 6000 && np1 <= 3300 && out.mesh.validate().is_valid();
    let detail = format!("np_start={} np_after_coarsening={np1} max=3300 np_final={}", mesh.num_nodes(), out.stats.np_after);
    check("two-step coarsening bound", start, Duration::from_secs(120), ok, detail);
}

/// Max interpolation error of `f` on `mesh` over a fine sample grid.
fn interpolation_error(mesh: &SimplicialMesh, f: &dyn Fn(&[f64]) -> f64) -> f64 {
    let u = mesh.sample(f);
    let loc = Locator::new(mesh);
    let n = 601;
    let mut worst: f64 = 0.0;
    let mut seed = None;
    for i in 0..n {
        for j in 0..n {
            let x = [-2.0 + 4.0 * i as f64 / (n - 1) as f64, -2.0 + 4.0 * j as f64 / (n - 1) as f64, 0.0];
            let (v, at) = loc.eval(&u, &x, seed);
            seed = Some(at.elem);
            worst = worst.max((v - f(&x)).abs());
        }
    }
    worst
}

#[test]
fn adapted_front_beats_uniform() {
    let start = Instant::now();
    let f = |x: &[f64]| (10.0 * (x[0] - 1.0)).tanh();
    let mesh = SimplicialMesh::rect(2.0, 2.0, 21, 21).unwrap();
    let opts = AdaptOptions { innerit: 10, ..AdaptOptions::for_dim(2) };
    let out = tradapt_to_function(&mesh, &f, &opts).unwrap();
    let np = out.mesh.num_nodes();
    let side = (np as f64).sqrt().round() as usize;
    let uniform = SimplicialMesh::rect(2.0, 2.0, side, side).unwrap();
    let e_adapt = interpolation_error(&out.mesh, &f);
    let e_unif = interpolation_error(&uniform, &f);

    let z = out.mesh.sample(f);
    let eta = match opts.eta_policy {
        EtaPolicy::Constant(v) => v,
        EtaPolicy::LinearInNp(a) => a * np as f64,
    };
    let psi = metric_for_field(&out.mesh, &z, eta, opts.ppar).unwrap();
    let lengths = all_edge_lengths(&out.mesh, &psi);
    let (lo, hi) = (0.85 * opts.l_low, 1.15 * opts.l_up);
    let frac = lengths.iter().filter(|&&l| l >= lo && l <= hi).count() as f64 / lengths.len() as f64;
    let ok = e_adapt <= 1.1 * e_unif && frac >= 0.85 && out.mesh.validate().is_valid();
    let detail = format!(
        "np={np} uniform={}x{side} err_adapted={e_adapt:.4e} err_uniform={e_unif:.4e} edges_in_band={:.1}% min=85%",
        side,
        100.0 * frac
    );
    check("adapted front vs uniform", start, Duration::from_secs(120), ok, detail);
}

/// Boundary-flagged nodes that are off their faces by more than `tol`.
fn off_face_nodes(mesh: &SimplicialMesh, tol: f64) -> usize {
    let d = mesh.domain();
    (0..mesh.num_nodes())
        .filter(|&i| {
            let x = mesh.point(i);
            mesh.node_segments(i).iter().any(|&s| {
                let (axis, upper) = face_of_segment(mesh.dim(), s).unwrap();
                let face = if upper { d.hi[axis] } else { d.lo[axis] };
                (x[axis] - face).abs() > tol
            })
        })
        .count()
}

#[test]
fn randomized_adaptation_fuzz() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20261016);
    let base = SimplicialMesh::rect(2.0, 2.0, 17, 17).unwrap();
    let (mut defects, mut off_face, mut errors) = (0, 0, 0);
    let mut mesh = base.clone();
    for it in 0..500 {
        if it % 10 == 0 {
            mesh = base.clone();
        }
        let angle: f64 = rng.gen_range(0.0..PI);
        let offset: f64 = rng.gen_range(-1.5..1.5);
        let sharp: f64 = rng.gen_range(2.0..12.0);
        let (c, s) = (angle.cos(), angle.sin());
        let f = move |x: &[f64]| (sharp * (c * x[0] + s * x[1] - offset)).tanh();
        let eta = 10f64.powf(rng.gen_range(-4.0..-2.0));
        let sw = rng.gen_range(0..16u32);
        let opts = AdaptOptions { eta_policy: EtaPolicy::Constant(eta), sw, max_nodes: 4000, ..AdaptOptions::for_dim(2) };
        let npb = if rng.gen_bool(0.3) { 150 } else { 0 };
        let u = mesh.sample(f);
        match two_step_adapt(&mesh, &u, &opts, &CoarsenOptions { base: AdaptOptions { sw: sw & 5, ..opts }, npb, crmax: 10 }) {
            Ok(out) => {
                defects += out.mesh.validate().total();
                off_face += off_face_nodes(&out.mesh, 1e-9);
                mesh = out.mesh;
            }
            Err(_) => errors += 1,
        }
    }
    let ok = defects == 0 && off_face == 0 && errors == 0;
    let detail = format!("iterations=500 defects={defects} off_face_nodes={off_face} errors={errors}");
    check("randomized adaptation fuzz", start, Duration::from_secs(300), ok, detail);
}

struct SpotRun {
    accepted_steps: usize,
    final_param: f64,
    max_adapt_jump: f64,
    invalid_meshes: usize,
    max_np: usize,
    max_post_adapt_np: usize,
    adaptations: usize,
}

/// Run a bundled config's main branch, checking every mesh seen.
fn run_bundled(name: &str) -> SpotRun {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    let cfg = RunConfig::from_file(&path).unwrap();
    let mesh = cfg.mesh.build().unwrap();
    let prob = cfg.problem.build(cfg.mesh.dim).unwrap();
    let sol = newton_solve(&mesh, &vec![0.0; mesh.num_nodes()], &prob, cfg.cont.newton_tol, 30).unwrap();
    let (mesh, u) = if cfg.run.initial_adapt {
        let a = two_step_adapt(&mesh, &sol.u, &cfg.trop, &cfg.trcop).unwrap();
        let sol = newton_solve(&a.mesh, &a.u, &prob, cfg.cont.newton_tol, 30).unwrap();
        (a.mesh, sol.u)
    } else {
        (mesh, sol.u)
    };
    let mut invalid = 0;
    let mut prev_l2: Option<f64> = None;
    let mut max_jump: f64 = 0.0;
    let mut max_np = 0;
    let mut max_post = mesh.num_nodes();
    let mut adaptations = 0;
    let plan = AdaptPlan { trop: &cfg.trop, trcop: &cfg.trcop };
    let st = ContinuationState::new(mesh, u, prob).unwrap();
    let run = run_branch(st, &cfg.cont, Some(plan), &mut |ev| {
        if let Event::Record(rec, state) = ev {
            max_np = max_np.max(rec.np);
            if rec.flag == BifFlag::Adapt {
                adaptations += 1;
                max_post = max_post.max(rec.np);
                if !state.mesh.validate().is_valid() {
                    invalid += 1;
                }
                if let Some(p) = prev_l2 {
                    max_jump = max_jump.max((rec.l2_norm - p).abs() / rec.l2_norm.abs().max(1e-300));
                }
            }
            prev_l2 = Some(rec.l2_norm);
        }
    })
    .unwrap();
    if !run.state.mesh.validate().is_valid() {
        invalid += 1;
    }
    SpotRun {
        accepted_steps: run.steps,
        final_param: run.state.param(),
        max_adapt_jump: max_jump,
        invalid_meshes: invalid,
        max_np,
        max_post_adapt_np: max_post,
        adaptations,
    }
}

#[test]
fn spot_2d_continuation_with_adaptation() {
    let start = Instant::now();
    let r = run_bundled("ac2d_wspot.cfg");
    let ok = r.accepted_steps >= 40 && r.final_param >= 4.0 && r.max_adapt_jump < 0.02 && r.invalid_meshes == 0 && r.adaptations > 0;
    let detail = format!(
        "steps={} xi_end={:.3} adaptations={} max_l2_jump={:.3e} max=2e-2 invalid_meshes={}",
        r.accepted_steps, r.final_param, r.adaptations, r.max_adapt_jump, r.invalid_meshes
    );
    check("2D spot continuation", start, Duration::from_secs(300), ok, detail);
}

#[test]
fn spot_3d_smoke() {
    let start = Instant::now();
    let cfg = RunConfig::from_file(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/ac3d_wspot.cfg")).unwrap();
    let np0 = cfg.mesh.build().unwrap().num_nodes();
    let r = run_bundled("ac3d_wspot.cfg");
    let ok = np0 == 3549
        && cfg.trcop.npb == 3000
        && cfg.cont.amod == 5
        && r.accepted_steps == 20
        && r.invalid_meshes == 0
        && r.max_np <= 2 * r.max_post_adapt_np;
    let detail = format!(
        "np_start={np0} steps={} adaptations={} max_np={} max_post_adapt_np={} invalid_meshes={}",
        r.accepted_steps, r.adaptations, r.max_np, r.max_post_adapt_np, r.invalid_meshes
    );
    check("3D spot smoke", start, Duration::from_secs(900), ok, detail);
}

#[test]
fn jacobian_matches_finite_differences() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let dim = if k < 10 { 2 } else { 3 };
        let mesh = if dim == 2 {
            SimplicialMesh::rect(rng.gen_range(0.5..4.0), rng.gen_range(0.5..4.0), rng.gen_range(4..20), rng.gen_range(4..20)).unwrap()
        } else {
            SimplicialMesh::cuboid(
                rng.gen_range(0.5..3.0),
                rng.gen_range(0.5..3.0),
                rng.gen_range(0.5..3.0),
                rng.gen_range(3..8),
                rng.gen_range(3..8),
                rng.gen_range(3..8),
            )
            .unwrap()
        };
        let mut prob = ProblemDef::wandering_spot(dim, rng.gen_range(0.1..2.0), 0.0, rng.gen_range(0.0..2.0), rng.gen_range(-1.0..1.0));
        prob.lambda = rng.gen_range(-1.0..1.5);
        let n = mesh.num_nodes();
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let op = FemOperator::new(&mesh).unwrap();
        let jv = op.jacobian(&mesh, &u, &prob).unwrap().matvec(&v);
        let eps = 1e-6;
        let shifted = |s: f64| -> Vec<f64> {
            let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + s * b).collect();
            op.residual(&mesh, &w, &prob).unwrap()
        };
        let (gp, gm) = (shifted(eps), shifted(-eps));
        let num: f64 = jv.iter().zip(gp.iter().zip(&gm)).map(|(j, (p, m))| (j - (p - m) / (2.0 * eps)).powi(2)).sum::<f64>().sqrt();
        let den: f64 = jv.iter().map(|j| j * j).sum::<f64>().sqrt();
        worst = worst.max(num / den);
    }
    check("jacobian vs FD", start, Duration::from_secs(60), worst < 1e-6, format!("triples=20 worst_rel_err={worst:.3e} max=1e-6"));
}

#[test]
fn stability_index_above_fourth_eigenvalue() {
    let start = Instant::now();
    let mesh = cos_mesh();
    let want = box_eigenvalues(1.2).len();
    let got = stability_index(&mesh, &vec![0.0; mesh.num_nodes()], &ProblemDef::cos_profile(1.2, 0.0)).unwrap();
    let ok = got == want && want == 4;
    check("stability index at 1.2", start, Duration::from_secs(60), ok, format!("n_neg={got} expected={want}"));
}
