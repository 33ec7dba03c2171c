//! WebAssembly bindings for the browser demo in `www/`.

use std::f64::consts::PI;

use anisocont::adapt::{tradapt, tradapt_to_function, AdaptOptions};
use anisocont::continuation::{newton_solve, stability_index};
use anisocont::fem::ProblemDef;
use anisocont::mesh::SimplicialMesh;
use anisocont::metric::{all_edge_lengths, metric_for_field, EtaPolicy};
use wasm_bindgen::prelude::*;

/// A 2D triangle mesh with one nodal field, flattened for JavaScript.
#[wasm_bindgen]
pub struct MeshView {
    mesh: SimplicialMesh,
    points: Vec<f64>,
    triangles: Vec<u32>,
    values: Vec<f64>,
    info: String,
}

#[wasm_bindgen]
impl MeshView {
    /// Node coordinates as `x0, y0, x1, y1, ...`.
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }

    /// Vertex indices, three per triangle.
    pub fn triangles(&self) -> Vec<u32> {
        self.triangles.clone()
    }

    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    /// Human readable key=value summary.
    pub fn info(&self) -> String {
        self.info.clone()
    }

    pub fn num_nodes(&self) -> usize {
        self.values.len()
    }

    /// Metric edge lengths of this mesh for the metric of field `kind`
    /// (or of the stored values when `kind` is `values`) at scale `eta`:
    /// counts in bins of width 0.25 over [0, 3) plus an overflow bin.
    pub fn edge_length_histogram(&self, kind: &str, eta: f64) -> Result<Vec<u32>, JsValue> {
        let z = if kind == "values" { self.values.clone() } else { self.mesh.sample(field(kind)?) };
        let psi = metric_for_field(&self.mesh, &z, eta, AdaptOptions::default().ppar).map_err(err)?;
        let mut bins = vec![0u32; 13];
        for l in all_edge_lengths(&self.mesh, &psi) {
            bins[((l / 0.25) as usize).min(12)] += 1;
        }
        Ok(bins)
    }
}

impl MeshView {
    fn new(mesh: &SimplicialMesh, values: Vec<f64>, info: String) -> Self {
        let points = (0..mesh.num_nodes()).flat_map(|i| mesh.node(i).to_vec()).collect();
        let triangles = (0..mesh.num_elements()).flat_map(|e| mesh.element(e).iter().map(|&v| v as u32).collect::<Vec<_>>()).collect();
        MeshView { mesh: mesh.clone(), points, triangles, values, info }
    }
}

fn err(e: anisocont::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn field(kind: &str) -> Result<fn(&[f64]) -> f64, JsValue> {
    Ok(match kind {
        "front" => |x| (10.0 * (x[0] - 1.0)).tanh(),
        "ring" => |x| (8.0 * (x[0] * x[0] + x[1] * x[1] - 1.0)).tanh(),
        "bump" => |x| (-4.0 * (x[0] * x[0] + 4.0 * x[1] * x[1])).exp(),
        other => return Err(JsValue::from_str(&format!("unknown field '{other}'"))),
    })
}

fn options(sw: u32, eta: f64, innerit: usize) -> Result<AdaptOptions, JsValue> {
    let opts = AdaptOptions { sw, eta_policy: EtaPolicy::Constant(eta), innerit, max_nodes: 60_000, ..AdaptOptions::for_dim(2) };
    opts.validate().map_err(err)?;
    Ok(opts)
}

/// Adapt an `n`×`n` grid on (-2, 2)² to an analytic field
/// (`front`, `ring` or `bump`).
#[wasm_bindgen]
pub fn adapt_function(kind: &str, n: usize, sw: u32, eta: f64, innerit: usize) -> Result<MeshView, JsValue> {
    let f = field(kind)?;
    let mesh = SimplicialMesh::rect(2.0, 2.0, n, n).map_err(err)?;
    let out = tradapt_to_function(&mesh, &f, &options(sw, eta, innerit)?).map_err(err)?;
    Ok(MeshView::new(&out.mesh, out.u, out.stats.to_string()))
}

/// Solve the 2D wandering-spot problem at spot position `xi` on
/// (-2π, 2π)×(-π, π), then adapt and re-solve.
#[wasm_bindgen]
pub fn solve_spot(xi: f64, c: f64, lambda: f64, eta_per_node: f64) -> Result<MeshView, JsValue> {
    let prob = ProblemDef::wandering_spot(2, c, lambda, 1.0, xi);
    let mesh = SimplicialMesh::rect(2.0 * PI, PI, 41, 21).map_err(err)?;
    let sol = newton_solve(&mesh, &vec![0.0; mesh.num_nodes()], &prob, 1e-8, 30).map_err(err)?;
    let opts = AdaptOptions { eta_policy: EtaPolicy::LinearInNp(eta_per_node), max_nodes: 30_000, ..AdaptOptions::for_dim(2) };
    let adapted = tradapt(&mesh, &sol.u, &opts).map_err(err)?;
    let sol = newton_solve(&adapted.mesh, &adapted.u, &prob, 1e-8, 30).map_err(err)?;
    let n_neg = stability_index(&adapted.mesh, &sol.u, &prob).map_err(err)?;
    let info = format!("{} newton_iterations={} n_neg={n_neg}", adapted.stats, sol.iterations);
    Ok(MeshView::new(&adapted.mesh, sol.u, info))
}
