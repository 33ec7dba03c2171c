//! Hessian-based anisotropic metric fields.
//!
//! Given a nodal field `z`, the recovered Hessian `H` is absolutized
//! eigenvalue-wise to `|H|`, and the metric is
//!
//! ```text
//! Ψ = η⁻¹ det(|H|)^(-1/(2p+d)) |H|
//! ```
//!
//! Meshes whose edges have unit length in `Ψ` minimize the `L^p`
//! interpolation error of `z`; `η` controls the resulting node count.

use nalgebra::{Matrix2, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::mesh::{basis_gradients, SimplicialMesh};
use crate::{Error, Result};

/// Symmetric tensor; in 2D only the upper-left 2x2 block is used.
pub type Tensor = Matrix3<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    pub dim: usize,
    pub tensors: Vec<Tensor>,
    pub floor_eps: f64,
}

impl MetricField {
    pub fn uniform(dim: usize, n: usize, m: Tensor) -> Self {
        MetricField { dim, tensors: vec![m; n], floor_eps: 0.0 }
    }

    pub fn isotropic(dim: usize, n: usize, s: f64) -> Self {
        let mut m = Tensor::zeros();
        for k in 0..dim {
            m[(k, k)] = s;
        }
        Self::uniform(dim, n, m)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum EtaPolicy {
    Constant(f64),
    LinearInNp(f64),
}

impl Default for EtaPolicy {
    fn default() -> Self {
        EtaPolicy::Constant(1e-3)
    }
}

pub fn eval_eta(policy: EtaPolicy, np: usize) -> Result<f64> {
    let eta = match policy {
        EtaPolicy::Constant(v) => v,
        EtaPolicy::LinearInNp(a) => a * np as f64,
    };
    if eta > 0.0 && eta.is_finite() {
        Ok(eta)
    } else {
        Err(Error::Config(format!("eta must be positive, got {eta} from {policy:?}")))
    }
}

/// Field driving the metric, derived from the solution.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "factor")]
pub enum FieldSelector {
    #[default]
    Identity,
    Exp,
    Scale(f64),
}

pub fn select_field(u: &[f64], selector: FieldSelector) -> Vec<f64> {
    match selector {
        FieldSelector::Identity => u.to_vec(),
        FieldSelector::Exp => u.iter().map(|v| v.exp()).collect(),
        FieldSelector::Scale(a) => u.iter().map(|v| a * v).collect(),
    }
}

fn map_nodes<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Lumped L² projection of the elementwise gradient of a P1 field.
fn nodal_gradient(mesh: &SimplicialMesh, z: &[f64]) -> Result<Vec<[f64; 3]>> {
    let dim = mesh.dim();
    let n = mesh.num_nodes();
    let mut acc = vec![[0.0; 3]; n];
    let mut weight = vec![0.0; n];
    for e in 0..mesh.num_elements() {
        let pts = mesh.element_points(e);
        let vol = mesh.element_volume(e);
        let g = basis_gradients(dim, &pts)
            .filter(|_| vol > 0.0)
            .ok_or(Error::DegenerateElement { elem: e, volume: vol })?;
        let el = mesh.element(e);
        let mut grad = [0.0; 3];
        for (k, &v) in el.iter().enumerate() {
            for c in 0..dim {
                grad[c] += z[v] * g[k][c];
            }
        }
        for &v in el {
            for c in 0..dim {
                acc[v][c] += vol * grad[c];
            }
            weight[v] += vol;
        }
    }
    for (a, w) in acc.iter_mut().zip(&weight) {
        for c in a.iter_mut() {
            *c /= w;
        }
    }
    Ok(acc)
}

/// Discrete Hessian by two rounds of lumped gradient recovery, symmetrized.
pub fn recover_hessian(mesh: &SimplicialMesh, z: &[f64]) -> Result<Vec<Tensor>> {
    if z.len() != mesh.num_nodes() {
        return Err(Error::Argument(format!(
            "field has {} values, mesh has {} nodes",
            z.len(),
            mesh.num_nodes()
        )));
    }
    let dim = mesh.dim();
    let g = nodal_gradient(mesh, z)?;
    let mut rows = Vec::with_capacity(dim);
    for c in 0..dim {
        let gc: Vec<f64> = g.iter().map(|v| v[c]).collect();
        rows.push(nodal_gradient(mesh, &gc)?);
    }
    Ok((0..mesh.num_nodes())
        .map(|i| {
            let mut h = Tensor::zeros();
            for r in 0..dim {
                for c in 0..dim {
                    h[(r, c)] = 0.5 * (rows[r][i][c] + rows[c][i][r]);
                }
            }
            h
        })
        .collect())
}

/// `(eigenvalues, eigenvectors as columns)` of the active block.
fn sym_eigen(dim: usize, h: &Tensor) -> (Vector3<f64>, Matrix3<f64>) {
    if dim == 2 {
        let m = Matrix2::new(h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)]);
        let e = m.symmetric_eigen();
        let mut q = Matrix3::zeros();
        q.fixed_view_mut::<2, 2>(0, 0).copy_from(&e.eigenvectors);
        (Vector3::new(e.eigenvalues[0], e.eigenvalues[1], 0.0), q)
    } else {
        let e = h.symmetric_eigen();
        (e.eigenvalues, e.eigenvectors)
    }
}

/// Apply Ψ = η⁻¹ det(|H|)^(-1/(2p+d)) |H| node by node, flooring
/// eigenvalue magnitudes at `1e-10 max(1, max |H_ij|)`.
pub fn compute_metric(hessians: &[Tensor], eta: f64, p: f64, dim: usize) -> Result<MetricField> {
    if !(eta > 0.0) {
        return Err(Error::Argument(format!("eta must be positive, got {eta}")));
    }
    if !(p >= 1.0) {
        return Err(Error::Argument(format!("norm order must be >= 1, got {p}")));
    }
    let hmax = hessians.iter().fold(0.0f64, |m, h| m.max(h.amax()));
    let floor_eps = 1e-10 * hmax.max(1.0);
    let expo = -1.0 / (2.0 * p + dim as f64);
    let tensors = map_nodes(hessians.len(), |i| {
        let (lam, q) = sym_eigen(dim, &hessians[i]);
        let mut abs = Vector3::zeros();
        let mut det = 1.0;
        for k in 0..dim {
            abs[k] = lam[k].abs().max(floor_eps);
            det *= abs[k];
        }
        let scale = det.powf(expo) / eta;
        let mut m = Tensor::zeros();
        for k in 0..dim {
            let v = q.column(k);
            m += v * v.transpose() * (abs[k] * scale);
        }
        // exact symmetry
        (m + m.transpose()) * 0.5
    });
    Ok(MetricField { dim, tensors, floor_eps })
}

/// Length of `v` under the average of two nodal metrics.
pub fn metric_length(v: &[f64; 3], a: &Tensor, b: &Tensor) -> f64 {
    let v = Vector3::new(v[0], v[1], v[2]);
    let m = (a + b) * 0.5;
    (v.transpose() * m * v)[(0, 0)].max(0.0).sqrt()
}

pub fn edge_length_metric(mesh: &SimplicialMesh, psi: &MetricField, edge: (usize, usize)) -> f64 {
    let (pa, pb) = (mesh.point(edge.0), mesh.point(edge.1));
    let v = [pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2]];
    metric_length(&v, &psi.tensors[edge.0], &psi.tensors[edge.1])
}

/// Metric lengths of all mesh edges, in [`SimplicialMesh::edges`] order.
pub fn all_edge_lengths(mesh: &SimplicialMesh, psi: &MetricField) -> Vec<f64> {
    let edges = mesh.edges();
    map_nodes(edges.len(), |k| edge_length_metric(mesh, psi, edges[k]))
}

/// Determinant of the active block of a tensor.
pub fn det(dim: usize, m: &Tensor) -> f64 {
    if dim == 2 {
        m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
    } else {
        m.determinant()
    }
}

/// Raise every metric eigenvalue to at least `1/h_max²`, so no target
/// edge is longer than `h_max`.
pub fn bound_metric_size(psi: &mut MetricField, h_max: f64) {
    let floor = 1.0 / (h_max * h_max);
    let dim = psi.dim;
    for m in psi.tensors.iter_mut() {
        let (lam, q) = sym_eigen(dim, m);
        if (0..dim).all(|k| lam[k] >= floor) {
            continue;
        }
        let mut out = Tensor::zeros();
        for k in 0..dim {
            let v = q.column(k);
            out += v * v.transpose() * lam[k].max(floor);
        }
        *m = (out + out.transpose()) * 0.5;
    }
}

/// Full metric pipeline for a nodal field. Target edge lengths are capped
/// at the diameter of the mesh's box.
pub fn metric_for_field(mesh: &SimplicialMesh, z: &[f64], eta: f64, p: f64) -> Result<MetricField> {
    let h = recover_hessian(mesh, z)?;
    let mut psi = compute_metric(&h, eta, p, mesh.dim())?;
    bound_metric_size(&mut psi, mesh.domain().diameter(mesh.dim()));
    Ok(psi)
}
