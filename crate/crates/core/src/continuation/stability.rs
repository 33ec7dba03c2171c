use crate::fem::{FemOperator, ProblemDef};
use crate::linalg::{dot, BandLdl, BandLu, CsrMatrix};
use crate::mesh::SimplicialMesh;
use crate::{Error, Result};

/// Symmetric part of the Jacobian and the mass matrix restricted to the
/// non-Dirichlet nodes.
fn reduced_pencil(
    op: &FemOperator,
    mesh: &SimplicialMesh,
    u: &[f64],
    prob: &ProblemDef,
) -> Result<(CsrMatrix, CsrMatrix, Vec<usize>)> {
    let keep: Vec<bool> = prob.dirichlet_nodes(mesh).iter().map(|d| d.is_none()).collect();
    if !keep.iter().any(|k| *k) {
        return Err(Error::Argument("no free nodes".into()));
    }
    let j = op.jacobian(mesh, u, prob)?.symmetric_part();
    let (a, kept) = j.principal_submatrix(&keep);
    let (m, _) = op.mass.principal_submatrix(&keep);
    Ok((a, m, kept))
}

/// Number of negative eigenvalues of the pencil `(J, M)` on the free nodes,
/// read off the inertia of a band LDLᵀ factorization.
pub fn stability_index(mesh: &SimplicialMesh, u: &[f64], prob: &ProblemDef) -> Result<usize> {
    stability_index_with(&FemOperator::new(mesh)?, mesh, u, prob)
}

pub(crate) fn stability_index_with(op: &FemOperator, mesh: &SimplicialMesh, u: &[f64], prob: &ProblemDef) -> Result<usize> {
    let (a, _, _) = reduced_pencil(op, mesh, u, prob)?;
    Ok(BandLdl::factor(&a)?.inertia().negative)
}

/// Eigenvector of the pencil whose eigenvalue is closest to zero, by inverse
/// iteration. Zero on Dirichlet nodes, scaled to max-norm one with a
/// positive largest entry.
pub fn critical_eigenvector(mesh: &SimplicialMesh, u: &[f64], prob: &ProblemDef) -> Result<Vec<f64>> {
    critical_eigenvector_with(&FemOperator::new(mesh)?, mesh, u, prob)
}

pub(crate) fn critical_eigenvector_with(
    op: &FemOperator,
    mesh: &SimplicialMesh,
    u: &[f64],
    prob: &ProblemDef,
) -> Result<Vec<f64>> {
    let (a, m, kept) = reduced_pencil(op, mesh, u, prob)?;
    let lu = match BandLu::factor(&a) {
        Ok(lu) => lu,
        Err(_) => {
            // exactly singular: shift slightly off the eigenvalue
            let scale = a.values().iter().fold(0.0f64, |s, v| s.max(v.abs()));
            let mut shifted = a.clone();
            let idx: Vec<usize> = shifted.indices().to_vec();
            for i in 0..shifted.n() {
                for k in shifted.row_range(i) {
                    if idx[k] == i {
                        shifted.values_mut()[k] += 1e-10 * scale;
                    }
                }
            }
            BandLu::factor(&shifted)?
        }
    };
    let n = a.n();
    // deterministic start with components along every smooth mode
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 101) as f64 / 101.0).collect();
    let mut prev_rq = f64::NAN;
    for _ in 0..200 {
        let mut y = lu.solve(&m.matvec(&x));
        let norm = dot(&y, &m.matvec(&y)).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Singular("inverse iteration broke down".into()));
        }
        y.iter_mut().for_each(|v| *v /= norm);
        let rq = dot(&y, &a.matvec(&y));
        x = y;
        if (rq - prev_rq).abs() <= 1e-12 * (1.0 + rq.abs()) {
            break;
        }
        prev_rq = rq;
    }
    let mut full = vec![0.0; mesh.num_nodes()];
    for (k, &i) in kept.iter().enumerate() {
        full[i] = x[k];
    }
    let imax = (0..full.len()).max_by(|&i, &j| full[i].abs().total_cmp(&full[j].abs())).unwrap_or(0);
    let s = full[imax];
    if s != 0.0 {
        full.iter_mut().for_each(|v| *v /= s);
    }
    Ok(full)
}
