use std::collections::HashMap;

use super::{barycentric, oriented_facets, SimplicialMesh, NONE};
use crate::{Error, Result};

/// Point location on a fixed mesh: barycentric walk from a seed element,
/// a bucket grid for seeding, and exhaustive search as the last resort.
pub struct Locator<'a> {
    mesh: &'a SimplicialMesh,
    neighbors: Vec<[usize; 4]>,
    lo: [f64; 3],
    cell: [f64; 3],
    ncell: [usize; 3],
    buckets: Vec<Vec<usize>>,
    tol: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Located {
    pub elem: usize,
    pub bary: [f64; 4],
    /// False when the point was outside every element beyond tolerance and
    /// the nearest element's extrapolation is returned instead.
    pub inside: bool,
}

impl<'a> Locator<'a> {
    pub fn new(mesh: &'a SimplicialMesh) -> Self {
        let dim = mesh.dim();
        let nv = dim + 1;
        let ne = mesh.num_elements();
        let mut neighbors = vec![[NONE; 4]; ne];
        let mut owner: HashMap<[usize; 3], (usize, usize)> = HashMap::with_capacity(ne * nv);
        for e in 0..ne {
            for (i, (key, _)) in oriented_facets(mesh.element(e)).enumerate() {
                if let Some((f, j)) = owner.remove(&key) {
                    neighbors[e][i] = f;
                    neighbors[f][j] = e;
                } else {
                    owner.insert(key, (e, i));
                }
            }
        }
        let dom = mesh.domain();
        let per_axis = ((ne.max(1) as f64).powf(1.0 / dim as f64).ceil() as usize).max(1);
        let mut ncell = [1usize; 3];
        let mut cell = [1.0f64; 3];
        for k in 0..dim {
            ncell[k] = per_axis;
            cell[k] = (dom.hi[k] - dom.lo[k]) / per_axis as f64;
        }
        let mut buckets = vec![Vec::new(); ncell[0] * ncell[1] * ncell[2]];
        for e in 0..ne {
            let pts = mesh.element_points(e);
            let mut lo_c = [0usize; 3];
            let mut hi_c = [0usize; 3];
            for k in 0..dim {
                let (mn, mx) = pts[..nv]
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[k]), b.max(p[k])));
                lo_c[k] = cell_index(mn, dom.lo[k], cell[k], ncell[k]);
                hi_c[k] = cell_index(mx, dom.lo[k], cell[k], ncell[k]);
            }
            for z in lo_c[2]..=hi_c[2] {
                for y in lo_c[1]..=hi_c[1] {
                    for x in lo_c[0]..=hi_c[0] {
                        buckets[x + ncell[0] * (y + ncell[1] * z)].push(e);
                    }
                }
            }
        }
        Locator {
            mesh,
            neighbors,
            lo: dom.lo,
            cell,
            ncell,
            buckets,
            tol: 1e-9,
        }
    }

    fn bary(&self, e: usize, x: &[f64; 3]) -> [f64; 4] {
        let dim = self.mesh.dim();
        barycentric(dim, &self.mesh.element_points(e), x).unwrap_or([f64::NAN; 4])
    }

    fn min_coord(&self, b: &[f64; 4]) -> (usize, f64) {
        let nv = self.mesh.dim() + 1;
        let mut idx = 0;
        for i in 1..nv {
            if b[i] < b[idx] || b[i].is_nan() {
                idx = i;
            }
        }
        (idx, if b[idx].is_nan() { f64::NEG_INFINITY } else { b[idx] })
    }

    /// Locate `x`, starting the walk at `seed` when given.
    pub fn locate(&self, x: &[f64; 3], seed: Option<usize>) -> Located {
        let ne = self.mesh.num_elements();
        let start = seed.filter(|&s| s < ne).or_else(|| {
            let b = &self.buckets[self.bucket_of(x)];
            b.first().copied()
        });
        if let Some(mut e) = start {
            for _ in 0..(4 * (ne as f64).sqrt() as usize + 16) {
                let b = self.bary(e, x);
                let (i, m) = self.min_coord(&b);
                if m >= -self.tol {
                    return Located { elem: e, bary: b, inside: true };
                }
                match self.neighbors[e][i] {
                    NONE => break,
                    f => e = f,
                }
            }
        }
        for &e in &self.buckets[self.bucket_of(x)] {
            let b = self.bary(e, x);
            if self.min_coord(&b).1 >= -self.tol {
                return Located { elem: e, bary: b, inside: true };
            }
        }
        let mut best = (0, [0.0; 4], f64::NEG_INFINITY);
        for e in 0..ne {
            let b = self.bary(e, x);
            let m = self.min_coord(&b).1;
            if m > best.2 {
                best = (e, b, m);
            }
        }
        Located {
            elem: best.0,
            bary: best.1,
            inside: best.2 >= -self.tol,
        }
    }

    fn bucket_of(&self, x: &[f64; 3]) -> usize {
        let mut c = [0usize; 3];
        for k in 0..self.mesh.dim() {
            c[k] = cell_index(x[k], self.lo[k], self.cell[k], self.ncell[k]);
        }
        c[0] + self.ncell[0] * (c[1] + self.ncell[1] * c[2])
    }

    /// P1 interpolant of `u` at `x`.
    pub fn eval(&self, u: &[f64], x: &[f64; 3], seed: Option<usize>) -> (f64, Located) {
        let loc = self.locate(x, seed);
        let el = self.mesh.element(loc.elem);
        let v = el.iter().zip(loc.bary.iter()).map(|(&n, &l)| l * u[n]).sum();
        (v, loc)
    }
}

fn cell_index(x: f64, lo: f64, h: f64, n: usize) -> usize {
    (((x - lo) / h).floor().max(0.0) as usize).min(n - 1)
}

#[derive(Debug, Clone)]
pub struct Interpolation {
    pub values: Vec<f64>,
    /// Number of target nodes located outside the source mesh beyond
    /// tolerance (values extrapolated from the nearest element).
    pub outside: usize,
}

/// Interpolate the nodal field `u_old` on `old` to the nodes of `new`.
pub fn interpolate(old: &SimplicialMesh, u_old: &[f64], new: &SimplicialMesh) -> Result<Interpolation> {
    if u_old.len() != old.num_nodes() {
        return Err(Error::Argument(format!(
            "field has {} values but mesh has {} nodes",
            u_old.len(),
            old.num_nodes()
        )));
    }
    if old.dim() != new.dim() {
        return Err(Error::Argument("meshes differ in dimension".into()));
    }
    if old == new {
        return Ok(Interpolation { values: u_old.to_vec(), outside: 0 });
    }
    let loc = Locator::new(old);
    let mut seed = None;
    let mut outside = 0;
    let values = new
        .points()
        .iter()
        .map(|x| {
            let (v, l) = loc.eval(u_old, x, seed);
            seed = Some(l.elem);
            if !l.inside {
                outside += 1;
            }
            v
        })
        .collect();
    if outside > 0 {
        log::warn!("interpolate: {outside} points outside the source mesh, extrapolated");
    }
    Ok(Interpolation { values, outside })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity() {
        let m = SimplicialMesh::rect(1.0, 2.0, 5, 7).unwrap();
        let u = m.sample(|x| (x[0] * 3.0).sin() + x[1]);
        let r = interpolate(&m, &u, &m).unwrap();
        assert_eq!(r.values, u);
    }

    #[test]
    fn affine_is_exact_across_meshes() {
        let a = SimplicialMesh::rect(1.0, 1.0, 4, 6).unwrap();
        let b = SimplicialMesh::rect(1.0, 1.0, 9, 5).unwrap();
        let f = |x: &[f64]| 2.0 * x[0] - 0.5 * x[1] + 0.25;
        let r = interpolate(&a, &a.sample(f), &b).unwrap();
        assert_eq!(r.outside, 0);
        for (i, v) in r.values.iter().enumerate() {
            assert!((v - f(b.node(i))).abs() < 1e-12);
        }
        let a3 = SimplicialMesh::cuboid(1.0, 2.0, 1.0, 3, 4, 3).unwrap();
        let b3 = SimplicialMesh::cuboid(1.0, 2.0, 1.0, 5, 3, 4).unwrap();
        let g = |x: &[f64]| x[0] + 2.0 * x[1] - x[2];
        let r = interpolate(&a3, &a3.sample(g), &b3).unwrap();
        for (i, v) in r.values.iter().enumerate() {
            assert!((v - g(b3.node(i))).abs() < 1e-12);
        }
    }

    #[test]
    fn midpoint_average() {
        let m = SimplicialMesh::rect(1.0, 1.0, 2, 2).unwrap();
        let fine = m.refine_uniform_2d().unwrap();
        let u = m.sample(|x| x[0]);
        let r = interpolate(&m, &u, &fine).unwrap();
        // the bottom-edge midpoint (0, -1) averages x = -1 and x = 1
        let i = (0..fine.num_nodes()).find(|&i| fine.node(i) == [0.0, -1.0]).unwrap();
        assert!(r.values[i].abs() < 1e-15);
        let j = (0..fine.num_nodes()).find(|&i| fine.node(i) == [0.5, 0.0]);
        if let Some(j) = j {
            assert!((r.values[j] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn length_mismatch() {
        let m = SimplicialMesh::rect(1.0, 1.0, 3, 3).unwrap();
        assert!(interpolate(&m, &[0.0; 4], &m).is_err());
    }
}
