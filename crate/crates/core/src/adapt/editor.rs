use std::collections::HashMap;

use crate::mesh::{
    oriented_facets, quality_constant, signed_volume, simplex_quality, BoxDomain, SimplicialMesh, NONE,
};
use crate::metric::{det, metric_length, MetricField, Tensor};
use crate::{Error, Result};

/// Mutable working copy of a mesh with its nodal field and metric, used by
/// the adaptation passes. Deleted entities are tombstoned and removed in
/// [`Editor::finish`].
#[derive(Clone)]
pub(crate) struct Editor {
    pub dim: usize,
    pub domain: BoxDomain,
    pub pts: Vec<[f64; 3]>,
    /// Segment membership bitmask, fixed for the lifetime of a node.
    pub seg: Vec<u8>,
    pub u: Vec<f64>,
    pub met: Vec<Tensor>,
    pub node_alive: Vec<bool>,
    pub elems: Vec<[usize; 4]>,
    pub elem_alive: Vec<bool>,
    pub node_elems: Vec<Vec<usize>>,
    pub qual_p: f64,
    vol_tol: f64,
}

impl Editor {
    pub fn new(mesh: &SimplicialMesh, u: &[f64], psi: &MetricField, qual_p: f64) -> Self {
        let dim = mesh.dim();
        let n = mesh.num_nodes();
        let mut node_elems = vec![Vec::new(); n];
        for e in 0..mesh.num_elements() {
            for &v in mesh.element(e) {
                node_elems[v].push(e);
            }
        }
        Editor {
            dim,
            domain: *mesh.domain(),
            pts: mesh.points().to_vec(),
            seg: (0..n).map(|i| mesh.node_segment_mask(i)).collect(),
            u: u.to_vec(),
            met: psi.tensors.clone(),
            node_alive: vec![true; n],
            elems: mesh.raw_elements().to_vec(),
            elem_alive: vec![true; mesh.num_elements()],
            node_elems,
            qual_p,
            vol_tol: 1e-13 * mesh.domain().diameter(dim).powi(dim as i32),
        }
    }

    pub fn nv(&self) -> usize {
        self.dim + 1
    }

    pub fn num_alive_nodes(&self) -> usize {
        self.node_alive.iter().filter(|a| **a).count()
    }

    pub fn points_of(&self, el: &[usize; 4]) -> [[f64; 3]; 4] {
        let mut p = [[0.0; 3]; 4];
        for k in 0..self.nv() {
            p[k] = self.pts[el[k]];
        }
        p
    }

    pub fn volume(&self, el: &[usize; 4]) -> f64 {
        signed_volume(self.dim, &self.points_of(el))
    }

    pub fn is_valid_volume(&self, v: f64) -> bool {
        v > self.vol_tol
    }

    /// Combined metric/Euclidean quality of a (possibly tentative) element.
    pub fn quality(&self, el: &[usize; 4]) -> f64 {
        let p = self.points_of(el);
        combined_quality_raw(self.dim, &p, &el[..self.nv()].iter().map(|&v| self.met[v]).collect::<Vec<_>>(), self.qual_p)
    }

    pub fn quality_with_points(&self, el: &[usize; 4], moved: usize, x: &[f64; 3]) -> (f64, f64) {
        let mut p = self.points_of(el);
        for k in 0..self.nv() {
            if el[k] == moved {
                p[k] = *x;
            }
        }
        let mets: Vec<Tensor> = el[..self.nv()].iter().map(|&v| self.met[v]).collect();
        (signed_volume(self.dim, &p), combined_quality_raw(self.dim, &p, &mets, self.qual_p))
    }

    pub fn edge_length(&self, a: usize, b: usize) -> f64 {
        let (pa, pb) = (self.pts[a], self.pts[b]);
        metric_length(&[pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2]], &self.met[a], &self.met[b])
    }

    pub fn add_node(&mut self, x: [f64; 3], seg: u8, u: f64, met: Tensor) -> usize {
        self.pts.push(x);
        self.seg.push(seg);
        self.u.push(u);
        self.met.push(met);
        self.node_alive.push(true);
        self.node_elems.push(Vec::new());
        self.pts.len() - 1
    }

    pub fn add_elem(&mut self, el: [usize; 4]) -> usize {
        let e = self.elems.len();
        self.elems.push(el);
        self.elem_alive.push(true);
        for k in 0..self.nv() {
            self.node_elems[el[k]].push(e);
        }
        e
    }

    pub fn remove_elem(&mut self, e: usize) {
        self.elem_alive[e] = false;
        let el = self.elems[e];
        for k in 0..self.nv() {
            self.node_elems[el[k]].retain(|&f| f != e);
        }
    }

    pub fn contains(&self, e: usize, v: usize) -> bool {
        self.elems[e][..self.nv()].contains(&v)
    }

    /// Elements containing both `a` and `b`.
    pub fn shell(&self, a: usize, b: usize) -> Vec<usize> {
        self.node_elems[a].iter().copied().filter(|&e| self.contains(e, b)).collect()
    }

    pub fn neighbors(&self, a: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.node_elems[a]
            .iter()
            .flat_map(|&e| self.elems[e][..self.nv()].to_vec())
            .filter(|&v| v != a)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// All alive edges `(a, b)` with `a < b`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let nv = self.nv();
        let mut out = Vec::new();
        for (e, el) in self.elems.iter().enumerate() {
            if !self.elem_alive[e] {
                continue;
            }
            for i in 0..nv {
                for j in i + 1..nv {
                    out.push((el[i].min(el[j]), el[i].max(el[j])));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Whether a facet (given as node list) lies on one face of the box.
    pub fn facet_on_boundary(&self, nodes: &[usize]) -> bool {
        nodes.iter().fold(0xffu8, |m, &v| m & self.seg[v]) != 0
    }

    /// Local manifold check around node `center` for a candidate set of
    /// elements: every facet through `center` must be matched by exactly one
    /// oppositely oriented partner, or lie on the box boundary alone.
    pub fn star_is_manifold(&self, center: usize, elems: &[[usize; 4]]) -> bool {
        let nv = self.nv();
        let mut seen: HashMap<[usize; 3], (u8, bool)> = HashMap::new();
        for el in elems {
            for (key, odd) in oriented_facets(&el[..nv]) {
                if !key[..nv - 1].contains(&center) {
                    continue;
                }
                let entry = seen.entry(key).or_insert((0, odd));
                entry.0 += 1;
                if entry.0 == 2 && entry.1 == odd {
                    return false;
                }
                if entry.0 > 2 {
                    return false;
                }
            }
        }
        seen.iter().all(|(key, (count, _))| {
            let on_bnd = self.facet_on_boundary(&key[..nv - 1]);
            (*count == 1 && on_bnd) || (*count == 2 && !on_bnd)
        })
    }

    /// Point clamped onto the box faces in `seg`.
    pub fn snap(&self, mut x: [f64; 3], seg: u8) -> [f64; 3] {
        for id in 1..=8u8 {
            if seg & (1 << (id - 1)) != 0 {
                if let Some((axis, upper)) = crate::mesh::face_of_segment(self.dim, id) {
                    x[axis] = if upper { self.domain.hi[axis] } else { self.domain.lo[axis] };
                }
            }
        }
        x
    }

    pub fn finish(self) -> Result<(SimplicialMesh, Vec<f64>, MetricField)> {
        let mut map = vec![NONE; self.pts.len()];
        let mut used = vec![false; self.pts.len()];
        for (e, el) in self.elems.iter().enumerate() {
            if self.elem_alive[e] {
                for &v in &el[..self.dim + 1] {
                    used[v] = true;
                }
            }
        }
        let mut pts = Vec::new();
        let mut u = Vec::new();
        let mut met = Vec::new();
        for i in 0..self.pts.len() {
            if used[i] && self.node_alive[i] {
                map[i] = pts.len();
                pts.push(self.pts[i]);
                u.push(self.u[i]);
                met.push(self.met[i]);
            }
        }
        let mut elems = Vec::new();
        for (e, el) in self.elems.iter().enumerate() {
            if !self.elem_alive[e] {
                continue;
            }
            let mut ne = [NONE; 4];
            for k in 0..=self.dim {
                ne[k] = map[el[k]];
                if ne[k] == NONE {
                    return Err(Error::InvalidMesh(format!("element {e} references a removed node")));
                }
            }
            elems.push(ne);
        }
        let mesh = SimplicialMesh::from_parts(self.dim, self.domain, pts, elems)?;
        Ok((mesh, u, MetricField { dim: self.dim, tensors: met, floor_eps: 0.0 }))
    }
}

/// Quality of a simplex mapped by the square root of the averaged nodal
/// metric, times the Euclidean quality raised to `qual_p`.
pub(crate) fn combined_quality_raw(dim: usize, p: &[[f64; 3]; 4], mets: &[Tensor], qual_p: f64) -> f64 {
    let nv = dim + 1;
    let vol = signed_volume(dim, p);
    if vol <= 0.0 {
        return if vol == 0.0 { 0.0 } else { -1.0 };
    }
    let mut m = Tensor::zeros();
    for t in &mets[..nv] {
        m += t;
    }
    m /= nv as f64;
    let d = det(dim, &m).max(0.0);
    let vol_m = d.sqrt() * vol;
    let mut sum = 0.0;
    for i in 0..nv {
        for j in i + 1..nv {
            let v = [p[j][0] - p[i][0], p[j][1] - p[i][1], p[j][2] - p[i][2]];
            sum += metric_length(&v, &m, &m).powi(2);
        }
    }
    if sum == 0.0 {
        return 0.0;
    }
    let q_m = quality_constant(dim) * vol_m / sum.powf(dim as f64 / 2.0);
    if qual_p == 0.0 {
        q_m
    } else {
        q_m * simplex_quality(dim, p).max(0.0).powf(qual_p)
    }
}
