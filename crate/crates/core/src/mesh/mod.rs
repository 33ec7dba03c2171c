//! Simplicial mesh kernel for box domains in 2D and 3D.
//!
//! Coordinates are stored as `[f64; 3]` and elements as `[usize; 4]`
//! regardless of dimension; in 2D the third coordinate is zero and the
//! fourth element slot is [`NONE`]. Public accessors return slices of the
//! proper length.

mod geometry;
pub mod io;
mod locate;
mod segments;

use std::collections::HashMap;

pub use geometry::{barycentric, signed_volume, simplex_quality};
pub(crate) use geometry::{basis_gradients, quality_constant};
pub use io::{parse_mesh, read_field, read_mesh, write_field, write_mesh, write_mesh_string, write_vtk, write_vtk_file};
pub use locate::{interpolate, Interpolation, Locator};
pub use segments::{face_of_segment, num_segments, segment_of_face, SEGMENTS_2D, SEGMENTS_3D};

use crate::{Error, Result};

/// Placeholder in unused element / facet slots.
pub const NONE: usize = usize::MAX;

/// Axis-aligned box `(lo, hi)` that generated a mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDomain {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl BoxDomain {
    pub fn centered(half: [f64; 3]) -> Self {
        BoxDomain {
            lo: [-half[0], -half[1], -half[2]],
            hi: half,
        }
    }

    pub fn diameter(&self, dim: usize) -> f64 {
        (0..dim)
            .map(|k| (self.hi[k] - self.lo[k]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn measure(&self, dim: usize) -> f64 {
        (0..dim).map(|k| self.hi[k] - self.lo[k]).product()
    }

    /// Bitmask of segment IDs (bit `id - 1`) whose face contains `x`.
    pub fn segment_mask(&self, dim: usize, x: &[f64; 3]) -> u8 {
        let tol = 1e-12 * self.diameter(dim).max(1.0);
        let mut mask = 0u8;
        for axis in 0..dim {
            if (x[axis] - self.lo[axis]).abs() <= tol {
                mask |= 1 << (segment_of_face(dim, axis, false) - 1);
            }
            if (x[axis] - self.hi[axis]).abs() <= tol {
                mask |= 1 << (segment_of_face(dim, axis, true) - 1);
            }
        }
        mask
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFacet {
    /// `dim` node indices; unused slot is [`NONE`].
    pub nodes: [usize; 3],
    pub segment_id: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplicialMesh {
    dim: usize,
    domain: BoxDomain,
    nodes: Vec<[f64; 3]>,
    elements: Vec<[usize; 4]>,
    boundary_facets: Vec<BoundaryFacet>,
    node_segments: Vec<u8>,
}

/// Defect counts; all zero iff the mesh invariants hold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub inverted: usize,
    pub nonconforming: usize,
    pub orphan_nodes: usize,
    /// Boundary facets not lying on a face of the box.
    pub off_boundary_facets: usize,
    /// Nodes flagged as boundary that are not on the box surface, or
    /// nodes outside the box.
    pub misplaced_nodes: usize,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        *self == ValidationReport::default()
    }

    pub fn total(&self) -> usize {
        self.inverted
            + self.nonconforming
            + self.orphan_nodes
            + self.off_boundary_facets
            + self.misplaced_nodes
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "inverted={} nonconforming={} orphan_nodes={} off_boundary_facets={} misplaced_nodes={}",
            self.inverted,
            self.nonconforming,
            self.orphan_nodes,
            self.off_boundary_facets,
            self.misplaced_nodes
        )
    }
}

/// Sorted facet key plus the parity of the permutation that sorts it.
pub(crate) fn facet_key(facet: &[usize]) -> ([usize; 3], bool) {
    let mut key = [NONE; 3];
    key[..facet.len()].copy_from_slice(facet);
    let n = facet.len();
    let mut odd = false;
    for i in 0..n {
        for j in 0..n - 1 - i {
            if key[j] > key[j + 1] {
                key.swap(j, j + 1);
                odd = !odd;
            }
        }
    }
    (key, odd)
}

/// Facets of a simplex with their induced orientation.
///
/// The facet opposite vertex `i` inherits sign `(-1)^i`; combined with the
/// sort parity this gives a canonical orientation flag so that two
/// properly oriented neighbours produce opposite flags on their shared facet.
pub(crate) fn oriented_facets(elem: &[usize]) -> impl Iterator<Item = ([usize; 3], bool)> + '_ {
    let nv = elem.len();
    (0..nv).map(move |i| {
        let mut f = [NONE; 3];
        let mut k = 0;
        for (j, &v) in elem.iter().enumerate() {
            if j != i {
                f[k] = v;
                k += 1;
            }
        }
        let (key, odd) = facet_key(&f[..nv - 1]);
        (key, odd ^ (i % 2 == 1))
    })
}

impl SimplicialMesh {
    /// Assemble a mesh from raw parts. Boundary facets and per-node segment
    /// membership are derived from the topology and the box geometry.
    pub fn from_parts(
        dim: usize,
        domain: BoxDomain,
        nodes: Vec<[f64; 3]>,
        elements: Vec<[usize; 4]>,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Argument(format!("dimension must be 2 or 3, got {dim}")));
        }
        let nv = dim + 1;
        for (e, el) in elements.iter().enumerate() {
            if el[..nv].iter().any(|&v| v >= nodes.len()) {
                return Err(Error::Argument(format!("element {e} references a missing node")));
            }
        }
        let node_segments = nodes.iter().map(|x| domain.segment_mask(dim, x)).collect();
        let mut mesh = SimplicialMesh {
            dim,
            domain,
            nodes,
            elements,
            boundary_facets: Vec::new(),
            node_segments,
        };
        mesh.rebuild_boundary();
        Ok(mesh)
    }

    fn rebuild_boundary(&mut self) {
        let mut count: HashMap<[usize; 3], (usize, [usize; 3])> = HashMap::new();
        for e in 0..self.elements.len() {
            let el = self.element(e).to_vec();
            for (key, odd) in oriented_facets(&el) {
                let entry = count.entry(key).or_insert((0, [NONE; 3]));
                entry.0 += 1;
                // keep an outward-consistent node order for output
                let mut f = key;
                if odd && self.dim >= 2 {
                    f.swap(0, 1);
                }
                entry.1 = f;
            }
        }
        let mut facets: Vec<BoundaryFacet> = count
            .into_iter()
            .filter(|(_, (c, _))| *c == 1)
            .map(|(_, (_, nodes))| {
                let mask = nodes[..self.dim]
                    .iter()
                    .fold(0xffu8, |m, &v| m & self.node_segments[v]);
                let segment_id = if mask == 0 { 0 } else { mask.trailing_zeros() as u8 + 1 };
                BoundaryFacet { nodes, segment_id }
            })
            .collect();
        facets.sort_by_key(|f| {
            let (k, _) = facet_key(&f.nodes[..self.dim]);
            k
        });
        self.boundary_facets = facets;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    /// Node coordinates, `dim` long.
    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i][..self.dim]
    }

    /// Node coordinates padded to three components.
    pub fn point(&self, i: usize) -> [f64; 3] {
        self.nodes[i]
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    /// Element vertex indices, `dim + 1` long.
    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e][..self.dim + 1]
    }

    pub fn raw_elements(&self) -> &[[usize; 4]] {
        &self.elements
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary_facets
    }

    /// Bitmask of segment IDs containing node `i` (bit `id - 1`).
    pub fn node_segment_mask(&self, i: usize) -> u8 {
        self.node_segments[i]
    }

    /// Segment IDs containing node `i`, ascending; empty for interior nodes.
    pub fn node_segments(&self, i: usize) -> Vec<u8> {
        let m = self.node_segments[i];
        (0..8).filter(|b| m & (1 << b) != 0).map(|b| b + 1).collect()
    }

    pub fn is_boundary_node(&self, i: usize) -> bool {
        self.node_segments[i] != 0
    }

    pub fn element_points(&self, e: usize) -> [[f64; 3]; 4] {
        let mut p = [[0.0; 3]; 4];
        for (k, &v) in self.element(e).iter().enumerate() {
            p[k] = self.nodes[v];
        }
        p
    }

    pub fn element_volume(&self, e: usize) -> f64 {
        signed_volume(self.dim, &self.element_points(e))
    }

    /// Unique undirected edges `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let nv = self.dim + 1;
        let mut edges = Vec::with_capacity(self.elements.len() * 3);
        for el in &self.elements {
            for i in 0..nv {
                for j in i + 1..nv {
                    let (a, b) = (el[i].min(el[j]), el[i].max(el[j]));
                    edges.push((a, b));
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Node-to-element incidence lists.
    pub fn node_elements(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in 0..self.elements.len() {
            for &v in self.element(e) {
                adj[v].push(e);
            }
        }
        adj
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let nv = self.dim + 1;
        let scale = self.domain.diameter(self.dim).powi(self.dim as i32);
        let mut used = vec![false; self.nodes.len()];
        let mut facets: HashMap<[usize; 3], (usize, bool)> = HashMap::new();
        for e in 0..self.elements.len() {
            let el = self.element(e);
            let mut distinct = true;
            for i in 0..nv {
                used[el[i]] = true;
                for j in i + 1..nv {
                    distinct &= el[i] != el[j];
                }
            }
            if !distinct || self.element_volume(e) <= 1e-14 * scale {
                report.inverted += 1;
            }
            for (key, odd) in oriented_facets(el) {
                match facets.get_mut(&key) {
                    None => {
                        facets.insert(key, (1, odd));
                    }
                    Some(entry) => {
                        entry.0 += 1;
                        if entry.0 == 2 && entry.1 == odd {
                            // same induced orientation: overlapping neighbours
                            report.nonconforming += 1;
                        }
                    }
                }
            }
        }
        for (key, (count, _)) in &facets {
            match count {
                1 => {
                    let mask = key[..self.dim]
                        .iter()
                        .fold(0xffu8, |m, &v| m & self.node_segments[v]);
                    if mask == 0 {
                        report.off_boundary_facets += 1;
                    }
                }
                2 => {}
                _ => report.nonconforming += 1,
            }
        }
        report.orphan_nodes = used.iter().filter(|u| !**u).count();
        let tol = 1e-9 * self.domain.diameter(self.dim).max(1.0);
        for (i, x) in self.nodes.iter().enumerate() {
            let outside = (0..self.dim)
                .any(|k| x[k] < self.domain.lo[k] - tol || x[k] > self.domain.hi[k] + tol);
            if outside || self.domain.segment_mask(self.dim, x) != self.node_segments[i] {
                report.misplaced_nodes += 1;
            }
        }
        report
    }

    /// Euclidean shape quality of element `e` in `[0, 1]`.
    pub fn element_quality_euclidean(&self, e: usize) -> f64 {
        simplex_quality(self.dim, &self.element_points(e))
    }

    /// Total measure of the mesh.
    pub fn measure(&self) -> f64 {
        (0..self.elements.len()).map(|e| self.element_volume(e)).sum()
    }

    /// Smallest and largest Euclidean edge lengths.
    pub fn edge_length_range(&self) -> (f64, f64) {
        self.edges().iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &(a, b)| {
            let l = dist(&self.nodes[a], &self.nodes[b]);
            (lo.min(l), hi.max(l))
        })
    }

    /// Structured triangulation of `(-lx, lx) x (-ly, ly)` with `nx * ny`
    /// nodes. Quads alternate their diagonal in a checkerboard pattern.
    pub fn rect(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(lx > 0.0 && ly > 0.0) || nx < 2 || ny < 2 {
            return Err(Error::Argument(format!(
                "rect mesh needs positive extents and counts >= 2, got ({lx}, {ly}, {nx}, {ny})"
            )));
        }
        let domain = BoxDomain::centered([lx, ly, 0.0]);
        let mut nodes = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                nodes.push([
                    grid_coord(-lx, lx, i, nx),
                    grid_coord(-ly, ly, j, ny),
                    0.0,
                ]);
            }
        }
        let id = |i: usize, j: usize| i + nx * j;
        let mut elements = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                if (i + j) % 2 == 0 {
                    elements.push([a, b, c, NONE]);
                    elements.push([a, c, d, NONE]);
                } else {
                    elements.push([a, b, d, NONE]);
                    elements.push([b, c, d, NONE]);
                }
            }
        }
        Self::from_parts(2, domain, nodes, elements)
    }

    /// Structured tetrahedral mesh of `(-lx,lx) x (-ly,ly) x (-lz,lz)`;
    /// every cube is split into the six Kuhn tetrahedra along its main
    /// diagonal.
    pub fn cuboid(lx: f64, ly: f64, lz: f64, nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if !(lx > 0.0 && ly > 0.0 && lz > 0.0) || nx < 2 || ny < 2 || nz < 2 {
            return Err(Error::Argument(format!(
                "box mesh needs positive extents and counts >= 2, got ({lx}, {ly}, {lz}, {nx}, {ny}, {nz})"
            )));
        }
        let domain = BoxDomain::centered([lx, ly, lz]);
        let mut nodes = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    nodes.push([
                        grid_coord(-lx, lx, i, nx),
                        grid_coord(-ly, ly, j, ny),
                        grid_coord(-lz, lz, k, nz),
                    ]);
                }
            }
        }
        let id = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);
        const PERMS: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let mut elements = Vec::with_capacity(6 * (nx - 1) * (ny - 1) * (nz - 1));
        for k in 0..nz - 1 {
            for j in 0..ny - 1 {
                for i in 0..nx - 1 {
                    for perm in PERMS {
                        let mut c = [i, j, k];
                        let mut tet = [id(i, j, k), 0, 0, 0];
                        for (s, &axis) in perm.iter().enumerate() {
                            c[axis] += 1;
                            tet[s + 1] = id(c[0], c[1], c[2]);
                        }
                        let pts = [nodes[tet[0]], nodes[tet[1]], nodes[tet[2]], nodes[tet[3]]];
                        if signed_volume(3, &pts) < 0.0 {
                            tet.swap(2, 3);
                        }
                        elements.push(tet);
                    }
                }
            }
        }
        Self::from_parts(3, domain, nodes, elements)
    }

    /// Uniform red refinement of a 2D mesh (every triangle into four).
    pub fn refine_uniform_2d(&self) -> Result<Self> {
        if self.dim != 2 {
            return Err(Error::Argument("uniform refinement is 2D only".into()));
        }
        let mut nodes = self.nodes.clone();
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, nodes: &mut Vec<[f64; 3]>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                let (pa, pb) = (nodes[a], nodes[b]);
                nodes.push([(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0, 0.0]);
                nodes.len() - 1
            })
        };
        let mut elements = Vec::with_capacity(4 * self.elements.len());
        for el in &self.elements {
            let [a, b, c, _] = *el;
            let ab = midpoint(a, b, &mut nodes);
            let bc = midpoint(b, c, &mut nodes);
            let ca = midpoint(c, a, &mut nodes);
            elements.push([a, ab, ca, NONE]);
            elements.push([ab, b, bc, NONE]);
            elements.push([ca, bc, c, NONE]);
            elements.push([ab, bc, ca, NONE]);
        }
        Self::from_parts(2, self.domain, nodes, elements)
    }

    /// Evaluate `f` at every node.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.nodes.len()).map(|i| f(self.node(i))).collect()
    }
}

fn grid_coord(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    if i + 1 == n {
        hi
    } else {
        lo + (hi - lo) * i as f64 / (n - 1) as f64
    }
}

pub(crate) fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}
