//! Sparse matrices and the direct solvers used by Newton, continuation and
//! the stability count: reverse Cuthill-McKee reordering followed by a band
//! LU with partial pivoting (general systems) or a band LDLᵀ (symmetric
//! inertia via Sylvester's law).

use std::collections::VecDeque;

use crate::{Error, Result};

/// Compressed sparse row matrix, square.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from `(row, col, value)` triplets; duplicates are summed and
    /// explicit zeros are kept so matrices assembled on the same mesh share
    /// one sparsity pattern.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = (usize::MAX, usize::MAX);
        for (r, c, v) in triplets {
            if (r, c) == last {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = (r, c);
            }
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix { n, indptr, indices, values }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.values[r])
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.indptr[i]..self.indptr[i + 1]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.n == other.n && self.indptr == other.indptr && self.indices == other.indices
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect()
    }

    /// Replace row `i` by the unit row `e_iᵀ`.
    pub fn set_unit_row(&mut self, i: usize) {
        for k in self.row_range(i) {
            self.values[k] = if self.indices[k] == i { 1.0 } else { 0.0 };
        }
    }

    /// Zero column `j` except the diagonal entry.
    pub fn zero_column_offdiag(&mut self, j: usize) {
        for i in 0..self.n {
            if i == j {
                continue;
            }
            let r = self.row_range(i);
            if let Ok(k) = self.indices[r.clone()].binary_search(&j) {
                self.values[r.start + k] = 0.0;
            }
        }
    }

    /// `(A + Aᵀ) / 2`, assuming a structurally symmetric pattern.
    pub fn symmetric_part(&self) -> CsrMatrix {
        let mut out = self.clone();
        for i in 0..self.n {
            for k in self.row_range(i) {
                let j = self.indices[k];
                out.values[k] = 0.5 * (self.values[k] + self.get(j, i));
            }
        }
        out
    }

    /// Principal submatrix on the rows/columns where `keep` is true.
    pub fn principal_submatrix(&self, keep: &[bool]) -> (CsrMatrix, Vec<usize>) {
        let mut map = vec![usize::MAX; self.n];
        let mut kept = Vec::new();
        for i in 0..self.n {
            if keep[i] {
                map[i] = kept.len();
                kept.push(i);
            }
        }
        let mut trip = Vec::new();
        for (ni, &i) in kept.iter().enumerate() {
            for k in self.row_range(i) {
                let j = self.indices[k];
                if map[j] != usize::MAX {
                    trip.push((ni, map[j], self.values[k]));
                }
            }
        }
        (CsrMatrix::from_triplets(kept.len(), trip), kept)
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for &j in &self.indices[self.row_range(i)] {
                if i != j {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }
}

/// Reverse Cuthill-McKee ordering; `perm[new] = old`.
pub fn rcm_ordering(a: &CsrMatrix) -> Vec<usize> {
    let adj = a.adjacency();
    let n = a.n();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let bfs = |start: usize, visited: &mut Vec<bool>, out: &mut Vec<usize>| {
        let mut q = VecDeque::new();
        visited[start] = true;
        q.push_back(start);
        while let Some(v) = q.pop_front() {
            out.push(v);
            let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nb.sort_by_key(|&w| adj[w].len());
            for w in nb {
                visited[w] = true;
                q.push_back(w);
            }
        }
    };
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start: a few rounds of "farthest, lowest degree"
        let mut start = seed;
        let mut ecc = 0;
        for _ in 0..4 {
            let mut level = vec![usize::MAX; n];
            level[start] = 0;
            let mut q = VecDeque::from([start]);
            let mut last = start;
            while let Some(v) = q.pop_front() {
                last = v;
                for &w in &adj[v] {
                    if level[w] == usize::MAX {
                        level[w] = level[v] + 1;
                        q.push_back(w);
                    }
                }
            }
            let far = level[last];
            let cand = (0..n)
                .filter(|&v| level[v] == far)
                .min_by_key(|&v| adj[v].len())
                .unwrap_or(last);
            if far <= ecc {
                break;
            }
            ecc = far;
            start = cand;
        }
        bfs(start, &mut visited, &mut order);
    }
    order.reverse();
    order
}

fn permuted_bandwidth(a: &CsrMatrix, inv: &[usize]) -> usize {
    let mut bw = 0;
    for i in 0..a.n() {
        for &j in &a.indices[a.row_range(i)] {
            bw = bw.max(inv[i].abs_diff(inv[j]));
        }
    }
    bw
}

/// LU factorization with partial pivoting of a band matrix obtained from
/// a sparse matrix after RCM reordering.
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
    perm: Vec<usize>,
}

impl BandLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let perm = rcm_ordering(a);
        Self::factor_with_ordering(a, perm)
    }

    pub fn factor_with_ordering(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.n();
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let b = permuted_bandwidth(a, &inv);
        let (kl, ku) = (b, b);
        let width = 2 * kl + ku + 1;
        let mut ab = vec![0.0; n * width];
        let idx = |r: usize, c: usize| r * width + (c + kl - r);
        let mut scale = 0.0f64;
        for i in 0..n {
            for k in a.row_range(i) {
                let (r, c) = (inv[i], inv[a.indices[k]]);
                ab[idx(r, c)] += a.values[k];
                scale = scale.max(a.values[k].abs());
            }
        }
        let mut ipiv = vec![0; n];
        let tiny = f64::EPSILON * scale.max(f64::MIN_POSITIVE) * 1e-2;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = ab[idx(k, k)].abs();
            for r in k + 1..=last_row {
                let v = ab[idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            ipiv[k] = p;
            if best <= tiny {
                return Err(Error::Singular(format!("zero pivot at step {k} of {n}")));
            }
            if p != k {
                for c in k..=last_col {
                    ab.swap(idx(k, c), idx(p, c));
                }
            }
            let piv = ab[idx(k, k)];
            for r in k + 1..=last_row {
                let l = ab[idx(r, k)] / piv;
                ab[idx(r, k)] = l;
                if l != 0.0 {
                    for c in k + 1..=last_col {
                        ab[idx(r, c)] -= l * ab[idx(k, c)];
                    }
                }
            }
        }
        Ok(BandLu { n, kl, ku, width, ab, ipiv, perm })
    }

    pub fn bandwidth(&self) -> usize {
        self.kl
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, kl, ku, w) = (self.n, self.kl, self.ku, self.width);
        let idx = |r: usize, c: usize| r * w + (c + kl - r);
        let mut x: Vec<f64> = self.perm.iter().map(|&old| rhs[old]).collect();
        for k in 0..n {
            let p = self.ipiv[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                for r in k + 1..=(k + kl).min(n.saturating_sub(1)) {
                    x[r] -= self.ab[idx(r, k)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for c in k + 1..=(k + kl + ku).min(n - 1) {
                s -= self.ab[idx(k, c)] * x[c];
            }
            x[k] = s / self.ab[idx(k, k)];
        }
        let mut out = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }
}

/// Band LDLᵀ without pivoting for symmetric matrices. Gives the inertia and
/// supports solves for inverse iteration.
pub struct BandLdl {
    n: usize,
    b: usize,
    ab: Vec<f64>,
    perm: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
}

impl BandLdl {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n();
        let perm = rcm_ordering(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let b = permuted_bandwidth(a, &inv);
        let w = b + 1;
        let mut ab = vec![0.0; n * w];
        let mut scale = 0.0f64;
        for i in 0..n {
            for k in a.row_range(i) {
                let (r, c) = (inv[i], inv[a.indices[k]]);
                if c >= r {
                    ab[r * w + (c - r)] += a.values[k];
                }
                scale = scale.max(a.values[k].abs());
            }
        }
        let tiny = f64::EPSILON * scale.max(f64::MIN_POSITIVE) * 1e-4;
        for k in 0..n {
            let d = ab[k * w];
            if d.abs() <= tiny {
                return Err(Error::Singular(format!("zero pivot in LDLT at step {k} of {n}")));
            }
            let last = (k + b).min(n - 1);
            for i in k + 1..=last {
                let l = ab[k * w + (i - k)] / d;
                if l == 0.0 {
                    continue;
                }
                for j in i..=last {
                    ab[i * w + (j - i)] -= l * ab[k * w + (j - k)];
                }
            }
        }
        Ok(BandLdl { n, b, ab, perm })
    }

    pub fn inertia(&self) -> Inertia {
        let w = self.b + 1;
        let mut inertia = Inertia { negative: 0, zero: 0, positive: 0 };
        for k in 0..self.n {
            let d = self.ab[k * w];
            if d < 0.0 {
                inertia.negative += 1;
            } else if d > 0.0 {
                inertia.positive += 1;
            } else {
                inertia.zero += 1;
            }
        }
        inertia
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, b) = (self.n, self.b);
        let w = b + 1;
        let mut x: Vec<f64> = self.perm.iter().map(|&old| rhs[old]).collect();
        // A = U^T D^{-1} U with U the eliminated upper band
        for k in 0..n {
            let d = self.ab[k * w];
            let xk = x[k];
            for i in k + 1..=(k + b).min(n - 1) {
                x[i] -= self.ab[k * w + (i - k)] / d * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + b).min(n - 1) {
                s -= self.ab[k * w + (j - k)] * x[j];
            }
            x[k] = s / self.ab[k * w];
        }
        let mut out = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}
