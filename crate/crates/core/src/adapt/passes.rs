//! The four local mesh operations, applied to an [`Editor`].

use std::collections::HashMap;

use super::editor::Editor;
use super::AdaptOptions;
use crate::mesh::barycentric;

const QUALITY_EPS: f64 = 1e-12;

fn min_quality(ed: &Editor, elems: impl IntoIterator<Item = [usize; 4]>) -> f64 {
    elems.into_iter().map(|el| ed.quality(&el)).fold(f64::INFINITY, f64::min)
}

fn replace(mut el: [usize; 4], from: usize, to: usize) -> [usize; 4] {
    for v in el.iter_mut() {
        if *v == from {
            *v = to;
        }
    }
    el
}

// ---------------------------------------------------------------- coarsen

struct Collapse {
    remove: usize,
    keep: usize,
    quality: f64,
    new_elems: Vec<[usize; 4]>,
}

fn evaluate_collapse(ed: &Editor, remove: usize, keep: usize, opts: &AdaptOptions) -> Option<Collapse> {
    // a node may only move onto positions satisfying all its face constraints
    if ed.seg[remove] & !ed.seg[keep] != 0 {
        return None;
    }
    let star = &ed.node_elems[remove];
    let old_min = min_quality(ed, star.iter().map(|&e| ed.elems[e]));
    let mut new_elems = Vec::with_capacity(star.len());
    let mut new_min = f64::INFINITY;
    for &e in star {
        if ed.contains(e, keep) {
            continue;
        }
        let el = replace(ed.elems[e], remove, keep);
        if !ed.is_valid_volume(ed.volume(&el)) {
            return None;
        }
        let q = ed.quality(&el);
        if q < opts.collapse_quality_floor * old_min {
            return None;
        }
        new_min = new_min.min(q);
        new_elems.push(el);
    }
    for x in ed.neighbors(remove) {
        if x != keep && ed.edge_length(keep, x) > opts.l_up {
            return None;
        }
    }
    let mut around: Vec<[usize; 4]> = ed.node_elems[keep]
        .iter()
        .filter(|&&e| !ed.contains(e, remove))
        .map(|&e| ed.elems[e])
        .collect();
    around.extend_from_slice(&new_elems);
    if around.is_empty() || !ed.star_is_manifold(keep, &around) {
        return None;
    }
    Some(Collapse { remove, keep, quality: new_min, new_elems })
}

fn apply_collapse(ed: &mut Editor, c: Collapse) {
    for e in ed.node_elems[c.remove].clone() {
        ed.remove_elem(e);
    }
    for el in c.new_elems {
        ed.add_elem(el);
    }
    ed.node_alive[c.remove] = false;
    debug_assert!(ed.node_alive[c.keep]);
}

/// Collapse edges shorter than `l_low`, shortest first. Returns the number
/// of collapses.
pub(crate) fn coarsen(ed: &mut Editor, opts: &AdaptOptions) -> usize {
    let mut total = 0;
    for _sweep in 0..8 {
        let mut cand: Vec<(f64, usize, usize)> = ed
            .edges()
            .into_iter()
            .map(|(a, b)| (ed.edge_length(a, b), a, b))
            .filter(|c| c.0 < opts.l_low)
            .collect();
        cand.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut done = 0;
        for (_, a, b) in cand {
            if !ed.node_alive[a] || !ed.node_alive[b] || ed.shell(a, b).is_empty() {
                continue;
            }
            if ed.edge_length(a, b) >= opts.l_low {
                continue;
            }
            let best = [evaluate_collapse(ed, a, b, opts), evaluate_collapse(ed, b, a, opts)]
                .into_iter()
                .flatten()
                .max_by(|x, y| x.quality.total_cmp(&y.quality));
            if let Some(c) = best {
                apply_collapse(ed, c);
                done += 1;
            }
        }
        total += done;
        if done == 0 {
            break;
        }
    }
    total
}

// ----------------------------------------------------------------- refine

fn split_edge(ed: &mut Editor, a: usize, b: usize) -> usize {
    let shell = ed.shell(a, b);
    let (pa, pb) = (ed.pts[a], ed.pts[b]);
    let seg = ed.seg[a] & ed.seg[b];
    let x = ed.snap(
        [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0, (pa[2] + pb[2]) / 2.0],
        seg,
    );
    let m = ed.add_node(x, seg, 0.5 * (ed.u[a] + ed.u[b]), (ed.met[a] + ed.met[b]) * 0.5);
    for e in shell {
        let el = ed.elems[e];
        ed.remove_elem(e);
        ed.add_elem(replace(el, b, m));
        ed.add_elem(replace(el, a, m));
    }
    m
}

fn longest_edge(ed: &Editor, el: &[usize; 4]) -> (f64, usize, usize) {
    let nv = ed.nv();
    let mut best = (0.0, 0, 0);
    for i in 0..nv {
        for j in i + 1..nv {
            let (a, b) = (el[i].min(el[j]), el[i].max(el[j]));
            let l = ed.edge_length(a, b);
            if l > best.0 {
                best = (l, a, b);
            }
        }
    }
    best
}

/// Bisect the metric-longest edge of every element exceeding `l_up`,
/// splitting the whole edge shell so the mesh stays conforming. Repeats on
/// the refined mesh until no element qualifies. Returns the number of splits.
pub(crate) fn refine(ed: &mut Editor, opts: &AdaptOptions) -> usize {
    let mut total = 0;
    for _round in 0..32 {
        let mut marked: HashMap<(usize, usize), f64> = HashMap::new();
        for e in 0..ed.elems.len() {
            if !ed.elem_alive[e] {
                continue;
            }
            let (l, a, b) = longest_edge(ed, &ed.elems[e]);
            if l > opts.l_up {
                marked.insert((a, b), l);
            }
        }
        if marked.is_empty() {
            break;
        }
        let mut list: Vec<((usize, usize), f64)> = marked.into_iter().collect();
        list.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
        let mut done = 0;
        for ((a, b), _) in list {
            if ed.num_alive_nodes() >= opts.max_nodes {
                log::warn!("refine: node cap {} reached", opts.max_nodes);
                return total + done;
            }
            if ed.shell(a, b).is_empty() {
                continue;
            }
            split_edge(ed, a, b);
            done += 1;
        }
        total += done;
    }
    total
}

/// Split one edge; used by tests and the interactive demo.
pub(crate) fn split_single(ed: &mut Editor, a: usize, b: usize) -> Option<usize> {
    if ed.shell(a, b).is_empty() {
        None
    } else {
        Some(split_edge(ed, a, b))
    }
}

// ------------------------------------------------------------------- move

/// One Gauss-Seidel sweep of metric-weighted Laplacian smoothing. Boundary
/// nodes slide within their face; nodes on two or more faces stay fixed.
/// Returns the number of nodes moved.
pub(crate) fn smooth(ed: &mut Editor, opts: &AdaptOptions) -> usize {
    let dim = ed.dim;
    let mut moved = 0;
    for a in 0..ed.pts.len() {
        if !ed.node_alive[a] || ed.node_elems[a].is_empty() || ed.seg[a].count_ones() >= 2 {
            continue;
        }
        let seg = ed.seg[a];
        let nb: Vec<usize> = ed
            .neighbors(a)
            .into_iter()
            .filter(|&x| seg == 0 || ed.seg[x] & seg != 0)
            .collect();
        if nb.is_empty() {
            continue;
        }
        let x0 = ed.pts[a];
        let mut target = [0.0; 3];
        let mut wsum = 0.0;
        for &x in &nb {
            let px = ed.pts[x];
            let euclid = crate::mesh::dist(&x0, &px);
            if euclid == 0.0 {
                continue;
            }
            // spring stiffness of the edge in the metric
            let w = (ed.edge_length(a, x) / euclid).powi(2);
            for c in 0..dim {
                target[c] += w * px[c];
            }
            wsum += w;
        }
        if wsum == 0.0 {
            continue;
        }
        for t in target.iter_mut().take(dim) {
            *t /= wsum;
        }
        let star = ed.node_elems[a].clone();
        let old_min = min_quality(ed, star.iter().map(|&e| ed.elems[e]));
        let mut accepted = None;
        for factor in [opts.move_damping, 0.5 * opts.move_damping] {
            let mut x = x0;
            for c in 0..dim {
                x[c] = x0[c] + factor * (target[c] - x0[c]);
            }
            let x = ed.snap(x, seg);
            if crate::mesh::dist(&x, &x0) < 1e-14 * (1.0 + x0[0].abs() + x0[1].abs() + x0[2].abs()) {
                break;
            }
            let mut ok = true;
            let mut new_min = f64::INFINITY;
            for &e in &star {
                let (vol, q) = ed.quality_with_points(&ed.elems[e], a, &x);
                if !ed.is_valid_volume(vol) {
                    ok = false;
                    break;
                }
                new_min = new_min.min(q);
            }
            if ok && new_min >= old_min {
                accepted = Some(x);
                break;
            }
        }
        if let Some(x) = accepted {
            // re-interpolate field and metric from the pre-move star
            let mut best = (f64::NEG_INFINITY, [0.0; 4], star[0]);
            for &e in &star {
                if let Some(l) = barycentric(dim, &ed.points_of(&ed.elems[e]), &x) {
                    let m = l[..=dim].iter().copied().fold(f64::INFINITY, f64::min);
                    if m > best.0 {
                        best = (m, l, e);
                    }
                }
            }
            let el = ed.elems[best.2];
            let mut u = 0.0;
            let mut met = crate::metric::Tensor::zeros();
            for k in 0..=dim {
                u += best.1[k] * ed.u[el[k]];
                met += ed.met[el[k]] * best.1[k];
            }
            ed.u[a] = u;
            if best.0 >= -1e-9 {
                ed.met[a] = met;
            }
            ed.pts[a] = x;
            moved += 1;
        }
    }
    moved
}

// ------------------------------------------------------------------- swap

fn third(el: &[usize; 4], nv: usize, a: usize, b: usize) -> usize {
    el[..nv].iter().copied().find(|&v| v != a && v != b).unwrap()
}

fn swap_2d(ed: &mut Editor) -> usize {
    let mut total = 0;
    for _sweep in 0..3 {
        let mut done = 0;
        for (a, b) in ed.edges() {
            let shell = ed.shell(a, b);
            if shell.len() != 2 {
                continue;
            }
            let (t1, t2) = (ed.elems[shell[0]], ed.elems[shell[1]]);
            let c = third(&t1, 3, a, b);
            let d = third(&t2, 3, a, b);
            if c == d || !ed.shell(c, d).is_empty() {
                continue;
            }
            let n1 = replace(t1, b, d);
            let n2 = replace(t2, a, c);
            if !ed.is_valid_volume(ed.volume(&n1)) || !ed.is_valid_volume(ed.volume(&n2)) {
                continue;
            }
            let old = ed.quality(&t1).min(ed.quality(&t2));
            let new = ed.quality(&n1).min(ed.quality(&n2));
            if new > old + QUALITY_EPS {
                ed.remove_elem(shell[0]);
                ed.remove_elem(shell[1]);
                ed.add_elem(n1);
                ed.add_elem(n2);
                done += 1;
            }
        }
        total += done;
        if done == 0 {
            break;
        }
    }
    total
}

/// 2-3 swap across interior face `face` of `e1` and `e2`.
fn try_swap_23(ed: &mut Editor, e1: usize, e2: usize) -> bool {
    let (t1, t2) = (ed.elems[e1], ed.elems[e2]);
    let d = t1.iter().copied().find(|v| !t2[..4].contains(v)).unwrap();
    let e = t2.iter().copied().find(|v| !t1[..4].contains(v)).unwrap();
    if !ed.shell(d, e).is_empty() {
        return false;
    }
    let face: Vec<usize> = t1.iter().copied().filter(|&v| v != d).collect();
    let news: Vec<[usize; 4]> = face.iter().map(|&f| replace(t1, f, e)).collect();
    if news.iter().any(|t| !ed.is_valid_volume(ed.volume(t))) {
        return false;
    }
    let old = ed.quality(&t1).min(ed.quality(&t2));
    let new = min_quality(ed, news.iter().copied());
    if new <= old + QUALITY_EPS {
        return false;
    }
    ed.remove_elem(e1);
    ed.remove_elem(e2);
    for t in news {
        ed.add_elem(t);
    }
    true
}

/// 3-2 swap removing interior edge `(d, e)` surrounded by three tets.
fn try_swap_32(ed: &mut Editor, d: usize, e: usize) -> bool {
    let shell = ed.shell(d, e);
    if shell.len() != 3 {
        return false;
    }
    let mut ring: Vec<usize> = shell
        .iter()
        .flat_map(|&t| ed.elems[t].to_vec())
        .filter(|&v| v != d && v != e)
        .collect();
    ring.sort_unstable();
    let closed = ring.len() == 6 && ring[0] == ring[1] && ring[2] == ring[3] && ring[4] == ring[5];
    if !closed {
        return false;
    }
    let (a, b, c) = (ring[0], ring[2], ring[4]);
    if ed.shell(a, b).iter().any(|&t| ed.contains(t, c)) {
        return false;
    }
    let t1 = ed.elems[shell.iter().copied().find(|&t| !ed.contains(t, c)).unwrap()];
    let news = [replace(t1, e, c), replace(t1, d, c)];
    if news.iter().any(|t| !ed.is_valid_volume(ed.volume(t))) {
        return false;
    }
    let old = min_quality(ed, shell.iter().map(|&t| ed.elems[t]));
    let new = min_quality(ed, news);
    if new <= old + QUALITY_EPS {
        return false;
    }
    for t in shell {
        ed.remove_elem(t);
    }
    for t in news {
        ed.add_elem(t);
    }
    true
}

fn swap_3d(ed: &mut Editor) -> usize {
    let mut total = 0;
    for _sweep in 0..3 {
        let mut done = 0;
        for (d, e) in ed.edges() {
            if ed.node_alive[d] && ed.node_alive[e] && try_swap_32(ed, d, e) {
                done += 1;
            }
        }
        let mut faces: HashMap<[usize; 3], Vec<usize>> = HashMap::new();
        for t in 0..ed.elems.len() {
            if !ed.elem_alive[t] {
                continue;
            }
            for (key, _) in crate::mesh::oriented_facets(&ed.elems[t][..4]) {
                faces.entry(key).or_default().push(t);
            }
        }
        let mut pairs: Vec<(usize, usize)> = faces
            .into_values()
            .filter(|v| v.len() == 2)
            .map(|v| (v[0], v[1]))
            .collect();
        pairs.sort_unstable();
        for (e1, e2) in pairs {
            if ed.elem_alive[e1] && ed.elem_alive[e2] && try_swap_23(ed, e1, e2) {
                done += 1;
            }
        }
        total += done;
        if done == 0 {
            break;
        }
    }
    total
}

/// Quality-improving flips: edge flips in 2D, 2-3/3-2 swaps in 3D.
pub(crate) fn swap(ed: &mut Editor) -> usize {
    if ed.dim == 2 {
        swap_2d(ed)
    } else {
        swap_3d(ed)
    }
}
