use std::f64::consts::SQRT_2;

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Signed measure of a simplex given by its first `dim + 1` points.
pub fn signed_volume(dim: usize, p: &[[f64; 3]; 4]) -> f64 {
    let a = sub(&p[1], &p[0]);
    let b = sub(&p[2], &p[0]);
    if dim == 2 {
        0.5 * (a[0] * b[1] - a[1] * b[0])
    } else {
        let c = sub(&p[3], &p[0]);
        (a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
            + a[2] * (b[0] * c[1] - b[1] * c[0]))
            / 6.0
    }
}

pub(crate) fn quality_constant(dim: usize) -> f64 {
    if dim == 2 {
        // equilateral unit triangle: area sqrt(3)/4, sum of squares 3
        4.0 * 3f64.sqrt()
    } else {
        // regular unit tet: volume 1/(6 sqrt 2), sum of squares 6
        6f64.powf(1.5) * 6.0 * SQRT_2
    }
}

/// `c_d * vol / (sum of squared edge lengths)^(d/2)`, normalized to 1 on
/// the regular simplex. Negative for inverted simplices, 0 when degenerate.
pub fn simplex_quality(dim: usize, p: &[[f64; 3]; 4]) -> f64 {
    let vol = signed_volume(dim, p);
    let mut sum = 0.0;
    for i in 0..=dim {
        for j in i + 1..=dim {
            let d = sub(&p[i], &p[j]);
            sum += d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        }
    }
    if sum == 0.0 || vol == 0.0 {
        return 0.0;
    }
    quality_constant(dim) * vol / sum.powf(dim as f64 / 2.0)
}

/// Barycentric coordinates of `x` in the simplex `p`; `None` if degenerate.
pub fn barycentric(dim: usize, p: &[[f64; 3]; 4], x: &[f64; 3]) -> Option<[f64; 4]> {
    let r = sub(x, &p[0]);
    if dim == 2 {
        let a = sub(&p[1], &p[0]);
        let b = sub(&p[2], &p[0]);
        let det = a[0] * b[1] - a[1] * b[0];
        if det == 0.0 {
            return None;
        }
        let l1 = (r[0] * b[1] - r[1] * b[0]) / det;
        let l2 = (a[0] * r[1] - a[1] * r[0]) / det;
        Some([1.0 - l1 - l2, l1, l2, 0.0])
    } else {
        let m = nalgebra::Matrix3::new(
            p[1][0] - p[0][0],
            p[2][0] - p[0][0],
            p[3][0] - p[0][0],
            p[1][1] - p[0][1],
            p[2][1] - p[0][1],
            p[3][1] - p[0][1],
            p[1][2] - p[0][2],
            p[2][2] - p[0][2],
            p[3][2] - p[0][2],
        );
        let l = m.lu().solve(&nalgebra::Vector3::new(r[0], r[1], r[2]))?;
        Some([1.0 - l[0] - l[1] - l[2], l[0], l[1], l[2]])
    }
}

/// Gradients of the P1 basis functions on a simplex, one `[f64; 3]` per
/// vertex. Requires nonzero volume.
pub(crate) fn basis_gradients(dim: usize, p: &[[f64; 3]; 4]) -> Option<[[f64; 3]; 4]> {
    let mut g = [[0.0; 3]; 4];
    if dim == 2 {
        let a = sub(&p[1], &p[0]);
        let b = sub(&p[2], &p[0]);
        let det = a[0] * b[1] - a[1] * b[0];
        if det == 0.0 {
            return None;
        }
        // inverse transpose of [a b]
        g[1] = [b[1] / det, -b[0] / det, 0.0];
        g[2] = [-a[1] / det, a[0] / det, 0.0];
    } else {
        let m = nalgebra::Matrix3::new(
            p[1][0] - p[0][0],
            p[1][1] - p[0][1],
            p[1][2] - p[0][2],
            p[2][0] - p[0][0],
            p[2][1] - p[0][1],
            p[2][2] - p[0][2],
            p[3][0] - p[0][0],
            p[3][1] - p[0][1],
            p[3][2] - p[0][2],
        );
        // rows of m are edge vectors; grad(l_k) are the columns of m^{-1}
        let inv = m.try_inverse()?;
        for k in 0..3 {
            g[k + 1] = [inv[(0, k)], inv[(1, k)], inv[(2, k)]];
        }
    }
    for c in 0..3 {
        g[0][c] = -(g[1][c] + g[2][c] + g[3][c]);
    }
    Some(g)
}
