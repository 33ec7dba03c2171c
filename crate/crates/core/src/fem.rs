//! P1 finite elements for the scalar steady Allen-Cahn operator
//!
//! ```text
//! G(u) = -c Δu - λu - u³ + γu⁵
//! ```
//!
//! with Dirichlet data given by parameter-dependent boundary profiles and
//! homogeneous Neumann conditions elsewhere. The nonlinearity is evaluated
//! at the nodes and weighted by the consistent mass matrix.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::linalg::CsrMatrix;
use crate::mesh::basis_gradients;
use crate::mesh::SimplicialMesh;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryProfile {
    Zero,
    /// `d cos(y/2)`.
    CosHalf,
    /// `exp(-(x-ξ)²)` in 2D, `exp(-(x-ξ)² - z²)` in 3D.
    GaussSpot,
}

impl FromStr for BoundaryProfile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(BoundaryProfile::Zero),
            "cos_half" => Ok(BoundaryProfile::CosHalf),
            "gauss_spot" => Ok(BoundaryProfile::GaussSpot),
            other => Err(Error::Config(format!("unknown boundary profile '{other}'"))),
        }
    }
}

fn aux_value(aux: &BTreeMap<String, f64>, name: &str, profile: &str) -> Result<f64> {
    aux.get(name)
        .copied()
        .ok_or_else(|| Error::Config(format!("profile {profile} needs auxiliary parameter '{name}'")))
}

impl BoundaryProfile {
    pub fn eval(&self, x: &[f64], aux: &BTreeMap<String, f64>) -> Result<f64> {
        match self {
            BoundaryProfile::Zero => Ok(0.0),
            BoundaryProfile::CosHalf => Ok(aux_value(aux, "d", "cos_half")? * (x[1] / 2.0).cos()),
            BoundaryProfile::GaussSpot => {
                let xi = aux_value(aux, "xi", "gauss_spot")?;
                let z2 = if x.len() == 3 { x[2] * x[2] } else { 0.0 };
                Ok((-(x[0] - xi).powi(2) - z2).exp())
            }
        }
    }

    /// Derivative of the profile value with respect to auxiliary
    /// parameter `name` (zero if the profile does not depend on it).
    pub fn derivative(&self, x: &[f64], aux: &BTreeMap<String, f64>, name: &str) -> Result<f64> {
        match (self, name) {
            (BoundaryProfile::CosHalf, "d") => Ok((x[1] / 2.0).cos()),
            (BoundaryProfile::GaussSpot, "xi") => {
                let xi = aux_value(aux, "xi", "gauss_spot")?;
                Ok(2.0 * (x[0] - xi) * self.eval(x, aux)?)
            }
            _ => Ok(0.0),
        }
    }
}

/// Free-function form of [`BoundaryProfile::eval`].
pub fn eval_boundary_profile(profile: BoundaryProfile, point: &[f64], aux: &BTreeMap<String, f64>) -> Result<f64> {
    profile.eval(point, aux)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "profile")]
pub enum BoundaryCondition {
    Dirichlet(BoundaryProfile),
    NeumannZero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemDef {
    pub c: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub aux: BTreeMap<String, f64>,
    pub active_param: String,
    pub bc: BTreeMap<u8, BoundaryCondition>,
}

impl ProblemDef {
    /// Cos-profile Dirichlet problem on a rectangle: `d cos(y/2)` on the
    /// right side, zero on the other three.
    pub fn cos_profile(lambda: f64, d: f64) -> Self {
        let mut bc = BTreeMap::new();
        for s in 1..=4u8 {
            bc.insert(s, BoundaryCondition::Dirichlet(BoundaryProfile::Zero));
        }
        bc.insert(2, BoundaryCondition::Dirichlet(BoundaryProfile::CosHalf));
        ProblemDef {
            c: 1.0,
            lambda,
            gamma: 1.0,
            aux: BTreeMap::from([("d".to_string(), d)]),
            active_param: "lambda".into(),
            bc,
        }
    }

    /// Wandering boundary spot. 2D: spot on the top side, zero on the
    /// bottom. 3D: spot on the front face (y-), zero on the back face (y+).
    /// Remaining sides are homogeneous Neumann.
    pub fn wandering_spot(dim: usize, c: f64, lambda: f64, gamma: f64, xi: f64) -> Self {
        let mut bc = BTreeMap::new();
        let n = if dim == 2 { 4 } else { 6 };
        for s in 1..=n {
            bc.insert(s, BoundaryCondition::NeumannZero);
        }
        let (spot, zero) = if dim == 2 { (3, 1) } else { (3, 5) };
        bc.insert(spot, BoundaryCondition::Dirichlet(BoundaryProfile::GaussSpot));
        bc.insert(zero, BoundaryCondition::Dirichlet(BoundaryProfile::Zero));
        ProblemDef {
            c,
            lambda,
            gamma,
            aux: BTreeMap::from([("xi".to_string(), xi)]),
            active_param: "xi".into(),
            bc,
        }
    }

    pub fn param(&self, name: &str) -> Result<f64> {
        match name {
            "c" => Ok(self.c),
            "lambda" => Ok(self.lambda),
            "gamma" => Ok(self.gamma),
            other => self
                .aux
                .get(other)
                .copied()
                .ok_or_else(|| Error::Config(format!("unknown parameter '{other}'"))),
        }
    }

    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "c" => self.c = value,
            "lambda" => self.lambda = value,
            "gamma" => self.gamma = value,
            other => match self.aux.get_mut(other) {
                Some(v) => *v = value,
                None => return Err(Error::Config(format!("unknown parameter '{other}'"))),
            },
        }
        Ok(())
    }

    pub fn active_value(&self) -> f64 {
        self.param(&self.active_param).unwrap_or(f64::NAN)
    }

    pub fn set_active(&mut self, value: f64) {
        let name = self.active_param.clone();
        self.set_param(&name, value).expect("active parameter validated");
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.c <= 0.0 {
            return Err(Error::Config(format!("diffusion c must be positive, got {}", self.c)));
        }
        self.param(&self.active_param)?;
        let n = crate::mesh::num_segments(dim);
        for s in 1..=n {
            if !self.bc.contains_key(&s) {
                return Err(Error::Config(format!("no boundary condition for segment {s}")));
            }
        }
        if let Some(&s) = self.bc.keys().find(|&&s| s == 0 || s > n) {
            return Err(Error::Config(format!("segment {s} does not exist in {dim}D")));
        }
        Ok(())
    }

    /// `f(u) = λu + u³ - γu⁵` so that `G = K u - M f(u)`.
    pub fn nonlinearity(&self, u: f64) -> f64 {
        let u2 = u * u;
        u * (self.lambda + u2 - self.gamma * u2 * u2)
    }

    pub fn nonlinearity_du(&self, u: f64) -> f64 {
        let u2 = u * u;
        self.lambda + 3.0 * u2 - 5.0 * self.gamma * u2 * u2
    }

    /// Dirichlet profile for each node (`None` for free nodes). A node on
    /// several Dirichlet segments uses the lowest segment ID.
    pub fn dirichlet_nodes(&self, mesh: &SimplicialMesh) -> Vec<Option<BoundaryProfile>> {
        (0..mesh.num_nodes())
            .map(|i| {
                mesh.node_segments(i).into_iter().find_map(|s| match self.bc.get(&s) {
                    Some(BoundaryCondition::Dirichlet(p)) => Some(*p),
                    _ => None,
                })
            })
            .collect()
    }
}

fn local_matrices(mesh: &SimplicialMesh, e: usize) -> Result<([[f64; 4]; 4], [[f64; 4]; 4])> {
    let dim = mesh.dim();
    let nv = dim + 1;
    let pts = mesh.element_points(e);
    let vol = crate::mesh::signed_volume(dim, &pts);
    if vol <= 0.0 {
        return Err(Error::DegenerateElement { elem: e, volume: vol });
    }
    let g = basis_gradients(dim, &pts)
        .ok_or(Error::DegenerateElement { elem: e, volume: vol })?;
    let mut k = [[0.0; 4]; 4];
    let mut m = [[0.0; 4]; 4];
    let mass_scale = vol / ((nv * (nv + 1)) as f64);
    for i in 0..nv {
        for j in 0..nv {
            k[i][j] = vol * (g[i][0] * g[j][0] + g[i][1] * g[j][1] + g[i][2] * g[j][2]);
            m[i][j] = mass_scale * if i == j { 2.0 } else { 1.0 };
        }
    }
    Ok((k, m))
}

/// Unit-coefficient stiffness and consistent mass on a common pattern.
#[derive(Debug, Clone)]
pub struct FemOperator {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    pub measure: f64,
}

impl FemOperator {
    pub fn new(mesh: &SimplicialMesh) -> Result<Self> {
        let nv = mesh.dim() + 1;
        let ne = mesh.num_elements();
        let mut tk = Vec::with_capacity(ne * nv * nv);
        let mut tm = Vec::with_capacity(ne * nv * nv);
        let mut measure = 0.0;
        for e in 0..ne {
            let (k, m) = local_matrices(mesh, e)?;
            measure += mesh.element_volume(e);
            let el = mesh.element(e);
            for i in 0..nv {
                for j in 0..nv {
                    tk.push((el[i], el[j], k[i][j]));
                    tm.push((el[i], el[j], m[i][j]));
                }
            }
        }
        let n = mesh.num_nodes();
        Ok(FemOperator {
            stiffness: CsrMatrix::from_triplets(n, tk),
            mass: CsrMatrix::from_triplets(n, tm),
            measure,
        })
    }

    fn check_len(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.stiffness.n() {
            return Err(Error::Argument(format!(
                "vector has {} entries, mesh has {} nodes",
                u.len(),
                self.stiffness.n()
            )));
        }
        Ok(())
    }

    pub fn residual(&self, mesh: &SimplicialMesh, u: &[f64], prob: &ProblemDef) -> Result<Vec<f64>> {
        self.check_len(u)?;
        let f: Vec<f64> = u.iter().map(|&v| prob.nonlinearity(v)).collect();
        let ku = self.stiffness.matvec(u);
        let mf = self.mass.matvec(&f);
        let mut g: Vec<f64> = ku.iter().zip(&mf).map(|(a, b)| prob.c * a - b).collect();
        for (i, d) in prob.dirichlet_nodes(mesh).into_iter().enumerate() {
            if let Some(p) = d {
                g[i] = u[i] - p.eval(mesh.node(i), &prob.aux)?;
            }
        }
        Ok(g)
    }

    pub fn jacobian(&self, mesh: &SimplicialMesh, u: &[f64], prob: &ProblemDef) -> Result<CsrMatrix> {
        self.check_len(u)?;
        let fp: Vec<f64> = u.iter().map(|&v| prob.nonlinearity_du(v)).collect();
        let mut j = self.stiffness.clone();
        let mv = self.mass.values();
        let cols = self.mass.indices();
        for (k, v) in j.values_mut().iter_mut().enumerate() {
            *v = prob.c * *v - mv[k] * fp[cols[k]];
        }
        for (i, d) in prob.dirichlet_nodes(mesh).into_iter().enumerate() {
            if d.is_some() {
                j.set_unit_row(i);
            }
        }
        Ok(j)
    }

    /// `∂G/∂p` for parameter `name` at fixed `u`.
    pub fn param_derivative(
        &self,
        mesh: &SimplicialMesh,
        u: &[f64],
        prob: &ProblemDef,
        name: &str,
    ) -> Result<Vec<f64>> {
        self.check_len(u)?;
        let mut out = match name {
            "lambda" => self.mass.matvec(u).into_iter().map(|v| -v).collect(),
            "gamma" => self.mass.matvec(&u.iter().map(|v| v.powi(5)).collect::<Vec<_>>()),
            "c" => self.stiffness.matvec(u),
            _ => {
                prob.param(name)?;
                vec![0.0; u.len()]
            }
        };
        for (i, d) in prob.dirichlet_nodes(mesh).into_iter().enumerate() {
            if let Some(p) = d {
                out[i] = -p.derivative(mesh.node(i), &prob.aux, name)?;
            }
        }
        Ok(out)
    }

    /// Domain-averaged L² norm `sqrt(uᵀMu / |Ω|)`.
    pub fn l2_norm(&self, u: &[f64]) -> f64 {
        let mu = self.mass.matvec(u);
        (crate::linalg::dot(u, &mu).max(0.0) / self.measure).sqrt()
    }
}

pub fn assemble_stiffness(mesh: &SimplicialMesh, c: f64) -> Result<CsrMatrix> {
    if c <= 0.0 {
        return Err(Error::Argument(format!("diffusion must be positive, got {c}")));
    }
    let mut k = FemOperator::new(mesh)?.stiffness;
    k.values_mut().iter_mut().for_each(|v| *v *= c);
    Ok(k)
}

pub fn assemble_mass(mesh: &SimplicialMesh) -> Result<CsrMatrix> {
    Ok(FemOperator::new(mesh)?.mass)
}

pub fn residual(mesh: &SimplicialMesh, u: &[f64], prob: &ProblemDef) -> Result<Vec<f64>> {
    FemOperator::new(mesh)?.residual(mesh, u, prob)
}

pub fn jacobian(mesh: &SimplicialMesh, u: &[f64], prob: &ProblemDef) -> Result<CsrMatrix> {
    FemOperator::new(mesh)?.jacobian(mesh, u, prob)
}

pub fn l2_norm(mesh: &SimplicialMesh, u: &[f64]) -> Result<f64> {
    let op = FemOperator::new(mesh)?;
    op.check_len(u)?;
    Ok(op.l2_norm(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoxDomain, NONE};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn neumann_box(dim: usize) -> ProblemDef {
        let mut p = ProblemDef::wandering_spot(dim, 1.0, 0.3, 0.7, 0.0);
        for v in p.bc.values_mut() {
            *v = BoundaryCondition::NeumannZero;
        }
        p
    }

    #[test]
    fn right_triangle_stiffness() {
        let dom = BoxDomain { lo: [0.0; 3], hi: [1.0, 1.0, 0.0] };
        let nodes = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let m = SimplicialMesh::from_parts(2, dom, nodes, vec![[0, 1, 2, NONE]]).unwrap();
        let k = assemble_stiffness(&m, 1.0).unwrap();
        let want = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k.get(i, j) - want[i][j]).abs() < 1e-14);
            }
        }
        let k2 = assemble_stiffness(&m, 2.0).unwrap();
        for (a, b) in k.values().iter().zip(k2.values()) {
            assert!((2.0 * a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn stiffness_kernel_and_mass_totals() {
        let m = SimplicialMesh::rect(2.0 * PI, PI, 17, 9).unwrap();
        let k = assemble_stiffness(&m, 1.0).unwrap();
        assert!(k.matvec(&vec![1.0; m.num_nodes()]).iter().all(|v| v.abs() < 1e-12));
        let mm = assemble_mass(&m).unwrap();
        let total: f64 = mm.values().iter().sum();
        assert!((total - 8.0 * PI * PI).abs() < 1e-8);
        let sq = SimplicialMesh::rect(0.5, 0.5, 2, 2).unwrap();
        assert!((assemble_mass(&sq).unwrap().values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let cube = SimplicialMesh::cuboid(0.5, 0.5, 0.5, 2, 2, 2).unwrap();
        assert!((assemble_mass(&cube).unwrap().values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let k3 = assemble_stiffness(&cube, 1.0).unwrap();
        assert!(k3.matvec(&[1.0; 8]).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn trivial_state_residual() {
        let m = SimplicialMesh::rect(2.0 * PI, PI, 9, 5).unwrap();
        let mut p = ProblemDef::cos_profile(0.7, 0.0);
        let g = residual(&m, &vec![0.0; m.num_nodes()], &p).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
        p.set_param("d", 1.0).unwrap();
        let g = residual(&m, &vec![0.0; m.num_nodes()], &p).unwrap();
        for i in 0..m.num_nodes() {
            let x = m.node(i);
            let on_right = x[0] == 2.0 * PI;
            let on_zero = x[0] == -2.0 * PI || x[1].abs() == PI;
            if on_right && !(x[1].abs() == PI) {
                assert_eq!(g[i], -(x[1] / 2.0).cos());
            } else if on_zero || on_right {
                // corners belong to the lower segment ID: bottom (zero) or right
                assert!(g[i].abs() < 1e-15);
            } else {
                assert_eq!(g[i], 0.0);
            }
        }
    }

    /// Brute-force elementwise quadrature of `∫ f(a) φ_i` with a nested
    /// barycentric sampling rule, independent of the mass matrix.
    fn quadrature_load(mesh: &SimplicialMesh, fa: f64) -> Vec<f64> {
        let mut out = vec![0.0; mesh.num_nodes()];
        let n = 40;
        for e in 0..mesh.num_elements() {
            let vol = mesh.element_volume(e);
            let el = mesh.element(e);
            let mut acc = [0.0; 3];
            let mut count = 0.0;
            for a in 0..n {
                for b in 0..n - a {
                    let l1 = (a as f64 + 1.0 / 3.0) / n as f64;
                    let l2 = (b as f64 + 1.0 / 3.0) / n as f64;
                    let l0 = 1.0 - l1 - l2;
                    acc[0] += l0;
                    acc[1] += l1;
                    acc[2] += l2;
                    count += 1.0;
                }
            }
            for k in 0..3 {
                out[el[k]] += fa * vol * acc[k] / count;
            }
        }
        out
    }

    #[test]
    fn constant_state_matches_quadrature() {
        let m = SimplicialMesh::rect(1.5, 1.0, 7, 5).unwrap();
        let p = neumann_box(2);
        let a = 0.6;
        let g = residual(&m, &vec![a; m.num_nodes()], &p).unwrap();
        let load = quadrature_load(&m, p.nonlinearity(a));
        for (gi, li) in g.iter().zip(&load) {
            assert!((gi + li).abs() < 2e-3 * li.abs().max(1e-3), "{gi} vs {li}");
        }
    }

    fn fd_check(mesh: &SimplicialMesh, prob: &ProblemDef, seed: u64) -> f64 {
        let op = FemOperator::new(mesh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..mesh.num_nodes()).map(|_| rng.gen_range(-1.2..1.2)).collect();
        let j = op.jacobian(mesh, &u, prob).unwrap();
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for col in 0..mesh.num_nodes() {
            let h = 1e-6 * (1.0 + u[col].abs());
            let mut up = u.clone();
            up[col] += h;
            let mut um = u.clone();
            um[col] -= h;
            let gp = op.residual(mesh, &up, prob).unwrap();
            let gm = op.residual(mesh, &um, prob).unwrap();
            for row in 0..mesh.num_nodes() {
                let fd = (gp[row] - gm[row]) / (2.0 * h);
                let an = j.get(row, col);
                worst = worst.max((fd - an).abs());
                scale = scale.max(an.abs());
            }
        }
        worst / scale
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = SimplicialMesh::rect(2.0, 1.0, 6, 4).unwrap();
        assert!(fd_check(&m, &ProblemDef::wandering_spot(2, 0.5, -0.25, 1.0, 0.3), 1) < 1e-6);
        let m3 = SimplicialMesh::cuboid(1.0, 1.5, 1.0, 3, 4, 3).unwrap();
        assert!(fd_check(&m3, &ProblemDef::wandering_spot(3, 1.0, 0.2, 1.0, -0.2), 2) < 1e-6);
    }

    #[test]
    fn trivial_jacobian_and_dirichlet_rows() {
        let m = SimplicialMesh::rect(1.0, 1.0, 5, 5).unwrap();
        let p = ProblemDef::cos_profile(0.0, 0.0);
        let op = FemOperator::new(&m).unwrap();
        let j = op.jacobian(&m, &vec![0.0; m.num_nodes()], &p).unwrap();
        for i in 0..m.num_nodes() {
            let (cols, vals) = j.row(i);
            if m.is_boundary_node(i) {
                for (&c, &v) in cols.iter().zip(vals) {
                    assert_eq!(v, if c == i { 1.0 } else { 0.0 });
                }
            } else {
                for &c in cols {
                    assert_eq!(j.get(i, c), op.stiffness.get(i, c));
                }
            }
        }
    }

    #[test]
    fn parameter_derivatives_match_fd() {
        let m = SimplicialMesh::rect(2.0, 1.0, 6, 4).unwrap();
        let op = FemOperator::new(&m).unwrap();
        let u = m.sample(|x| 0.3 * x[0] - 0.2 * x[1] * x[1]);
        for (prob, name) in [
            (ProblemDef::wandering_spot(2, 0.5, -0.25, 1.0, 0.3), "xi"),
            (ProblemDef::wandering_spot(2, 0.5, -0.25, 1.0, 0.3), "lambda"),
            (ProblemDef::cos_profile(0.4, 0.5), "d"),
        ] {
            let d = op.param_derivative(&m, &u, &prob, name).unwrap();
            let h = 1e-6;
            let mut pp = prob.clone();
            pp.set_param(name, prob.param(name).unwrap() + h).unwrap();
            let mut pm = prob.clone();
            pm.set_param(name, prob.param(name).unwrap() - h).unwrap();
            let gp = op.residual(&m, &u, &pp).unwrap();
            let gm = op.residual(&m, &u, &pm).unwrap();
            for i in 0..u.len() {
                assert!(((gp[i] - gm[i]) / (2.0 * h) - d[i]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn norms() {
        let m = SimplicialMesh::rect(PI, PI, 81, 81).unwrap();
        assert!((l2_norm(&m, &vec![1.0; m.num_nodes()]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(l2_norm(&m, &vec![0.0; m.num_nodes()]).unwrap(), 0.0);
        let s = m.sample(|x| x[0].sin());
        assert!((l2_norm(&m, &s).unwrap() - 0.5f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn profiles() {
        let aux = BTreeMap::from([("xi".to_string(), 0.7), ("d".to_string(), 3.0)]);
        assert_eq!(BoundaryProfile::GaussSpot.eval(&[0.7, PI], &aux).unwrap(), 1.0);
        assert!(BoundaryProfile::CosHalf.eval(&[1.0, PI], &aux).unwrap().abs() < 1e-15);
        assert!(BoundaryProfile::CosHalf.eval(&[1.0, -PI], &aux).unwrap().abs() < 1e-15);
        let v = BoundaryProfile::GaussSpot.eval(&[1.7, -1.0, 1.0], &aux).unwrap();
        assert!((v - (-2.0f64).exp()).abs() < 1e-15);
        assert!("bogus".parse::<BoundaryProfile>().is_err());
        assert!(BoundaryProfile::GaussSpot.eval(&[0.0, 0.0], &BTreeMap::new()).is_err());
    }

    #[test]
    fn mirror_symmetry_of_residual() {
        // odd node count in x makes the checkerboard diagonals mirror symmetric
        let m = SimplicialMesh::rect(2.0, 1.0, 9, 5).unwrap();
        let p = ProblemDef::wandering_spot(2, 0.5, -0.25, 1.0, 0.0);
        let mirror: Vec<usize> = (0..m.num_nodes())
            .map(|i| {
                let x = m.node(i);
                (0..m.num_nodes()).find(|&j| m.node(j)[0] == -x[0] && m.node(j)[1] == x[1]).unwrap()
            })
            .collect();
        let u = m.sample(|x| (x[0] * 1.3 + 0.2).sin() + x[1]);
        let pu: Vec<f64> = mirror.iter().map(|&j| u[j]).collect();
        let g = residual(&m, &u, &p).unwrap();
        let gp = residual(&m, &pu, &p).unwrap();
        for i in 0..u.len() {
            assert!((gp[i] - g[mirror[i]]).abs() < 1e-12);
        }
    }

    #[test]
    fn validate_problem() {
        let p = ProblemDef::cos_profile(0.0, 0.0);
        assert!(p.validate(2).is_ok());
        assert!(p.validate(3).is_err());
        let mut q = p.clone();
        q.active_param = "nope".into();
        assert!(q.validate(2).is_err());
    }
}
