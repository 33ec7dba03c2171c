//! Pseudo-arclength continuation of steady states with bifurcation
//! detection, branch switching and periodic mesh adaptation.

mod branch;
mod stability;

pub use branch::{read_branch_csv, write_branch_csv, write_branch_header, BifFlag, BranchRecord, BRANCH_HEADER};
pub use stability::{critical_eigenvector, stability_index};

use serde::{Deserialize, Serialize};

use crate::adapt::{two_step_adapt, AdaptOptions, AdaptStats, CoarsenOptions};
use crate::fem::{FemOperator, ProblemDef};
use crate::linalg::{dot, norm_inf, BandLu};
use crate::mesh::{interpolate, SimplicialMesh};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuationSettings {
    pub ds0: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub newton_tol: f64,
    pub newton_max_it: usize,
    /// Adapt every `amod` accepted steps; 0 disables adaptation.
    pub amod: usize,
    pub ngen: usize,
    pub nsteps: usize,
    pub bif_detection: bool,
    /// Weight of the field part in the arclength norm.
    pub xi_w: f64,
    /// Stop once the active parameter leaves `[param_min, param_max]`.
    pub param_min: f64,
    pub param_max: f64,
    /// Initial direction of the active parameter (+1 or -1).
    pub direction: f64,
    /// Branch-switching offset along the critical eigenvector.
    pub switch_delta: f64,
    /// Parameter bracket width at which BP bisection stops.
    pub bp_tol: f64,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        ContinuationSettings {
            ds0: 0.05,
            ds_min: 1e-5,
            ds_max: 0.2,
            newton_tol: 1e-8,
            newton_max_it: 10,
            amod: 0,
            ngen: 1,
            nsteps: 50,
            bif_detection: true,
            xi_w: 0.5,
            param_min: f64::NEG_INFINITY,
            param_max: f64::INFINITY,
            direction: 1.0,
            switch_delta: 0.1,
            bp_tol: 1e-4,
        }
    }
}

impl ContinuationSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.ds_min > 0.0 && self.ds_min <= self.ds0 && self.ds0 <= self.ds_max) {
            return Err(Error::Config(format!(
                "need 0 < ds_min <= ds0 <= ds_max, got {} {} {}",
                self.ds_min, self.ds0, self.ds_max
            )));
        }
        if self.ngen < 1 {
            return Err(Error::Config("ngen must be at least 1".into()));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::Config("newton_tol must be positive".into()));
        }
        if !(self.xi_w > 0.0 && self.xi_w < 1.0) {
            return Err(Error::Config(format!("xi_w must be in (0, 1), got {}", self.xi_w)));
        }
        if self.direction == 0.0 || !self.direction.is_finite() {
            return Err(Error::Config("direction must be +1 or -1".into()));
        }
        if !(self.param_min < self.param_max) {
            return Err(Error::Config("param_min must be below param_max".into()));
        }
        Ok(())
    }
}

/// Current point on a branch together with the mesh it lives on.
#[derive(Debug, Clone)]
pub struct ContinuationState {
    pub mesh: SimplicialMesh,
    pub u: Vec<f64>,
    pub prob: ProblemDef,
    /// Unit tangent in `(u, param)` space (length `np + 1`), empty until
    /// computed.
    pub tangent: Vec<f64>,
    pub step_index: usize,
    /// Magnitude of the next arclength step; the direction is carried by
    /// the tangent.
    pub ds: f64,
    pub n_neg: Option<usize>,
    op: FemOperator,
}

impl ContinuationState {
    pub fn new(mesh: SimplicialMesh, u: Vec<f64>, prob: ProblemDef) -> Result<Self> {
        if u.len() != mesh.num_nodes() {
            return Err(Error::Argument(format!("field has {} values for {} nodes", u.len(), mesh.num_nodes())));
        }
        prob.validate(mesh.dim())?;
        let op = FemOperator::new(&mesh)?;
        Ok(ContinuationState { mesh, u, prob, tangent: Vec::new(), step_index: 0, ds: 0.0, n_neg: None, op })
    }

    pub fn operator(&self) -> &FemOperator {
        &self.op
    }

    pub fn param(&self) -> f64 {
        self.prob.active_value()
    }

    pub fn l2_norm(&self) -> f64 {
        self.op.l2_norm(&self.u)
    }

    fn set_mesh(&mut self, mesh: SimplicialMesh, u: Vec<f64>) -> Result<()> {
        self.op = FemOperator::new(&mesh)?;
        self.mesh = mesh;
        self.u = u;
        self.tangent.clear();
        Ok(())
    }

    pub fn residual_norm(&self) -> Result<f64> {
        Ok(norm_inf(&self.op.residual(&self.mesh, &self.u, &self.prob)?))
    }

    pub fn record(&self, flag: BifFlag) -> BranchRecord {
        BranchRecord {
            step_index: self.step_index,
            param_name: self.prob.active_param.clone(),
            param_value: self.param(),
            l2_norm: self.l2_norm(),
            min_u: self.u.iter().copied().fold(f64::INFINITY, f64::min),
            max_u: self.u.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            np: self.mesh.num_nodes(),
            n_neg: self.n_neg,
            flag,
        }
    }

    fn refresh_stability(&mut self, settings: &ContinuationSettings) {
        self.n_neg = if settings.bif_detection {
            stability::stability_index_with(&self.op, &self.mesh, &self.u, &self.prob)
                .map_err(|e| log::warn!("stability index unavailable: {e}"))
                .ok()
        } else {
            None
        };
    }
}

#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub u: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn newton_with(
    op: &FemOperator,
    mesh: &SimplicialMesh,
    u0: &[f64],
    prob: &ProblemDef,
    tol: f64,
    max_it: usize,
) -> Result<NewtonResult> {
    let mut u = u0.to_vec();
    let mut it = 0;
    loop {
        let g = op.residual(mesh, &u, prob)?;
        let res = norm_inf(&g);
        if res <= tol {
            return Ok(NewtonResult { u, iterations: it, residual: res });
        }
        if it >= max_it || !res.is_finite() {
            return Err(Error::NewtonFailed { iterations: it, residual: res });
        }
        let lu = BandLu::factor(&op.jacobian(mesh, &u, prob)?)?;
        let du = lu.solve(&g);
        u.iter_mut().zip(&du).for_each(|(a, d)| *a -= d);
        it += 1;
    }
}

/// Full-step Newton on the residual until its max-norm is below `tol`.
pub fn newton_solve(mesh: &SimplicialMesh, u0: &[f64], prob: &ProblemDef, tol: f64, max_it: usize) -> Result<NewtonResult> {
    if u0.len() != mesh.num_nodes() {
        return Err(Error::Argument(format!("field has {} values for {} nodes", u0.len(), mesh.num_nodes())));
    }
    newton_with(&FemOperator::new(mesh)?, mesh, u0, prob, tol, max_it)
}

/// Weighted inner product on `(u, p)` vectors of length `np + 1`.
fn wdot(op: &FemOperator, xi_w: f64, a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() - 1;
    let mb = op.mass.matvec(&b[..n]);
    xi_w * dot(&a[..n], &mb) / op.measure + (1.0 - xi_w) * a[n] * b[n]
}

/// Row of the bordered system representing `⟨t, ·⟩_w`.
fn border_row(op: &FemOperator, xi_w: f64, t: &[f64]) -> (Vec<f64>, f64) {
    let n = t.len() - 1;
    let mut wu = op.mass.matvec(&t[..n]);
    wu.iter_mut().for_each(|v| *v *= xi_w / op.measure);
    (wu, (1.0 - xi_w) * t[n])
}

/// Unit tangent at the current point, oriented along `prev` (or along
/// `settings.direction` in the parameter when `prev` is `None`).
pub fn compute_tangent(state: &ContinuationState, prev: Option<&[f64]>, settings: &ContinuationSettings) -> Result<Vec<f64>> {
    let n = state.u.len();
    let prev: Vec<f64> = match prev {
        Some(t) if t.len() == n + 1 => t.to_vec(),
        Some(t) => return Err(Error::Argument(format!("tangent has length {}, expected {}", t.len(), n + 1))),
        None => {
            let mut t = vec![0.0; n + 1];
            t[n] = settings.direction.signum();
            t
        }
    };
    let op = &state.op;
    let j = op.jacobian(&state.mesh, &state.u, &state.prob)?;
    let gp = op.param_derivative(&state.mesh, &state.u, &state.prob, &state.prob.active_param)?;
    let (wu, wp) = border_row(op, settings.xi_w, &prev);
    let b = match BandLu::factor(&j) {
        Ok(lu) => lu.solve(&gp),
        Err(_) => {
            // exactly at a singular point: perturb the state and retry
            let mut shifted = state.prob.clone();
            shifted.lambda += 1e-9;
            let j = op.jacobian(&state.mesh, &state.u, &shifted)?;
            BandLu::factor(&j)
                .map_err(|e| Error::Continuation(format!("tangent system singular: {e}")))?
                .solve(&gp)
        }
    };
    let denom = wp - dot(&wu, &b);
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::Continuation("degenerate bordered system for the tangent".into()));
    }
    let tp = 1.0 / denom;
    let mut t: Vec<f64> = b.iter().map(|v| -v * tp).collect();
    t.push(tp);
    let norm = wdot(op, settings.xi_w, &t, &t).sqrt();
    t.iter_mut().for_each(|v| *v /= norm);
    Ok(t)
}

struct Corrected {
    u: Vec<f64>,
    p: f64,
    iterations: usize,
}

/// Newton on the extended system `G = 0`, `⟨t, y - base⟩_w = ds` starting
/// from the predictor `base + ds t`.
fn corrector(
    state: &ContinuationState,
    base_u: &[f64],
    base_p: f64,
    t: &[f64],
    ds: f64,
    settings: &ContinuationSettings,
) -> Result<Corrected> {
    let op = &state.op;
    let n = base_u.len();
    let mut prob = state.prob.clone();
    let mut u: Vec<f64> = (0..n).map(|i| base_u[i] + ds * t[i]).collect();
    let mut p = base_p + ds * t[n];
    let (wu, wp) = border_row(op, settings.xi_w, t);
    let name = prob.active_param.clone();
    let mut it = 0;
    loop {
        prob.set_active(p);
        let g = op.residual(&state.mesh, &u, &prob)?;
        let r2 = dot(&wu, &u) - dot(&wu, base_u) + wp * (p - base_p) - ds;
        let res = norm_inf(&g);
        if res <= settings.newton_tol && r2.abs() <= settings.newton_tol {
            return Ok(Corrected { u, p, iterations: it });
        }
        if it >= settings.newton_max_it || !res.is_finite() || !r2.is_finite() {
            return Err(Error::NewtonFailed { iterations: it, residual: res.max(r2.abs()) });
        }
        let lu = BandLu::factor(&op.jacobian(&state.mesh, &u, &prob)?)?;
        let gp = op.param_derivative(&state.mesh, &u, &prob, &name)?;
        let a = lu.solve(&g);
        let b = lu.solve(&gp);
        let denom = wp - dot(&wu, &b);
        if denom == 0.0 {
            return Err(Error::Singular("bordered corrector system".into()));
        }
        let dp = (r2 - dot(&wu, &a)) / denom;
        for i in 0..n {
            u[i] -= a[i] - b[i] * dp;
        }
        p -= dp;
        it += 1;
    }
}

/// Outcome of one attempted continuation step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub accepted: bool,
    pub newton_iterations: usize,
    /// Arclength actually used by the accepted step.
    pub ds_used: f64,
    pub fold: bool,
}

/// Predictor-corrector step with step-size control. On success the state
/// moves to the new point with a fresh tangent and stability index; on
/// failure the step size is halved and the step retried until it drops
/// below `ds_min`.
pub fn cont_step(state: &mut ContinuationState, settings: &ContinuationSettings) -> Result<StepOutcome> {
    if state.tangent.is_empty() {
        state.tangent = compute_tangent(state, None, settings)?;
    }
    if state.ds <= 0.0 {
        state.ds = settings.ds0;
    }
    loop {
        let ds = state.ds;
        match corrector(state, &state.u, state.param(), &state.tangent, ds, settings) {
            Ok(c) => {
                let prev_t = state.tangent.clone();
                state.u = c.u;
                state.prob.set_active(c.p);
                state.tangent = compute_tangent(state, Some(&prev_t), settings)?;
                let n = state.u.len();
                let fold = prev_t[n].signum() != state.tangent[n].signum();
                state.step_index += 1;
                state.refresh_stability(settings);
                if c.iterations <= 3 {
                    state.ds = (ds * 1.3).min(settings.ds_max);
                }
                return Ok(StepOutcome { accepted: true, newton_iterations: c.iterations, ds_used: ds, fold });
            }
            Err(e) => {
                state.ds = ds * 0.5;
                log::debug!("step {} failed at ds={ds:.3e}: {e}", state.step_index + 1);
                if state.ds < settings.ds_min {
                    return Err(Error::Continuation(format!(
                        "step size below ds_min={} after failure: {e}",
                        settings.ds_min
                    )));
                }
            }
        }
    }
}

/// A located branch point.
#[derive(Debug, Clone)]
pub struct BifurcationPoint {
    pub step_index: usize,
    pub param_value: f64,
    pub mesh: SimplicialMesh,
    pub u: Vec<f64>,
    pub prob: ProblemDef,
    /// Tangent of the branch the point was found on.
    pub tangent: Vec<f64>,
    /// Critical eigenvector (max-norm one).
    pub eigenvector: Vec<f64>,
    pub n_neg_before: usize,
    pub n_neg_after: usize,
    /// Bisection hit its iteration cap before reaching `bp_tol`.
    pub approximate: bool,
}

impl BifurcationPoint {
    pub fn record(&self) -> BranchRecord {
        let op_l2 = FemOperator::new(&self.mesh).map(|op| op.l2_norm(&self.u)).unwrap_or(f64::NAN);
        BranchRecord {
            step_index: self.step_index,
            param_name: self.prob.active_param.clone(),
            param_value: self.param_value,
            l2_norm: op_l2,
            min_u: self.u.iter().copied().fold(f64::INFINITY, f64::min),
            max_u: self.u.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            np: self.mesh.num_nodes(),
            n_neg: Some(self.n_neg_after),
            flag: BifFlag::Bp,
        }
    }
}

/// Localize a change of the stability index between `prev` (the state
/// before an accepted step of arclength `ds_used`) and `new`, by bisection
/// in arclength until the parameter bracket is below `bp_tol`.
pub fn detect_bifurcation(
    prev: &ContinuationState,
    new: &ContinuationState,
    ds_used: f64,
    settings: &ContinuationSettings,
) -> Result<Option<BifurcationPoint>> {
    let (Some(n0), Some(n1)) = (prev.n_neg, new.n_neg) else {
        return Ok(None);
    };
    if n0 == n1 || prev.mesh.num_nodes() != new.mesh.num_nodes() {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0, ds_used);
    let (mut p_lo, mut p_hi) = (prev.param(), new.param());
    let mut best = (new.u.clone(), new.param());
    let mut approximate = true;
    for _ in 0..60 {
        if (p_hi - p_lo).abs() < settings.bp_tol {
            approximate = false;
            break;
        }
        let mid = 0.5 * (lo + hi);
        let c = match corrector(prev, &prev.u, prev.param(), &prev.tangent, mid, settings) {
            Ok(c) => c,
            Err(e) => {
                log::warn!("BP bisection stopped: {e}");
                break;
            }
        };
        let mut prob = prev.prob.clone();
        prob.set_active(c.p);
        let nm = stability::stability_index_with(&prev.op, &prev.mesh, &c.u, &prob)?;
        if nm == n0 {
            lo = mid;
            p_lo = c.p;
        } else {
            hi = mid;
            p_hi = c.p;
        }
        best = (c.u, c.p);
    }
    let c = corrector(prev, &prev.u, prev.param(), &prev.tangent, 0.5 * (lo + hi), settings)
        .map(|c| (c.u, c.p))
        .unwrap_or(best);
    let mut prob = prev.prob.clone();
    prob.set_active(c.1);
    let eigenvector = stability::critical_eigenvector_with(&prev.op, &prev.mesh, &c.0, &prob)?;
    Ok(Some(BifurcationPoint {
        step_index: new.step_index,
        param_value: c.1,
        mesh: prev.mesh.clone(),
        u: c.0,
        prob,
        tangent: prev.tangent.clone(),
        eigenvector,
        n_neg_before: n0,
        n_neg_after: n1,
        approximate,
    }))
}

/// Start a new state on the branch bifurcating at `bp`, offset along the
/// critical eigenvector by `settings.switch_delta`. A negative delta picks
/// the opposite side.
pub fn branch_switch(bp: &BifurcationPoint, settings: &ContinuationSettings) -> Result<ContinuationState> {
    branch_switch_with(bp, settings, settings.switch_delta)
}

pub fn branch_switch_with(bp: &BifurcationPoint, settings: &ContinuationSettings, delta: f64) -> Result<ContinuationState> {
    if delta == 0.0 || !delta.is_finite() {
        return Err(Error::Argument("branch switching needs a nonzero offset".into()));
    }
    let mut state = ContinuationState::new(bp.mesh.clone(), bp.u.clone(), bp.prob.clone())?;
    let mut t = bp.eigenvector.clone();
    t.push(0.0);
    let norm = wdot(&state.op, settings.xi_w, &t, &t).sqrt();
    if norm == 0.0 {
        return Err(Error::Continuation("zero critical eigenvector".into()));
    }
    t.iter_mut().for_each(|v| *v /= norm);
    let mut last_err = None;
    for d in [delta, -delta, 2.0 * delta] {
        match corrector(&state, &bp.u, bp.param_value, &t, d, settings) {
            Ok(c) => {
                let dist = c.u.iter().zip(&bp.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if dist > 10.0 * settings.newton_tol {
                    state.u = c.u;
                    state.prob.set_active(c.p);
                    let mut tt = t.clone();
                    tt.iter_mut().for_each(|v| *v *= d.signum());
                    state.tangent = compute_tangent(&state, Some(&tt), settings)?;
                    state.step_index = bp.step_index;
                    state.ds = settings.ds0;
                    state.refresh_stability(settings);
                    return Ok(state);
                }
                last_err = Some(Error::Continuation("corrector fell back onto the original branch".into()));
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(Error::Continuation(format!(
        "branch switching failed: {}",
        last_err.map_or("no attempt".into(), |e| e.to_string())
    )))
}

/// Result of one adaptation inside continuation.
#[derive(Debug, Clone)]
pub struct AdaptInContOutcome {
    pub stats: Vec<AdaptStats>,
    pub rolled_back: bool,
    pub before: BranchRecord,
    pub after: BranchRecord,
}

/// Adapt the mesh `ngen` times, re-solving by Newton after each, then
/// recompute the tangent. On failure the state is restored.
pub fn adapt_in_cont(
    state: &mut ContinuationState,
    settings: &ContinuationSettings,
    trop: &AdaptOptions,
    trcop: &CoarsenOptions,
) -> Result<AdaptInContOutcome> {
    let before_rec = state.record(BifFlag::None);
    let saved = state.clone();
    let old_tangent = state.tangent.clone();
    let mut stats = Vec::new();
    let attempt = |state: &mut ContinuationState, stats: &mut Vec<AdaptStats>| -> Result<()> {
        for _ in 0..settings.ngen {
            let adapted = two_step_adapt(&state.mesh, &state.u, trop, trcop)?;
            stats.push(adapted.stats.clone());
            let op = FemOperator::new(&adapted.mesh)?;
            let sol = newton_with(&op, &adapted.mesh, &adapted.u, &state.prob, settings.newton_tol, settings.newton_max_it)?;
            let old_mesh = state.mesh.clone();
            state.set_mesh(adapted.mesh, sol.u)?;
            if !old_tangent.is_empty() {
                let n_old = old_mesh.num_nodes();
                let tu = interpolate(&old_mesh, &old_tangent[..n_old], &state.mesh)?;
                let mut t = tu.values;
                t.push(old_tangent[n_old]);
                state.tangent = t;
            }
        }
        let prev = std::mem::take(&mut state.tangent);
        let prev = if prev.is_empty() { None } else { Some(prev) };
        state.tangent = compute_tangent(state, prev.as_deref(), settings)?;
        Ok(())
    };
    let rolled_back = match attempt(state, &mut stats) {
        Ok(()) => false,
        Err(e) => {
            log::warn!("adaptation at step {} rolled back: {e}", state.step_index);
            *state = saved;
            true
        }
    };
    state.refresh_stability(settings);
    Ok(AdaptInContOutcome { stats, rolled_back, before: before_rec, after: state.record(BifFlag::Adapt) })
}

/// Adaptation settings used inside a continuation run.
#[derive(Debug, Clone, Copy)]
pub struct AdaptPlan<'a> {
    pub trop: &'a AdaptOptions,
    pub trcop: &'a CoarsenOptions,
}

/// Progress notifications from [`run_branch`].
pub enum Event<'a> {
    Record(&'a BranchRecord, &'a ContinuationState),
    Bifurcation(&'a BifurcationPoint),
    Adapt(&'a [AdaptStats], bool),
}

#[derive(Debug, Clone)]
pub struct BranchRun {
    pub records: Vec<BranchRecord>,
    pub bifurcations: Vec<BifurcationPoint>,
    pub adapt_stats: Vec<AdaptStats>,
    pub state: ContinuationState,
    pub steps: usize,
    /// Why the run ended; `None` when `nsteps` steps were taken.
    pub stop_reason: Option<String>,
}

/// Run up to `settings.nsteps` continuation steps from `state`. The start
/// point is Newton-corrected first and recorded as step 0 (unless the state
/// already carries a tangent, as after branch switching).
pub fn run_branch(
    mut state: ContinuationState,
    settings: &ContinuationSettings,
    adapt: Option<AdaptPlan<'_>>,
    on_event: &mut dyn FnMut(Event<'_>),
) -> Result<BranchRun> {
    settings.validate()?;
    let mut records = Vec::new();
    let mut bifurcations = Vec::new();
    let mut adapt_stats = Vec::new();
    let emit = |rec: BranchRecord, state: &ContinuationState, records: &mut Vec<BranchRecord>, on_event: &mut dyn FnMut(Event<'_>)| {
        on_event(Event::Record(&rec, state));
        records.push(rec);
    };
    if state.tangent.is_empty() {
        let sol = newton_with(&state.op, &state.mesh, &state.u, &state.prob, settings.newton_tol, settings.newton_max_it)?;
        state.u = sol.u;
        state.tangent = compute_tangent(&state, None, settings)?;
    }
    if state.ds <= 0.0 {
        state.ds = settings.ds0;
    }
    state.refresh_stability(settings);
    emit(state.record(BifFlag::None), &state, &mut records, on_event);
    let mut steps = 0;
    let mut stop_reason = None;
    while steps < settings.nsteps {
        let prev = state.clone();
        let out = match cont_step(&mut state, settings) {
            Ok(o) => o,
            Err(e) => {
                log::warn!("continuation stopped: {e}");
                stop_reason = Some(e.to_string());
                state = prev;
                break;
            }
        };
        steps += 1;
        if settings.bif_detection {
            if let Some(bp) = detect_bifurcation(&prev, &state, out.ds_used, settings)? {
                log::info!("BP at {}={:.6} (n_neg {} -> {})", state.prob.active_param, bp.param_value, bp.n_neg_before, bp.n_neg_after);
                on_event(Event::Bifurcation(&bp));
                emit(bp.record(), &state, &mut records, on_event);
                bifurcations.push(bp);
            }
        }
        let flag = if out.fold { BifFlag::Fp } else { BifFlag::None };
        emit(state.record(flag), &state, &mut records, on_event);
        if let Some(plan) = adapt {
            if settings.amod > 0 && state.step_index % settings.amod == 0 {
                let res = adapt_in_cont(&mut state, settings, plan.trop, plan.trcop)?;
                on_event(Event::Adapt(&res.stats, res.rolled_back));
                adapt_stats.extend(res.stats);
                if !res.rolled_back {
                    emit(res.after, &state, &mut records, on_event);
                }
            }
        }
        let p = state.param();
        if p < settings.param_min || p > settings.param_max {
            stop_reason = Some(format!("{} = {p} left [{}, {}]", state.prob.active_param, settings.param_min, settings.param_max));
            break;
        }
    }
    Ok(BranchRun { records, bifurcations, adapt_stats, state, steps, stop_reason })
}
