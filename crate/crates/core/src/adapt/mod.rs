//! Metric-driven mesh adaptation: coarsening, refinement, smoothing and
//! swapping, the `sw` action mask, and the `tradapt` driver loops.

mod editor;
mod passes;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::mesh::SimplicialMesh;
use crate::metric::{all_edge_lengths, eval_eta, metric_for_field, select_field, EtaPolicy, FieldSelector, MetricField};
use crate::{Error, Result};
use editor::Editor;

/// Which passes an adaptation step runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ActionMask {
    pub r#move: bool,
    pub refine: bool,
    pub coarsen: bool,
    pub swap: bool,
}

impl ActionMask {
    pub fn any(&self) -> bool {
        self.r#move || self.refine || self.coarsen || self.swap
    }
}

/// Bit 0 moves, bit 1 refines, bit 2 coarsens, bit 3 swaps.
pub fn decode_sw(sw: u32) -> Result<ActionMask> {
    if sw > 15 {
        return Err(Error::Argument(format!("sw must be in 0..=15, got {sw}")));
    }
    Ok(ActionMask {
        r#move: sw & 1 != 0,
        refine: sw & 2 != 0,
        coarsen: sw & 4 != 0,
        swap: sw & 8 != 0,
    })
}

pub fn encode_sw(mask: ActionMask) -> u32 {
    mask.r#move as u32 | (mask.refine as u32) << 1 | (mask.coarsen as u32) << 2 | (mask.swap as u32) << 3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptOptions {
    pub eta_policy: EtaPolicy,
    pub ppar: f64,
    pub innerit: usize,
    pub l_low: f64,
    pub l_up: f64,
    pub qual_p: f64,
    pub sw: u32,
    pub field_selector: FieldSelector,
    /// A collapse may not push any element below this fraction of the
    /// worst pre-collapse quality.
    pub collapse_quality_floor: f64,
    pub move_damping: f64,
    /// Hard cap on node count during refinement.
    pub max_nodes: usize,
}

impl Default for AdaptOptions {
    fn default() -> Self {
        AdaptOptions {
            eta_policy: EtaPolicy::default(),
            ppar: 1000.0,
            innerit: 2,
            l_low: std::f64::consts::FRAC_1_SQRT_2,
            l_up: std::f64::consts::SQRT_2,
            qual_p: 0.0,
            sw: 15,
            field_selector: FieldSelector::Identity,
            collapse_quality_floor: 0.1,
            move_damping: 0.5,
            max_nodes: 400_000,
        }
    }
}

impl AdaptOptions {
    /// Defaults for a given dimension (only `qual_p` differs).
    pub fn for_dim(dim: usize) -> Self {
        AdaptOptions { qual_p: if dim == 3 { 2.0 } else { 0.0 }, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l_low > 0.0 && self.l_low < self.l_up) {
            return Err(Error::Config(format!("need 0 < l_low < l_up, got {} and {}", self.l_low, self.l_up)));
        }
        if self.innerit < 1 {
            return Err(Error::Config("innerit must be at least 1".into()));
        }
        if !(self.qual_p >= 0.0) {
            return Err(Error::Config(format!("qual_p must be >= 0, got {}", self.qual_p)));
        }
        if !(self.ppar > 0.0) {
            return Err(Error::Config(format!("ppar must be positive, got {}", self.ppar)));
        }
        if !(self.move_damping > 0.0 && self.move_damping <= 1.0) {
            return Err(Error::Config(format!("move_damping must be in (0, 1], got {}", self.move_damping)));
        }
        decode_sw(self.sw).map(|_| ())
    }
}

/// Options for the pure coarsening stage of [`two_step_adapt`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoarsenOptions {
    #[serde(flatten)]
    pub base: AdaptOptions,
    pub npb: usize,
    pub crmax: usize,
}

impl Default for CoarsenOptions {
    fn default() -> Self {
        CoarsenOptions { base: AdaptOptions { sw: 5, ..Default::default() }, npb: 0, crmax: 10 }
    }
}

impl CoarsenOptions {
    pub fn for_dim(dim: usize) -> Self {
        CoarsenOptions { base: AdaptOptions { sw: 5, ..AdaptOptions::for_dim(dim) }, npb: 0, crmax: 10 }
    }
}

/// Counters and trajectories recorded during adaptation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdaptStats {
    pub np_before: usize,
    pub np_after: usize,
    pub iterations: usize,
    pub coarsen_passes: usize,
    pub swaps: usize,
    pub collapses: usize,
    pub splits: usize,
    pub moves: usize,
    pub np_history: Vec<usize>,
    pub l_max_history: Vec<f64>,
}

impl AdaptStats {
    fn absorb(&mut self, other: &AdaptStats) {
        if self.np_history.is_empty() {
            self.np_before = other.np_before;
        }
        self.np_after = other.np_after;
        self.iterations += other.iterations;
        self.swaps += other.swaps;
        self.collapses += other.collapses;
        self.splits += other.splits;
        self.moves += other.moves;
        self.np_history.extend_from_slice(&other.np_history);
        self.l_max_history.extend_from_slice(&other.l_max_history);
    }
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for AdaptStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lmax: Vec<String> = self.l_max_history.iter().map(|v| format!("{v:.4}")).collect();
        write!(
            f,
            "np_before={} np_after={} iterations={} coarsen_passes={} swaps={} collapses={} splits={} moves={} np_history={} l_max_history={}",
            self.np_before,
            self.np_after,
            self.iterations,
            self.coarsen_passes,
            self.swaps,
            self.collapses,
            self.splits,
            self.moves,
            join(&self.np_history),
            lmax.join(",")
        )
    }
}

/// Result of one adaptation call.
#[derive(Debug, Clone)]
pub struct Adapted {
    pub mesh: SimplicialMesh,
    pub u: Vec<f64>,
    pub stats: AdaptStats,
}

/// Result of a single pass with explicit metric.
#[derive(Debug, Clone)]
pub struct PassOutput {
    pub mesh: SimplicialMesh,
    pub u: Vec<f64>,
    /// The metric carried along (restricted and averaged, not recomputed).
    pub psi: MetricField,
    pub count: usize,
}

/// Combined quality `q_M * q_E^qual_p` of element `elem`.
pub fn combined_quality(mesh: &SimplicialMesh, psi: &MetricField, elem: usize, qual_p: f64) -> f64 {
    let el = mesh.element(elem);
    let mets: Vec<_> = el.iter().map(|&v| psi.tensors[v]).collect();
    editor::combined_quality_raw(mesh.dim(), &mesh.element_points(elem), &mets, qual_p).max(0.0)
}

fn check_inputs(mesh: &SimplicialMesh, u: &[f64], psi: Option<&MetricField>) -> Result<()> {
    if u.len() != mesh.num_nodes() {
        return Err(Error::Argument(format!("field has {} values for {} nodes", u.len(), mesh.num_nodes())));
    }
    if let Some(psi) = psi {
        if psi.len() != mesh.num_nodes() {
            return Err(Error::Argument(format!("metric has {} tensors for {} nodes", psi.len(), mesh.num_nodes())));
        }
    }
    Ok(())
}

fn finish_checked(ed: Editor, what: &str) -> Result<(SimplicialMesh, Vec<f64>, MetricField)> {
    let (mesh, u, psi) = ed.finish()?;
    let report = mesh.validate();
    if !report.is_valid() {
        log::error!("{what} produced an invalid mesh: {report}");
        return Err(Error::InvalidMesh(format!("{what}: {report}")));
    }
    Ok((mesh, u, psi))
}

/// Full validation after every pass, in debug builds only.
fn debug_validate(ed: &Editor, what: &str) -> Result<()> {
    if cfg!(debug_assertions) {
        finish_checked(ed.clone(), what)?;
    }
    Ok(())
}

fn run_pass(
    mesh: &SimplicialMesh,
    u: &[f64],
    psi: &MetricField,
    opts: &AdaptOptions,
    what: &str,
    pass: impl FnOnce(&mut Editor, &AdaptOptions) -> usize,
) -> Result<PassOutput> {
    check_inputs(mesh, u, Some(psi))?;
    opts.validate()?;
    let mut ed = Editor::new(mesh, u, psi, opts.qual_p);
    let count = pass(&mut ed, opts);
    let (mesh, u, mut out_psi) = finish_checked(ed, what)?;
    out_psi.floor_eps = psi.floor_eps;
    Ok(PassOutput { mesh, u, psi: out_psi, count })
}

/// Collapse edges with metric length below `l_low`.
pub fn coarsen_pass(mesh: &SimplicialMesh, u: &[f64], psi: &MetricField, opts: &AdaptOptions) -> Result<PassOutput> {
    run_pass(mesh, u, psi, opts, "coarsen", passes::coarsen)
}

/// Bisect metric-longest edges exceeding `l_up` with conforming closure.
pub fn refine_pass(mesh: &SimplicialMesh, u: &[f64], psi: &MetricField, opts: &AdaptOptions) -> Result<PassOutput> {
    run_pass(mesh, u, psi, opts, "refine", passes::refine)
}

/// One sweep of metric-weighted Laplacian smoothing.
pub fn move_pass(mesh: &SimplicialMesh, u: &[f64], psi: &MetricField, opts: &AdaptOptions) -> Result<PassOutput> {
    run_pass(mesh, u, psi, opts, "move", passes::smooth)
}

/// Quality-improving edge flips (2D) or 2-3/3-2 swaps (3D).
pub fn swap_pass(mesh: &SimplicialMesh, u: &[f64], psi: &MetricField, opts: &AdaptOptions) -> Result<PassOutput> {
    run_pass(mesh, u, psi, opts, "swap", |ed, _| passes::swap(ed))
}

/// Bisect the single edge `(a, b)` together with its whole shell.
pub fn split_edge(mesh: &SimplicialMesh, u: &[f64], a: usize, b: usize) -> Result<(SimplicialMesh, Vec<f64>)> {
    check_inputs(mesh, u, None)?;
    let psi = MetricField::isotropic(mesh.dim(), mesh.num_nodes(), 1.0);
    let mut ed = Editor::new(mesh, u, &psi, 0.0);
    if a >= mesh.num_nodes() || b >= mesh.num_nodes() || passes::split_single(&mut ed, a, b).is_none() {
        return Err(Error::Argument(format!("({a}, {b}) is not an edge of the mesh")));
    }
    let (mesh, u, _) = finish_checked(ed, "split")?;
    Ok((mesh, u))
}

fn l_max(mesh: &SimplicialMesh, psi: &MetricField) -> f64 {
    all_edge_lengths(mesh, psi).into_iter().fold(0.0, f64::max)
}

fn build_metric(mesh: &SimplicialMesh, u: &[f64], opts: &AdaptOptions, eta_scale: f64) -> Result<MetricField> {
    let z = select_field(u, opts.field_selector);
    let eta = eval_eta(opts.eta_policy, mesh.num_nodes())? * eta_scale;
    metric_for_field(mesh, &z, eta, opts.ppar)
}

type Resample<'a> = Option<&'a dyn Fn(&[f64]) -> f64>;

fn tradapt_impl(
    mesh: &SimplicialMesh,
    u: &[f64],
    opts: &AdaptOptions,
    eta_scale: f64,
    resample: Resample<'_>,
) -> Result<Adapted> {
    check_inputs(mesh, u, None)?;
    opts.validate()?;
    let mask = decode_sw(opts.sw)?;
    let mut stats = AdaptStats { np_before: mesh.num_nodes(), np_after: mesh.num_nodes(), ..Default::default() };
    if !mask.any() {
        return Ok(Adapted { mesh: mesh.clone(), u: u.to_vec(), stats });
    }
    let mut cur = mesh.clone();
    let mut cur_u = u.to_vec();
    let mut psi = build_metric(&cur, &cur_u, opts, eta_scale)?;
    stats.l_max_history.push(l_max(&cur, &psi));
    stats.np_history.push(cur.num_nodes());
    for _ in 0..opts.innerit {
        let mut ed = Editor::new(&cur, &cur_u, &psi, opts.qual_p);
        if mask.swap {
            stats.swaps += passes::swap(&mut ed);
            debug_validate(&ed, "swap")?;
        }
        if mask.coarsen {
            stats.collapses += passes::coarsen(&mut ed, opts);
            debug_validate(&ed, "coarsen")?;
        }
        if mask.refine {
            stats.splits += passes::refine(&mut ed, opts);
            debug_validate(&ed, "refine")?;
        }
        if mask.r#move {
            stats.moves += passes::smooth(&mut ed, opts);
            debug_validate(&ed, "move")?;
        }
        let (m, v, _) = finish_checked(ed, "tradapt")?;
        cur = m;
        cur_u = match resample {
            Some(f) => cur.sample(f),
            None => v,
        };
        stats.iterations += 1;
        psi = build_metric(&cur, &cur_u, opts, eta_scale)?;
        let lm = l_max(&cur, &psi);
        stats.l_max_history.push(lm);
        stats.np_history.push(cur.num_nodes());
        log::debug!("tradapt iteration {}: np={} l_max={lm:.3}", stats.iterations, cur.num_nodes());
        if lm < opts.l_up {
            break;
        }
    }
    stats.np_after = cur.num_nodes();
    Ok(Adapted { mesh: cur, u: cur_u, stats })
}

/// Adapt `mesh` to the nodal field `u` (interpolated along the way).
pub fn tradapt(mesh: &SimplicialMesh, u: &[f64], opts: &AdaptOptions) -> Result<Adapted> {
    tradapt_impl(mesh, u, opts, 1.0, None)
}

/// Adapt to an analytic field, re-sampled exactly after every iteration.
pub fn tradapt_to_function(mesh: &SimplicialMesh, f: &dyn Fn(&[f64]) -> f64, opts: &AdaptOptions) -> Result<Adapted> {
    tradapt_impl(mesh, &mesh.sample(f), opts, 1.0, Some(f))
}

fn two_step_impl(
    mesh: &SimplicialMesh,
    u: &[f64],
    trop: &AdaptOptions,
    trcop: &CoarsenOptions,
    resample: Resample<'_>,
) -> Result<(Adapted, usize)> {
    let mut cur = Adapted {
        mesh: mesh.clone(),
        u: u.to_vec(),
        stats: AdaptStats { np_before: mesh.num_nodes(), np_after: mesh.num_nodes(), ..Default::default() },
    };
    let mut stats = cur.stats.clone();
    let mut np_step1 = mesh.num_nodes();
    if trcop.npb > 0 && trcop.crmax > 0 {
        // each repetition doubles eta, so the target spacing grows until the
        // node budget is met
        let mut scale = 1.0;
        for _ in 0..trcop.crmax {
            if cur.mesh.num_nodes() <= trcop.npb {
                break;
            }
            let step = tradapt_impl(&cur.mesh, &cur.u, &trcop.base, scale, resample)?;
            stats.absorb(&step.stats);
            stats.coarsen_passes += 1;
            cur = step;
            scale *= 2.0;
        }
        np_step1 = cur.mesh.num_nodes();
        log::info!("coarsening stage: {} -> {} nodes in {} passes", mesh.num_nodes(), np_step1, stats.coarsen_passes);
    }
    let fin = tradapt_impl(&cur.mesh, &cur.u, trop, 1.0, resample)?;
    stats.absorb(&fin.stats);
    stats.np_before = mesh.num_nodes();
    stats.np_after = fin.mesh.num_nodes();
    Ok((Adapted { mesh: fin.mesh, u: fin.u, stats }, np_step1))
}

/// Coarsen towards the node budget `trcop.npb` first (if enabled), then
/// adapt with `trop`.
pub fn two_step_adapt(mesh: &SimplicialMesh, u: &[f64], trop: &AdaptOptions, trcop: &CoarsenOptions) -> Result<Adapted> {
    two_step_impl(mesh, u, trop, trcop, None).map(|r| r.0)
}

/// Like [`two_step_adapt`], also returning the node count after the
/// coarsening stage.
pub fn two_step_adapt_detailed(
    mesh: &SimplicialMesh,
    u: &[f64],
    trop: &AdaptOptions,
    trcop: &CoarsenOptions,
) -> Result<(Adapted, usize)> {
    two_step_impl(mesh, u, trop, trcop, None)
}

#[cfg(test)]
mod tests;
