//! Config-file driven runs: build mesh and problem, optionally adapt,
//! continue, switch branches, and write branch CSV, VTK snapshots,
//! adaptation logs and SVG plots.

mod plot;

pub use plot::branch_svg;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::adapt::{two_step_adapt, AdaptOptions, AdaptStats, CoarsenOptions};
use crate::continuation::{
    branch_switch, newton_solve, read_branch_csv, run_branch, write_branch_header, AdaptPlan, BranchRecord,
    ContinuationSettings, ContinuationState, Event,
};
use crate::fem::{BoundaryCondition, ProblemDef};
use crate::mesh::{read_field, read_mesh, write_field, write_mesh, write_vtk_file, SimplicialMesh};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub dim: usize,
    /// The box is `(-h, h)` along each axis.
    pub half_extents: Vec<f64>,
    /// Nodes per axis.
    pub counts: Vec<usize>,
}

impl MeshConfig {
    pub fn build(&self) -> Result<SimplicialMesh> {
        let d = self.dim;
        if !(d == 2 || d == 3) || self.half_extents.len() != d || self.counts.len() != d {
            return Err(Error::Config(format!(
                "mesh needs dim 2 or 3 with matching half_extents and counts, got dim={} {:?} {:?}",
                d, self.half_extents, self.counts
            )));
        }
        let (h, n) = (&self.half_extents, &self.counts);
        if d == 2 {
            SimplicialMesh::rect(h[0], h[1], n[0], n[1])
        } else {
            SimplicialMesh::cuboid(h[0], h[1], h[2], n[0], n[1], n[2])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default)]
    pub aux: BTreeMap<String, f64>,
    pub active_param: String,
    /// Boundary condition per segment ID (keys are the IDs as strings).
    pub bc: BTreeMap<String, BoundaryCondition>,
}

fn one() -> f64 {
    1.0
}

impl ProblemConfig {
    pub fn build(&self, dim: usize) -> Result<ProblemDef> {
        let mut bc = BTreeMap::new();
        for (k, v) in &self.bc {
            let id: u8 = k.trim().parse().map_err(|_| Error::Config(format!("bad segment id '{k}'")))?;
            bc.insert(id, *v);
        }
        let prob = ProblemDef {
            c: self.c,
            lambda: self.lambda,
            gamma: self.gamma,
            aux: self.aux.clone(),
            active_param: self.active_param.clone(),
            bc,
        };
        prob.validate(dim)?;
        Ok(prob)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    /// Adapt once (two-step) to the initial solution before continuing.
    pub initial_adapt: bool,
    /// Number of detected BPs at which to switch branches.
    pub follow_bps: usize,
    /// Steps taken on each bifurcating branch.
    pub bp_nsteps: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { initial_adapt: false, follow_bps: 0, bp_nsteps: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Write a VTK snapshot every this many steps (0 = only at BPs).
    pub snapshot_stride: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: PathBuf::from("out"), snapshot_stride: 10 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: String,
    mesh: MeshConfig,
    problem: ProblemConfig,
    #[serde(default)]
    trop: Option<toml::Table>,
    #[serde(default)]
    trcop: Option<toml::Table>,
    #[serde(default)]
    cont: ContinuationSettings,
    #[serde(default)]
    run: RunOptions,
    #[serde(default)]
    output: OutputConfig,
}

/// A parsed and validated run description.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub name: String,
    pub mesh: MeshConfig,
    pub problem: ProblemConfig,
    pub trop: AdaptOptions,
    pub trcop: CoarsenOptions,
    pub cont: ContinuationSettings,
    pub run: RunOptions,
    pub output: OutputConfig,
}

fn line_of(text: &str, err: &toml::de::Error) -> usize {
    err.span().map_or(0, |s| text[..s.start.min(text.len())].lines().count().max(1))
}

/// Overlay the keys of `table` on the serialized `base`.
fn overlay<T: Clone + serde::Serialize + serde::de::DeserializeOwned>(base: &T, table: Option<toml::Table>, what: &str) -> Result<T> {
    let Some(table) = table else {
        return Ok(base.clone());
    };
    let mut merged = toml::Table::try_from(base).map_err(|e| Error::Config(format!("{what}: {e}")))?;
    for (k, v) in table {
        if !merged.contains_key(&k) {
            return Err(Error::Config(format!("{what}: unknown key '{k}'")));
        }
        merged.insert(k, v);
    }
    toml::Value::Table(merged).try_into().map_err(|e: toml::de::Error| Error::Config(format!("{what}: {}", e.message())))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse { line: line_of(text, &e), msg: e.message().to_string() })?;
        let dim = raw.mesh.dim;
        let trop = overlay(&AdaptOptions::for_dim(dim), raw.trop, "trop")?;
        let trcop = overlay(&CoarsenOptions::for_dim(dim), raw.trcop, "trcop")?;
        trop.validate()?;
        trcop.base.validate()?;
        raw.cont.validate()?;
        raw.problem.build(dim)?;
        raw.mesh.build()?;
        Ok(RunConfig {
            name: raw.name,
            mesh: raw.mesh,
            problem: raw.problem,
            trop,
            trcop,
            cont: raw.cont,
            run: raw.run,
            output: raw.output,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse { line, msg } => Error::Parse { line, msg: format!("{}: {msg}", path.display()) },
            other => other,
        })
    }
}

/// What a run produced.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub branch_files: Vec<PathBuf>,
    pub svg: PathBuf,
    pub adapt_log: PathBuf,
    pub snapshots: Vec<PathBuf>,
    pub bifurcation_values: Vec<f64>,
    pub records: Vec<Vec<BranchRecord>>,
    pub adapt_stats: Vec<AdaptStats>,
    pub stop_reasons: Vec<Option<String>>,
}

struct Sink {
    dir: PathBuf,
    csv: BufWriter<File>,
    log: BufWriter<File>,
    stride: usize,
    snapshots: Vec<PathBuf>,
    error: Option<Error>,
}

impl Sink {
    fn snapshot(&mut self, run: &str, step: usize, mesh: &SimplicialMesh, fields: &[(&str, &[f64])]) {
        let path = self.dir.join(format!("{run}_pt{step}.vtk"));
        match write_vtk_file(mesh, fields, &path) {
            Ok(()) => self.snapshots.push(path),
            Err(e) => self.error = Some(e),
        }
    }

    fn handle(&mut self, run: &str, ev: Event<'_>) {
        let res: std::io::Result<()> = match ev {
            Event::Record(rec, state) => {
                let r = writeln!(self.csv, "{}", rec.csv_row()).and_then(|_| self.csv.flush());
                if self.stride > 0 && rec.step_index % self.stride == 0 && rec.flag != crate::continuation::BifFlag::Bp {
                    self.snapshot(run, rec.step_index, &state.mesh, &[("u", &state.u)]);
                }
                r
            }
            Event::Bifurcation(bp) => {
                let label = format!("{run}_bp");
                self.snapshot(&label, bp.step_index, &bp.mesh, &[("u", &bp.u), ("eigenvector", &bp.eigenvector)]);
                Ok(())
            }
            Event::Adapt(stats, rolled_back) => {
                let mut r = Ok(());
                for s in stats {
                    r = r.and(writeln!(self.log, "run={run} {s} rolled_back={rolled_back}"));
                }
                r.and_then(|_| self.log.flush())
            }
        };
        if let Err(e) = res {
            self.error = Some(e.into());
        }
    }
}

/// Run the scenario described by `cfg`, writing outputs into `out_dir`.
pub fn run_config(cfg: &RunConfig, out_dir: &Path) -> Result<RunSummary> {
    fs::create_dir_all(out_dir)?;
    let dim = cfg.mesh.dim;
    let mesh = cfg.mesh.build()?;
    let prob = cfg.problem.build(dim)?;
    let name = cfg.name.clone();
    let adapt_log = out_dir.join(format!("{name}_adapt.log"));
    let mut summary = RunSummary { adapt_log: adapt_log.clone(), ..Default::default() };

    let u0 = vec![0.0; mesh.num_nodes()];
    let sol = newton_solve(&mesh, &u0, &prob, cfg.cont.newton_tol, cfg.cont.newton_max_it.max(20))?;
    let (mesh, u) = if cfg.run.initial_adapt {
        let a = two_step_adapt(&mesh, &sol.u, &cfg.trop, &cfg.trcop)?;
        summary.adapt_stats.push(a.stats.clone());
        let sol = newton_solve(&a.mesh, &a.u, &prob, cfg.cont.newton_tol, cfg.cont.newton_max_it.max(20))?;
        (a.mesh, sol.u)
    } else {
        (mesh, sol.u)
    };

    let main_csv = out_dir.join(format!("{name}_branch.csv"));
    let mut sink = Sink {
        dir: out_dir.to_path_buf(),
        csv: BufWriter::new(File::create(&main_csv)?),
        log: BufWriter::new(File::create(&adapt_log)?),
        stride: cfg.output.snapshot_stride,
        snapshots: Vec::new(),
        error: None,
    };
    if let Some(s) = summary.adapt_stats.first() {
        writeln!(sink.log, "run={name} initial {s}")?;
    }
    write_branch_header(&mut sink.csv)?;
    let plan = AdaptPlan { trop: &cfg.trop, trcop: &cfg.trcop };
    let adapt = (cfg.cont.amod > 0).then_some(plan);

    let state = ContinuationState::new(mesh, u, prob)?;
    let main = run_branch(state, &cfg.cont, adapt, &mut |ev| sink.handle(&name, ev))?;
    summary.branch_files.push(main_csv);
    summary.bifurcation_values = main.bifurcations.iter().map(|b| b.param_value).collect();
    summary.adapt_stats.extend(main.adapt_stats.iter().cloned());
    summary.stop_reasons.push(main.stop_reason.clone());
    summary.records.push(main.records.clone());
    write_mesh(&main.state.mesh, &out_dir.join(format!("{name}_final.mesh")))?;
    write_field(&main.state.u, &out_dir.join(format!("{name}_final.field")))?;

    for (k, bp) in main.bifurcations.iter().take(cfg.run.follow_bps).enumerate() {
        let run_name = format!("{name}_bp{}", k + 1);
        let csv = out_dir.join(format!("{run_name}_branch.csv"));
        sink.csv = BufWriter::new(File::create(&csv)?);
        write_branch_header(&mut sink.csv)?;
        let state = match branch_switch(bp, &cfg.cont) {
            Ok(s) => s,
            Err(e) => {
                log::warn!("branch switching at BP {} failed: {e}", k + 1);
                summary.stop_reasons.push(Some(e.to_string()));
                continue;
            }
        };
        let settings = ContinuationSettings { nsteps: cfg.run.bp_nsteps, ..cfg.cont };
        let br = run_branch(state, &settings, adapt, &mut |ev| sink.handle(&run_name, ev))?;
        summary.branch_files.push(csv);
        summary.adapt_stats.extend(br.adapt_stats.iter().cloned());
        summary.stop_reasons.push(br.stop_reason.clone());
        summary.records.push(br.records);
    }
    sink.csv.flush()?;
    sink.log.flush()?;
    if let Some(e) = sink.error.take() {
        return Err(e);
    }
    summary.snapshots = std::mem::take(&mut sink.snapshots);

    let refs: Vec<&[BranchRecord]> = summary.records.iter().map(|r| r.as_slice()).collect();
    let svg = out_dir.join(format!("{name}_branch.svg"));
    fs::write(&svg, branch_svg(&refs))?;
    summary.svg = svg;
    Ok(summary)
}

/// Parse `config_path` and run it, writing into `out_dir` or the
/// configured output directory.
pub fn run(config_path: &Path, out_dir: Option<&Path>) -> Result<RunSummary> {
    let cfg = RunConfig::from_file(config_path)?;
    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.directory.clone());
    run_config(&cfg, &dir)
}

/// Read a branch CSV and write its SVG plot.
pub fn plot_branch(csv_path: &Path, svg_path: &Path) -> Result<()> {
    let recs = read_branch_csv(BufReader::new(File::open(csv_path)?))?;
    fs::write(svg_path, branch_svg(&[&recs]))?;
    Ok(())
}

/// Settings for [`adapt_once`].
#[derive(Debug, Clone)]
pub struct AdaptOnceOptions {
    pub trop: AdaptOptions,
    pub trcop: CoarsenOptions,
    pub out_mesh: PathBuf,
    pub out_field: PathBuf,
    /// Optional key=value stats log (appended).
    pub stats_log: Option<PathBuf>,
}

/// Adapt a mesh file to a nodal field file once and write the results.
pub fn adapt_once(mesh_file: &Path, field_file: &Path, opts: &AdaptOnceOptions) -> Result<AdaptStats> {
    let mesh = read_mesh(mesh_file)?;
    let u = read_field(field_file)?;
    if u.len() != mesh.num_nodes() {
        return Err(Error::Argument(format!(
            "{} has {} values but the mesh has {} nodes",
            field_file.display(),
            u.len(),
            mesh.num_nodes()
        )));
    }
    let out = two_step_adapt(&mesh, &u, &opts.trop, &opts.trcop)?;
    write_mesh(&out.mesh, &opts.out_mesh)?;
    write_field(&out.u, &opts.out_field)?;
    if let Some(p) = &opts.stats_log {
        let mut f = fs::OpenOptions::new().create(true).append(true).open(p)?;
        writeln!(f, "{}", out.stats)?;
    }
    Ok(out.stats)
}
