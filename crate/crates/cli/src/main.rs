use std::path::PathBuf;
use std::process::ExitCode;

use anisocont::adapt::{AdaptOptions, CoarsenOptions};
use anisocont::driver::{self, AdaptOnceOptions};
use anisocont::metric::EtaPolicy;
use anisocont::mesh::read_mesh;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "anisocont", version, about = "Anisotropic mesh adaptation and continuation for Allen-Cahn problems")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a continuation scenario from a config file.
    Run {
        config: PathBuf,
        /// Output directory (default: the one named in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Adapt a mesh to a nodal field once (two-step: coarsen, then full).
    Adapt {
        mesh: PathBuf,
        field: PathBuf,
        /// Action bitmask: 1 move, 2 refine, 4 coarsen, 8 swap.
        #[arg(long, default_value_t = 15)]
        sw: u32,
        /// Constant metric scale.
        #[arg(long, default_value_t = 1e-3)]
        eta: f64,
        /// Interpret --eta as a per-node factor (eta = value * np).
        #[arg(long)]
        eta_per_node: bool,
        #[arg(long)]
        llow: Option<f64>,
        #[arg(long)]
        lup: Option<f64>,
        #[arg(long)]
        innerit: Option<usize>,
        /// Target node count of the coarsening stage (0 disables it).
        #[arg(long, default_value_t = 0)]
        npb: usize,
        #[arg(long, default_value_t = 10)]
        crmax: usize,
        #[arg(long, default_value = "adapted.mesh")]
        out_mesh: PathBuf,
        #[arg(long, default_value = "adapted.field")]
        out_field: PathBuf,
    },
    /// Plot a branch CSV as SVG.
    Plot { csv: PathBuf, svg: PathBuf },
    /// Check mesh invariants; exits non-zero on any defect.
    Validate { mesh: PathBuf },
}

fn init_threads() -> anisocont::Result<()> {
    let Ok(v) = std::env::var("ANISOCONT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| anisocont::Error::Argument(format!("ANISOCONT_THREADS must be a positive integer, got '{v}'")))?;
    if n == 0 {
        return Err(anisocont::Error::Argument("ANISOCONT_THREADS must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| anisocont::Error::Argument(e.to_string()))
}

fn execute(cmd: Command) -> anisocont::Result<bool> {
    match cmd {
        Command::Run { config, out } => {
            let s = driver::run(&config, out.as_deref())?;
            for f in &s.branch_files {
                println!("branch {}", f.display());
            }
            println!("plot {}", s.svg.display());
            println!("adapt_log {}", s.adapt_log.display());
            for v in &s.bifurcation_values {
                println!("bp {v}");
            }
            for r in s.stop_reasons.iter().flatten() {
                println!("stopped {r}");
            }
            Ok(true)
        }
        Command::Adapt { mesh, field, sw, eta, eta_per_node, llow, lup, innerit, npb, crmax, out_mesh, out_field } => {
            let dim = read_mesh(&mesh)?.dim();
            let mut trop = AdaptOptions::for_dim(dim);
            trop.sw = sw;
            trop.eta_policy = if eta_per_node { EtaPolicy::LinearInNp(eta) } else { EtaPolicy::Constant(eta) };
            trop.l_low = llow.unwrap_or(trop.l_low);
            trop.l_up = lup.unwrap_or(trop.l_up);
            trop.innerit = innerit.unwrap_or(trop.innerit);
            trop.validate()?;
            let mut trcop = CoarsenOptions::for_dim(dim);
            trcop.base = AdaptOptions { sw: trcop.base.sw & sw, ..trop };
            trcop.npb = npb;
            trcop.crmax = crmax;
            let stats = driver::adapt_once(&mesh, &field, &AdaptOnceOptions { trop, trcop, out_mesh, out_field, stats_log: None })?;
            println!("{stats}");
            Ok(true)
        }
        Command::Plot { csv, svg } => {
            driver::plot_branch(&csv, &svg)?;
            Ok(true)
        }
        Command::Validate { mesh } => {
            let m = read_mesh(&mesh)?;
            let r = m.validate();
            println!("nodes={} elements={} {r}", m.num_nodes(), m.num_elements());
            Ok(r.is_valid())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = init_threads().and_then(|_| execute(cli.cmd));
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
