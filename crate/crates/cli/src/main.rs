//! `cauchy`: command line harness for the Hadamard experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use cauchy_core::harness::{self, PerturbationMode, RunConfig, StudyResult, SweepAxis};
use cauchy_core::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cauchy", version, about = "Stabilized nonconforming FEM for the elliptic Cauchy problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve once and report errors.
    Run {
        #[command(flatten)]
        common: Common,
        /// Also write the block matrix and right-hand side in coordinate format.
        #[arg(long)]
        dump_system: bool,
    },
    /// Mesh-convergence series.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Mesh sizes, comma separated.
        #[arg(long, value_delimiter = ',')]
        h_list: Option<Vec<f64>>,
    },
    /// Parameter sweep on a fixed mesh.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// gamma_vw, gamma_w, gamma_v, gamma_bc or epsilon.
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Perturbed-data study over epsilon × mesh size.
    Perturb {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        epsilons: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Mode::Sine)]
        mode: Mode,
        /// Frequency of the sine perturbation.
        #[arg(long, default_value_t = 7)]
        m: u32,
        #[arg(long, value_delimiter = ',')]
        h_list: Option<Vec<f64>>,
    },
    /// Write the tagged mesh.
    MeshDump {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Sine,
    Noise,
}

#[derive(Args)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    h: Option<f64>,
    /// ls or jump.
    #[arg(long)]
    stab: Option<String>,
    /// strong or weak.
    #[arg(long)]
    bc: Option<String>,
    #[arg(long)]
    gamma_v: Option<f64>,
    #[arg(long)]
    gamma_w: Option<f64>,
    #[arg(long)]
    gamma_bc: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    zeta_list: Option<Vec<f64>>,
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// lu or krylov.
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        // stab first so an explicit --gamma-w wins over the kind default
        let overrides: [(&str, Option<String>); 11] = [
            ("stab", self.stab.clone()),
            ("n", self.n.map(|v| v.to_string())),
            ("h", self.h.map(|v| format!("{v:?}"))),
            ("bc", self.bc.clone()),
            ("gamma_v", self.gamma_v.map(|v| format!("{v:?}"))),
            ("gamma_w", self.gamma_w.map(|v| format!("{v:?}"))),
            ("gamma_bc", self.gamma_bc.map(|v| format!("{v:?}"))),
            ("zeta_list", self.zeta_list.as_deref().map(join)),
            ("jitter", self.jitter.map(|v| format!("{v:?}"))),
            ("seed", self.seed.map(|v| v.to_string())),
            ("solver", self.solver.clone()),
        ];
        for (key, value) in overrides {
            if let Some(value) = value {
                cfg.set(key, &value)?;
            }
        }
        if let Some(tol) = self.tol {
            cfg.set("tol", &format!("{tol:?}"))?;
        }
        cfg.validate()?;
        for w in cfg.warnings() {
            eprintln!("warning: {w}");
        }
        Ok(cfg)
    }
}

fn summarize(study: &StudyResult) {
    for w in &study.warnings {
        eprintln!("warning: {w}");
    }
    for rec in &study.runs {
        let errs: Vec<String> = rec.report.rel_l2.iter().map(|(z, e)| format!("zeta={z}: {e:.4e}")).collect();
        println!("h={:<8} h_max={:.4} dofs={:<7} {}", rec.config.h, rec.mesh.h_max, rec.mesh.n_dofs, errs.join("  "));
    }
    for r in &study.rates {
        println!("rate {:<24} {:>7.3}  (residual {:.2e})", r.quantity, r.slope, r.residual);
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common, dump_system } => {
            let cfg = common.resolve()?;
            let rec = harness::run_and_record(&cfg, Some(&common.out))?;
            if dump_system {
                let mesh = cfg.build_mesh()?;
                let form = cfg.formulation()?;
                let v = form.primal_space(&mesh);
                let w = form.dual_space(&mesh);
                let system = cauchy_core::solver::assemble_system(&v, &w, &cfg.problem_data(), &form)?;
                let (m, b) = system.assemble()?;
                m.write_coordinate(std::io::BufWriter::new(std::fs::File::create(common.out.join("system.mtx"))?))?;
                let rhs: String = b.iter().map(|v| format!("{v:.16e}\n")).collect();
                std::fs::write(common.out.join("rhs.txt"), rhs)?;
            }
            summarize(&StudyResult { runs: vec![rec.clone()], ..Default::default() });
            let r = &rec.report;
            println!(
                "E={:.4} h1_semi_error={:.4e} s_v={:.4e} s_w={:.4e} eta={:.4e} residual={:.2e} wall={:.2}s",
                r.exact_h1_semi,
                r.h1_semi_error,
                r.s_v_seminorm,
                r.s_w_norm,
                r.eta,
                rec.solve.residual_norm,
                rec.solve.wall_time
            );
        }
        Command::Converge { common, h_list } => {
            let cfg = common.resolve()?;
            let h_list = h_list.unwrap_or_else(|| cfg.h_list.clone());
            summarize(&harness::run_convergence(&cfg, &h_list, Some(&common.out))?);
        }
        Command::Sweep { common, axis, values } => {
            let cfg = common.resolve()?;
            let axis = SweepAxis::parse(&axis).ok_or_else(|| Error::Config(format!("unknown sweep axis '{axis}'")))?;
            summarize(&harness::run_sweep(&cfg, axis, &values, Some(&common.out))?);
        }
        Command::Perturb { common, epsilons, mode, m, h_list } => {
            let mut cfg = common.resolve()?;
            if let Some(h_list) = h_list {
                cfg.h_list = h_list;
            }
            let mode = match mode {
                Mode::Sine => PerturbationMode::Sine(m),
                Mode::Noise => PerturbationMode::Noise,
            };
            summarize(&harness::run_perturbed(&cfg, &epsilons, mode, Some(&common.out))?);
        }
        Command::MeshDump { common } => {
            let cfg = common.resolve()?;
            let mesh = cfg.build_mesh()?;
            std::fs::create_dir_all(&common.out)?;
            let path = common.out.join("mesh.txt");
            cauchy_core::mesh::io::write_mesh(&mesh, std::io::BufWriter::new(std::fs::File::create(&path)?))?;
            println!("{} vertices, {} triangles, h_max={:.4} -> {}", mesh.n_vertices(), mesh.n_triangles(), mesh.h_max(), path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
