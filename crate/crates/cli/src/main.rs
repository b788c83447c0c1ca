//! Command-line driver for the benchmark scenarios.

use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use patchfem::bench::{self, BenchOptions, BenchmarkReport, PLaplaceProblem};
use patchfem::density::GradientNorm;
use patchfem::gradient::GradientMode;
use patchfem::mesh::Mesh;
use patchfem::minimizer::{HessianMode, Solver};

#[derive(Parser)]
#[command(name = "patchfem", version, about = "Patch-based finite element energy benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bar mesh and patch setup: sizes and times.
    Bench1(Common),
    /// Energy of the twisted bar.
    Bench2 {
        #[command(flatten)]
        common: Common,
        /// Twist angle in units of full turns.
        #[arg(long, default_value_t = 1.0)]
        turns: f64,
    },
    /// Exact versus numeric gradient of the twisted bar.
    Bench3 {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1.0)]
        turns: f64,
    },
    /// Twisting continuation of the bar.
    Bench4 {
        #[command(flatten)]
        common: Common,
        /// Number of load steps.
        #[arg(long, default_value_t = 24)]
        steps: usize,
        /// Final twist in units of full turns.
        #[arg(long, default_value_t = 4.0)]
        turns: f64,
    },
    /// Loaded square with a hole, both gradient engines unless --grad is given.
    Bench5(Common),
    /// p-Laplacian on the L-shape.
    Bench6 {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3.0)]
        p: f64,
        /// Constant right-hand side.
        #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
        load: f64,
        #[arg(long, value_enum, default_value_t = NormArg::Componentwise)]
        norm: NormArg,
    },
}

#[derive(Args)]
struct Common {
    /// Single refinement level.
    #[arg(long, conflicts_with = "levels")]
    level: Option<usize>,
    /// Comma-separated refinement levels.
    #[arg(long, value_delimiter = ',')]
    levels: Vec<usize>,
    #[arg(long, value_enum, default_value_t = SolverArg::Tr)]
    solver: SolverArg,
    /// Gradient engine; each benchmark has its own default.
    #[arg(long, value_enum)]
    grad: Option<GradArg>,
    /// Central-difference step of the numeric gradient.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, value_enum, default_value_t = HessianArg::Free)]
    hessian: HessianArg,
    /// Timing repeats for benchmarks 2 and 3.
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Write the report and its configuration as CSV files into --out-dir.
    #[arg(long)]
    csv: bool,
    /// Write VTK files of solutions into --out-dir.
    #[arg(long)]
    vtk: bool,
    /// Write each mesh in plain text into --out-dir.
    #[arg(long)]
    dump_mesh: bool,
    /// Solver progress on standard error.
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Tr,
    Lbfgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum GradArg {
    Exact,
    Numeric,
}

#[derive(Clone, Copy, ValueEnum)]
enum HessianArg {
    /// Hessian-vector products from differenced gradients.
    Free,
    /// Explicit Hessian by colored differences.
    Colored,
    /// Explicit Hessian with a Jacobi-scaled trust region.
    Jacobi,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    Euclidean,
    Componentwise,
}

impl Common {
    fn levels(&self, default: &[usize]) -> Vec<usize> {
        match (self.level, self.levels.is_empty()) {
            (Some(l), _) => vec![l],
            (None, false) => self.levels.clone(),
            (None, true) => default.to_vec(),
        }
    }

    fn options(&self) -> Result<BenchOptions> {
        let mut opts = BenchOptions::default();
        opts.solve.solver = match self.solver {
            SolverArg::Tr => Solver::TrustRegion,
            SolverArg::Lbfgs => Solver::Lbfgs,
        };
        opts.solve.hessian = match self.hessian {
            HessianArg::Free => HessianMode::Free,
            HessianArg::Colored => HessianMode::Colored { jacobi: false },
            HessianArg::Jacobi => HessianMode::Colored { jacobi: true },
        };
        if let Some(m) = self.max_iters {
            opts.solve.max_iters = m;
        }
        opts.solve.verbose = self.verbose;
        opts.gradient = self.grad.map(|g| match g {
            GradArg::Exact => GradientMode::Exact,
            GradArg::Numeric => GradientMode::Numeric,
        });
        if let Some(eps) = self.eps {
            if !(eps > 0.0) {
                bail!("--eps must be positive");
            }
            opts.eps = Some(eps);
        }
        opts.repeats = self.repeats;
        if self.vtk {
            opts.vtk_dir = Some(self.out_dir.clone());
        }
        Ok(opts)
    }

    fn prepare_out_dir(&self) -> Result<()> {
        if self.csv || self.vtk || self.dump_mesh {
            fs::create_dir_all(&self.out_dir)
                .with_context(|| format!("creating {}", self.out_dir.display()))?;
        }
        Ok(())
    }

    fn dump_meshes(&self, name: &str, levels: &[usize], build: impl Fn(usize) -> patchfem::Result<Mesh>) -> Result<()> {
        if !self.dump_mesh {
            return Ok(());
        }
        for &level in levels {
            let path = self.out_dir.join(format!("{name}_level{level}.mesh"));
            let mesh = build(level)?;
            mesh.write_text(BufWriter::new(File::create(&path)?))
                .with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

fn emit(report: &BenchmarkReport, common: &Common) -> Result<()> {
    report.write_csv(io::stdout().lock())?;
    if common.csv {
        write_file(&common.out_dir.join(format!("{}.csv", report.id)), |w| report.write_csv(w))?;
        write_file(&common.out_dir.join(format!("{}_config.csv", report.id)), |w| report.write_config_csv(w))?;
    }
    Ok(())
}

fn write_file(path: &Path, write: impl FnOnce(BufWriter<File>) -> patchfem::Result<()>) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write(BufWriter::new(file)).with_context(|| format!("writing {}", path.display()))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let verbose = match &cli.command {
        Command::Bench1(c) | Command::Bench5(c) => c.verbose,
        Command::Bench2 { common, .. }
        | Command::Bench3 { common, .. }
        | Command::Bench4 { common, .. }
        | Command::Bench6 { common, .. } => common.verbose,
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if verbose { "info" } else { "warn" }))
        .init();

    let full_turn = bench::FULL_TURN;
    match &cli.command {
        Command::Bench1(c) => {
            c.prepare_out_dir()?;
            let levels = c.levels(&[1, 2, 3]);
            c.dump_meshes("bar", &levels, bench::bar_mesh)?;
            emit(&bench::bench1(&levels)?, c)
        }
        Command::Bench2 { common: c, turns } => {
            c.prepare_out_dir()?;
            let levels = c.levels(&[1, 2, 3, 4]);
            c.dump_meshes("bar", &levels, bench::bar_mesh)?;
            emit(&bench::bench2(&levels, turns * full_turn, &c.options()?)?, c)
        }
        Command::Bench3 { common: c, turns } => {
            c.prepare_out_dir()?;
            let levels = c.levels(&[1, 2, 3]);
            c.dump_meshes("bar", &levels, bench::bar_mesh)?;
            emit(&bench::bench3(&levels, turns * full_turn, &c.options()?)?, c)
        }
        Command::Bench4 { common: c, steps, turns } => {
            c.prepare_out_dir()?;
            let levels = c.levels(&[1]);
            c.dump_meshes("bar", &levels, bench::bar_mesh)?;
            let opts = c.options()?;
            for &level in &levels {
                emit(&bench::bench4(level, *steps, turns * full_turn, &opts)?, c)?;
            }
            Ok(())
        }
        Command::Bench5(c) => {
            c.prepare_out_dir()?;
            let levels = c.levels(&[1, 2, 3]);
            c.dump_meshes("hole", &levels, bench::hole_mesh)?;
            emit(&bench::bench5(&levels, &c.options()?)?, c)
        }
        Command::Bench6 { common: c, p, load, norm } => {
            c.prepare_out_dir()?;
            let levels = c.levels(&[1, 2, 3, 4, 5, 6]);
            c.dump_meshes("lshape", &levels, bench::lshape_mesh)?;
            let norm = match norm {
                NormArg::Euclidean => GradientNorm::Euclidean,
                NormArg::Componentwise => GradientNorm::Componentwise,
            };
            let setup = PLaplaceProblem { p: *p, load: *load, norm };
            emit(&bench::bench6(&levels, setup, &c.options()?)?, c)
        }
    }
}
