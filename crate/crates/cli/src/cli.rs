//! Command-line interface.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sweptgrid::{run, EngineKind, ProblemKind, SolverConfig};

use crate::config::{read_json, LinkArgs, SolveArgs};
use crate::render::render_csv;
use crate::sweep::{run_sweep, SweepSpec};
use crate::verify::{verify_euler, verify_heat, verify_uniform};
use crate::weak::{run_weak_scaling, WeakSpec};

#[derive(Debug, Parser)]
#[command(name = "sweptgrid", version, about = "Swept and halo-exchange stencil solvers with a benchmark harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one solve and print its record as JSON.
    Run(SolveArgs),
    /// Sweep array size, block size and share; write CSV and heatmaps.
    Sweep(SweepArgs),
    /// Time per step against rank count at fixed points per rank.
    WeakScaling(WeakArgs),
    /// Compare against the analytic solution on a refinement ladder.
    Verify(VerifyArgs),
    /// Render heatmaps from a sweep CSV.
    Render(RenderArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    /// JSON sweep settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub problem: Option<Vec<ProblemKind>>,
    #[arg(long, value_delimiter = ',')]
    pub nx: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub block: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub share: Option<Vec<f64>>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub ranks: Option<usize>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[command(flatten)]
    pub link: LinkArgs,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Use the full-size arrays (320..1120) instead of the desk-scale ones.
    #[arg(long = "full-scale")]
    pub full_scale: bool,
}

impl SweepArgs {
    pub fn resolve(&self) -> anyhow::Result<SweepSpec> {
        let mut s: SweepSpec = match &self.config {
            Some(p) => read_json(p)?,
            None => SweepSpec::default(),
        };
        if self.full_scale {
            s = s.full_scale();
        }
        if let Some(v) = &self.problem {
            s.problems = v.clone();
        }
        if let Some(v) = &self.nx {
            s.arrays = v.clone();
        }
        if let Some(v) = &self.block {
            s.blocks = v.clone();
        }
        if let Some(v) = &self.share {
            s.shares = v.clone();
        }
        if let Some(v) = self.steps {
            s.steps = v;
        }
        if let Some(v) = self.ranks {
            s.ranks = v;
        }
        if let Some(v) = self.repetitions {
            s.repetitions = v;
        }
        self.link.apply_transport(&mut s.transport);
        self.link.apply_pools(&mut s.pool_a, &mut s.pool_b, &mut s.cell_seconds);
        if let Some(o) = &self.out {
            s.out = o.clone();
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct WeakArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub problem: Option<Vec<ProblemKind>>,
    /// Rank counts, e.g. 1,2,3,4.
    #[arg(long, value_delimiter = ',')]
    pub ranks: Option<Vec<usize>>,
    #[arg(long = "points-per-rank")]
    pub points_per_rank: Option<f64>,
    #[arg(long)]
    pub block: Option<usize>,
    #[arg(long)]
    pub share: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[command(flatten)]
    pub link: LinkArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl WeakArgs {
    pub fn resolve(&self) -> anyhow::Result<WeakSpec> {
        let mut s: WeakSpec = match &self.config {
            Some(p) => read_json(p)?,
            None => WeakSpec::default(),
        };
        if let Some(v) = &self.problem {
            s.problems = v.clone();
        }
        if let Some(v) = &self.ranks {
            s.ranks = v.clone();
        }
        if let Some(v) = self.points_per_rank {
            s.points_per_rank = v;
        }
        if let Some(v) = self.block {
            s.block = v;
        }
        if let Some(v) = self.share {
            s.share = v;
        }
        if let Some(v) = self.steps {
            s.steps = v;
        }
        self.link.apply_transport(&mut s.transport);
        self.link.apply_pools(&mut s.pool_a, &mut s.pool_b, &mut s.cell_seconds);
        if let Some(o) = &self.out {
            s.out = o.clone();
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum VerifyProblem {
    Heat,
    Euler,
    Uniform,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub problem: VerifyProblem,
    /// Refinement ladder; defaults to 32,64,128 for heat and 64,128,256 otherwise.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Heat: steps on the coarsest grid. Uniform: steps on every grid.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Euler: final time.
    #[arg(long)]
    pub time: Option<f64>,
    #[arg(long, default_value = "standard")]
    pub engine: EngineKind,
    #[arg(long)]
    pub block: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub ranks: usize,
}

#[derive(Debug, Clone, Args)]
pub struct RenderArgs {
    /// Sweep CSV.
    #[arg(long)]
    pub csv: PathBuf,
    /// Column to plot.
    #[arg(long, default_value = "speedup")]
    pub metric: String,
    #[arg(long)]
    pub out: PathBuf,
}

/// Executes a parsed command. Returns `false` when a verification fails.
pub fn execute(cli: Cli, out: &mut dyn Write, log: &mut dyn Write) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run(args) => {
            let config = args.resolve()?;
            let result = run(&config)?;
            serde_json::to_writer_pretty(&mut *out, &result.record)?;
            writeln!(out)?;
            Ok(true)
        }
        Command::Sweep(args) => {
            let spec = args.resolve()?;
            for (nx, b) in spec.indivisible_pairs() {
                writeln!(log, "note: block {b} does not divide nx {nx}; those cells will be error rows")?;
            }
            let total = spec.cells().len();
            let mut done = 0;
            let summary = run_sweep(&spec, |row| {
                done += 1;
                let s = row.speedup.map(|v| format!("{v:.3}")).unwrap_or_else(|| "error".into());
                let _ = writeln!(
                    log,
                    "[{done}/{total}] {} nx={} b={} share={:.1}: speedup {s}",
                    row.problem, row.nx, row.b, row.share
                );
            })?;
            let maps = render_csv(&spec.csv_path(), "speedup", &spec.out)?;
            writeln!(
                out,
                "{} cells run, {} skipped, {} failed; {} and {} heatmaps in {}",
                summary.ran,
                summary.skipped,
                summary.failed,
                spec.csv_path().display(),
                maps.len(),
                spec.out.display()
            )?;
            Ok(true)
        }
        Command::WeakScaling(args) => {
            let spec = args.resolve()?;
            let rows = run_weak_scaling(&spec, |r| {
                let _ = writeln!(
                    log,
                    "{} {} ranks={} nx={}: {:.3e} s/step",
                    r.problem, r.engine, r.ranks, r.nx, r.seconds_per_step
                );
            })?;
            writeln!(out, "{} rows in {}", rows.len(), spec.out.join("weak_scaling.csv").display())?;
            Ok(true)
        }
        Command::Verify(args) => {
            let mut base = SolverConfig {
                engine: args.engine,
                ranks: args.ranks,
                ..Default::default()
            };
            if let Some(b) = args.block {
                base.block = b;
            }
            let report = match args.problem {
                VerifyProblem::Heat => {
                    let sizes = args.sizes.unwrap_or_else(|| vec![32, 64, 128]);
                    verify_heat(&sizes, &base, args.steps.unwrap_or(14))?
                }
                VerifyProblem::Euler => {
                    let sizes = args.sizes.unwrap_or_else(|| vec![64, 128, 256]);
                    verify_euler(&sizes, &base, args.time.unwrap_or(0.5))?
                }
                VerifyProblem::Uniform => {
                    let sizes = args.sizes.unwrap_or_else(|| vec![64, 128, 256]);
                    verify_uniform(&sizes, args.steps.unwrap_or(10))?
                }
            };
            write!(out, "{}", report.table())?;
            Ok(report.passed)
        }
        Command::Render(args) => {
            let paths = render_csv(&args.csv, &args.metric, &args.out)?;
            for p in paths {
                writeln!(out, "{}", p.display())?;
            }
            Ok(true)
        }
    }
}
