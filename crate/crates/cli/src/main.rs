use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mpgmres::bench::{
    run_experiment, spmv_bench, sweep_restart, sweep_rhs, sweep_switch_point, write_restart_csv, write_rhs_csv,
    write_spmv_csv, SolveSetup, SpmvBenchOptions, System, DEFAULT_REPS, DEFAULT_TRIALS, DEFAULT_WARMUP,
};
use mpgmres::gen::{RhsSpec, StencilSpec};
use mpgmres::io::{load_run_config, MatrixSource, PrecondSpec, RunConfig};
use mpgmres::SolverKind;

#[derive(Parser)]
#[command(name = "mpgmres", version, about = "Mixed-precision GMRES experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one system and write convergence.csv and summary.csv
    Solve(SolveArgs),
    /// GMRES-FD at every m-th switch point, with fp64 and GMRES-IR baselines
    SweepSwitch(SweepSwitchArgs),
    /// fp64 and GMRES-IR across restart lengths
    SweepRestart(SweepRestartArgs),
    /// fp64 and GMRES-IR across right-hand-side kinds
    SweepRhs(SweepRhsArgs),
    /// fp64 vs fp32 SpMV timing with the model prediction
    SpmvBench(SpmvArgs),
}

#[derive(Args)]
struct ProblemArgs {
    /// Run configuration file (key=value); flags given here override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Matrix Market file
    #[arg(long, conflicts_with = "gen")]
    matrix: Option<PathBuf>,
    /// Generated problem, e.g. laplace2d:50 or convdiff2d:100:10
    #[arg(long)]
    gen: Option<StencilSpec>,
    /// Restart length
    #[arg(long)]
    m: Option<usize>,
    /// Relative residual tolerance
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// none, jacobi:K or poly:D
    #[arg(long)]
    precond: Option<PrecondSpec>,
    /// Apply reverse Cuthill-McKee reordering
    #[arg(long)]
    rcm: bool,
    /// ones, uniform, normal or file:PATH
    #[arg(long)]
    rhs: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSV files
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// double, single, ir or fd
    #[arg(long)]
    solver: Option<SolverKind>,
    /// fp32 iterations before switching to fp64 (fd only)
    #[arg(long)]
    switch_iter: Option<usize>,
    /// Allow solver=single with tol below 1e-6
    #[arg(long)]
    allow_low_tol: bool,
}

#[derive(Args)]
struct SweepSwitchArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Last switch point; points run 0, m, 2m, ... up to it (default 10m)
    #[arg(long)]
    switch_iter: Option<usize>,
}

#[derive(Args)]
struct SweepRestartArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Restart lengths
    #[arg(long, value_delimiter = ',', default_value = "25,50,100")]
    restarts: Vec<usize>,
}

#[derive(Args)]
struct SweepRhsArgs {
    #[command(flatten)]
    problem: ProblemArgs,
}

#[derive(Args)]
struct SpmvArgs {
    /// Matrix Market files (repeatable)
    #[arg(long)]
    matrix: Vec<PathBuf>,
    /// Generated problems (repeatable)
    #[arg(long)]
    gen: Vec<StencilSpec>,
    #[arg(long, default_value_t = DEFAULT_REPS)]
    reps: usize,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = DEFAULT_WARMUP)]
    warmup: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ProblemArgs {
    fn config(&self, solver: SolverKind) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_run_config(path).with_context(|| format!("reading {}", path.display()))?,
            None => {
                let Some(matrix) = self.matrix_source() else {
                    bail!("one of --matrix, --gen or --config is required");
                };
                RunConfig::new(matrix, solver)
            }
        };
        if let Some(matrix) = self.matrix_source() {
            cfg.matrix = matrix;
        }
        if let Some(m) = self.m {
            cfg.m = m;
        }
        if let Some(tol) = self.tol {
            cfg.rtol = tol;
        }
        if let Some(k) = self.max_iters {
            cfg.max_iters = k;
        }
        if let Some(p) = self.precond {
            cfg.precond = p;
        }
        cfg.rcm |= self.rcm;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            cfg.rhs.seed = seed;
        }
        if let Some(rhs) = &self.rhs {
            cfg.rhs = RhsSpec::parse(rhs, cfg.seed)?;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = Some(out.clone());
        }
        Ok(cfg)
    }

    fn matrix_source(&self) -> Option<MatrixSource> {
        match (&self.matrix, &self.gen) {
            (Some(p), _) => Some(MatrixSource::File(p.clone())),
            (None, Some(g)) => Some(MatrixSource::Generator(*g)),
            (None, None) => None,
        }
    }
}

fn out_dir(cfg_out: &Option<PathBuf>) -> Result<PathBuf> {
    let dir = cfg_out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

fn solve(args: &SolveArgs) -> Result<()> {
    let mut cfg = args.problem.config(args.solver.unwrap_or(SolverKind::Double))?;
    if let Some(s) = args.solver {
        cfg.solver = s;
    }
    if args.switch_iter.is_some() {
        cfg.switch_iter = args.switch_iter;
    }
    cfg.allow_low_tol |= args.allow_low_tol;
    cfg.out_dir = Some(out_dir(&cfg.out_dir)?);
    let outcome = run_experiment(&cfg)?;
    let r = &outcome.report;
    println!(
        "{} solver={} precond={} n={} nnz={}",
        outcome.summary.name, cfg.solver, cfg.precond, outcome.summary.n, outcome.summary.nnz
    );
    println!(
        "converged={} iters={} (fp32 {}, fp64 {}) relres={:.3e} time={:.4}s loss_of_accuracy={}",
        r.converged, r.total_iters, r.iters_fp32, r.iters_fp64, r.final_relres, r.solve_time, r.loss_of_accuracy
    );
    if let Some(at) = r.stalled_at {
        println!("stall detected at iteration {at}");
    }
    let dir = cfg.out_dir.as_ref().expect("set above");
    announce(&dir.join("convergence.csv"));
    announce(&dir.join("summary.csv"));
    Ok(())
}

fn sweep_setup(problem: &ProblemArgs) -> Result<(RunConfig, System, SolveSetup)> {
    let cfg = problem.config(SolverKind::Double)?;
    let sys = System::from_config(&cfg)?;
    let setup = SolveSetup::from_config(&cfg)?;
    Ok((cfg, sys, setup))
}

fn sweep_switch(args: &SweepSwitchArgs) -> Result<()> {
    let (cfg, mut sys, setup) = sweep_setup(&args.problem)?;
    let m = setup.criteria.m;
    let last = args.switch_iter.unwrap_or(10 * m);
    let points: Vec<usize> = (0..=last / m).map(|k| k * m).collect();
    let sweep = sweep_switch_point(&mut sys, &setup, &points)?;
    println!("fp64: {} iters, GMRES-IR: {} iters", sweep.double.total_iters, sweep.ir.total_iters);
    for (s, r) in &sweep.points {
        println!("switch {s:>6}: total {:>6} ({} fp32 + {} fp64) converged={}", r.total_iters, r.iters_fp32, r.iters_fp64, r.converged);
    }
    let path = out_dir(&cfg.out_dir)?.join("sweep_switch.csv");
    sweep.write_csv(&path)?;
    announce(&path);
    Ok(())
}

fn sweep_restarts(args: &SweepRestartArgs) -> Result<()> {
    let (cfg, mut sys, setup) = sweep_setup(&args.problem)?;
    let rows = sweep_restart(&mut sys, &setup, &args.restarts)?;
    for row in &rows {
        println!(
            "m={:>4}: fp64 {} iters {:.4}s, IR {} iters {:.4}s, speedup {:.2}",
            row.m, row.double.total_iters, row.double.time_s, row.ir.total_iters, row.ir.time_s, row.speedup()
        );
    }
    let path = out_dir(&cfg.out_dir)?.join("sweep_restart.csv");
    write_restart_csv(&rows, &path)?;
    announce(&path);
    Ok(())
}

fn sweep_rhs_kinds(args: &SweepRhsArgs) -> Result<()> {
    let (cfg, sys, setup) = sweep_setup(&args.problem)?;
    let mut kinds = vec![RhsSpec::ones(), RhsSpec::uniform(cfg.seed), RhsSpec::normal(cfg.seed)];
    if let Some(rhs) = &args.problem.rhs {
        let extra = RhsSpec::parse(rhs, cfg.seed)?;
        if !kinds.contains(&extra) {
            kinds.push(extra);
        }
    }
    let rows = sweep_rhs(&sys, &setup, &kinds)?;
    for row in &rows {
        println!(
            "{:<10} fp64 {} iters, IR {} iters, speedup {:.2}",
            row.rhs, row.double.total_iters, row.ir.total_iters, row.speedup()
        );
    }
    let path = out_dir(&cfg.out_dir)?.join("sweep_rhs.csv");
    write_rhs_csv(&rows, &path)?;
    announce(&path);
    Ok(())
}

fn spmv(args: &SpmvArgs) -> Result<()> {
    let mut sources: Vec<MatrixSource> = args.matrix.iter().cloned().map(MatrixSource::File).collect();
    sources.extend(args.gen.iter().copied().map(MatrixSource::Generator));
    if sources.is_empty() {
        bail!("spmv-bench needs at least one --matrix or --gen");
    }
    let opts = SpmvBenchOptions {
        reps: args.reps,
        trials: args.trials,
        warmup: args.warmup,
        seed: args.seed,
    };
    let mut rows = Vec::new();
    for src in &sources {
        let a = src.load()?;
        let r = spmv_bench(&a, &src.name(), &opts)?;
        println!(
            "{}: n={} nnz={} max_nnz_row={} fp64 {:.3e}s fp32 {:.3e}s speedup {:.2} (model {:.2}) {}",
            r.name,
            r.n,
            r.nnz,
            r.max_nnz_row,
            r.t_fp64,
            r.t_fp32,
            r.measured_speedup,
            r.predicted,
            r.quadrant.as_str()
        );
        rows.push(r);
    }
    let path = out_dir(&args.out)?.join("spmv_bench.csv");
    write_spmv_csv(&rows, &path)?;
    announce(&path);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => solve(a),
        Command::SweepSwitch(a) => sweep_switch(a),
        Command::SweepRestart(a) => sweep_restarts(a),
        Command::SweepRhs(a) => sweep_rhs_kinds(a),
        Command::SpmvBench(a) => spmv(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
