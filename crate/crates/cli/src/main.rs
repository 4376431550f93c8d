use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use qcbp::io::{write_history, write_instance_with, MANIFEST_FILE};
use qcbp::{
    generate, read_instance, solve, GeneratorParams, SolveReport, SolveStatus, SolverConfig,
};

const EXIT_USAGE: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_DIVERGED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "qcbp",
    version,
    about = "ADMM solver for quadratically constrained basis pursuit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance and write it to a directory.
    Generate(GenerateArgs),
    /// Solve an instance read from a manifest.
    Solve(SolveArgs),
    /// Generate and solve instances of several sizes and report timings as CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Signal dimension.
    #[arg(long)]
    d: usize,
    /// Fraction of nonzero entries in the ground truth.
    #[arg(long)]
    ps: f64,
    /// Measurements as a fraction of d.
    #[arg(long)]
    pm: f64,
    /// Noise level.
    #[arg(long)]
    eta: f64,
    #[arg(long)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Scale the noise to 0.99·eta so the ground truth is strictly feasible.
    #[arg(long)]
    strict_interior: bool,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = SolverConfig::default().rho)]
    rho: f64,
    #[arg(long, default_value_t = SolverConfig::default().max_iter)]
    max_iter: usize,
    #[arg(long, default_value_t = SolverConfig::default().eps_p)]
    eps_p: f64,
    #[arg(long, default_value_t = SolverConfig::default().eps_d)]
    eps_d: f64,
    #[arg(long, default_value_t = SolverConfig::default().eps_gap)]
    eps_gap: f64,
    /// Residual balancing of rho.
    #[arg(long)]
    adaptive_rho: bool,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            rho: self.rho,
            max_iter: self.max_iter,
            eps_p: self.eps_p,
            eps_d: self.eps_d,
            eps_gap: self.eps_gap,
            adaptive_rho: self.adaptive_rho,
            ..SolverConfig::default()
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Manifest file or the directory holding it.
    #[arg(long)]
    problem: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    /// Write the per-iteration history as CSV.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated signal dimensions.
    #[arg(long, value_delimiter = ',', default_value = "100,400,1600")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 0.4)]
    ps: f64,
    #[arg(long, default_value_t = 0.05)]
    pm: f64,
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the table to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

/// Error carrying the process exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            code: EXIT_USAGE,
            error: e.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a).map(|()| 0),
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<(), Failure> {
    let params = GeneratorParams::new(a.d, a.ps, a.pm, a.eta, a.seed)
        .with_strict_interior(a.strict_interior);
    let instance = generate(&params)?;
    write_instance_with(&instance, &a.out, Some(&params))
        .with_context(|| format!("writing instance to {}", a.out.display()))?;
    println!("manifest: {}", a.out.join(MANIFEST_FILE).display());
    println!("d: {}", instance.d());
    println!("m: {}", instance.m());
    println!("k: {}", params.sparsity());
    println!("eta: {}", instance.eta);
    Ok(())
}

fn status_code(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Converged => 0,
        SolveStatus::MaxIterReached => EXIT_NOT_CONVERGED,
        SolveStatus::Diverged => EXIT_DIVERGED,
    }
}

fn print_report(rep: &SolveReport) {
    let f = &rep.final_record;
    println!("status: {}", rep.status);
    println!("iterations: {}", rep.iterations);
    println!("objective: {:.10}", rep.objective());
    println!("r_p: {:.3e}", f.r_p);
    println!("r_d: {:.3e}", f.r_d);
    println!("gap: {:.3e}", f.gap);
    if let Some(c) = &rep.certificate {
        println!("dual_objective: {:.10}", c.dual_objective);
        println!("certified_gap: {:.3e}", c.gap);
    }
    println!(
        "factorization_time_sec: {:.6}",
        rep.factorization_time.as_secs_f64()
    );
    println!("total_time_sec: {:.6}", rep.total_time().as_secs_f64());
}

fn cmd_solve(a: SolveArgs) -> Result<u8, Failure> {
    let instance = read_instance(&a.problem)?;
    let rep = solve(&instance, &a.solver.config())?;
    print_report(&rep);
    if let Some(path) = &a.history {
        write_history(&rep, path)?;
    }
    Ok(status_code(rep.status))
}

struct BenchRow {
    d: usize,
    m: usize,
    iterations: usize,
    time_sec: f64,
    status: SolveStatus,
    objective: f64,
    gap: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

// Cells run one after another so that timings do not compete for cores.
fn bench_size(a: &BenchArgs, d: usize) -> Result<BenchRow, Failure> {
    let params = GeneratorParams::new(d, a.ps, a.pm, a.eta, a.seed);
    let instance = generate(&params)?;
    let config = a.solver.config();
    let mut times = Vec::with_capacity(a.repeats);
    let mut last = None;
    for _ in 0..a.repeats {
        let rep = solve(&instance, &config)?;
        times.push(rep.total_time().as_secs_f64());
        last = Some(rep);
    }
    let rep = last.expect("repeats is at least 1");
    Ok(BenchRow {
        d,
        m: instance.m(),
        iterations: rep.iterations,
        time_sec: median(times),
        status: rep.status,
        objective: rep.objective(),
        gap: rep.certificate.map_or(rep.final_record.gap, |c| c.gap),
    })
}

fn cmd_bench(a: BenchArgs) -> Result<u8, Failure> {
    if a.repeats == 0 {
        return Err(anyhow::anyhow!("--repeats must be at least 1").into());
    }
    let mut table = String::from("d,m,iterations,time_sec,status,objective,gap\n");
    println!("d,m,iterations,time_sec,status,objective,gap");
    let mut failed = Vec::new();
    for &d in &a.sizes {
        let r = bench_size(&a, d)?;
        let line = format!(
            "{},{},{},{:.6},{},{},{}",
            r.d, r.m, r.iterations, r.time_sec, r.status, r.objective, r.gap
        );
        println!("{line}");
        let _ = writeln!(table, "{line}");
        if r.status != SolveStatus::Converged {
            failed.push(format!("d={} ({})", r.d, r.status));
        }
    }
    if let Some(path) = &a.out {
        std::fs::write(path, &table).with_context(|| format!("writing {}", path.display()))?;
    }
    if failed.is_empty() {
        Ok(0)
    } else {
        Err(Failure {
            code: EXIT_NOT_CONVERGED,
            error: anyhow::anyhow!("not converged: {}", failed.join(", ")),
        })
    }
}
