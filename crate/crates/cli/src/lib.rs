use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hlsp::admm::AdmmConfig;
use hlsp::bench::{self, ExperimentConfig, Solver};
use hlsp::gradient::x_jacobian_b;
use hlsp::ipm::IpmConfig;
use hlsp::problem::{generate_full_rank_hierarchy, generate_random_hierarchy, load_problem, save_problem};

#[derive(Parser, Debug)]
#[command(name = "hlsp", version, about = "Hierarchical least-squares solvers and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a random hierarchy to a problem file.
    Generate {
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Skip the dependent-row substitution.
        #[arg(long)]
        full_rank: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one problem file and print the report.
    Solve {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, value_enum, default_value_t = SolverArg::Dhadm)]
        solver: SolverArg,
        #[command(flatten)]
        tol: Tolerances,
    },
    /// Run a randomized suite and write one CSV row per solve.
    Bench {
        #[arg(long, default_value_t = 1)]
        p_min: usize,
        #[arg(long, default_value_t = 10)]
        p_max: usize,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [SolverArg::Dhadm, SolverArg::Dhipm, SolverArg::Baseline])]
        solvers: Vec<SolverArg>,
        #[arg(long)]
        full_rank: bool,
        #[command(flatten)]
        tol: Tolerances,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the Jacobian of x with respect to the stacked b vectors as CSV.
    Gradient {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Tolerances {
    /// ADMM termination tolerance.
    #[arg(long)]
    chi: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Interior-point termination tolerance.
    #[arg(long)]
    ipm_chi: Option<f64>,
}

impl Tolerances {
    fn admm(&self) -> AdmmConfig {
        let mut c = AdmmConfig::default();
        if let Some(chi) = self.chi {
            c.chi = chi;
        }
        if let Some(n) = self.max_iters {
            c.max_iters = n;
        }
        c
    }

    fn ipm(&self) -> IpmConfig {
        let mut c = IpmConfig::default();
        if let Some(chi) = self.ipm_chi {
            c.chi = chi;
        }
        c
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SolverArg {
    Dhadm,
    Dhipm,
    Baseline,
}

impl From<SolverArg> for Solver {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Dhadm => Solver::Dhadm,
            SolverArg::Dhipm => Solver::Dhipm,
            SolverArg::Baseline => Solver::Baseline,
        }
    }
}

fn run(cmd: Command, out: &mut dyn Write) -> hlsp::Result<()> {
    match cmd {
        Command::Generate { p, seed, full_rank, out: path } => {
            let prob = if full_rank { generate_full_rank_hierarchy(p, seed)? } else { generate_random_hierarchy(p, seed)? };
            save_problem(&prob, &path)?;
            writeln!(out, "wrote p={p} hierarchy to {}", path.display())?;
        }
        Command::Solve { problem, solver, tol } => {
            let prob = load_problem(&problem)?;
            let rep = bench::run_solver(&prob, solver.into(), &tol.admm(), &tol.ipm())?;
            writeln!(out, "solver      {}", Solver::from(solver))?;
            writeln!(out, "{rep}")?;
        }
        Command::Bench { p_min, p_max, reps, seed, solvers, full_rank, tol, out: path } => {
            let cfg = ExperimentConfig {
                p_min,
                p_max,
                reps,
                seed,
                solvers: solvers.into_iter().map(Solver::from).collect(),
                full_rank,
                admm: tol.admm(),
                ipm: tol.ipm(),
                threads: None,
            };
            let recs = bench::run_suite(&cfg)?;
            bench::emit_csv(&recs, &path)?;
            let failed = recs.iter().filter(|r| r.status.starts_with("error")).count();
            writeln!(out, "wrote {} records ({failed} failed) to {}", recs.len(), path.display())?;
        }
        Command::Gradient { problem, out: path } => {
            let prob = load_problem(&problem)?;
            let jac = x_jacobian_b(&prob, &IpmConfig::default())?;
            let mut text = String::new();
            let cols: Vec<String> = (0..prob.p())
                .flat_map(|l| (0..prob.m(l)).map(move |r| format!("b_{}_{}", l + 1, r + 1)))
                .collect();
            text.push_str(&format!("x,{}\n", cols.join(",")));
            for i in 0..jac.nrows() {
                let row: Vec<String> = jac.row(i).iter().map(|v| format!("{v:.16e}")).collect();
                text.push_str(&format!("x_{},{}\n", i + 1, row.join(",")));
            }
            match path {
                Some(p) => std::fs::write(p, text)?,
                None => out.write_all(text.as_bytes())?,
            }
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    match run(cli.command, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
