//! Randomized benchmark suites and their CSV records.
//!
//! Columns: `p,solver,seed,status,time_ms,iters,residual,obj_1..obj_P,
//! refactors,t_kkt,t_rhs,t_solve,t_lambda,t_proj,t_dual`, where `P` is the
//! largest level count of the suite. Objective cells beyond a row's own `p`
//! are empty. Times are milliseconds.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::admm::{self, AdmmConfig};
use crate::baseline::solve_sequential;
use crate::error::{HlspError, Result};
use crate::ipm::{solve_ipm, IpmConfig};
use crate::problem::{generate_full_rank_hierarchy, generate_random_hierarchy, HlspProblem};
use crate::report::{PhaseTimings, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Solver {
    Dhadm,
    Dhipm,
    Baseline,
}

impl Solver {
    pub const ALL: [Solver; 3] = [Solver::Dhadm, Solver::Dhipm, Solver::Baseline];

    pub fn as_str(self) -> &'static str {
        match self {
            Solver::Dhadm => "dhadm",
            Solver::Dhipm => "dhipm",
            Solver::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Solver {
    type Err = HlspError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dhadm" => Ok(Solver::Dhadm),
            "dhipm" => Ok(Solver::Dhipm),
            "baseline" => Ok(Solver::Baseline),
            _ => Err(HlspError::Parse(format!("unknown solver `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub p_min: usize,
    pub p_max: usize,
    pub reps: usize,
    pub seed: u64,
    pub solvers: Vec<Solver>,
    /// Use the generator without dependent rows.
    pub full_rank: bool,
    pub admm: AdmmConfig,
    pub ipm: IpmConfig,
    /// Parallel cells; `None` reads `HLSP_THREADS` and falls back to rayon's default.
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            p_min: 1,
            p_max: 10,
            reps: 100,
            seed: 0,
            solvers: vec![Solver::Dhadm, Solver::Dhipm],
            full_rank: false,
            admm: AdmmConfig::default(),
            ipm: IpmConfig::default(),
            threads: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p_min < 1 || self.p_max < self.p_min {
            return Err(HlspError::InvalidP(self.p_min));
        }
        if self.reps < 1 {
            return Err(HlspError::Parse("reps must be at least 1".into()));
        }
        if self.solvers.is_empty() {
            return Err(HlspError::Parse("no solver selected".into()));
        }
        self.admm.validate()?;
        self.ipm.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub p: usize,
    pub solver: Solver,
    pub seed: u64,
    /// `converged`, `max_iterations` or `error: <message>`.
    pub status: String,
    pub time_ms: f64,
    pub iterations: usize,
    pub residual: f64,
    pub objectives: Vec<f64>,
    pub refactors: usize,
    /// kkt, rhs, solve, lambda, projection, dual (ms).
    pub phases: [f64; 6],
}

impl BenchRecord {
    fn from_report(p: usize, solver: Solver, seed: u64, rep: &SolveReport) -> Self {
        let t = &rep.timings;
        Self {
            p,
            solver,
            seed,
            status: rep.status.as_str().to_string(),
            time_ms: ms(rep.wall_time),
            iterations: rep.iterations,
            residual: rep.residual,
            objectives: rep.solution.per_level_objective.clone(),
            refactors: rep.factorizations,
            phases: [ms(t.kkt), ms(t.rhs), ms(t.solve), ms(t.lambda), ms(t.projection), ms(t.dual)],
        }
    }

    fn failed(p: usize, solver: Solver, seed: u64, err: &HlspError, elapsed: Duration) -> Self {
        Self {
            p,
            solver,
            seed,
            status: format!("error: {err}"),
            time_ms: ms(elapsed),
            iterations: 0,
            residual: f64::NAN,
            objectives: vec![f64::NAN; p],
            refactors: 0,
            phases: [0.0; 6],
        }
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Seed of repetition `rep` at level count `p`.
pub fn cell_seed(base: u64, p: usize, rep: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = ((p as u64) << 32 | rep as u64).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    base.wrapping_add(z ^ (z >> 31))
}

pub fn run_solver(problem: &HlspProblem, solver: Solver, admm_cfg: &AdmmConfig, ipm_cfg: &IpmConfig) -> Result<SolveReport> {
    match solver {
        Solver::Dhadm => admm::solve(problem, admm_cfg),
        Solver::Dhipm => solve_ipm(problem, ipm_cfg),
        Solver::Baseline => {
            let start = Instant::now();
            let solution = solve_sequential(problem)?;
            let wall_time = start.elapsed();
            Ok(SolveReport {
                residual: solution.kkt_residual,
                solution,
                status: crate::report::SolveStatus::Converged,
                iterations: problem.p(),
                factorizations: 0,
                timings: PhaseTimings { solve: wall_time, ..Default::default() },
                wall_time,
            })
        }
    }
}

fn run_cell(cfg: &ExperimentConfig, p: usize, rep: usize) -> Vec<BenchRecord> {
    let seed = cell_seed(cfg.seed, p, rep);
    let generated = if cfg.full_rank {
        generate_full_rank_hierarchy(p, seed)
    } else {
        generate_random_hierarchy(p, seed)
    };
    let problem = match generated {
        Ok(pr) => pr,
        Err(e) => {
            return cfg.solvers.iter().map(|&s| BenchRecord::failed(p, s, seed, &e, Duration::ZERO)).collect();
        }
    };
    cfg.solvers
        .iter()
        .map(|&s| {
            let start = Instant::now();
            match run_solver(&problem, s, &cfg.admm, &cfg.ipm) {
                Ok(rep) => BenchRecord::from_report(p, s, seed, &rep),
                Err(e) => BenchRecord::failed(p, s, seed, &e, start.elapsed()),
            }
        })
        .collect()
}

fn thread_count(cfg: &ExperimentConfig) -> Option<usize> {
    cfg.threads
        .or_else(|| std::env::var("HLSP_THREADS").ok().and_then(|s| s.trim().parse().ok()))
        .filter(|&n| n > 0)
}

/// Records in (p, rep, solver) order.
pub fn run_suite(cfg: &ExperimentConfig) -> Result<Vec<BenchRecord>> {
    cfg.validate()?;
    let cells: Vec<(usize, usize)> =
        (cfg.p_min..=cfg.p_max).flat_map(|p| (0..cfg.reps).map(move |r| (p, r))).collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(cfg) {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| HlspError::Parse(format!("thread pool: {e}")))?;
    let rows: Vec<Vec<BenchRecord>> = pool.install(|| cells.par_iter().map(|&(p, r)| run_cell(cfg, p, r)).collect());
    Ok(rows.into_iter().flatten().collect())
}

const PHASE_COLUMNS: [&str; 6] = ["t_kkt", "t_rhs", "t_solve", "t_lambda", "t_proj", "t_dual"];

fn header(levels: usize) -> Vec<String> {
    let mut h: Vec<String> =
        ["p", "solver", "seed", "status", "time_ms", "iters", "residual"].iter().map(|s| s.to_string()).collect();
    h.extend((1..=levels).map(|l| format!("obj_{l}")));
    h.push("refactors".into());
    h.extend(PHASE_COLUMNS.iter().map(|s| s.to_string()));
    h
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: std::io::Write>(records: &[BenchRecord], out: W) -> Result<()> {
    let levels = records.iter().map(|r| r.objectives.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(levels)).map_err(csv_err)?;
    for r in records {
        let mut row = vec![
            r.p.to_string(),
            r.solver.to_string(),
            r.seed.to_string(),
            r.status.clone(),
            num(r.time_ms),
            r.iterations.to_string(),
            num(r.residual),
        ];
        row.extend((0..levels).map(|l| r.objectives.get(l).map(|&o| num(o)).unwrap_or_default()));
        row.push(r.refactors.to_string());
        row.extend(r.phases.iter().map(|&t| num(t)));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(records: &[BenchRecord], path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(records, std::io::BufWriter::new(file))
}

fn csv_err(e: csv::Error) -> HlspError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => HlspError::Io(io),
        other => HlspError::Parse(format!("csv: {other:?}")),
    }
}

fn field<T: FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| HlspError::Parse(format!("bad `{name}` in row {:?}", rec.position().map(|p| p.line()))))
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<BenchRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let head = rd.headers().map_err(csv_err)?.clone();
    let levels = head.iter().filter(|h| h.starts_with("obj_")).count();
    if head.len() != 14 + levels {
        return Err(HlspError::Parse(format!("unexpected header {head:?}")));
    }
    let mut out = vec![];
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let p: usize = field(&rec, 0, "p")?;
        let solver: Solver = field(&rec, 1, "solver")?;
        let objectives = (0..levels)
            .filter(|&l| !rec.get(7 + l).unwrap_or("").is_empty())
            .map(|l| field(&rec, 7 + l, "obj"))
            .collect::<Result<Vec<f64>>>()?;
        let base = 7 + levels;
        let mut phases = [0.0; 6];
        for (k, t) in phases.iter_mut().enumerate() {
            *t = field(&rec, base + 1 + k, PHASE_COLUMNS[k])?;
        }
        out.push(BenchRecord {
            p,
            solver,
            seed: field(&rec, 2, "seed")?,
            status: rec.get(3).unwrap_or("").to_string(),
            time_ms: field(&rec, 4, "time_ms")?,
            iterations: field(&rec, 5, "iters")?,
            residual: field(&rec, 6, "residual")?,
            objectives,
            refactors: field(&rec, base, "refactors")?,
            phases,
        });
    }
    Ok(out)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<BenchRecord>> {
    read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
}
