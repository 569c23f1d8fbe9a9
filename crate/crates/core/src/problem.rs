//! Problem model: priority levels, validation, seeded generation, objectives
//! and the plain-text problem file format.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{HlspError, Result};

/// One priority level `A x = b` (in the least-squares sense).
#[derive(Debug, Clone, PartialEq)]
#[allow(non_snake_case)]
pub struct LevelData {
    pub A: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl LevelData {
    #[allow(non_snake_case)]
    pub fn new(A: DMatrix<f64>, b: DVector<f64>) -> Self {
        Self { A, b }
    }

    pub fn rows(&self) -> usize {
        self.A.nrows()
    }

    /// `b / 2`, the shift used by the duality constraint.
    pub fn b_hat(&self) -> DVector<f64> {
        &self.b * 0.5
    }
}

/// Ordered stack of levels; level 0 has the highest priority.
#[derive(Debug, Clone, PartialEq)]
pub struct HlspProblem {
    pub levels: Vec<LevelData>,
    pub n_x: usize,
}

impl HlspProblem {
    /// Builds and validates a problem.
    pub fn new(levels: Vec<LevelData>) -> Result<Self> {
        let n_x = levels.first().map(|l| l.A.ncols()).unwrap_or(0);
        let p = Self { levels, n_x };
        p.validate()?;
        Ok(p)
    }

    pub fn p(&self) -> usize {
        self.levels.len()
    }

    pub fn m(&self, l: usize) -> usize {
        self.levels[l].rows()
    }

    /// Number of rows of all levels above `l` (the size of that level's
    /// primal-dual block).
    pub fn n_dual(&self, l: usize) -> usize {
        self.levels[..l].iter().map(|lv| lv.rows()).sum()
    }

    pub fn total_rows(&self) -> usize {
        self.n_dual(self.p())
    }

    /// Whether level `l` carries a primal-dual block `λ_l` in the dual
    /// formulation (neither the first nor the last level does).
    pub fn has_lambda(&self, l: usize) -> bool {
        l >= 1 && l + 1 < self.p()
    }

    /// Rows of levels `0..l` stacked.
    pub fn stacked_a(&self, l: usize) -> DMatrix<f64> {
        stack_rows(self.levels[..l].iter().map(|lv| &lv.A), self.n_x)
    }

    pub fn stacked_b(&self, l: usize) -> DVector<f64> {
        let parts: Vec<f64> = self.levels[..l]
            .iter()
            .flat_map(|lv| lv.b.iter().copied())
            .collect();
        DVector::from_vec(parts)
    }

    pub fn validate(&self) -> Result<()> {
        validate_problem(self)
    }
}

/// Stack matrices with `ncols` columns vertically.
pub fn stack_rows<'a, I>(blocks: I, ncols: usize) -> DMatrix<f64>
where
    I: IntoIterator<Item = &'a DMatrix<f64>>,
{
    let blocks: Vec<&DMatrix<f64>> = blocks.into_iter().collect();
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, ncols);
    let mut r = 0;
    for b in blocks {
        out.rows_mut(r, b.nrows()).copy_from(b);
        r += b.nrows();
    }
    out
}

/// Checks the structural invariants and reports the first violation.
pub fn validate_problem(problem: &HlspProblem) -> Result<()> {
    if problem.levels.is_empty() {
        return Err(HlspError::EmptyHierarchy);
    }
    if problem.n_x == 0 {
        return Err(HlspError::DimensionMismatch("n_x must be positive".into()));
    }
    for (l, lv) in problem.levels.iter().enumerate() {
        if lv.A.nrows() == 0 {
            return Err(HlspError::DimensionMismatch(format!("level {} has no rows", l + 1)));
        }
        if lv.A.ncols() != problem.n_x {
            return Err(HlspError::DimensionMismatch(format!(
                "level {} has {} columns, expected {}",
                l + 1,
                lv.A.ncols(),
                problem.n_x
            )));
        }
        if lv.b.len() != lv.A.nrows() {
            return Err(HlspError::DimensionMismatch(format!(
                "level {}: b has length {}, A has {} rows",
                l + 1,
                lv.b.len(),
                lv.A.nrows()
            )));
        }
        if lv.A.iter().any(|v| !v.is_finite()) {
            return Err(HlspError::NonFiniteEntry(format!("A of level {}", l + 1)));
        }
        if lv.b.iter().any(|v| !v.is_finite()) {
            return Err(HlspError::NonFiniteEntry(format!("b of level {}", l + 1)));
        }
    }
    Ok(())
}

/// Random hierarchy with `n_x = p` and `m_l = l`, standard normal entries.
///
/// On every level with more than one row, `ceil(m_l / 2)` rows are replaced by
/// random combinations of the remaining rows plus relative noise of size 1e-12,
/// which makes half of the constraints (numerically) linearly dependent.
pub fn generate_random_hierarchy(p: usize, seed: u64) -> Result<HlspProblem> {
    generate(p, seed, true)
}

/// Same distribution as [`generate_random_hierarchy`] without the dependent
/// rows, so every level has full row rank.
pub fn generate_full_rank_hierarchy(p: usize, seed: u64) -> Result<HlspProblem> {
    generate(p, seed, false)
}

fn generate(p: usize, seed: u64, deficient: bool) -> Result<HlspProblem> {
    if p < 1 {
        return Err(HlspError::InvalidP(p));
    }
    let n = p;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut levels = Vec::with_capacity(p);
    for m in 1..=p {
        let mut a = DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n_dep = m.div_ceil(2);
        if deficient && m > 1 {
            let indep = a.rows(n_dep, m - n_dep).into_owned();
            for r in 0..n_dep {
                let c = DVector::from_fn(m - n_dep, |_, _| rng.sample::<f64, _>(StandardNormal));
                let mut row = indep.tr_mul(&c).transpose();
                let scale = row.norm() / (n as f64).sqrt();
                for v in row.iter_mut() {
                    *v += 1e-12 * scale * rng.random_range(-1.0..=1.0);
                }
                a.row_mut(r).copy_from(&row);
            }
        }
        let b = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        levels.push(LevelData::new(a, b));
    }
    HlspProblem::new(levels)
}

/// `[½‖A_l x − b_l‖²]` for every level.
pub fn objective_per_level(problem: &HlspProblem, x: &DVector<f64>) -> Result<Vec<f64>> {
    if x.len() != problem.n_x {
        return Err(HlspError::DimensionMismatch(format!(
            "x has length {}, expected {}",
            x.len(),
            problem.n_x
        )));
    }
    Ok(problem
        .levels
        .iter()
        .map(|lv| 0.5 * (&lv.A * x - &lv.b).norm_squared())
        .collect())
}

/// Solution of a hierarchy in the original variables.
#[derive(Debug, Clone, PartialEq)]
pub struct HlspSolution {
    pub x: DVector<f64>,
    /// Slack `v_l = A_l x − b_l` per level.
    pub v: Vec<DVector<f64>>,
    /// Primal-dual block per level; empty for levels without one.
    pub lambda: Vec<DVector<f64>>,
    pub per_level_objective: Vec<f64>,
    pub kkt_residual: f64,
}

impl HlspSolution {
    /// Builds a solution whose slacks and objectives are recomputed from `x`.
    pub fn from_x(
        problem: &HlspProblem,
        x: DVector<f64>,
        lambda: Vec<DVector<f64>>,
        kkt_residual: f64,
    ) -> Self {
        let v: Vec<DVector<f64>> = problem.levels.iter().map(|lv| &lv.A * &x - &lv.b).collect();
        let per_level_objective = v.iter().map(|vl| 0.5 * vl.norm_squared()).collect();
        Self { x, v, lambda, per_level_objective, kkt_residual }
    }
}

fn fmt17(v: f64) -> String {
    format!("{:.16e}", v)
}

/// Serializes `problem` in the line-oriented text format.
pub fn problem_to_string(problem: &HlspProblem) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} {}", problem.p(), problem.n_x);
    for lv in &problem.levels {
        let _ = writeln!(s, "{}", lv.rows());
        for r in 0..lv.rows() {
            let row: Vec<String> = lv.A.row(r).iter().map(|v| fmt17(*v)).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        let b: Vec<String> = lv.b.iter().map(|v| fmt17(*v)).collect();
        let _ = writeln!(s, "{}", b.join(" "));
    }
    s
}

fn parse_numbers(line: Option<&str>, what: &str) -> Result<Vec<f64>> {
    let line = line.ok_or_else(|| HlspError::Parse(format!("unexpected end of file reading {what}")))?;
    line.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| HlspError::Parse(format!("{what}: '{t}': {e}"))))
        .collect()
}

/// Parses the text format produced by [`problem_to_string`].
pub fn problem_from_str(text: &str) -> Result<HlspProblem> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = parse_numbers(lines.next(), "header")?;
    if head.len() != 2 {
        return Err(HlspError::Parse("header must be 'p n_x'".into()));
    }
    let (p, n_x) = (head[0] as usize, head[1] as usize);
    if p == 0 {
        return Err(HlspError::EmptyHierarchy);
    }
    let mut levels = Vec::with_capacity(p);
    for l in 0..p {
        let m = parse_numbers(lines.next(), "row count")?;
        if m.len() != 1 || m[0] < 0.0 || m[0].fract() != 0.0 {
            return Err(HlspError::Parse(format!("level {}: bad row count", l + 1)));
        }
        let m = m[0] as usize;
        let mut rows = Vec::with_capacity(m);
        for _ in 0..m {
            let row = parse_numbers(lines.next(), "matrix row")?;
            if row.len() != n_x {
                return Err(HlspError::DimensionMismatch(format!(
                    "level {}: row has {} entries, expected {}",
                    l + 1,
                    row.len(),
                    n_x
                )));
            }
            rows.push(row);
        }
        let b = parse_numbers(lines.next(), "right-hand side")?;
        if b.len() != m {
            return Err(HlspError::DimensionMismatch(format!(
                "level {}: b has {} entries, expected {}",
                l + 1,
                b.len(),
                m
            )));
        }
        let a = DMatrix::from_fn(m, n_x, |i, j| rows[i][j]);
        levels.push(LevelData::new(a, DVector::from_vec(b)));
    }
    if lines.next().is_some() {
        return Err(HlspError::Parse("trailing content after last level".into()));
    }
    let problem = HlspProblem { levels, n_x };
    problem.validate()?;
    Ok(problem)
}

pub fn save_problem(problem: &HlspProblem, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, problem_to_string(problem))?;
    Ok(())
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<HlspProblem> {
    problem_from_str(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(a: f64, b: f64) -> HlspProblem {
        HlspProblem::new(vec![LevelData::new(DMatrix::from_element(1, 1, a), DVector::from_element(1, b))]).unwrap()
    }

    #[test]
    fn minimal_problem_is_valid() {
        assert!(one(1.0, 1.0).validate().is_ok());
    }

    #[test]
    fn column_mismatch_is_rejected() {
        let levels = vec![
            LevelData::new(DMatrix::identity(2, 2), DVector::zeros(2)),
            LevelData::new(DMatrix::zeros(1, 3), DVector::zeros(1)),
        ];
        assert!(matches!(HlspProblem::new(levels), Err(HlspError::DimensionMismatch(_))));
    }

    #[test]
    fn nan_is_rejected() {
        let levels = vec![LevelData::new(DMatrix::identity(1, 1), DVector::from_element(1, f64::NAN))];
        assert!(matches!(HlspProblem::new(levels), Err(HlspError::NonFiniteEntry(_))));
    }

    #[test]
    fn empty_is_rejected() {
        assert!(matches!(HlspProblem::new(vec![]), Err(HlspError::EmptyHierarchy)));
        assert!(matches!(generate_random_hierarchy(0, 1), Err(HlspError::InvalidP(0))));
    }

    #[test]
    fn generator_shapes() {
        let p = generate_random_hierarchy(3, 9).unwrap();
        assert_eq!(p.n_x, 3);
        assert_eq!(p.levels.iter().map(|l| l.rows()).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(p.total_rows(), 6);
        let q = generate_random_hierarchy(1, 9).unwrap();
        assert_eq!(q.levels[0].A.shape(), (1, 1));
    }

    #[test]
    fn generator_is_deterministic() {
        assert_eq!(generate_random_hierarchy(6, 42).unwrap(), generate_random_hierarchy(6, 42).unwrap());
        assert_ne!(generate_random_hierarchy(6, 42).unwrap(), generate_random_hierarchy(6, 43).unwrap());
    }

    #[test]
    fn dependent_rows_are_close_to_span() {
        let p = generate_random_hierarchy(8, 5).unwrap();
        for lv in &p.levels[1..] {
            let m = lv.rows();
            let nd = m.div_ceil(2);
            let others = lv.A.rows(nd, m - nd).into_owned();
            let svd = others.transpose().svd(true, false);
            let u = svd.u.unwrap();
            for r in 0..nd {
                let row = lv.A.row(r).transpose();
                let resid = &row - &u * (u.transpose() * &row);
                assert!(resid.norm() <= 1e-12 * row.norm() * m as f64);
            }
        }
    }

    #[test]
    fn objectives() {
        let p = one(1.0, 2.0);
        assert_eq!(objective_per_level(&p, &DVector::from_element(1, 2.0)).unwrap(), vec![0.0]);
        assert_eq!(objective_per_level(&p, &DVector::from_element(1, 0.0)).unwrap(), vec![2.0]);
        assert!(objective_per_level(&p, &DVector::zeros(2)).is_err());
    }

    #[test]
    fn text_round_trip() {
        let p = generate_random_hierarchy(3, 11).unwrap();
        assert_eq!(problem_from_str(&problem_to_string(&p)).unwrap(), p);
    }

    #[test]
    fn malformed_files() {
        assert!(matches!(problem_from_str("2 1\n1\n1.0\n"), Err(HlspError::Parse(_))));
        assert!(matches!(problem_from_str("levels\n"), Err(HlspError::Parse(_))));
        assert!(matches!(
            problem_from_str("1 2\n2\n1 0\n0 1\n1\n"),
            Err(HlspError::DimensionMismatch(_))
        ));
    }
}
