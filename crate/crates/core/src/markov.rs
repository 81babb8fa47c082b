//! The production chain: transition matrix, stationary distribution and
//! household closure.
//!
//! `p_ij = f_ij / Σ_j f_ij` is row-stochastic, so the stationary
//! distribution is the *left* eigenvector at eigenvalue one,
//! `π_j = Σ_i π_i p_ij`. (The right eigenvector of a row-stochastic matrix
//! is the all-ones vector.) Two independent solvers are provided and are
//! cross-checked by the pipeline: power iteration and a direct linear solve.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{analyze_structure, SectorGraph};
use crate::table_io::{FlowMatrix, LabourVector, TableError};

/// Power-iteration step tolerance (max-norm change between iterates).
pub const DEFAULT_POWER_TOL: f64 = 1e-13;
pub const DEFAULT_MAX_ITER: usize = 100_000;
/// Target for `max_j |Σ_i π_i p_ij − π_j|`.
pub const RESIDUAL_TARGET: f64 = 1e-10;
/// Agreement required between the two solvers when cross-checking.
pub const CROSS_CHECK_TOL: f64 = 1e-9;

const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MarkovError {
    #[error("sector `{sector}` delivers nothing to any sector (row {row} sums to zero); it is not basic")]
    NonBasicSector { sector: String, row: usize },
    #[error(
        "power iteration did not converge in {iterations} iterations (last change {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("stationarity system is singular (pivot {pivot:e} in column {column}); the chain is reducible")]
    SingularSystem { column: usize, pivot: f64 },
    #[error("expected length {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("wage vector must be finite, nonnegative and have at least one positive entry")]
    InvalidWage,
    #[error("invalid transition matrix: {0}")]
    InvalidTransitionMatrix(String),
    #[error("stationary solvers disagree by {difference:e} (tolerance {tolerance:e})")]
    SolverDisagreement { difference: f64, tolerance: f64 },
    #[error(transparent)]
    Table(#[from] TableError),
}

pub type Result<T, E = MarkovError> = std::result::Result<T, E>;

/// Row-stochastic matrix of output shares.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    labels: Vec<String>,
    p: Vec<f64>,
}

impl TransitionMatrix {
    /// Validates rows given directly as probabilities: entries in `[0, 1]`,
    /// each row summing to one within `1e-12`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(MarkovError::InvalidTransitionMatrix("empty matrix".into()));
        }
        let mut p = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(MarkovError::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            if row.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(MarkovError::InvalidTransitionMatrix(format!(
                    "row {} has an entry outside [0, 1]",
                    i + 1
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(MarkovError::InvalidTransitionMatrix(format!(
                    "row {} sums to {sum}",
                    i + 1
                )));
            }
            p.extend_from_slice(row);
        }
        let labels = (1..=n).map(|i| format!("S{i}")).collect();
        Ok(Self { labels, p })
    }

    /// Every transition equiprobable.
    pub fn uniform(n: usize) -> Self {
        let labels = (1..=n).map(|i| format!("S{i}")).collect();
        Self {
            labels,
            p: vec![1.0 / n as f64; n * n],
        }
    }

    /// Deterministic chain `i → perm[i]`.
    pub fn permutation(perm: &[usize]) -> Self {
        let n = perm.len();
        let mut p = vec![0.0; n * n];
        for (i, &j) in perm.iter().enumerate() {
            p[i * n + j] = 1.0;
        }
        let labels = (1..=n).map(|i| format!("S{i}")).collect();
        Self { labels, p }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.n() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.p[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.p.chunks(self.n())
    }

    /// One step of the chain on a row distribution: `v ↦ vP`.
    pub fn step(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n];
        for (i, row) in self.rows().enumerate() {
            let vi = v[i];
            if vi == 0.0 {
                continue;
            }
            for (o, &pij) in out.iter_mut().zip(row) {
                *o += vi * pij;
            }
        }
        out
    }
}

/// Transition shares `p_ij = f_ij / Σ_j f_ij`, diagonal flows included.
pub fn build_transitions(flows: &FlowMatrix) -> Result<TransitionMatrix> {
    let n = flows.n();
    let mut p = Vec::with_capacity(n * n);
    for (i, row) in flows.rows().enumerate() {
        let total: f64 = row.iter().sum();
        if total <= 0.0 {
            return Err(MarkovError::NonBasicSector {
                sector: flows.labels()[i].name.clone(),
                row: i + 1,
            });
        }
        let mut shares: Vec<f64> = row.iter().map(|f| f / total).collect();
        // second pass removes the rounding left by the first division
        let s: f64 = shares.iter().sum();
        for x in &mut shares {
            *x = (*x / s).min(1.0);
        }
        p.extend(shares);
    }
    Ok(TransitionMatrix {
        labels: flows.names(),
        p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    PowerIteration,
    DirectSolve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDistribution {
    pub pi_star: Vec<f64>,
    pub residual: f64,
    pub method: SolverMethod,
    /// Power iterations used; zero for the direct solve.
    pub iterations: usize,
}

/// `max_j |Σ_i π_i p_ij − π_j|`.
pub fn stationarity_residual(p: &TransitionMatrix, pi: &[f64]) -> f64 {
    p.step(pi)
        .iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    for x in v.iter_mut() {
        *x /= s;
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Power iteration `v ← vP` from the uniform vector until the max-norm
/// change drops below `tol`.
///
/// For a chain of period `d > 1` the iterates cycle, so the average of the
/// last `d` iterates is tracked instead. That window average cancels the
/// `d` unit-modulus eigencomponents exactly and converges geometrically.
pub fn stationary_power(
    p: &TransitionMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<StationaryDistribution> {
    let n = p.n();
    let period = analyze_structure(&SectorGraph::from_transitions(p)).period;
    let mut v = vec![1.0 / n as f64; n];

    if period == 1 {
        let mut change = f64::INFINITY;
        for iter in 1..=max_iter {
            let mut next = p.step(&v);
            normalize(&mut next);
            change = max_abs_diff(&next, &v);
            v = next;
            if change < tol {
                let residual = stationarity_residual(p, &v);
                return Ok(StationaryDistribution {
                    pi_star: v,
                    residual,
                    method: SolverMethod::PowerIteration,
                    iterations: iter,
                });
            }
        }
        return Err(MarkovError::NoConvergence {
            iterations: max_iter,
            residual: change,
        });
    }

    let mut window: std::collections::VecDeque<Vec<f64>> =
        std::collections::VecDeque::with_capacity(period);
    window.push_back(v.clone());
    for _ in 1..period {
        v = p.step(&v);
        normalize(&mut v);
        window.push_back(v.clone());
    }
    let average = |w: &std::collections::VecDeque<Vec<f64>>| {
        let mut avg = vec![0.0; n];
        for vec in w {
            for (a, x) in avg.iter_mut().zip(vec) {
                *a += x;
            }
        }
        normalize(&mut avg);
        avg
    };
    let mut avg = average(&window);
    let mut change = f64::INFINITY;
    for iter in 1..=max_iter {
        v = p.step(&v);
        normalize(&mut v);
        window.pop_front();
        window.push_back(v.clone());
        let next = average(&window);
        change = max_abs_diff(&next, &avg);
        avg = next;
        if change < tol {
            let residual = stationarity_residual(p, &avg);
            return Ok(StationaryDistribution {
                pi_star: avg,
                residual,
                method: SolverMethod::PowerIteration,
                iterations: iter,
            });
        }
    }
    Err(MarkovError::NoConvergence {
        iterations: max_iter,
        residual: change,
    })
}

/// Solves `π_j = Σ_i π_i p_ij` with the last equation replaced by
/// `Σ_i π_i = 1`, by Gaussian elimination with partial pivoting.
pub fn stationary_direct(p: &TransitionMatrix) -> Result<StationaryDistribution> {
    let n = p.n();
    // Row j of (I − P)ᵀ, augmented with the right-hand side.
    let mut a = vec![vec![0.0; n + 1]; n];
    for (j, row) in a.iter_mut().enumerate() {
        for (i, cell) in row.iter_mut().take(n).enumerate() {
            *cell = if i == j { 1.0 } else { 0.0 } - p.get(i, j);
        }
    }
    for cell in a[n - 1].iter_mut().take(n) {
        *cell = 1.0;
    }
    a[n - 1][n] = 1.0;

    let scale = a
        .iter()
        .flat_map(|r| r.iter().take(n))
        .fold(0.0f64, |m, x| m.max(x.abs()));
    let singular_below = 1e-12 * scale.max(1.0);

    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .expect("nonempty pivot range");
        let pivot = a[pivot_row][col];
        if pivot.abs() <= singular_below {
            return Err(MarkovError::SingularSystem { column: col, pivot });
        }
        a.swap(col, pivot_row);
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot_vals = &upper[col];
        for row in lower.iter_mut() {
            let factor = row[col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for (x, &pv) in row[col..].iter_mut().zip(&pivot_vals[col..]) {
                *x -= factor * pv;
            }
        }
    }

    let mut pi = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| a[r][c] * pi[c]).sum();
        pi[r] = (a[r][n] - tail) / a[r][r];
    }

    if pi.iter().any(|&x| !x.is_finite() || x < -1e-9) {
        let column = pi
            .iter()
            .position(|&x| !x.is_finite() || x < -1e-9)
            .unwrap_or(0);
        return Err(MarkovError::SingularSystem {
            column,
            pivot: pi[column],
        });
    }
    for x in &mut pi {
        *x = x.max(0.0);
    }
    normalize(&mut pi);
    let residual = stationarity_residual(p, &pi);
    Ok(StationaryDistribution {
        pi_star: pi,
        residual,
        method: SolverMethod::DirectSolve,
        iterations: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Power,
    Direct,
    /// Both solvers, cross-checked against each other.
    #[default]
    Both,
}

impl Solver {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Power => "power",
            Self::Direct => "direct",
            Self::Both => "both",
        }
    }
}

/// Outcome of [`solve_stationary`].
#[derive(Debug, Clone)]
pub struct StationarySolution {
    pub distribution: StationaryDistribution,
    /// Max-norm distance between the two solvers' vectors when both ran.
    pub cross_check: Option<f64>,
}

/// Runs the requested solver(s). With [`Solver::Both`] the two run
/// concurrently, must agree within [`CROSS_CHECK_TOL`], and the direct
/// solution is returned with the larger of the two residuals.
pub fn solve_stationary(p: &TransitionMatrix, solver: Solver) -> Result<StationarySolution> {
    match solver {
        Solver::Power => Ok(StationarySolution {
            distribution: stationary_power(p, DEFAULT_POWER_TOL, DEFAULT_MAX_ITER)?,
            cross_check: None,
        }),
        Solver::Direct => Ok(StationarySolution {
            distribution: stationary_direct(p)?,
            cross_check: None,
        }),
        Solver::Both => {
            let (power, direct) = rayon::join(
                || stationary_power(p, DEFAULT_POWER_TOL, DEFAULT_MAX_ITER),
                || stationary_direct(p),
            );
            let (power, mut direct) = (power?, direct?);
            let difference = max_abs_diff(&power.pi_star, &direct.pi_star);
            if difference > CROSS_CHECK_TOL {
                return Err(MarkovError::SolverDisagreement {
                    difference,
                    tolerance: CROSS_CHECK_TOL,
                });
            }
            direct.residual = direct.residual.max(power.residual);
            Ok(StationarySolution {
                distribution: direct,
                cross_check: Some(difference),
            })
        }
    }
}

pub const HOUSEHOLDS: &str = "Households";

/// Closes the economy with a household sector: it delivers labour `ℓ_j` to
/// every sector `j` and receives the wage bundle `w_i` from every sector
/// `i`. Households consume none of their own labour.
pub fn close_with_households(
    flows: &FlowMatrix,
    labour: &LabourVector,
    wage: &[f64],
) -> Result<FlowMatrix> {
    let n = flows.n();
    if labour.len() != n {
        return Err(MarkovError::DimensionMismatch {
            expected: n,
            found: labour.len(),
        });
    }
    if wage.len() != n {
        return Err(MarkovError::DimensionMismatch {
            expected: n,
            found: wage.len(),
        });
    }
    if wage.iter().any(|w| !w.is_finite() || *w < 0.0) || !wage.iter().any(|&w| w > 0.0) {
        return Err(MarkovError::InvalidWage);
    }
    Ok(flows.bordered(HOUSEHOLDS, labour.values(), wage, 0.0)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo() -> FlowMatrix {
        FlowMatrix::from_rows(vec![
            vec![0.0, 2.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![3.0, 1.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn transitions_follow_row_shares() {
        let p = build_transitions(&demo()).unwrap();
        let expect = [[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.75, 0.25, 0.0]];
        for (i, row) in expect.iter().enumerate() {
            assert_eq!(p.row(i), row);
        }
        let p = build_transitions(&FlowMatrix::from_rows(vec![vec![5.0]]).unwrap()).unwrap();
        assert_eq!(p.row(0), &[1.0]);
    }

    #[test]
    fn zero_row_is_not_basic() {
        let f = FlowMatrix::from_rows(vec![vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        match build_transitions(&f) {
            Err(MarkovError::NonBasicSector { row, sector }) => {
                assert_eq!(row, 2);
                assert_eq!(sector, "S2");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn doubly_stochastic_is_uniform() {
        let p = TransitionMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let s = stationary_power(&p, DEFAULT_POWER_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(s.pi_star, vec![0.5, 0.5]);
    }

    #[test]
    fn periodic_swap_uses_window_average() {
        let p = TransitionMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let s = stationary_power(&p, DEFAULT_POWER_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(s.pi_star, vec![0.5, 0.5]);
        let d = stationary_direct(&p).unwrap();
        assert_eq!(d.pi_star, vec![0.5, 0.5]);
    }

    #[test]
    fn periodic_chain_from_nonuniform_orbit() {
        // period 2, stationary (1/2)(a-side) split unevenly within each side
        let p = TransitionMatrix::from_rows(vec![
            vec![0.0, 0.0, 0.3, 0.7],
            vec![0.0, 0.0, 0.6, 0.4],
            vec![0.2, 0.8, 0.0, 0.0],
            vec![0.9, 0.1, 0.0, 0.0],
        ])
        .unwrap();
        let power = stationary_power(&p, DEFAULT_POWER_TOL, DEFAULT_MAX_ITER).unwrap();
        let direct = stationary_direct(&p).unwrap();
        assert!(max_abs_diff(&power.pi_star, &direct.pi_star) < 1e-10);
        assert!(power.residual <= RESIDUAL_TARGET);
        assert!(direct.residual <= RESIDUAL_TARGET);
    }

    #[test]
    fn demo_chain_stationary_is_exact_fraction() {
        // (7/18, 5/18, 1/3) from an exact rational solve
        let p = build_transitions(&demo()).unwrap();
        let expect = [7.0 / 18.0, 5.0 / 18.0, 1.0 / 3.0];
        for s in [
            stationary_direct(&p).unwrap(),
            stationary_power(&p, DEFAULT_POWER_TOL, DEFAULT_MAX_ITER).unwrap(),
        ] {
            assert!(max_abs_diff(&s.pi_star, &expect) < 1e-12, "{:?}", s);
            assert!(s.residual <= RESIDUAL_TARGET);
        }
    }

    #[test]
    fn identity_chain_is_singular() {
        let p = TransitionMatrix::permutation(&[0, 1, 2]);
        assert!(matches!(
            stationary_direct(&p),
            Err(MarkovError::SingularSystem { .. })
        ));
    }

    #[test]
    fn slow_chain_reports_no_convergence() {
        let p = TransitionMatrix::from_rows(vec![vec![0.999, 0.001], vec![0.002, 0.998]]).unwrap();
        match stationary_power(&p, DEFAULT_POWER_TOL, 10) {
            Err(MarkovError::NoConvergence {
                iterations,
                residual,
            }) => {
                assert_eq!(iterations, 10);
                assert!(residual > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn both_solvers_cross_check() {
        let p = build_transitions(&demo()).unwrap();
        let sol = solve_stationary(&p, Solver::Both).unwrap();
        assert!(sol.cross_check.unwrap() < CROSS_CHECK_TOL);
        assert_eq!(sol.distribution.method, SolverMethod::DirectSolve);
    }

    #[test]
    fn household_closure_places_labour_and_wages() {
        let f = FlowMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let l = LabourVector::new(vec![1.0, 1.0]).unwrap();
        let closed = close_with_households(&f, &l, &[1.0, 1.0]).unwrap();
        assert_eq!(
            closed.to_rows(),
            vec![
                vec![0.0, 1.0, 1.0],
                vec![1.0, 0.0, 1.0],
                vec![1.0, 1.0, 0.0]
            ]
        );
        assert_eq!(closed.names().last().unwrap(), HOUSEHOLDS);
    }

    #[test]
    fn household_closure_rejects_bad_inputs() {
        let f = FlowMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let l = LabourVector::new(vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            close_with_households(&f, &l, &[0.0, 0.0]),
            Err(MarkovError::InvalidWage)
        ));
        assert!(matches!(
            close_with_households(&f, &l, &[1.0]),
            Err(MarkovError::DimensionMismatch { .. })
        ));
        let l3 = LabourVector::new(vec![1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            close_with_households(&f, &l3, &[1.0, 1.0]),
            Err(MarkovError::DimensionMismatch { .. })
        ));
    }
}
