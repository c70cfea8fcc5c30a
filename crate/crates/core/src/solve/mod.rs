//! Linear solves and the three constructive pipelines: epsilon-continuation
//! for `alpha >= 0`, and the change of variables and Picard fixed point for
//! pinned `alpha < 0` problems.

mod krylov;

use alloc::vec::Vec;

pub use krylov::{KrylovStats, LinearSolver, GMRES_RESTART, MAX_BICGSTAB_ITERATIONS};

use crate::discretize::{self, assemble, assemble_radial_exact, LinearSystem, ProblemSpec, RhsMode};
use crate::drift::{DivFree, DriftSpec};
use crate::error::{Error, Result};
use crate::field::{energy_norm, lp_norm, DiscreteField};
use crate::grid::{Grid, CENTER};
use crate::math;
use crate::profiles::SourceProfile;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveReport {
    /// Total Krylov iterations over every inner solve.
    pub iterations: usize,
    /// Relative 2-norm residual of the returned field.
    pub final_residual: f64,
    pub epsilon_schedule: Vec<f64>,
    pub fixed_point_iters: usize,
    pub converged: bool,
    /// Energy-norm increments between successive epsilon levels, or the
    /// `L_q` increments of the Picard iteration.
    #[cfg_attr(feature = "serde", serde(default))]
    pub increments: Vec<f64>,
}

/// Solves `system` to relative residual `tol` (which must lie in `(0, 1e-2]`).
pub fn linear_solve(system: &LinearSystem, tol: f64) -> Result<(DiscreteField, SolveReport)> {
    krylov::check_tol(tol)?;
    let solver = LinearSolver::new(system.matrix.clone())?;
    let (x, stats) = solver.solve(&system.rhs, None, tol)?;
    Ok((DiscreteField::from_vec(x), report_from(&stats)))
}

fn report_from(stats: &KrylovStats) -> SolveReport {
    SolveReport {
        iterations: stats.iterations,
        final_residual: stats.relative_residual,
        converged: stats.converged,
        ..SolveReport::default()
    }
}

/// `epsilon_k = 10^-k` for `k = 1..=4`.
pub fn default_epsilon_schedule() -> Vec<f64> {
    (1..=4).map(|k| math::powf(10.0, -(k as f64))).collect()
}

/// Solves the regularized problem along a decreasing `epsilon` schedule
/// (`alpha >= 0` only), logging energy-norm Cauchy increments. Stops early
/// once an increment falls below `tol` times the solution norm.
pub fn solve_regularized(
    spec: &ProblemSpec,
    grid: &Grid,
    eps_schedule: &[f64],
    tol: f64,
) -> Result<(DiscreteField, SolveReport)> {
    krylov::check_tol(tol)?;
    if spec.drift.alpha < 0.0 {
        return Err(Error::InvalidProblem(
            "epsilon-continuation is the alpha >= 0 pipeline; use a pinned pipeline for alpha < 0".into(),
        ));
    }
    if eps_schedule.is_empty() {
        return Err(Error::InvalidProblem("empty epsilon schedule".into()));
    }
    if eps_schedule.windows(2).any(|w| !(w[1] < w[0])) || !(eps_schedule[eps_schedule.len() - 1] > 0.0) {
        return Err(Error::InvalidProblem("epsilon schedule must be strictly decreasing and positive".into()));
    }

    let mut report = SolveReport { converged: true, ..SolveReport::default() };
    let mut prev: Option<DiscreteField> = None;
    for &eps in eps_schedule {
        let system = assemble(&spec.with_drift(spec.drift.with_epsilon(eps)), grid)?;
        let solver = LinearSolver::new(system.matrix)?;
        let x0 = prev.as_ref().map(|p| p.values());
        let (x, stats) = solver.solve(&system.rhs, x0, tol)?;
        let u = DiscreteField::from_vec(x);
        report.iterations += stats.iterations;
        report.final_residual = stats.relative_residual;
        report.converged &= stats.converged;
        report.epsilon_schedule.push(eps);
        let stop = match &prev {
            Some(p) => {
                let inc = energy_norm(grid, &u.sub(p))?;
                report.increments.push(inc);
                inc <= tol * energy_norm(grid, &u)?
            }
            None => false,
        };
        prev = Some(u);
        if stop {
            break;
        }
    }
    Ok((prev.expect("schedule is non-empty"), report))
}

/// How the change-of-variables pipeline builds the `w`-problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CovMode {
    /// `w`-operator `D^-1 A D` with `D = diag(r^a)`, conjugating the pinned
    /// `u`-system; `u = D w` then solves that system exactly.
    #[default]
    Conjugate,
    /// Independent assembly of `-Laplacian w - a x / |x|^2 . grad w = r^-a g`,
    /// which agrees with the `u`-system to discretization accuracy.
    Native,
}

fn check_cov_spec(spec: &ProblemSpec) -> Result<f64> {
    if !(spec.drift.alpha < 0.0) {
        return Err(Error::InvalidProblem("change of variables needs alpha < 0".into()));
    }
    if !spec.drift.divfree.is_none() {
        return Err(Error::InvalidProblem("change of variables applies to b = 0 only".into()));
    }
    let a = -spec.drift.alpha;
    let gamma = match &spec.rhs {
        RhsMode::ScalarG(g) => g.origin_exponent(),
        RhsMode::VectorF(f) => f.divergence_source().origin_exponent(),
    };
    // r^-a g must be integrable near the origin in two dimensions
    if !(gamma - a > -2.0) {
        return Err(Error::InadmissibleSource(alloc::format!(
            "weighted source r^-{a} g ~ r^{} is not integrable at the origin",
            gamma - a
        )));
    }
    Ok(a)
}

/// Pinned solve through `u = r^|alpha| w` (requires `alpha < 0` and `b = 0`).
pub fn solve_pinned_cov(spec: &ProblemSpec, grid: &Grid, tol: f64) -> Result<(DiscreteField, SolveReport)> {
    solve_pinned_cov_with(spec, grid, tol, CovMode::Conjugate)
}

pub fn solve_pinned_cov_with(
    spec: &ProblemSpec,
    grid: &Grid,
    tol: f64,
    mode: CovMode,
) -> Result<(DiscreteField, SolveReport)> {
    krylov::check_tol(tol)?;
    let a = check_cov_spec(spec)?;
    let weight: Vec<f64> = (0..grid.node_count()).map(|k| math::powf(grid.radius(k), a)).collect();
    match mode {
        CovMode::Conjugate => {
            let pinned = spec.clone().pinned(true);
            let u_sys = assemble(&pinned, grid)?;
            let (m, rhs) = conjugate(&u_sys, &weight);
            let solver = LinearSolver::new(m)?;
            let mut report = SolveReport::default();
            let mut inner = tol / 10.0;
            loop {
                let (w, stats) = solver.solve(&rhs, None, inner)?;
                let u = lift(&w, &weight);
                report.iterations += stats.iterations;
                report.final_residual = u_sys.relative_residual(&u);
                report.converged = stats.converged && report.final_residual <= tol;
                if report.converged || !stats.converged || inner < tol * 1e-4 {
                    return Ok((u, report));
                }
                inner /= 10.0;
            }
        }
        CovMode::Native => {
            let base = match &spec.rhs {
                RhsMode::ScalarG(g) => g.clone(),
                RhsMode::VectorF(f) => f.divergence_source(),
            };
            let w_rhs = SourceProfile::Weighted { base: alloc::boxed::Box::new(base), power: -a };
            let w_spec = ProblemSpec {
                drift: DriftSpec::new(a, spec.drift.epsilon, DivFree::None),
                rhs: RhsMode::ScalarG(w_rhs),
                q: spec.q,
                pinned: false,
                scheme: spec.scheme,
            };
            let w_sys = assemble_radial_exact(&w_spec, grid)?;
            let (w, report) = linear_solve(&w_sys, tol)?;
            Ok((lift(w.values(), &weight), report))
        }
    }
}

/// `D^-1 A D` restricted to non-center nodes, with an identity center row.
fn conjugate(system: &LinearSystem, weight: &[f64]) -> (CsrMatrix, Vec<f64>) {
    let m = system.matrix.map_entries(|i, j, v| {
        if i == CENTER {
            if j == CENTER {
                1.0
            } else {
                0.0
            }
        } else if j == CENTER {
            0.0
        } else {
            v * weight[j] / weight[i]
        }
    });
    let rhs = (0..system.dim()).map(|k| if k == CENTER { 0.0 } else { system.rhs[k] / weight[k] }).collect();
    (m, rhs)
}

fn lift(w: &[f64], weight: &[f64]) -> DiscreteField {
    let mut u: Vec<f64> = w.iter().zip(weight).map(|(w, d)| w * d).collect();
    u[CENTER] = 0.0;
    DiscreteField::from_vec(u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub max_outer: usize,
    /// Relaxation `s` in `v <- (1 - s) v + s A(v)`; 1 is plain Picard.
    pub damping: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { max_outer: 50, damping: 1.0 }
    }
}

/// Picard iteration `v <- A(v)` where `A(v)` solves the pinned problem with
/// `b = 0` and right-hand side `g - b . grad v` (requires `alpha < 0`).
pub fn solve_pinned_fixed_point(
    spec: &ProblemSpec,
    grid: &Grid,
    tol: f64,
    max_outer: usize,
) -> Result<(DiscreteField, SolveReport)> {
    solve_pinned_fixed_point_with(spec, grid, tol, FixedPointOptions { max_outer, damping: 1.0 })
}

pub fn solve_pinned_fixed_point_with(
    spec: &ProblemSpec,
    grid: &Grid,
    tol: f64,
    options: FixedPointOptions,
) -> Result<(DiscreteField, SolveReport)> {
    krylov::check_tol(tol)?;
    if !(spec.drift.alpha < 0.0) {
        return Err(Error::InvalidProblem("the fixed-point pipeline needs alpha < 0".into()));
    }
    if options.max_outer == 0 || !(options.damping > 0.0 && options.damping <= 1.0) {
        return Err(Error::InvalidSolverParameter("max_outer >= 1 and damping in (0, 1] required".into()));
    }
    let pinned = spec.clone().pinned(true);
    let (base, conv) = discretize::assemble_split(&pinned, grid)?;
    let solver = LinearSolver::new(base.matrix.clone())?;
    let inner = tol / 10.0;
    let mut report = SolveReport::default();

    if spec.drift.divfree.is_none() {
        let (x, stats) = solver.solve(&base.rhs, None, inner)?;
        let u = DiscreteField::from_vec(x);
        report.iterations = stats.iterations;
        report.fixed_point_iters = 1;
        report.final_residual = base.relative_residual(&u);
        report.converged = stats.converged && report.final_residual <= tol;
        return Ok((u, report));
    }

    let full = LinearSystem { matrix: add(&base.matrix, &conv), ..base.clone() };
    let q = spec.q;
    let n = grid.node_count();
    let mut v = DiscreteField::zeros(n);
    let mut growth = 0;
    for outer in 1..=options.max_outer {
        let cv = conv.mul_vec(v.values());
        let rhs: Vec<f64> = base.rhs.iter().zip(&cv).map(|(g, c)| g - c).collect();
        let (x, stats) = solver.solve(&rhs, Some(v.values()), inner)?;
        report.iterations += stats.iterations;
        let s = options.damping;
        let next = DiscreteField::from_vec(
            v.values().iter().zip(&x).map(|(old, new)| (1.0 - s) * old + s * new).collect(),
        );
        let inc = lp_norm(grid, &next.sub(&v), q)?;
        let size = lp_norm(grid, &next, q)?;
        if let Some(&last) = report.increments.last() {
            growth = if inc > last { growth + 1 } else { 0 };
        }
        report.increments.push(inc);
        report.fixed_point_iters = outer;
        v = next;
        report.final_residual = full.relative_residual(&v);
        if inc <= tol * size && report.final_residual <= tol {
            report.converged = stats.converged;
            return Ok((v, report));
        }
        if growth >= 3 {
            // increments grew three times in a row: not contracting
            report.converged = false;
            return Ok((v, report));
        }
    }
    report.converged = false;
    Ok((v, report))
}

fn add(a: &CsrMatrix, b: &CsrMatrix) -> CsrMatrix {
    let mut rows = crate::sparse::RowBuilder::new(a.dim());
    for i in 0..a.dim() {
        for (j, v) in a.row(i).chain(b.row(i)) {
            rows.push(j, v);
        }
        rows.finish_row();
    }
    rows.build()
}

/// Lower bound for `||A^-1||_2` on vectors vanishing on identity rows (the
/// boundary, and the center when pinned), from `iterations` steps of inverse
/// power iteration with inner solves at `tol`.
pub fn inverse_norm_estimate(system: &LinearSystem, tol: f64, iterations: usize) -> Result<f64> {
    let solver = LinearSolver::new(system.matrix.clone())?;
    let n = system.dim();
    let identity_row = |i: usize| system.matrix.row(i).all(|(j, v)| if i == j { v == 1.0 } else { v == 0.0 });
    let mut x: Vec<f64> =
        (0..n).map(|k| if identity_row(k) { 0.0 } else { 1.0 + (k % 3) as f64 * 0.25 }).collect();
    let norm = math::norm2(&x);
    x.iter_mut().for_each(|v| *v /= norm);
    let mut estimate = 0.0;
    for _ in 0..iterations.max(1) {
        let (y, _) = solver.solve(&x, None, tol)?;
        estimate = math::norm2(&y);
        if estimate == 0.0 {
            break;
        }
        x = y.iter().map(|v| v / estimate).collect();
    }
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_disk_grid;

    #[test]
    fn identity_solves_in_one_iteration() {
        let sys = LinearSystem {
            matrix: CsrMatrix::identity(5),
            rhs: alloc::vec![0.0, 0.0, 1.0, 0.0, 0.0],
            pinned: false,
            scheme: discretize::Scheme::Centered,
        };
        let (u, rep) = linear_solve(&sys, 1e-10).unwrap();
        assert_eq!(u.values(), &sys.rhs[..]);
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
    }

    #[test]
    fn zero_row_is_an_error() {
        let mut b = crate::sparse::RowBuilder::new(2);
        b.push(0, 1.0);
        b.finish_row();
        b.finish_row();
        let sys = LinearSystem { matrix: b.build(), rhs: alloc::vec![1.0, 1.0], pinned: false, scheme: discretize::Scheme::Centered };
        assert_eq!(linear_solve(&sys, 1e-8).unwrap_err(), Error::SingularRow(1));
    }

    #[test]
    fn poisson_reaches_tolerance() {
        let g = build_disk_grid(32, 64).unwrap();
        let spec = ProblemSpec::scalar(DriftSpec::singular(0.0, 0.0), SourceProfile::Constant { value: 4.0 });
        let sys = assemble(&spec, &g).unwrap();
        let (u, rep) = linear_solve(&sys, 1e-10).unwrap();
        assert!(rep.converged && rep.final_residual <= 1e-10);
        let err = (0..g.node_count()).fold(0.0f64, |m, k| m.max((u[k] - (1.0 - g.radius(k).powi(2))).abs()));
        assert!(err <= 5e-3);
    }

    #[test]
    fn pipelines_reject_wrong_sign() {
        let g = build_disk_grid(8, 16).unwrap();
        let pos = ProblemSpec::scalar(DriftSpec::singular(1.0, 1e-2), SourceProfile::Zero);
        let neg = ProblemSpec::scalar(DriftSpec::singular(-1.0, 0.0), SourceProfile::Zero);
        assert!(solve_regularized(&neg, &g, &[0.1], 1e-8).is_err());
        assert!(solve_regularized(&pos, &g, &[], 1e-8).is_err());
        assert!(solve_regularized(&pos, &g, &[0.1, 0.1], 1e-8).is_err());
        assert!(solve_pinned_cov(&pos, &g, 1e-8).is_err());
        assert!(solve_pinned_fixed_point(&pos, &g, 1e-8, 5).is_err());
    }

    #[test]
    fn cov_rejects_non_integrable_weight() {
        let g = build_disk_grid(8, 16).unwrap();
        let singular = SourceProfile::Weighted { base: alloc::boxed::Box::new(SourceProfile::Constant { value: 1.0 }), power: -1.8 };
        let spec = ProblemSpec::scalar(DriftSpec::singular(-0.5, 0.0), singular);
        assert!(matches!(solve_pinned_cov(&spec, &g, 1e-8), Err(Error::InadmissibleSource(_))));
    }
}
