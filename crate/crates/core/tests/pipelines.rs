//! End-to-end checks of the solve pipelines on moderate grids.

use sdlab_core::analysis::{kernel_solution, manufactured, measure, source_potential_norm};
use sdlab_core::discretize::tested_residual;
use sdlab_core::field::{energy_norm, gradient_lp_norm};
use sdlab_core::solve::{
    default_epsilon_schedule, inverse_norm_estimate, solve_pinned_cov, solve_pinned_cov_with,
    solve_pinned_fixed_point, solve_regularized, CovMode,
};
use sdlab_core::*;

const ANNULUS: SourceProfile = SourceProfile::AnnularBump { r_inner: 0.4, r_outer: 0.6, amplitude: 1.0 };

fn pinned(alpha: f64, divfree: DivFree, g: SourceProfile) -> ProblemSpec {
    ProblemSpec::scalar(DriftSpec::new(alpha, 0.0, divfree), g).pinned(true)
}

fn bumps() -> Vec<SourceProfile> {
    [(0.3, 0.1, 0.15), (-0.2, 0.4, 0.1), (0.0, -0.5, 0.2), (0.5, 0.5, 0.12), (-0.4, -0.3, 0.18)]
        .iter()
        .map(|&(x0, y0, width)| SourceProfile::Bump { x0, y0, width, amplitude: 1.0 })
        .collect()
}

#[test]
fn cov_solution_is_pinned_and_solves_the_interior_equation() {
    let spec = pinned(-0.5, DivFree::None, ANNULUS);
    let unpinned = ProblemSpec::scalar(DriftSpec::singular(-0.5, 0.0), ANNULUS);
    for n in [32usize, 64, 128] {
        let grid = build_disk_grid(n, 2 * n).unwrap();
        let (u, rep) = solve_pinned_cov(&spec, &grid, 1e-8).unwrap();
        assert!(rep.converged && rep.final_residual <= 1e-8);
        assert_eq!(u[0], 0.0);
        let res = tested_residual(&assemble_radial_exact(&unpinned, &grid).unwrap(), &grid, &u, 2.0 * grid.h_r()).unwrap();
        assert!(res <= 1e-8, "n = {n}: {res}");
    }
}

#[test]
fn cov_native_mode_agrees_to_discretization_accuracy() {
    let spec = pinned(-0.5, DivFree::None, ANNULUS);
    let mut diffs = Vec::new();
    for n in [32usize, 64] {
        let grid = build_disk_grid(n, 2 * n).unwrap();
        let (a, _) = solve_pinned_cov_with(&spec, &grid, 1e-9, CovMode::Conjugate).unwrap();
        let (b, rb) = solve_pinned_cov_with(&spec, &grid, 1e-9, CovMode::Native).unwrap();
        assert!(rb.converged);
        assert_eq!(b[0], 0.0);
        diffs.push(energy_norm(&grid, &a.sub(&b)).unwrap() / energy_norm(&grid, &a).unwrap());
    }
    assert!(diffs[0] < 0.05 && diffs[1] < diffs[0], "{diffs:?}");
}

#[test]
fn homogeneous_pinned_problems_have_zero_solution() {
    let grid = build_disk_grid(32, 64).unwrap();
    let (u, _) = solve_pinned_cov(&pinned(-0.5, DivFree::None, SourceProfile::Zero), &grid, 1e-8).unwrap();
    assert_eq!(u.max_abs(), 0.0);
    let swirl = DivFree::Mollified { base: Box::new(DivFree::Swirl { beta: 0.2 }), eta: 0.1 };
    let (u, rep) = solve_pinned_fixed_point(&pinned(-0.5, swirl, SourceProfile::Zero), &grid, 1e-8, 20).unwrap();
    assert_eq!(u.max_abs(), 0.0);
    assert_eq!(rep.fixed_point_iters, 1);
}

#[test]
fn kernel_added_to_pinned_solution_solves_interior_but_breaks_pinning() {
    let grid = build_disk_grid(128, 256).unwrap();
    let spec = pinned(-0.5, DivFree::None, ANNULUS);
    let (u, _) = solve_pinned_cov(&spec, &grid, 1e-9).unwrap();
    let k = kernel_solution(-0.5, 1.0, &grid).unwrap();
    let v = u.axpy(1.0, &k);
    let unpinned = ProblemSpec::scalar(DriftSpec::singular(-0.5, 0.0), ANNULUS);
    let res = tested_residual(&assemble_radial_exact(&unpinned, &grid).unwrap(), &grid, &v, 2.0 * grid.h_r()).unwrap();
    assert!(res <= 5e-3, "{res}");
    assert_eq!(v[0], -1.0);
    let sys = assemble(&spec, &grid).unwrap();
    assert!(sys.relative_residual(&v) >= 100.0 * sys.relative_residual(&u).max(1e-12));
}

#[test]
fn pinned_pipelines_agree_without_drift() {
    let grid = build_disk_grid(64, 128).unwrap();
    let spec = pinned(-0.5, DivFree::None, ANNULUS);
    let (a, _) = solve_pinned_cov(&spec, &grid, 1e-8).unwrap();
    let (b, rep) = solve_pinned_fixed_point(&spec, &grid, 1e-8, 10).unwrap();
    assert_eq!(rep.fixed_point_iters, 1);
    assert!(energy_norm(&grid, &a.sub(&b)).unwrap() <= 1e-7);
}

#[test]
fn fixed_point_with_mollified_swirl_matches_direct_solve() {
    let grid = build_disk_grid(64, 128).unwrap();
    let swirl = DivFree::Mollified { base: Box::new(DivFree::Swirl { beta: 0.2 }), eta: 0.1 };
    let spec = pinned(-0.5, swirl, ANNULUS);
    let (v, rep) = solve_pinned_fixed_point(&spec, &grid, 1e-8, 50).unwrap();
    assert!(rep.converged, "{rep:?}");
    assert!(rep.fixed_point_iters > 1);
    assert!(rep.increments.windows(2).all(|w| w[1] < w[0]));
    let (u, _) = linear_solve(&assemble(&spec, &grid).unwrap(), 1e-10).unwrap();
    assert!(energy_norm(&grid, &u.sub(&v)).unwrap() <= 1e-7);
    assert_eq!(v[0], 0.0);
}

#[test]
fn kernel_energy_norm_is_stable_and_near_analytic() {
    // |grad(r^1/2 - 1)|^2 integrates to pi/2, (r^1/2 - 1)^2 to pi/15
    let analytic = (17.0 * std::f64::consts::PI / 30.0).sqrt();
    for n in [32usize, 64, 128] {
        let grid = build_disk_grid(n, 2 * n).unwrap();
        let e = energy_norm(&grid, &kernel_solution(-0.5, 1.0, &grid).unwrap()).unwrap();
        assert!(e >= 0.9 * analytic && e <= 1.1 * analytic, "n = {n}: {e} vs {analytic}");
    }
}

#[test]
fn regularized_increments_decrease_for_manufactured_source() {
    let grid = build_disk_grid(64, 128).unwrap();
    let drift = DriftSpec::singular(1.0, 0.0);
    let spec = ProblemSpec::scalar(drift, SourceProfile::Constant { value: 6.0 });
    let (_, rep) = solve_regularized(&spec, &grid, &[1e-1, 1e-2, 1e-3], 1e-9).unwrap();
    assert_eq!(rep.epsilon_schedule, vec![1e-1, 1e-2, 1e-3]);
    assert_eq!(rep.increments.len(), 2);
    assert!(rep.increments[0] >= 2.0 * rep.increments[1], "{:?}", rep.increments);
}

#[test]
fn regularization_is_irrelevant_without_singular_drift() {
    let grid = build_disk_grid(32, 64).unwrap();
    let spec = ProblemSpec::scalar(DriftSpec::singular(0.0, 0.0), SourceProfile::Constant { value: 4.0 });
    let (a, _) = solve_regularized(&spec, &grid, &default_epsilon_schedule(), 1e-10).unwrap();
    let (b, _) = linear_solve(&assemble(&spec, &grid).unwrap(), 1e-10).unwrap();
    assert!(a.sub(&b).max_abs() <= 1e-8);
}

#[test]
fn homogeneous_regularized_problem_stays_zero() {
    let grid = build_disk_grid(32, 64).unwrap();
    let spec = ProblemSpec::scalar(DriftSpec::new(2.0, 0.0, DivFree::Swirl { beta: 1.0 }), SourceProfile::Zero);
    let (u, rep) = solve_regularized(&spec, &grid, &default_epsilon_schedule(), 1e-8).unwrap();
    assert!(rep.converged);
    assert!(u.max_abs() <= 1e-8);
}

#[test]
fn energy_ratio_is_bounded_across_refinement() {
    let schedule = default_epsilon_schedule();
    for g in bumps() {
        let mut ratios = Vec::new();
        for n in [32usize, 64, 128] {
            let grid = build_disk_grid(n, 2 * n).unwrap();
            let spec = ProblemSpec::scalar(DriftSpec::singular(1.0, 0.0), g.clone());
            let (u, _) = solve_regularized(&spec, &grid, &schedule, 1e-8).unwrap();
            ratios.push(energy_norm(&grid, &u).unwrap() / source_potential_norm(&grid, &g, 1e-10).unwrap());
        }
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(l, h), r| (l.min(*r), h.max(*r)));
        assert!(hi <= 1.0 && hi / lo <= 1.05, "{ratios:?}");
    }
}

#[test]
fn gradient_integrability_is_grid_stable_on_manufactured_family() {
    for (ustar, alpha) in [(UStar::OneMinusR2, 1.0), (UStar::R2OneMinusR, 0.5), (UStar::PowerBubble { a: 2.0 }, 1.0)] {
        let drift = DriftSpec::singular(alpha, 1e-6);
        let (g, _) = manufactured(ustar, &drift).unwrap();
        let spec = ProblemSpec::scalar(drift, g);
        let mut vals = Vec::new();
        for n in [64usize, 128] {
            let grid = build_disk_grid(n, 2 * n).unwrap();
            let (u, _) = linear_solve(&assemble(&spec, &grid).unwrap(), 1e-9).unwrap();
            let rep = measure(&u, &grid).unwrap();
            assert_eq!(rep.grad_lp(2.5), Some(gradient_lp_norm(&grid, &u, 2.5).unwrap()));
            vals.push((rep.grad_lp(2.5).unwrap(), rep.grad_lp(3.0).unwrap()));
        }
        for (a, b) in [(vals[1].0, vals[0].0), (vals[1].1, vals[0].1)] {
            let r = a / b;
            assert!((0.5..=2.0).contains(&r), "{ustar:?}: ratio {r}");
        }
    }
}

fn inf_norm(m: &sparse::CsrMatrix) -> f64 {
    (0..m.dim()).map(|i| m.row(i).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// The unpinned `alpha < 0` operator is well posed on every grid: its
/// condition number grows like the Laplacian's `h^-2`, while `||A^-1||` stays
/// bounded, so there is no emerging discrete near-kernel.
#[test]
fn unpinned_negative_alpha_condition_growth_is_the_laplacian_one() {
    let spec = ProblemSpec::scalar(DriftSpec::singular(-0.5, 1e-3), SourceProfile::Zero);
    let mut inverse = Vec::new();
    let mut kappa = Vec::new();
    for n in [32usize, 64, 128] {
        let grid = build_disk_grid(n, 2 * n).unwrap();
        let sys = assemble(&spec, &grid).unwrap();
        let (u, rep) = linear_solve(&sys, 1e-8).unwrap();
        assert!(rep.converged && u.max_abs() == 0.0);
        let inv = inverse_norm_estimate(&sys, 1e-8, 6).unwrap();
        inverse.push(inv);
        kappa.push(inv * inf_norm(&sys.matrix));
    }
    assert!(kappa.windows(2).all(|w| w[1] >= 3.0 * w[0]), "{kappa:?}");
    assert!(inverse.iter().all(|v| (v / inverse[0] - 1.0).abs() <= 0.1), "{inverse:?}");
}
