//! The seven experiment suites. Each one runs its grids independently (in
//! parallel when a rayon pool is available) and fills a [`RunRecord`].

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sdlab_core::analysis::{
    self, EstimateReport, fit_convergence_order, kernel_solution, max_ratio_smallest, measure, oscillation_contraction,
    reconstruction_sup_error, source_potential_norm,
};
use sdlab_core::drift::{discrete_divergence, eval_drift, mollify_divfree, singular_part, weak_l2_norm};
use sdlab_core::field::{energy_norm, lp_norm};
use sdlab_core::solve::{solve_pinned_cov, solve_pinned_fixed_point, solve_regularized};
use sdlab_core::{
    assemble, assemble_radial_exact, build_disk_grid, linear_solve, DiscreteField, DivFree, DriftSpec, Grid,
    ProblemSpec, Scheme, SolveReport, SourceProfile, StreamProfile, UStar,
};

use crate::config::{ExperimentConfig, GridSize, Suite};
use crate::error::Result;
use crate::record::{Cell, GridRun, Plot, RunRecord, Series, Table};

/// Regularization used by the convergence suite when `alpha != 0`. The
/// manufactured source is built for the same epsilon, so `u*` stays exact.
pub const CONVERGENCE_EPSILON: f64 = 1e-6;
/// Mollification radius of the swirl when a pinned suite runs with `beta != 0`.
pub const PINNED_SWIRL_ETA: f64 = 0.1;
/// Contraction ratios are judged over this many smallest radii.
pub const CONTRACTION_RADII: usize = 3;
/// Support of the source used by the pinned suites.
pub const PINNED_SOURCE: SourceProfile = SourceProfile::AnnularBump { r_inner: 0.4, r_outer: 0.6, amplitude: 1.0 };
/// Outer iteration cap for the Picard pipeline.
pub const MAX_OUTER: usize = 50;

struct Outcome {
    runs: Vec<GridRun>,
    summary: BTreeMap<String, f64>,
    table: Table,
    plot: Plot,
}

/// Runs the suite named by `config` without touching the filesystem.
pub fn execute(config: &ExperimentConfig) -> Result<RunRecord> {
    config.validate()?;
    let start = Instant::now();
    let out = match config.suite {
        Suite::Convergence => convergence(config)?,
        Suite::Nonuniqueness => nonuniqueness(config)?,
        Suite::PinningEquivalence => pinning_equivalence(config)?,
        Suite::Oscillation => oscillation(config)?,
        Suite::EnergyStability => energy_stability(config)?,
        Suite::DriftNorms => drift_norms(config)?,
        Suite::EpsilonContinuation => epsilon_continuation(config)?,
    };
    let converged = out.runs.iter().filter_map(|r| r.solve.as_ref()).all(|s| s.converged);
    Ok(RunRecord {
        config: config.clone(),
        runs: out.runs,
        summary: out.summary,
        table: out.table,
        plot: out.plot,
        converged,
        wall_clock_ms: start.elapsed().as_millis() as u64,
        artifacts: Vec::new(),
    })
}

/// Full estimate report, or `None` when the grid is too coarse for the
/// oscillation table.
fn estimate(u: &DiscreteField, grid: &Grid) -> Result<Option<EstimateReport>> {
    match measure(u, grid) {
        Ok(e) => Ok(Some(e)),
        Err(sdlab_core::Error::Measurement(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn grids(config: &ExperimentConfig) -> Result<Vec<Grid>> {
    config.grids.iter().map(|g: &GridSize| Ok(build_disk_grid(g.n_r, g.n_theta)?)).collect()
}

fn divfree(beta: f64) -> DivFree {
    if beta == 0.0 {
        DivFree::None
    } else {
        DivFree::Swirl { beta }
    }
}

fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::Centered => "centered",
        Scheme::Upwind => "upwind",
    }
}

fn insert(map: &mut BTreeMap<String, f64>, name: &str, value: f64) {
    if value.is_finite() {
        map.insert(name.to_string(), value);
    }
}

fn running_order(e_prev: f64, e: f64, h_prev: f64, h: f64) -> f64 {
    (e_prev / e).ln() / (h_prev / h).ln()
}

fn convergence(config: &ExperimentConfig) -> Result<Outcome> {
    let u_star = config.u_star.unwrap_or(UStar::OneMinusR2);
    let eps = if config.alpha == 0.0 { 0.0 } else { CONVERGENCE_EPSILON };
    let drift = DriftSpec::new(config.alpha, eps, divfree(config.beta));
    let (source, exact) = analysis::manufactured(u_star, &drift)?;
    let spec = ProblemSpec::scalar(drift, source).with_scheme(config.scheme).with_q(config.q);

    let mut runs = grids(config)?
        .par_iter()
        .map(|grid| -> Result<GridRun> {
            let (u, report) = linear_solve(&assemble(&spec, grid)?, config.tol)?;
            let mut run = GridRun::new(grid, "manufactured");
            run.set("error_sup", reconstruction_sup_error(grid, &u, |r, _| exact.value(r))?);
            run.set("error_energy", energy_norm(grid, &u.sub(&grid.sample(|r, _| exact.value(r))))?);
            run.estimate = estimate(&u, grid)?;
            run.solve = Some(report);
            Ok(run)
        })
        .collect::<Result<Vec<_>>>()?;

    let hs: Vec<f64> = runs.iter().map(|r| r.h_r).collect();
    let sup: Vec<f64> = runs.iter().map(|r| r.metric("error_sup").unwrap_or(0.0)).collect();
    let energy: Vec<f64> = runs.iter().map(|r| r.metric("error_energy").unwrap_or(0.0)).collect();
    let order = fit_convergence_order(&sup, &hs).ok();
    let mut summary = BTreeMap::new();
    if let Some(o) = order {
        insert(&mut summary, "fitted_order", o);
        for run in &mut runs {
            if let Some(est) = run.estimate.as_mut() {
                est.fitted_order = Some(o);
            }
        }
    }
    if let Ok(o) = fit_convergence_order(&energy, &hs) {
        insert(&mut summary, "fitted_order_energy", o);
    }

    let mut table = Table::new(&[
        "n_r", "n_theta", "h_r", "scheme", "alpha", "beta", "error_sup", "error_energy", "order_running",
    ]);
    for (i, r) in runs.iter().enumerate() {
        let running = (i > 0).then(|| running_order(sup[i - 1], sup[i], hs[i - 1], hs[i]));
        table.push(vec![
            Cell::int(r.n_r),
            Cell::int(r.n_theta),
            Cell::num(r.h_r),
            Cell::text(scheme_name(config.scheme)),
            Cell::num(config.alpha),
            Cell::num(config.beta),
            Cell::num(sup[i]),
            Cell::num(energy[i]),
            Cell::opt(running),
        ]);
    }
    let plot = Plot {
        title: format!("{} scheme, alpha = {}", scheme_name(config.scheme), config.alpha),
        x_label: "h_r".into(),
        y_label: "error".into(),
        log_x: true,
        log_y: true,
        series: vec![
            Series { label: "sup".into(), points: hs.iter().copied().zip(sup.iter().copied()).collect() },
            Series { label: "energy".into(), points: hs.iter().copied().zip(energy.iter().copied()).collect() },
        ],
    };
    Ok(Outcome { runs, summary, table, plot })
}

fn nonuniqueness(config: &ExperimentConfig) -> Result<Outcome> {
    let spec = ProblemSpec::scalar(DriftSpec::singular(config.alpha, 0.0), SourceProfile::Zero);
    let runs = grids(config)?
        .par_iter()
        .map(|grid| -> Result<GridRun> {
            let u = kernel_solution(config.alpha, 1.0, grid)?;
            let system = assemble_radial_exact(&spec, grid)?;
            let mut run = GridRun::new(grid, "kernel");
            run.set("kernel_residual", sdlab_core::discretize::tested_residual(&system, grid, &u, 2.0 * grid.h_r())?);
            run.set("energy_norm", energy_norm(grid, &u)?);
            run.set("center_value", u[0]);
            run.estimate = estimate(&u, grid)?;
            Ok(run)
        })
        .collect::<Result<Vec<_>>>()?;

    let res: Vec<f64> = runs.iter().map(|r| r.metric("kernel_residual").unwrap_or(0.0)).collect();
    let en: Vec<f64> = runs.iter().map(|r| r.metric("energy_norm").unwrap_or(0.0)).collect();
    let mut summary = BTreeMap::new();
    let ratios: Vec<f64> = res.windows(2).map(|w| w[0] / w[1]).collect();
    insert(&mut summary, "min_residual_ratio", ratios.iter().copied().fold(f64::INFINITY, f64::min));
    let (lo, hi) = en.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    insert(&mut summary, "energy_spread", hi / lo - 1.0);

    let mut table =
        Table::new(&["n_r", "n_theta", "h_r", "alpha", "kernel_residual", "energy_norm", "residual_ratio"]);
    for (i, r) in runs.iter().enumerate() {
        table.push(vec![
            Cell::int(r.n_r),
            Cell::int(r.n_theta),
            Cell::num(r.h_r),
            Cell::num(config.alpha),
            Cell::num(res[i]),
            Cell::num(en[i]),
            Cell::opt((i > 0).then(|| ratios[i - 1])),
        ]);
    }
    let plot = Plot {
        title: format!("kernel residual, alpha = {}", config.alpha),
        x_label: "h_r".into(),
        y_label: "tested residual".into(),
        log_x: true,
        log_y: true,
        series: vec![Series {
            label: "c (r^|alpha| - 1)".into(),
            points: runs.iter().map(|r| r.h_r).zip(res.iter().copied()).collect(),
        }],
    };
    Ok(Outcome { runs, summary, table, plot })
}

/// The pinned problem used by the pinning and oscillation suites, together
/// with the drift the fixed point iterates on.
fn pinned_spec(config: &ExperimentConfig) -> ProblemSpec {
    let divfree = if config.beta == 0.0 {
        DivFree::None
    } else {
        DivFree::Mollified { base: Box::new(DivFree::Swirl { beta: config.beta }), eta: PINNED_SWIRL_ETA }
    };
    ProblemSpec::scalar(DriftSpec::new(config.alpha, 0.0, divfree), PINNED_SOURCE)
        .with_q(config.q)
        .with_scheme(config.scheme)
        .pinned(true)
}

/// Reference pinned solve: change of variables for `b = 0`, otherwise a
/// direct solve of the full pinned system.
fn pinned_reference(spec: &ProblemSpec, grid: &Grid, tol: f64) -> Result<(DiscreteField, SolveReport)> {
    if spec.drift.divfree.is_none() {
        Ok(solve_pinned_cov(spec, grid, tol)?)
    } else {
        Ok(linear_solve(&assemble(spec, grid)?, tol)?)
    }
}

fn pinning_equivalence(config: &ExperimentConfig) -> Result<Outcome> {
    let spec = pinned_spec(config);
    let reference_case = if spec.drift.divfree.is_none() { "cov" } else { "direct" };
    let per_grid = grids(config)?
        .par_iter()
        .map(|grid| -> Result<(GridRun, GridRun)> {
            let system = assemble(&spec, grid)?;
            let (u_ref, rep_ref) = pinned_reference(&spec, grid, config.tol)?;
            let (u_fp, rep_fp) = solve_pinned_fixed_point(&spec, grid, config.tol, MAX_OUTER)?;
            let kernel = kernel_solution(config.alpha, 1.0, grid)?;
            let res_ref = sdlab_core::math::norm2(&system.residual(&u_ref));
            let res_perturbed = sdlab_core::math::norm2(&system.residual(&u_ref.axpy(1.0, &kernel)));
            let diff = energy_norm(grid, &u_ref.sub(&u_fp))?;

            let mut a = GridRun::new(grid, reference_case);
            a.set("energy_norm", energy_norm(grid, &u_ref)?);
            a.set("center_value", u_ref[0]);
            a.set("residual", res_ref);
            a.set("kernel_perturbed_residual", res_perturbed);
            a.set("kernel_violation_ratio", res_perturbed / res_ref);
            a.set("energy_difference", diff);
            a.estimate = estimate(&u_ref, grid)?;
            a.solve = Some(rep_ref);

            let mut b = GridRun::new(grid, "fixed_point");
            b.set("energy_norm", energy_norm(grid, &u_fp)?);
            b.set("center_value", u_fp[0]);
            b.set("residual", sdlab_core::math::norm2(&system.residual(&u_fp)));
            b.set("energy_difference", diff);
            b.set("outer_iterations", rep_fp.fixed_point_iters as f64);
            b.estimate = estimate(&u_fp, grid)?;
            b.solve = Some(rep_fp);
            Ok((a, b))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut summary = BTreeMap::new();
    let max = |name: &str, runs: &[&GridRun]| runs.iter().filter_map(|r| r.metric(name)).fold(0.0f64, f64::max);
    let refs: Vec<&GridRun> = per_grid.iter().map(|p| &p.0).collect();
    let fps: Vec<&GridRun> = per_grid.iter().map(|p| &p.1).collect();
    insert(&mut summary, "max_energy_difference", max("energy_difference", &refs));
    insert(
        &mut summary,
        "min_kernel_violation_ratio",
        refs.iter().filter_map(|r| r.metric("kernel_violation_ratio")).fold(f64::INFINITY, f64::min),
    );
    let center = refs.iter().chain(&fps).filter_map(|r| r.metric("center_value")).fold(0.0f64, |m, c| m.max(c.abs()));
    insert(&mut summary, "max_abs_center_value", center);
    let diff_points: Vec<(f64, f64)> =
        refs.iter().filter_map(|r| Some((r.h_r, r.metric("energy_difference")?))).collect();

    let mut table = Table::new(&[
        "n_r",
        "n_theta",
        "h_r",
        "method",
        "energy_norm",
        "center_value",
        "residual",
        "energy_difference",
        "kernel_violation_ratio",
        "iterations",
    ]);
    let mut runs = Vec::new();
    for (a, b) in per_grid {
        for r in [&a, &b] {
            table.push(vec![
                Cell::int(r.n_r),
                Cell::int(r.n_theta),
                Cell::num(r.h_r),
                Cell::text(r.case.clone()),
                Cell::opt(r.metric("energy_norm")),
                Cell::opt(r.metric("center_value")),
                Cell::opt(r.metric("residual")),
                Cell::opt(r.metric("energy_difference")),
                Cell::opt(r.metric("kernel_violation_ratio")),
                Cell::int(r.solve.as_ref().map_or(0, |s| s.iterations)),
            ]);
        }
        runs.push(a);
        runs.push(b);
    }
    let plot = Plot {
        title: format!("pinned solutions, alpha = {}", config.alpha),
        x_label: "h_r".into(),
        y_label: "energy-norm difference".into(),
        log_x: true,
        log_y: true,
        series: vec![Series {
            label: format!("{reference_case} vs fixed point"),
            points: diff_points,
        }],
    };
    Ok(Outcome { runs, summary, table, plot })
}

fn oscillation(config: &ExperimentConfig) -> Result<Outcome> {
    let spec = pinned_spec(config);
    let runs = grids(config)?
        .par_iter()
        .map(|grid| -> Result<(GridRun, Vec<(usize, Option<f64>)>)> {
            let (u, report) = pinned_reference(&spec, grid, config.tol)?;
            let g = grid.sample(|r, t| PINNED_SOURCE.value(r, t));
            let f_norm = lp_norm(grid, &g, config.q)?;
            let est = measure(&u, grid)?;
            let contraction = oscillation_contraction(&u, grid, config.q, f_norm)?;
            let mut run = GridRun::new(grid, "pinned");
            if let Some(m) = max_ratio_smallest(&contraction, CONTRACTION_RADII) {
                run.set("max_contraction_ratio", m);
            }
            if let Some(mu) = est.fitted_mu {
                run.set("fitted_mu", mu);
            }
            run.set("source_lq_norm", f_norm);
            let ratios = est
                .osc_table
                .iter()
                .map(|e| (e.k as usize, contraction.iter().find(|c| c.radius == e.radius).map(|c| c.ratio)))
                .collect();
            run.estimate = Some(est);
            run.solve = Some(report);
            Ok((run, ratios))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut summary = BTreeMap::new();
    if let Some((finest, _)) = runs.last() {
        for name in ["max_contraction_ratio", "fitted_mu"] {
            if let Some(v) = finest.metric(name) {
                insert(&mut summary, name, v);
            }
        }
    }
    let mut table = Table::new(&["n_r", "n_theta", "k", "R", "osc", "ratio_half_over_double"]);
    let mut series = Vec::new();
    for (run, ratios) in &runs {
        let est = run.estimate.as_ref().expect("set above");
        if est.osc_table.is_empty() {
            table.push(vec![Cell::int(run.n_r), Cell::int(run.n_theta), Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty]);
        }
        for (e, (_, ratio)) in est.osc_table.iter().zip(ratios) {
            table.push(vec![
                Cell::int(run.n_r),
                Cell::int(run.n_theta),
                Cell::int(e.k as usize),
                Cell::num(e.radius),
                Cell::num(e.osc),
                Cell::opt(*ratio),
            ]);
        }
        series.push(Series {
            label: format!("n_r = {}", run.n_r),
            points: est.osc_table.iter().map(|e| (e.radius, e.osc)).collect(),
        });
    }
    let plot = Plot {
        title: format!("oscillation at the origin, alpha = {}", config.alpha),
        x_label: "R".into(),
        y_label: "osc over B_R".into(),
        log_x: true,
        log_y: true,
        series,
    };
    Ok(Outcome { runs: runs.into_iter().map(|r| r.0).collect(), summary, table, plot })
}

/// Seeded smooth bumps placed inside the disk of radius 0.55.
pub fn random_sources(seed: u64, count: usize) -> Vec<SourceProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let rho: f64 = rng.gen_range(0.0..0.55);
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let width: f64 = rng.gen_range(0.1..0.3);
            let amplitude: f64 = rng.gen_range(0.5..1.5);
            SourceProfile::Bump { x0: rho * phi.cos(), y0: rho * phi.sin(), width, amplitude }
        })
        .collect()
}

fn energy_stability(config: &ExperimentConfig) -> Result<Outcome> {
    let sources = random_sources(config.seed, config.sources);
    let grids = grids(config)?;
    let schedule = config.epsilon_schedule();
    let jobs: Vec<(usize, usize)> =
        (0..grids.len()).flat_map(|g| (0..sources.len()).map(move |s| (g, s))).collect();
    let runs = jobs
        .par_iter()
        .map(|&(gi, si)| -> Result<GridRun> {
            let grid = &grids[gi];
            let src = &sources[si];
            let (u, report) = if config.alpha >= 0.0 {
                let spec = ProblemSpec::scalar(DriftSpec::new(config.alpha, 0.0, divfree(config.beta)), src.clone())
                    .with_scheme(config.scheme);
                solve_regularized(&spec, grid, &schedule, config.tol)?
            } else {
                let spec = ProblemSpec { rhs: sdlab_core::RhsMode::ScalarG(src.clone()), ..pinned_spec(config) };
                pinned_reference(&spec, grid, config.tol)?
            };
            let mut run = GridRun::new(grid, format!("source_{si}"));
            let e = energy_norm(grid, &u)?;
            let p = source_potential_norm(grid, src, config.tol)?;
            run.set("energy_norm", e);
            run.set("source_potential", p);
            run.set("ratio", e / p);
            run.estimate = estimate(&u, grid)?;
            run.solve = Some(report);
            Ok(run)
        })
        .collect::<Result<Vec<_>>>()?;

    let ns = sources.len();
    let ratio = |gi: usize, si: usize| runs[gi * ns + si].metric("ratio").unwrap_or(f64::NAN);
    let mut summary = BTreeMap::new();
    let mut worst = 0.0f64;
    let mut table = Table::new(&[
        "n_r",
        "n_theta",
        "h_r",
        "source",
        "x0",
        "y0",
        "width",
        "amplitude",
        "energy_norm",
        "source_potential",
        "ratio",
        "ratio_change",
    ]);
    for (gi, _) in grids.iter().enumerate() {
        for (si, src) in sources.iter().enumerate() {
            let r = &runs[gi * ns + si];
            let change = (gi > 0).then(|| (ratio(gi, si) - ratio(gi - 1, si)).abs() / ratio(gi - 1, si));
            if let Some(c) = change {
                worst = worst.max(c);
            }
            let (x0, y0, width, amplitude) = match *src {
                SourceProfile::Bump { x0, y0, width, amplitude } => (x0, y0, width, amplitude),
                _ => unreachable!("random sources are bumps"),
            };
            table.push(vec![
                Cell::int(r.n_r),
                Cell::int(r.n_theta),
                Cell::num(r.h_r),
                Cell::int(si),
                Cell::num(x0),
                Cell::num(y0),
                Cell::num(width),
                Cell::num(amplitude),
                Cell::opt(r.metric("energy_norm")),
                Cell::opt(r.metric("source_potential")),
                Cell::opt(r.metric("ratio")),
                Cell::opt(change),
            ]);
        }
    }
    if grids.len() > 1 {
        insert(&mut summary, "max_ratio_change", worst);
    }
    let series = (0..ns)
        .map(|si| Series {
            label: format!("source {si}"),
            points: (0..grids.len()).map(|gi| (grids[gi].h_r(), ratio(gi, si))).collect(),
        })
        .collect();
    let plot = Plot {
        title: format!("energy over source potential, alpha = {}, seed = {}", config.alpha, config.seed),
        x_label: "h_r".into(),
        y_label: "ratio".into(),
        log_x: true,
        log_y: false,
        series,
    };
    Ok(Outcome { runs, summary, table, plot })
}

fn drift_norms(config: &ExperimentConfig) -> Result<Outcome> {
    let beta = if config.beta == 0.0 { 1.0 } else { config.beta };
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let stream = DriftSpec::new(0.0, 0.0, DivFree::Stream { profile: StreamProfile::Dipole { amplitude: 1.0 } });
    let per_grid = grids(config)?
        .par_iter()
        .map(|grid| -> Result<Vec<GridRun>> {
            let mut out = Vec::new();
            let mut field_run = |case: &str, weak: f64, reference: f64, eta: Option<f64>, div: Option<f64>| {
                let mut run = GridRun::new(grid, case);
                run.set("weak_l2", weak);
                run.set("reference", reference);
                run.set("ratio", weak / reference);
                if let Some(e) = eta {
                    run.set("eta", e);
                }
                if let Some(d) = div {
                    run.set("max_divergence", d);
                }
                out.push(run);
            };
            let inv = singular_part(-1.0, 0.0, grid);
            field_run("inverse_radius", weak_l2_norm(&inv, grid)?, sqrt_pi, None, None);
            let swirl = eval_drift(&DriftSpec::new(0.0, 0.0, DivFree::Swirl { beta }), grid)?;
            field_run("swirl", weak_l2_norm(&swirl, grid)?, beta * sqrt_pi, None, None);
            let raw = eval_drift(&stream, grid)?;
            let raw_weak = weak_l2_norm(&raw, grid)?;
            let raw_div = discrete_divergence(&raw, grid)?.max_abs();
            field_run("stream", raw_weak, raw_weak, None, Some(raw_div));
            for &eta in &config.etas {
                let m = mollify_divfree(&stream, eta, grid)?;
                let div = discrete_divergence(&m, grid)?.max_abs();
                field_run("mollified_stream", weak_l2_norm(&m, grid)?, raw_weak, Some(eta), Some(div));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let runs: Vec<GridRun> = per_grid.into_iter().flatten().collect();

    let mut summary = BTreeMap::new();
    let finest = config.grids.last().expect("validated").n_r;
    for r in runs.iter().filter(|r| r.n_r == finest) {
        let ratio = r.metric("ratio").unwrap_or(f64::NAN);
        match r.case.as_str() {
            "inverse_radius" => insert(&mut summary, "inverse_radius_rel_error", (ratio - 1.0).abs()),
            "swirl" => insert(&mut summary, "swirl_rel_error", (ratio - 1.0).abs()),
            "mollified_stream" => {
                let worst = summary.get("max_mollified_ratio").copied().unwrap_or(0.0);
                insert(&mut summary, "max_mollified_ratio", worst.max(ratio));
                let div = summary.get("max_mollified_divergence").copied().unwrap_or(0.0);
                insert(&mut summary, "max_mollified_divergence", div.max(r.metric("max_divergence").unwrap_or(0.0)));
            }
            _ => {}
        }
    }
    insert(&mut summary, "beta", beta);

    let mut table =
        Table::new(&["n_r", "n_theta", "field", "eta", "weak_l2", "reference", "ratio", "max_divergence"]);
    for r in &runs {
        table.push(vec![
            Cell::int(r.n_r),
            Cell::int(r.n_theta),
            Cell::text(r.case.clone()),
            Cell::opt(r.metric("eta")),
            Cell::opt(r.metric("weak_l2")),
            Cell::opt(r.metric("reference")),
            Cell::opt(r.metric("ratio")),
            Cell::opt(r.metric("max_divergence")),
        ]);
    }
    let series = config
        .grids
        .iter()
        .map(|g| Series {
            label: format!("n_r = {}", g.n_r),
            points: runs
                .iter()
                .filter(|r| r.n_r == g.n_r && r.case == "mollified_stream")
                .filter_map(|r| Some((r.metric("eta")?, r.metric("ratio")?)))
                .collect(),
        })
        .collect();
    let plot = Plot {
        title: "mollified stream field, weak norm over unmollified".into(),
        x_label: "eta".into(),
        y_label: "ratio".into(),
        log_x: true,
        log_y: false,
        series,
    };
    Ok(Outcome { runs, summary, table, plot })
}

fn epsilon_continuation(config: &ExperimentConfig) -> Result<Outcome> {
    let schedule = config.epsilon_schedule();
    let spec = ProblemSpec::scalar(
        DriftSpec::new(config.alpha, 0.0, divfree(config.beta)),
        SourceProfile::Constant { value: 1.0 },
    )
    .with_scheme(config.scheme);
    let runs = grids(config)?
        .par_iter()
        .map(|grid| -> Result<GridRun> {
            let (u, report) = solve_regularized(&spec, grid, &schedule, config.tol)?;
            let mut run = GridRun::new(grid, "continuation");
            let ratios: Vec<f64> = report.increments.windows(2).map(|w| w[0] / w[1]).collect();
            if let Some(m) = ratios.iter().copied().reduce(f64::min) {
                run.set("min_increment_ratio", m);
            }
            run.set("energy_norm", energy_norm(grid, &u)?);
            run.estimate = estimate(&u, grid)?;
            run.solve = Some(report);
            Ok(run)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut summary = BTreeMap::new();
    let worst = runs.iter().filter_map(|r| r.metric("min_increment_ratio")).reduce(f64::min);
    if let Some(w) = worst {
        insert(&mut summary, "min_increment_ratio", w);
    }
    let mut table = Table::new(&["n_r", "n_theta", "step", "epsilon", "increment", "ratio"]);
    let mut series = Vec::new();
    for r in &runs {
        let rep = r.solve.as_ref().expect("set above");
        for (k, inc) in rep.increments.iter().enumerate() {
            let ratio = (k > 0).then(|| rep.increments[k - 1] / inc);
            table.push(vec![
                Cell::int(r.n_r),
                Cell::int(r.n_theta),
                Cell::int(k + 1),
                Cell::num(rep.epsilon_schedule[k + 1]),
                Cell::num(*inc),
                Cell::opt(ratio),
            ]);
        }
        series.push(Series {
            label: format!("n_r = {}", r.n_r),
            points: rep.increments.iter().enumerate().map(|(k, inc)| (rep.epsilon_schedule[k + 1], *inc)).collect(),
        });
    }
    let plot = Plot {
        title: format!("energy increments along the epsilon schedule, alpha = {}", config.alpha),
        x_label: "epsilon".into(),
        y_label: "increment".into(),
        log_x: true,
        log_y: true,
        series,
    };
    Ok(Outcome { runs, summary, table, plot })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_sources_are_seeded() {
        assert_eq!(random_sources(7, 5), random_sources(7, 5));
        assert_ne!(random_sources(7, 5), random_sources(8, 5));
        for s in random_sources(3, 20) {
            let SourceProfile::Bump { x0, y0, width, .. } = s else { panic!() };
            assert!((x0 * x0 + y0 * y0).sqrt() + width < 1.0);
        }
    }

    #[test]
    fn convergence_table_has_one_row_per_grid() {
        let c = ExperimentConfig::new("c", Suite::Convergence, GridSize::doubling(&[8, 16, 32])).with_alpha(1.0);
        let rec = execute(&c).unwrap();
        assert_eq!(rec.table.rows.len(), 3);
        assert_eq!(rec.table.columns.join(","), "n_r,n_theta,h_r,scheme,alpha,beta,error_sup,error_energy,order_running");
        assert_eq!(rec.table.rows[0][8], Cell::Empty);
        assert!(rec.converged);
        let order = rec.summary_value("fitted_order").unwrap();
        assert!((1.5..2.5).contains(&order), "order {order}");
    }

    #[test]
    fn nonuniqueness_residual_decreases() {
        let c = ExperimentConfig::new("n", Suite::Nonuniqueness, GridSize::doubling(&[16, 32, 64])).with_alpha(-0.5);
        let rec = execute(&c).unwrap();
        let res: Vec<f64> =
            rec.table.column("kernel_residual").unwrap().iter().map(|c| c.as_f64().unwrap()).collect();
        assert!(res.windows(2).all(|w| w[1] < w[0]), "{res:?}");
    }
}
