//! Oracle fields, manufactured problems, and the measurements behind every
//! estimate: norms, dyadic oscillation at the origin, fitted exponents.

use alloc::vec::Vec;

use crate::discretize::{assemble, ProblemSpec};
use crate::drift::{DivFree, DriftSpec};
use crate::error::{Error, Result};
use crate::field::{energy_norm, gradient, gradient_lp_norm, DiscreteField};
use crate::grid::{Grid, CENTER};
use crate::math;
use crate::profiles::{SourceProfile, UStar};
use crate::solve::linear_solve;

/// Exponents `p` reported in [`EstimateReport::grad_lp`].
pub const GRAD_LP_EXPONENTS: [f64; 4] = [2.0, 2.5, 3.0, 4.0];
/// Upper clamp for the fitted oscillation exponent.
pub const MU_CAP: f64 = 1.5;
/// Number of smallest radii used by the exponent fit.
pub const MU_FIT_RADII: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GradLp {
    pub p: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OscEntry {
    pub k: u32,
    /// `R = 2^-k`
    pub radius: f64,
    pub osc: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EstimateReport {
    pub energy_norm: f64,
    pub sup_norm: f64,
    pub grad_lp: Vec<GradLp>,
    pub osc_table: Vec<OscEntry>,
    /// `None` when every fitted oscillation is zero.
    pub fitted_mu: Option<f64>,
    pub fitted_order: Option<f64>,
}

impl EstimateReport {
    pub fn grad_lp(&self, p: f64) -> Option<f64> {
        self.grad_lp.iter().find(|e| e.p == p).map(|e| e.value)
    }
}

/// `c (r^|alpha| - 1)`, a homogeneous solution for `alpha < 0` without pinning.
pub fn kernel_solution(alpha: f64, c: f64, grid: &Grid) -> Result<DiscreteField> {
    if !(alpha < 0.0) {
        return Err(Error::InvalidProblem("the kernel family exists only for alpha < 0".into()));
    }
    let a = -alpha;
    let mut u = grid.sample(|r, _| c * (math::powf(r, a) - 1.0));
    for k in 0..grid.node_count() {
        if grid.is_boundary(k) {
            u[k] = 0.0;
        }
    }
    u[CENTER] = -c;
    Ok(u)
}

/// `c1 r^-alpha + c2` (or `c1 ln r + c2` for `alpha = 0`).
///
/// Rejected when the formula diverges at the center node.
pub fn radial_family(alpha: f64, c1: f64, c2: f64, grid: &Grid) -> Result<DiscreteField> {
    if c1 != 0.0 && alpha >= 0.0 {
        return Err(Error::InvalidProblem(alloc::format!(
            "radial family with alpha = {alpha}, c1 = {c1} diverges at the center"
        )));
    }
    Ok(radial_family_unchecked(alpha, c1, c2, grid, 0.0))
}

/// Radial family on the annulus `r >= r_min > 0`; nodes inside are set to 0
/// and must not be read by the caller.
pub fn radial_family_annulus(alpha: f64, c1: f64, c2: f64, grid: &Grid, r_min: f64) -> Result<DiscreteField> {
    if !(r_min > 0.0) {
        return Err(Error::InvalidProblem("annulus needs r_min > 0".into()));
    }
    Ok(radial_family_unchecked(alpha, c1, c2, grid, r_min))
}

fn radial_family_unchecked(alpha: f64, c1: f64, c2: f64, grid: &Grid, r_min: f64) -> DiscreteField {
    let eval = |r: f64| {
        if alpha == 0.0 {
            c1 * math::ln(r) + c2
        } else {
            c1 * math::powf(r, -alpha) + c2
        }
    };
    let cut = r_min - 1e-12 * grid.h_r();
    grid.sample(|r, _| {
        if r < cut {
            0.0
        } else if r == 0.0 && c1 == 0.0 {
            c2
        } else {
            eval(r)
        }
    })
}

/// Manufactured source for the radial `u_star` under `spec`.
///
/// The divergence-free part must be orthogonal to radial gradients: none,
/// a swirl, or a mollified swirl.
pub fn manufactured(u_star: UStar, spec: &DriftSpec) -> Result<(SourceProfile, UStar)> {
    let admissible = match &spec.divfree {
        DivFree::None | DivFree::Swirl { .. } => true,
        DivFree::Mollified { base, .. } => matches!(**base, DivFree::None | DivFree::Swirl { .. }),
        DivFree::Stream { .. } => false,
    };
    if !admissible {
        return Err(Error::UnsupportedProfile(
            "manufactured sources need a drift orthogonal to radial gradients".into(),
        ));
    }
    if let UStar::PowerBubble { a } = u_star {
        if !(a >= 0.0) {
            return Err(Error::UnsupportedProfile(alloc::format!("power bubble exponent {a} < 0")));
        }
    }
    Ok((SourceProfile::Manufactured { ustar: u_star, alpha: spec.alpha, epsilon: spec.epsilon }, u_star))
}

/// [`manufactured`] restricted to profiles with `u_star(0) = 0`, as pinned runs require.
pub fn manufactured_pinned(u_star: UStar, spec: &DriftSpec) -> Result<(SourceProfile, UStar)> {
    if !u_star.vanishes_at_origin() {
        return Err(Error::UnsupportedProfile("pinned runs need u_star(0) = 0".into()));
    }
    manufactured(u_star, spec)
}

/// Dyadic exponents `k = 0..=floor(log2(1 / (4 h)))`.
fn dyadic_levels(grid: &Grid) -> u32 {
    math::floor(math::log2(1.0 / (4.0 * grid.h_r()))) as u32
}

/// `max - min` of `u` over nodes with `r <= radius`.
pub fn oscillation(u: &DiscreteField, grid: &Grid, radius: f64) -> Result<f64> {
    grid.check(u)?;
    let cut = radius + 1e-12 * grid.h_r();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..grid.node_count() {
        if grid.radius(k) <= cut {
            lo = lo.min(u[k]);
            hi = hi.max(u[k]);
        }
    }
    Ok(hi - lo)
}

pub fn osc_table(u: &DiscreteField, grid: &Grid) -> Result<Vec<OscEntry>> {
    let kmax = dyadic_levels(grid);
    if kmax < 2 {
        return Err(Error::Measurement(alloc::format!(
            "n_r = {} gives fewer than 3 dyadic radii",
            grid.n_r()
        )));
    }
    (0..=kmax)
        .map(|k| {
            let radius = math::powf(2.0, -(k as f64));
            Ok(OscEntry { k, radius, osc: oscillation(u, grid, radius)? })
        })
        .collect()
}

/// Least-squares slope of `ln osc` against `ln R` over the smallest radii with
/// positive oscillation, clamped to `[0, MU_CAP]`.
pub fn fit_mu(table: &[OscEntry]) -> Option<f64> {
    let usable: Vec<&OscEntry> = table.iter().filter(|e| e.osc > 0.0).collect();
    if usable.len() < 2 {
        return None;
    }
    let tail = &usable[usable.len().saturating_sub(MU_FIT_RADII)..];
    let xs: Vec<f64> = tail.iter().map(|e| math::ln(e.radius)).collect();
    let ys: Vec<f64> = tail.iter().map(|e| math::ln(e.osc)).collect();
    Some(math::ls_slope(&xs, &ys).clamp(0.0, MU_CAP))
}

pub fn measure(u: &DiscreteField, grid: &Grid) -> Result<EstimateReport> {
    grid.check(u)?;
    let table = osc_table(u, grid)?;
    let grad_lp = GRAD_LP_EXPONENTS
        .iter()
        .map(|&p| Ok(GradLp { p, value: gradient_lp_norm(grid, u, p)? }))
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateReport {
        energy_norm: energy_norm(grid, u)?,
        sup_norm: u.max_abs(),
        grad_lp,
        fitted_mu: fit_mu(&table),
        osc_table: table,
        fitted_order: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Contraction {
    pub radius: f64,
    /// `osc(B_{R/2}) / osc(B_{2R})`
    pub ratio: f64,
    /// `R^(1 - 2/q) * f_norm`
    pub forcing: f64,
}

/// Contraction ratios over dyadic radii `R` with both `R/2` and `2R` in the
/// oscillation table, skipping radii where `osc(B_{2R})` is numerically zero.
pub fn oscillation_contraction(u: &DiscreteField, grid: &Grid, q: f64, f_norm: f64) -> Result<Vec<Contraction>> {
    let table = osc_table(u, grid)?;
    if table.len() < 4 {
        return Err(Error::Measurement("contraction needs at least 4 dyadic radii".into()));
    }
    let mut out = Vec::new();
    for w in table.windows(3) {
        let (outer, mid, inner) = (w[0], w[1], w[2]);
        if outer.osc > 10.0 * f64::EPSILON {
            out.push(Contraction {
                radius: mid.radius,
                ratio: inner.osc / outer.osc,
                forcing: math::powf(mid.radius, 1.0 - 2.0 / q) * f_norm,
            });
        }
    }
    Ok(out)
}

/// Largest ratio among the `count` smallest radii.
pub fn max_ratio_smallest(entries: &[Contraction], count: usize) -> Option<f64> {
    let start = entries.len().saturating_sub(count);
    entries[start..].iter().map(|c| c.ratio).reduce(f64::max)
}

/// Least-squares slope of `ln error` against `ln h`.
pub fn fit_convergence_order(errors: &[f64], h_values: &[f64]) -> Result<f64> {
    if errors.len() != h_values.len() || errors.len() < 3 {
        return Err(Error::Measurement("need at least 3 matched (error, h) pairs".into()));
    }
    if errors.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Measurement("errors must be positive".into()));
    }
    if h_values.windows(2).any(|w| !(w[1] < w[0])) || !(h_values[h_values.len() - 1] > 0.0) {
        return Err(Error::Measurement("h values must be positive and strictly decreasing".into()));
    }
    let xs: Vec<f64> = h_values.iter().map(|h| math::ln(*h)).collect();
    let ys: Vec<f64> = errors.iter().map(|e| math::ln(*e)).collect();
    Ok(math::ls_slope(&xs, &ys))
}

/// Sup of `|I_h u - exact|` for the piecewise-linear (in `r` and `theta`)
/// reconstruction `I_h u`, sampled at nodes and at radial and angular midpoints.
pub fn reconstruction_sup_error(
    grid: &Grid,
    u: &DiscreteField,
    exact: impl Fn(f64, f64) -> f64,
) -> Result<f64> {
    grid.check(u)?;
    let (nr, nt) = (grid.n_r(), grid.n_theta());
    let (h, ht) = (grid.h_r(), grid.h_theta());
    let mut err = math::abs(u[CENTER] - exact(0.0, 0.0));
    for i in 1..=nr {
        let r = grid.radius_of_ring(i);
        for j in 0..nt {
            let t = j as f64 * ht;
            let k = grid.index(i, j);
            let inner = u[grid.index_or_center(i - 1, j)];
            err = err
                .max(math::abs(u[k] - exact(r, t)))
                .max(math::abs(0.5 * (u[k] + inner) - exact(r - 0.5 * h, t)))
                .max(math::abs(0.5 * (u[k] + u[grid.index(i, j + 1)]) - exact(r, t + 0.5 * ht)));
        }
    }
    Ok(err)
}

/// `max |u_k - exact_k|` over nodes.
pub fn nodal_sup_error(grid: &Grid, u: &DiscreteField, exact: impl Fn(f64, f64) -> f64) -> Result<f64> {
    grid.check(u)?;
    Ok((0..grid.node_count()).fold(0.0, |m, k| m.max(math::abs(u[k] - exact(grid.radius(k), grid.angle(k))))))
}

/// `||grad phi||_{L_2}` where `-Laplacian_h phi = g`, phi = 0 on the boundary:
/// the discrete `H^-1`-type size of the source.
pub fn source_potential_norm(grid: &Grid, g: &SourceProfile, tol: f64) -> Result<f64> {
    let spec = ProblemSpec::scalar(DriftSpec::singular(0.0, 0.0), g.clone());
    let (phi, _) = linear_solve(&assemble(&spec, grid)?, tol)?;
    let grad = gradient(grid, &phi)?;
    let w = grid.quad_weights();
    Ok(math::sqrt((0..grid.node_count()).map(|k| w[k] * grad.magnitude_sq(k)).sum()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_disk_grid;

    #[test]
    fn kernel_values() {
        let g = build_disk_grid(8, 16).unwrap();
        let u = kernel_solution(-1.0, 1.0, &g).unwrap();
        assert_eq!(u[g.index(4, 3)], -0.5);
        assert_eq!(u[CENTER], -1.0);
        let u = kernel_solution(-0.5, 2.0, &g).unwrap();
        assert!((0..g.node_count()).filter(|&k| g.is_boundary(k)).all(|k| u[k] == 0.0));
        assert!(kernel_solution(0.0, 1.0, &g).is_err());
    }

    #[test]
    fn radial_family_values() {
        let g = build_disk_grid(8, 16).unwrap();
        assert!(radial_family(0.0, 1.0, 0.0, &g).is_err());
        assert!(radial_family(1.0, 1.0, 0.0, &g).is_err());
        let v = radial_family(-1.0, 1.0, -1.0, &g).unwrap();
        let k = kernel_solution(-1.0, 1.0, &g).unwrap();
        for n in 0..g.node_count() {
            assert!((v[n] - k[n]).abs() < 1e-15);
        }
        let log = radial_family_annulus(0.0, 1.0, 0.0, &g, 0.25).unwrap();
        assert_eq!(log[CENTER], 0.0);
        assert!((log[g.index(4, 0)] - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn order_fit_on_exact_data() {
        let h = [0.1, 0.05, 0.025];
        assert!((fit_convergence_order(&[1e-2, 2.5e-3, 6.25e-4], &h).unwrap() - 2.0).abs() < 1e-12);
        assert!((fit_convergence_order(&[1e-2, 5e-3, 2.5e-3], &h).unwrap() - 1.0).abs() < 1e-12);
        assert!(fit_convergence_order(&[1e-2, 0.0, 1e-3], &h).is_err());
        assert!(fit_convergence_order(&[1e-2, 1e-3], &h[..2]).is_err());
    }

    #[test]
    fn kernel_oscillation_exponent() {
        let g = build_disk_grid(128, 256).unwrap();
        let u = kernel_solution(-0.5, 1.0, &g).unwrap();
        let rep = measure(&u, &g).unwrap();
        assert!((rep.fitted_mu.unwrap() - 0.5).abs() <= 0.1);
        for c in oscillation_contraction(&u, &g, 4.0, 0.0).unwrap() {
            assert!((c.ratio - 0.5).abs() <= 0.05);
        }
    }

    #[test]
    fn smooth_and_constant_fields() {
        let g = build_disk_grid(64, 128).unwrap();
        let u = g.sample(|r, _| 1.0 - r * r);
        let rep = measure(&u, &g).unwrap();
        assert_eq!(rep.fitted_mu, Some(MU_CAP));
        for c in oscillation_contraction(&u, &g, 4.0, 1.0).unwrap() {
            assert!((c.ratio - 1.0 / 16.0).abs() < 1e-9);
        }
        let one = g.sample(|_, _| 3.0);
        let rep = measure(&one, &g).unwrap();
        assert!(rep.osc_table.iter().all(|e| e.osc == 0.0));
        assert_eq!(rep.sup_norm, 3.0);
        assert_eq!(rep.grad_lp(2.0), Some(0.0));
        assert!(oscillation_contraction(&one, &g, 4.0, 1.0).unwrap().is_empty());
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let g = build_disk_grid(8, 16).unwrap();
        assert!(measure(&g.sample(|r, _| r), &g).is_err());
    }

    #[test]
    fn manufactured_catalog() {
        let (g, _) = manufactured(UStar::OneMinusR2, &DriftSpec::singular(1.5, 0.0)).unwrap();
        for r in [0.0, 0.3, 1.0] {
            assert!((g.value(r, 0.2) - 7.0).abs() < 1e-14);
        }
        let swirl = DriftSpec::new(1.5, 0.0, DivFree::Swirl { beta: 2.0 });
        assert_eq!(manufactured(UStar::OneMinusR2, &swirl).unwrap().0, g);
        let (g, _) = manufactured_pinned(UStar::R2OneMinusR, &DriftSpec::singular(-0.5, 0.0)).unwrap();
        assert!(g.value(1.0, 0.0).is_finite());
        assert!(manufactured_pinned(UStar::OneMinusR2, &DriftSpec::singular(-0.5, 0.0)).is_err());
        let stream = DriftSpec::new(0.0, 0.0, DivFree::Stream { profile: crate::profiles::StreamProfile::Dipole { amplitude: 1.0 } });
        assert!(manufactured(UStar::OneMinusR2, &stream).is_err());
    }
}
