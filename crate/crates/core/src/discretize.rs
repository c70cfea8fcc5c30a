//! Assembly of `-Laplacian u + b^(alpha) . grad u` on the polar grid, with
//! Dirichlet boundary rows, optional origin pinning, and the bilinear form
//! `B_alpha[u, eta]`.
//!
//! Interior rows use the strong form
//! `-(u_rr + u_r / r + u_tt / r^2) + b_r u_r + (b_t / r) u_t`; the drift is split
//! into its singular and divergence-free parts and each part is discretized
//! separately, so the fixed-point pipeline can move the second part to the
//! right-hand side without changing the first.

use alloc::vec::Vec;

use crate::drift::{self, DriftSpec, VectorFieldSample};
use crate::error::{Error, Result};
use crate::field::{gradient, DiscreteField};
use crate::grid::{Grid, CENTER};
use crate::profiles::{FluxProfile, SourceProfile};
use crate::sparse::{CsrMatrix, RowBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Scheme {
    #[default]
    Centered,
    /// First-order upwinding of the drift term; yields an M-matrix.
    Upwind,
}

/// Right-hand side of the problem: a scalar `g` or a flux `f` with `g = -div f`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RhsMode {
    ScalarG(SourceProfile),
    VectorF(FluxProfile),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProblemSpec {
    pub drift: DriftSpec,
    pub rhs: RhsMode,
    /// Integrability exponent of `f`; must exceed 2.
    pub q: f64,
    pub pinned: bool,
    #[cfg_attr(feature = "serde", serde(default))]
    pub scheme: Scheme,
}

impl ProblemSpec {
    pub fn new(drift: DriftSpec, rhs: RhsMode) -> Self {
        Self { drift, rhs, q: 4.0, pinned: false, scheme: Scheme::Centered }
    }

    pub fn scalar(drift: DriftSpec, g: SourceProfile) -> Self {
        Self::new(drift, RhsMode::ScalarG(g))
    }

    pub fn pinned(mut self, pinned: bool) -> Self {
        self.pinned = pinned;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_q(mut self, q: f64) -> Self {
        self.q = q;
        self
    }

    pub fn with_drift(&self, drift: DriftSpec) -> Self {
        Self { drift, ..self.clone() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.q > 2.0) {
            return Err(Error::InvalidProblem(alloc::format!("q = {} must exceed 2", self.q)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub pinned: bool,
    pub scheme: Scheme,
}

impl LinearSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    /// `A u - rhs`.
    pub fn residual(&self, u: &DiscreteField) -> Vec<f64> {
        let mut r = self.matrix.mul_vec(u.values());
        r.iter_mut().zip(&self.rhs).for_each(|(a, b)| *a -= b);
        r
    }

    /// `||A u - rhs||_2 / ||rhs||_2`, or the absolute residual for a zero rhs.
    pub fn relative_residual(&self, u: &DiscreteField) -> f64 {
        let r = crate::math::norm2(&self.residual(u));
        let b = crate::math::norm2(&self.rhs);
        if b > 0.0 {
            r / b
        } else {
            r
        }
    }
}

/// Assembles the discrete problem.
///
/// `epsilon = 0` with `alpha != 0` is only accepted for pinned problems, whose
/// center row never evaluates the drift.
pub fn assemble(spec: &ProblemSpec, grid: &Grid) -> Result<LinearSystem> {
    if spec.drift.epsilon == 0.0 && spec.drift.alpha != 0.0 && !spec.pinned {
        return Err(Error::InvalidProblem(
            "epsilon = 0 with alpha != 0 requires pinning or radial-exact assembly".into(),
        ));
    }
    assemble_radial_exact(spec, grid)
}

/// Assembly that accepts the unregularized drift `x / |x|^2` at every `r > 0`
/// node; the center row then uses the regularized value 0 of the singular part.
pub fn assemble_radial_exact(spec: &ProblemSpec, grid: &Grid) -> Result<LinearSystem> {
    spec.validate()?;
    let sing = drift::singular_part(spec.drift.alpha, spec.drift.epsilon, grid);
    let b = drift::divfree_part(&spec.drift.divfree, spec.drift.epsilon, grid)?;
    let matrix = operator(grid, &[&sing, &b], true, spec.scheme, spec.pinned);
    let rhs = assemble_rhs(&spec.rhs, grid, spec.pinned)?;
    Ok(LinearSystem { matrix, rhs, pinned: spec.pinned, scheme: spec.scheme })
}

/// The system without the divergence-free part, plus the matrix `C_b` of that
/// part alone (zero rows on the boundary and, when pinned, at the center).
pub(crate) fn assemble_split(spec: &ProblemSpec, grid: &Grid) -> Result<(LinearSystem, CsrMatrix)> {
    spec.validate()?;
    let sing = drift::singular_part(spec.drift.alpha, spec.drift.epsilon, grid);
    let b = drift::divfree_part(&spec.drift.divfree, spec.drift.epsilon, grid)?;
    let base = operator(grid, &[&sing], true, spec.scheme, spec.pinned);
    let conv = operator(grid, &[&b], false, spec.scheme, spec.pinned);
    let rhs = assemble_rhs(&spec.rhs, grid, spec.pinned)?;
    Ok((LinearSystem { matrix: base, rhs, pinned: spec.pinned, scheme: spec.scheme }, conv))
}

/// Matrix of `-Laplacian` (if `laplacian`) plus `sum_f f . grad`.
///
/// Boundary rows, and the center row when `pinned`, become identity rows if
/// `laplacian` is set and zero rows otherwise.
pub fn operator(
    grid: &Grid,
    fields: &[&VectorFieldSample],
    laplacian: bool,
    scheme: Scheme,
    pinned: bool,
) -> CsrMatrix {
    let (nr, nt) = (grid.n_r(), grid.n_theta());
    let (h, ht) = (grid.h_r(), grid.h_theta());
    let lap = if laplacian { 1.0 } else { 0.0 };
    let mut rows = RowBuilder::new(grid.node_count());

    // center
    if pinned {
        rows.push(CENTER, lap);
    } else {
        let ring_w = 4.0 / (nt as f64 * h * h);
        rows.push(CENTER, lap * 4.0 / (h * h));
        for j in 0..nt {
            rows.push(grid.index(1, j), -lap * ring_w);
        }
        for f in fields {
            let (bx, by) = (f.radial[CENTER], f.angular[CENTER]);
            if bx == 0.0 && by == 0.0 {
                continue;
            }
            for j in 0..nt {
                let (c, s) = grid.cos_sin(j);
                let be = bx * c + by * s;
                let coef = match scheme {
                    Scheme::Centered => 2.0 * be / (nt as f64 * h),
                    Scheme::Upwind => 4.0 * be.min(0.0) / (nt as f64 * h),
                };
                rows.push(grid.index(1, j), coef);
                rows.push(CENTER, -coef);
            }
        }
    }
    rows.finish_row();

    for i in 1..=nr {
        let r = grid.radius_of_ring(i);
        for j in 0..nt {
            let k = grid.index(i, j);
            if i == nr {
                rows.push(k, lap);
                rows.finish_row();
                continue;
            }
            let out = grid.index(i + 1, j);
            let inn = grid.index_or_center(i - 1, j);
            let next = grid.index(i, j + 1);
            let prev = grid.index(i, j + nt - 1);
            let ang = 1.0 / (r * r * ht * ht);
            rows.push(k, lap * (2.0 / (h * h) + 2.0 * ang));
            rows.push(out, -lap * (1.0 / (h * h) + 0.5 / (h * r)));
            rows.push(inn, -lap * (1.0 / (h * h) - 0.5 / (h * r)));
            rows.push(next, -lap * ang);
            rows.push(prev, -lap * ang);
            for f in fields {
                let br = f.radial[k];
                let bt = f.angular[k] / r;
                match scheme {
                    Scheme::Centered => {
                        rows.push(out, br / (2.0 * h));
                        rows.push(inn, -br / (2.0 * h));
                        rows.push(next, bt / (2.0 * ht));
                        rows.push(prev, -bt / (2.0 * ht));
                    }
                    Scheme::Upwind => {
                        if br > 0.0 {
                            rows.push(k, br / h);
                            rows.push(inn, -br / h);
                        } else {
                            rows.push(out, br / h);
                            rows.push(k, -br / h);
                        }
                        if bt > 0.0 {
                            rows.push(k, bt / ht);
                            rows.push(prev, -bt / ht);
                        } else {
                            rows.push(next, bt / ht);
                            rows.push(k, -bt / ht);
                        }
                    }
                }
            }
            rows.finish_row();
        }
    }
    rows.build()
}

/// Nodal right-hand side; zero on replaced rows.
pub fn assemble_rhs(rhs: &RhsMode, grid: &Grid, pinned: bool) -> Result<Vec<f64>> {
    let n = grid.node_count();
    let mut out = match rhs {
        RhsMode::ScalarG(g) => (0..n).map(|k| g.value(grid.radius(k), grid.angle(k))).collect(),
        RhsMode::VectorF(f) => neg_divergence(f, grid)?,
    };
    for k in 0..n {
        if grid.is_boundary(k) || (pinned && k == CENTER) {
            out[k] = 0.0;
        } else if !out[k].is_finite() {
            return Err(Error::InadmissibleSource(alloc::format!(
                "source is not finite at node {k} (r = {})",
                grid.radius(k)
            )));
        }
    }
    Ok(out)
}

/// `-div f` from the centered polar divergence; at the center, the flux of `f`
/// through ring 1 divided by the enclosed area.
fn neg_divergence(f: &FluxProfile, grid: &Grid) -> Result<Vec<f64>> {
    let n = grid.node_count();
    let mut sample = VectorFieldSample::zeros(n);
    for k in 0..n {
        let (fr, ft) = f.value(grid.radius(k), grid.angle(k));
        sample.radial[k] = fr;
        sample.angular[k] = ft;
    }
    let div = drift::discrete_divergence(&sample, grid)?;
    let mut out: Vec<f64> = div.values().iter().map(|v| -v).collect();
    let nt = grid.n_theta();
    let mean: f64 = (0..nt).map(|j| sample.radial[grid.index(1, j)]).sum::<f64>() / nt as f64;
    out[CENTER] = -2.0 * mean / grid.h_r();
    Ok(out)
}

/// `max_k w_k |(A u - rhs)_k|` over non-boundary nodes with `r >= r_min`: the
/// residual tested against the nodal basis with lumped quadrature.
pub fn tested_residual(system: &LinearSystem, grid: &Grid, u: &DiscreteField, r_min: f64) -> Result<f64> {
    grid.check(u)?;
    grid.check_len(system.dim())?;
    let res = system.residual(u);
    let w = grid.quad_weights();
    let tol = 1e-12 * grid.h_r();
    Ok((0..grid.node_count())
        .filter(|&k| !grid.is_boundary(k) && grid.radius(k) >= r_min - tol)
        .fold(0.0, |m, k| m.max(w[k] * crate::math::abs(res[k]))))
}

/// `sum_k w_k (b^(alpha)_eps . grad u)_k eta_k` with centered gradients.
pub fn bilinear_form(u: &DiscreteField, eta: &DiscreteField, spec: &DriftSpec, grid: &Grid) -> Result<f64> {
    grid.check(u)?;
    grid.check(eta)?;
    let b = drift::eval_drift(spec, grid)?;
    let g = gradient(grid, u)?;
    let w = grid.quad_weights();
    Ok((0..grid.node_count())
        .map(|k| w[k] * (b.radial[k] * g.radial[k] + b.angular[k] * g.angular[k]) * eta[k])
        .sum())
}

/// `B_alpha[v, v]` extrapolated to `epsilon -> 0` from `epsilon = h/4, h/8`,
/// assuming the leading `epsilon^2` dependence of the regularized drift at
/// `r >= h`.
pub fn extrapolated_quadratic_form(v: &DiscreteField, spec: &DriftSpec, grid: &Grid) -> Result<f64> {
    let e1 = 0.25 * grid.h_r();
    let b1 = bilinear_form(v, v, &spec.with_epsilon(e1), grid)?;
    let b2 = bilinear_form(v, v, &spec.with_epsilon(0.5 * e1), grid)?;
    Ok((4.0 * b2 - b1) / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::DivFree;
    use crate::grid::build_disk_grid;
    use crate::math::PI;

    fn poisson(g: f64) -> ProblemSpec {
        ProblemSpec::scalar(DriftSpec::singular(0.0, 0.0), SourceProfile::Constant { value: g })
    }

    #[test]
    fn boundary_and_pinned_rows_are_identity() {
        let g = build_disk_grid(8, 16).unwrap();
        let spec = ProblemSpec::scalar(DriftSpec::singular(-0.5, 0.0), SourceProfile::Constant { value: 1.0 }).pinned(true);
        let sys = assemble(&spec, &g).unwrap();
        let row: Vec<_> = sys.matrix.row(CENTER).filter(|e| e.1 != 0.0).collect();
        assert_eq!(row, alloc::vec![(CENTER, 1.0)]);
        assert_eq!(sys.rhs[CENTER], 0.0);
        for k in (0..g.node_count()).filter(|&k| g.is_boundary(k)) {
            let row: Vec<_> = sys.matrix.row(k).filter(|e| e.1 != 0.0).collect();
            assert_eq!(row, alloc::vec![(k, 1.0)]);
            assert_eq!(sys.rhs[k], 0.0);
        }
    }

    #[test]
    fn unregularized_unpinned_is_rejected() {
        let g = build_disk_grid(8, 16).unwrap();
        let spec = ProblemSpec::scalar(DriftSpec::singular(1.0, 0.0), SourceProfile::Zero);
        assert!(assemble(&spec, &g).is_err());
        assert!(assemble_radial_exact(&spec, &g).is_ok());
        assert!(assemble(&spec.clone().with_q(2.0).pinned(true), &g).is_err());
    }

    #[test]
    fn centered_scheme_is_exact_on_quadratic_bubble() {
        let g = build_disk_grid(16, 32).unwrap();
        let u = g.sample(|r, _| 1.0 - r * r);
        for alpha in [0.0, 1.0, -0.5] {
            for eps in [1e-3, 0.1] {
                let drift = DriftSpec::singular(alpha, eps);
                let g_src = SourceProfile::Manufactured { ustar: crate::profiles::UStar::OneMinusR2, alpha, epsilon: eps };
                let sys = assemble(&ProblemSpec::scalar(drift, g_src), &g).unwrap();
                let res = sys.residual(&u);
                assert!(res.iter().all(|v| v.abs() < 1e-9), "alpha = {alpha}, eps = {eps}");
            }
            // unregularized: exact away from the center, whose row sees drift 0
            let spec = ProblemSpec::scalar(DriftSpec::singular(alpha, 0.0), SourceProfile::Constant { value: 4.0 + 2.0 * alpha });
            let res = assemble_radial_exact(&spec, &g).unwrap().residual(&u);
            assert!(res[1..].iter().all(|v| v.abs() < 1e-9));
            assert!((res[CENTER] + 2.0 * alpha).abs() < 1e-9);
        }
    }

    #[test]
    fn upwind_has_m_matrix_sign_pattern() {
        let g = build_disk_grid(12, 24).unwrap();
        let drift = DriftSpec::new(1.5, 1e-3, DivFree::Swirl { beta: 0.7 });
        let spec = ProblemSpec::scalar(drift, SourceProfile::Zero).with_scheme(Scheme::Upwind);
        let sys = assemble(&spec, &g).unwrap();
        for i in 0..sys.dim() {
            for (j, v) in sys.matrix.row(i) {
                if i == j {
                    assert!(v > 0.0);
                } else {
                    assert!(v <= 0.0, "entry ({i}, {j}) = {v}");
                }
            }
        }
    }

    #[test]
    fn radial_rows_reduce_to_darboux_operator() {
        // for radial data the interior row is -(v'' + (alpha + 1) v' / r) at eps = 0
        let g = build_disk_grid(16, 32).unwrap();
        let alpha = 0.7;
        let spec = ProblemSpec::scalar(DriftSpec::singular(alpha, 0.0), SourceProfile::Zero);
        let sys = assemble_radial_exact(&spec, &g).unwrap();
        let v = g.sample(|r, _| r * r * r);
        let av = sys.matrix.mul_vec(v.values());
        let h = g.h_r();
        for k in 1..g.node_count() {
            if g.is_boundary(k) || g.ring_of(k) < 2 {
                continue;
            }
            let r = g.radius(k);
            let d2 = ((r + h).powi(3) - 2.0 * r.powi(3) + (r - h).powi(3)) / (h * h);
            let d1 = ((r + h).powi(3) - (r - h).powi(3)) / (2.0 * h);
            assert!((av[k] + d2 + (alpha + 1.0) * d1 / r).abs() < 1e-9);
        }
    }

    #[test]
    fn pinned_poisson_rhs_matches_source() {
        let g = build_disk_grid(8, 16).unwrap();
        let sys = assemble(&poisson(4.0), &g).unwrap();
        assert_eq!(sys.rhs[CENTER], 4.0);
        assert_eq!(sys.rhs[g.index(3, 5)], 4.0);
    }

    #[test]
    fn vector_rhs_converges_to_scalar_source() {
        let f = FluxProfile::BumpGradient { x0: 0.1, y0: -0.2, width: 0.5, amplitude: 1.0 };
        let mut errs = Vec::new();
        let mut scale = 0.0f64;
        for n in [64usize, 128] {
            let g = build_disk_grid(n, 2 * n).unwrap();
            let from_f = assemble_rhs(&RhsMode::VectorF(f.clone()), &g, false).unwrap();
            let from_g = assemble_rhs(&RhsMode::ScalarG(f.divergence_source()), &g, false).unwrap();
            scale = from_g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            errs.push(from_f.iter().zip(&from_g).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())));
        }
        assert!(errs[0] / errs[1] >= 3.0, "{errs:?}");
        assert!(errs[1] <= 0.05 * scale);
    }

    #[test]
    fn bilinear_form_basic_identities() {
        let g = build_disk_grid(64, 128).unwrap();
        let u = g.sample(|r, t| (1.0 - r * r) * (1.0 + r * t.cos()));
        let zero = DiscreteField::zeros(g.node_count());
        assert_eq!(bilinear_form(&u, &zero, &DriftSpec::singular(1.0, 0.01), &g).unwrap(), 0.0);

        let v = g.sample(|r, _| 1.0 - r * r);
        let swirl = DriftSpec::new(0.0, 0.0, DivFree::Swirl { beta: 1.0 });
        assert!(bilinear_form(&v, &v, &swirl, &g).unwrap().abs() < 1e-10);
    }

    #[test]
    fn quadratic_form_of_bubble() {
        let g = build_disk_grid(64, 128).unwrap();
        let v = g.sample(|r, _| 1.0 - r * r);
        let b = extrapolated_quadratic_form(&v, &DriftSpec::singular(1.0, 0.0), &g).unwrap();
        // the discrete sum telescopes to pi * alpha * v(0) * mean of ring 1
        let h = g.h_r();
        assert!((b - PI * (1.0 - h * h)).abs() < 1e-3, "{b}");
    }
}
