//! Nodal scalar fields and the centered discrete gradient shared by every norm.

use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::Result;
use crate::grid::{Grid, CENTER};
use crate::math;

/// Nodal values on a [`Grid`], in the grid's node ordering.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct DiscreteField {
    values: Vec<f64>,
}

impl DiscreteField {
    pub fn zeros(len: usize) -> Self {
        Self { values: alloc::vec![0.0; len] }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| c * v).collect() }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self { values: self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-1.0, other)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(math::abs(*v)))
    }
}

impl Index<usize> for DiscreteField {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.values[k]
    }
}

impl IndexMut<usize> for DiscreteField {
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        &mut self.values[k]
    }
}

/// Per-node gradient in polar components `(d/dr, (1/r) d/dtheta)`.
///
/// At the center node polar components are meaningless; there the pair holds
/// the Cartesian gradient `(d/dx, d/dy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub radial: Vec<f64>,
    pub angular: Vec<f64>,
}

impl Gradient {
    pub fn magnitude_sq(&self, k: usize) -> f64 {
        self.radial[k] * self.radial[k] + self.angular[k] * self.angular[k]
    }
}

/// Centered gradient: central differences in `r` and `theta` at interior rings,
/// a second-order one-sided radial difference on the boundary ring, and the
/// least-squares fit over ring 1 at the center.
pub fn gradient(grid: &Grid, u: &DiscreteField) -> Result<Gradient> {
    grid.check(u)?;
    let n = grid.node_count();
    let (nr, nt) = (grid.n_r(), grid.n_theta());
    let (h, ht) = (grid.h_r(), grid.h_theta());
    let mut radial = alloc::vec![0.0; n];
    let mut angular = alloc::vec![0.0; n];

    let (gx, gy) = center_gradient(grid, u.values());
    radial[CENTER] = gx;
    angular[CENTER] = gy;

    for i in 1..=nr {
        let r = grid.radius_of_ring(i);
        for j in 0..nt {
            let k = grid.index(i, j);
            radial[k] = if i < nr {
                (u[grid.index(i + 1, j)] - u[grid.index_or_center(i - 1, j)]) / (2.0 * h)
            } else {
                (3.0 * u[k] - 4.0 * u[grid.index(i - 1, j)] + u[grid.index(i - 2, j)]) / (2.0 * h)
            };
            let up = u[grid.index(i, j + 1)];
            let down = u[grid.index(i, j + nt - 1)];
            angular[k] = (up - down) / (2.0 * ht * r);
        }
    }
    Ok(Gradient { radial, angular })
}

/// Least-squares Cartesian gradient at the center from ring 1; exact for linear data.
pub(crate) fn center_gradient(grid: &Grid, u: &[f64]) -> (f64, f64) {
    let nt = grid.n_theta();
    let scale = 2.0 / (nt as f64 * grid.h_r());
    let (mut gx, mut gy) = (0.0, 0.0);
    for j in 0..nt {
        let (c, s) = grid.cos_sin(j);
        let v = u[grid.index(1, j)] - u[CENTER];
        gx += v * c;
        gy += v * s;
    }
    (scale * gx, scale * gy)
}

/// Discrete energy norm `(||grad u||^2 + ||u||^2)^{1/2}` with grid quadrature.
pub fn energy_norm(grid: &Grid, u: &DiscreteField) -> Result<f64> {
    let g = gradient(grid, u)?;
    let w = grid.quad_weights();
    let s: f64 = (0..u.len()).map(|k| w[k] * (g.magnitude_sq(k) + u[k] * u[k])).sum();
    Ok(math::sqrt(s))
}

/// `||u||_{L_p}` with grid quadrature.
pub fn lp_norm(grid: &Grid, u: &DiscreteField, p: f64) -> Result<f64> {
    grid.check(u)?;
    let w = grid.quad_weights();
    let s: f64 = u.values().iter().zip(w).map(|(v, w)| w * math::powf(math::abs(*v), p)).sum();
    Ok(math::powf(s, 1.0 / p))
}

/// `||grad u||_{L_p}` with the centered gradient.
pub fn gradient_lp_norm(grid: &Grid, u: &DiscreteField, p: f64) -> Result<f64> {
    let g = gradient(grid, u)?;
    let w = grid.quad_weights();
    let s: f64 = (0..u.len()).map(|k| w[k] * math::powf(g.magnitude_sq(k), 0.5 * p)).sum();
    Ok(math::powf(s, 1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_disk_grid;
    use crate::math::PI;

    #[test]
    fn gradient_exact_on_linear_and_quadratic() {
        let g = build_disk_grid(16, 32).unwrap();
        let u = g.sample(|r, _| 1.0 - r * r);
        let grad = gradient(&g, &u).unwrap();
        for k in 0..g.node_count() {
            let r = g.radius(k);
            assert!((grad.radial[k] + 2.0 * r).abs() < 1e-11, "node {k}");
            assert!(grad.angular[k].abs() < 1e-9);
        }
        let lin = g.sample(|r, t| r * math::cos(t) + 2.0 * r * math::sin(t));
        let grad = gradient(&g, &lin).unwrap();
        assert!((grad.radial[CENTER] - 1.0).abs() < 1e-12);
        assert!((grad.angular[CENTER] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn energy_norm_converges_for_bubble() {
        // ||grad(1-r^2)||^2 = 2 pi, ||1-r^2||^2 = pi / 3
        let exact = math::sqrt(2.0 * PI + PI / 3.0);
        let g = build_disk_grid(128, 256).unwrap();
        let e = energy_norm(&g, &g.sample(|r, _| 1.0 - r * r)).unwrap();
        assert!((e - exact).abs() < 1e-3 * exact);
    }

    #[test]
    fn lp_norm_of_constant() {
        let g = build_disk_grid(32, 64).unwrap();
        let one = g.sample(|_, _| 1.0);
        let area: f64 = g.quad_weights().iter().sum();
        assert!((lp_norm(&g, &one, 3.0).unwrap() - math::powf(area, 1.0 / 3.0)).abs() < 1e-12);
        assert_eq!(gradient_lp_norm(&g, &one, 2.5).unwrap(), 0.0);
    }
}
