//! Polar tensor discretization of the unit disk and its 1D radial companion.
//!
//! Node ordering is center first, then ring-major and angle-minor:
//! node `1 + (i - 1) * n_theta + j` sits at `r = i * h_r`, `theta = j * h_theta`
//! for rings `i = 1..=n_r`. Ring `n_r` is the Dirichlet boundary.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::DiscreteField;
use crate::math::{self, PI, TAU};

pub const CENTER: usize = 0;

/// Location of a node in polar index space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Node {
    Center,
    Ring { i: usize, j: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n_r: usize,
    n_theta: usize,
    h_r: f64,
    h_theta: f64,
    weights: Vec<f64>,
    cos_theta: Vec<f64>,
    sin_theta: Vec<f64>,
}

/// Builds the polar disk grid with `n_r` radial and `n_theta` angular intervals.
///
/// `n_theta` must be even so that every ring-1 node has an antipodal partner
/// through the center.
pub fn build_disk_grid(n_r: usize, n_theta: usize) -> Result<Grid> {
    if n_r < 4 {
        return Err(Error::InvalidGrid(alloc::format!("n_r = {n_r} < 4")));
    }
    if n_theta < 8 || n_theta % 2 != 0 {
        return Err(Error::InvalidGrid(alloc::format!(
            "n_theta = {n_theta} must be even and at least 8"
        )));
    }
    let h_r = 1.0 / n_r as f64;
    let h_theta = TAU / n_theta as f64;
    let cos_theta = (0..n_theta).map(|j| math::cos(j as f64 * h_theta)).collect();
    let sin_theta = (0..n_theta).map(|j| math::sin(j as f64 * h_theta)).collect();

    let node_count = 1 + n_r * n_theta;
    let mut weights = Vec::with_capacity(node_count);
    weights.push(PI * (0.5 * h_r) * (0.5 * h_r));
    for i in 1..=n_r {
        let r = i as f64 * h_r;
        let w = if i == n_r { 0.5 * r * h_r * h_theta } else { r * h_r * h_theta };
        weights.extend(core::iter::repeat(w).take(n_theta));
    }

    Ok(Grid { n_r, n_theta, h_r, h_theta, weights, cos_theta, sin_theta })
}

impl Grid {
    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn h_r(&self) -> f64 {
        self.h_r
    }

    pub fn h_theta(&self) -> f64 {
        self.h_theta
    }

    pub fn node_count(&self) -> usize {
        1 + self.n_r * self.n_theta
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= 1 && i <= self.n_r);
        1 + (i - 1) * self.n_theta + (j % self.n_theta)
    }

    /// Index of ring node `(i, j)` with `i = 0` mapping to the center.
    #[inline]
    pub fn index_or_center(&self, i: usize, j: usize) -> usize {
        if i == 0 {
            CENTER
        } else {
            self.index(i, j)
        }
    }

    #[inline]
    pub fn node(&self, k: usize) -> Node {
        if k == CENTER {
            Node::Center
        } else {
            let m = k - 1;
            Node::Ring { i: m / self.n_theta + 1, j: m % self.n_theta }
        }
    }

    /// Ring number of node `k` (0 for the center).
    #[inline]
    pub fn ring_of(&self, k: usize) -> usize {
        match self.node(k) {
            Node::Center => 0,
            Node::Ring { i, .. } => i,
        }
    }

    #[inline]
    pub fn radius_of_ring(&self, i: usize) -> f64 {
        i as f64 * self.h_r
    }

    #[inline]
    pub fn radius(&self, k: usize) -> f64 {
        self.radius_of_ring(self.ring_of(k))
    }

    #[inline]
    pub fn angle(&self, k: usize) -> f64 {
        match self.node(k) {
            Node::Center => 0.0,
            Node::Ring { j, .. } => j as f64 * self.h_theta,
        }
    }

    #[inline]
    pub(crate) fn cos_sin(&self, j: usize) -> (f64, f64) {
        (self.cos_theta[j], self.sin_theta[j])
    }

    /// Cartesian coordinates of node `k`.
    pub fn position(&self, k: usize) -> (f64, f64) {
        match self.node(k) {
            Node::Center => (0.0, 0.0),
            Node::Ring { i, j } => {
                let r = self.radius_of_ring(i);
                let (c, s) = self.cos_sin(j);
                (r * c, r * s)
            }
        }
    }

    #[inline]
    pub fn is_boundary(&self, k: usize) -> bool {
        self.ring_of(k) == self.n_r
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.node_count()).map(|k| self.is_boundary(k)).collect()
    }

    /// Samples `f(r, theta)` at every node; the center is sampled at `r = 0, theta = 0`.
    pub fn sample(&self, mut f: impl FnMut(f64, f64) -> f64) -> DiscreteField {
        let values = (0..self.node_count()).map(|k| f(self.radius(k), self.angle(k))).collect();
        DiscreteField::from_vec(values)
    }

    /// Quadrature of `field` over the disk.
    pub fn integrate(&self, field: &DiscreteField) -> Result<f64> {
        self.check(field)?;
        Ok(self.weights.iter().zip(field.values()).map(|(w, v)| w * v).sum())
    }

    pub fn check(&self, field: &DiscreteField) -> Result<()> {
        if field.len() != self.node_count() {
            return Err(Error::SizeMismatch { expected: self.node_count(), found: field.len() });
        }
        Ok(())
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.node_count() {
            return Err(Error::SizeMismatch { expected: self.node_count(), found: len });
        }
        Ok(())
    }
}

/// `integrate(grid, field)` as a free function.
pub fn integrate(grid: &Grid, field: &DiscreteField) -> Result<f64> {
    grid.integrate(field)
}

/// Uniform mesh `r_i = i / n` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    n: usize,
    h: f64,
}

impl RadialGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGrid("radial grid needs at least one interval".into()));
        }
        Ok(Self { n, h: 1.0 / n as f64 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n {
            1.0
        } else {
            i as f64 * self.h
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n).map(|i| self.node(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_count_formula() {
        let g = build_disk_grid(4, 8).unwrap();
        assert_eq!(g.node_count(), 33);
        assert_eq!(g.quad_weights().len(), 33);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(build_disk_grid(4, 7).is_err());
        assert!(build_disk_grid(3, 8).is_err());
        assert!(build_disk_grid(4, 6).is_err());
    }

    #[test]
    fn area_close_to_pi() {
        let g = build_disk_grid(64, 128).unwrap();
        let area: f64 = g.quad_weights().iter().sum();
        assert!((area - PI).abs() <= 0.08 * PI);
        // trapezoid in r plus the center cell: exactly pi (1 + h^2 / 4)
        assert!((area - PI * (1.0 + g.h_r() * g.h_r() / 4.0)).abs() < 1e-12);
        let one = g.sample(|_, _| 1.0);
        assert!((g.integrate(&one).unwrap() - PI).abs() < 0.08);
    }

    #[test]
    fn area_within_invariant_band() {
        for &(n_r, n_t) in &[(4, 8), (7, 10), (16, 32), (33, 64)] {
            let g = build_disk_grid(n_r, n_t).unwrap();
            let area: f64 = g.quad_weights().iter().sum();
            let band = 5.0 / n_r as f64;
            assert!(area >= PI * (1.0 - band) && area <= PI * (1.0 + band));
        }
    }

    #[test]
    fn positions_and_boundary() {
        let g = build_disk_grid(6, 12).unwrap();
        let centers = (0..g.node_count()).filter(|&k| g.radius(k) == 0.0).count();
        assert_eq!(centers, 1);
        let boundary = g.boundary_mask().iter().filter(|b| **b).count();
        assert_eq!(boundary, 12);
        for k in 1..g.node_count() {
            let Node::Ring { i, j } = g.node(k) else { unreachable!() };
            assert_eq!(g.radius(k), i as f64 * g.h_r());
            assert_eq!(g.angle(k), j as f64 * g.h_theta());
            assert_eq!(g.index(i, j), k);
        }
    }

    #[test]
    fn odd_field_integrates_to_zero() {
        let g = build_disk_grid(64, 128).unwrap();
        let f = g.sample(|r, t| r * math::cos(t));
        let v = g.integrate(&f).unwrap();
        assert!(v.abs() <= 1e-10 * g.node_count() as f64);
        assert_eq!(g.integrate(&g.sample(|_, _| 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let g = build_disk_grid(4, 8).unwrap();
        let f = DiscreteField::zeros(10);
        assert!(matches!(g.integrate(&f), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn quadrature_is_second_order() {
        // exact integrals over the unit disk
        let cases: [(fn(f64, f64) -> f64, f64); 3] = [
            (|_, _| 1.0, PI),
            (|r, _| r * r, PI / 2.0),
            (|r, t| r * r * math::cos(t) * math::cos(t), PI / 4.0),
        ];
        for (f, exact) in cases {
            let mut prev = None;
            for n in [16usize, 32, 64, 128] {
                let g = build_disk_grid(n, 2 * n).unwrap();
                let err = (g.integrate(&g.sample(f)).unwrap() - exact).abs();
                if let Some(p) = prev {
                    assert!(p / err >= 3.0, "ratio {} at n = {n}", p / err);
                }
                prev = Some(err);
            }
        }
    }

    #[test]
    fn radial_grid_nodes() {
        let rg = RadialGrid::new(10).unwrap();
        let nodes: Vec<f64> = rg.nodes().collect();
        assert_eq!(nodes[0], 0.0);
        assert_eq!(*nodes.last().unwrap(), 1.0);
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
        assert!(RadialGrid::new(0).is_err());
    }
}
