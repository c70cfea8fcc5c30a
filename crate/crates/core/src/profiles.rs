//! Closed catalog of analytic profiles: sources, fluxes, stream functions and
//! manufactured solutions. Every profile is evaluated from its formula; nothing
//! here differentiates numerically.

use alloc::boxed::Box;

use crate::math;

/// Radial manufactured solutions `u*(r)`, all vanishing on `r = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum UStar {
    /// `1 - r^2`
    OneMinusR2,
    /// `r^2 (1 - r)`
    R2OneMinusR,
    /// `r^(1 + a) (1 - r)`
    PowerBubble { a: f64 },
}

impl UStar {
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            UStar::OneMinusR2 => 1.0 - r * r,
            UStar::R2OneMinusR => r * r * (1.0 - r),
            UStar::PowerBubble { a } => math::powf(r, 1.0 + a) * (1.0 - r),
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        match *self {
            UStar::OneMinusR2 => -2.0 * r,
            UStar::R2OneMinusR => 2.0 * r - 3.0 * r * r,
            UStar::PowerBubble { a } => {
                (1.0 + a) * math::powf(r, a) - (2.0 + a) * math::powf(r, 1.0 + a)
            }
        }
    }

    /// `u'(r) / r`, written so that the `r -> 0` limit is taken analytically.
    pub fn derivative_over_r(&self, r: f64) -> f64 {
        match *self {
            UStar::OneMinusR2 => -2.0,
            UStar::R2OneMinusR => 2.0 - 3.0 * r,
            UStar::PowerBubble { a } => {
                (1.0 + a) * math::powf(r, a - 1.0) - (2.0 + a) * math::powf(r, a)
            }
        }
    }

    /// `u'' + u'/r`.
    pub fn laplacian(&self, r: f64) -> f64 {
        match *self {
            UStar::OneMinusR2 => -4.0,
            UStar::R2OneMinusR => 4.0 - 9.0 * r,
            UStar::PowerBubble { a } => {
                (1.0 + a) * (1.0 + a) * math::powf(r, a - 1.0)
                    - (2.0 + a) * (2.0 + a) * math::powf(r, a)
            }
        }
    }

    pub fn vanishes_at_origin(&self) -> bool {
        !matches!(self, UStar::OneMinusR2)
    }

    /// Leading power of the manufactured source near the origin.
    fn source_origin_exponent(&self) -> f64 {
        match *self {
            UStar::PowerBubble { a } if a < 1.0 => a - 1.0,
            _ => 0.0,
        }
    }
}

/// Smooth compactly supported bump `exp(-1 / (1 - t))` for `t < 1`, with `t = s^2`.
#[inline]
pub(crate) fn bump_t(t: f64) -> f64 {
    if t < 1.0 {
        math::exp(-1.0 / (1.0 - t))
    } else {
        0.0
    }
}

/// Scalar right-hand sides `g = -div f`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SourceProfile {
    Zero,
    Constant { value: f64 },
    /// Smooth bump supported in `r_inner < r < r_outer`.
    AnnularBump { r_inner: f64, r_outer: f64, amplitude: f64 },
    /// Smooth bump supported in the disk of radius `width` around `(x0, y0)`.
    Bump { x0: f64, y0: f64, width: f64, amplitude: f64 },
    /// `-Laplacian` of the [`SourceProfile::Bump`] with the same parameters.
    NegLaplacianBump { x0: f64, y0: f64, width: f64, amplitude: f64 },
    /// `-Laplacian u* + b_eps^(alpha) . grad u*` for a radial `u*` and a drift whose
    /// divergence-free part is orthogonal to radial gradients.
    Manufactured { ustar: UStar, alpha: f64, epsilon: f64 },
    /// `r^power * base`.
    Weighted { base: Box<SourceProfile>, power: f64 },
}

impl SourceProfile {
    pub fn value(&self, r: f64, theta: f64) -> f64 {
        match self {
            SourceProfile::Zero => 0.0,
            SourceProfile::Constant { value } => *value,
            SourceProfile::AnnularBump { r_inner, r_outer, amplitude } => {
                let mid = 0.5 * (r_inner + r_outer);
                let half = 0.5 * (r_outer - r_inner);
                let s = (r - mid) / half;
                amplitude * bump_t(s * s)
            }
            SourceProfile::Bump { x0, y0, width, amplitude } => {
                let (dx, dy) = (r * math::cos(theta) - x0, r * math::sin(theta) - y0);
                amplitude * bump_t((dx * dx + dy * dy) / (width * width))
            }
            SourceProfile::NegLaplacianBump { x0, y0, width, amplitude } => {
                let (dx, dy) = (r * math::cos(theta) - x0, r * math::sin(theta) - y0);
                let w2 = width * width;
                let t = (dx * dx + dy * dy) / w2;
                if t >= 1.0 {
                    return 0.0;
                }
                let phi = amplitude * bump_t(t);
                let m = 1.0 / (1.0 - t);
                let d1 = -phi * m * m;
                let d2 = phi * m * m * m * m - 2.0 * phi * m * m * m;
                -(d2 * 4.0 * t / w2 + d1 * 4.0 / w2)
            }
            SourceProfile::Manufactured { ustar, alpha, epsilon } => {
                let reg = if *epsilon == 0.0 { 1.0 } else { r * r / (r * r + epsilon * epsilon) };
                -ustar.laplacian(r) - alpha * reg * ustar.derivative_over_r(r)
            }
            SourceProfile::Weighted { base, power } => {
                let v = base.value(r, theta);
                if v == 0.0 {
                    0.0
                } else {
                    math::powf(r, *power) * v
                }
            }
        }
    }

    /// Exponent `gamma` with `|g| ~ r^gamma` near the origin; `+inf` when the
    /// source vanishes identically in a neighbourhood of the origin.
    pub fn origin_exponent(&self) -> f64 {
        match self {
            SourceProfile::Zero => f64::INFINITY,
            SourceProfile::Constant { value } => {
                if *value == 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            SourceProfile::AnnularBump { r_inner, .. } => {
                if *r_inner > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            SourceProfile::Bump { x0, y0, width, .. }
            | SourceProfile::NegLaplacianBump { x0, y0, width, .. } => {
                if math::hypot(*x0, *y0) >= *width {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            SourceProfile::Manufactured { ustar, .. } => ustar.source_origin_exponent(),
            SourceProfile::Weighted { base, power } => base.origin_exponent() + power,
        }
    }
}

/// Vector fluxes `f` for the divergence-form right-hand side `-div f`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FluxProfile {
    /// `f = grad phi` for the bump `phi` of [`SourceProfile::Bump`].
    BumpGradient { x0: f64, y0: f64, width: f64, amplitude: f64 },
}

impl FluxProfile {
    /// Polar components `(f_r, f_theta)` at `(r, theta)`.
    pub fn value(&self, r: f64, theta: f64) -> (f64, f64) {
        match *self {
            FluxProfile::BumpGradient { x0, y0, width, amplitude } => {
                let (c, s) = (math::cos(theta), math::sin(theta));
                let (dx, dy) = (r * c - x0, r * s - y0);
                let w2 = width * width;
                let t = (dx * dx + dy * dy) / w2;
                if t >= 1.0 {
                    return (0.0, 0.0);
                }
                let m = 1.0 / (1.0 - t);
                let d1 = -amplitude * bump_t(t) * m * m;
                let (fx, fy) = (d1 * 2.0 * dx / w2, d1 * 2.0 * dy / w2);
                (fx * c + fy * s, -fx * s + fy * c)
            }
        }
    }

    /// The scalar source `-div f` it represents.
    pub fn divergence_source(&self) -> SourceProfile {
        match *self {
            FluxProfile::BumpGradient { x0, y0, width, amplitude } => {
                SourceProfile::NegLaplacianBump { x0, y0, width, amplitude }
            }
        }
    }
}

/// Stream functions `psi` defined on the whole plane; `b = grad^perp psi`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StreamProfile {
    /// `amplitude * r^2 (1 - r)^2 cos(theta)`
    Dipole { amplitude: f64 },
}

impl StreamProfile {
    pub fn psi(&self, x: f64, y: f64) -> f64 {
        match *self {
            StreamProfile::Dipole { amplitude } => {
                let r = math::hypot(x, y);
                // r^2 cos(theta) = r x
                amplitude * r * x * (1.0 - r) * (1.0 - r)
            }
        }
    }

    /// Polar components of `grad^perp psi = (-(1/r) psi_theta, psi_r)`.
    pub fn velocity(&self, r: f64, theta: f64) -> (f64, f64) {
        match *self {
            StreamProfile::Dipole { amplitude } => {
                let br = amplitude * r * (1.0 - r) * (1.0 - r) * math::sin(theta);
                let bt = 2.0 * amplitude * r * (1.0 - r) * (1.0 - 2.0 * r) * math::cos(theta);
                (br, bt)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_radial(f: impl Fn(f64) -> f64, r: f64) -> (f64, f64) {
        let h = 1e-4;
        ((f(r + h) - f(r - h)) / (2.0 * h), (f(r + h) - 2.0 * f(r) + f(r - h)) / (h * h))
    }

    #[test]
    fn ustar_derivatives_match_finite_differences() {
        for u in [UStar::OneMinusR2, UStar::R2OneMinusR, UStar::PowerBubble { a: 0.5 }] {
            for &r in &[0.2, 0.45, 0.8] {
                let (d1, d2) = fd_radial(|s| u.value(s), r);
                assert!((u.derivative(r) - d1).abs() < 1e-6);
                assert!((u.derivative_over_r(r) - d1 / r).abs() < 1e-5);
                assert!((u.laplacian(r) - (d2 + d1 / r)).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn manufactured_constant_for_bubble() {
        for alpha in [-1.0, 0.0, 0.5, 2.0] {
            let g = SourceProfile::Manufactured { ustar: UStar::OneMinusR2, alpha, epsilon: 0.0 };
            for &r in &[0.0, 0.3, 1.0] {
                assert!((g.value(r, 0.7) - (4.0 + 2.0 * alpha)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn manufactured_cubic_is_finite_on_boundary() {
        let g = SourceProfile::Manufactured { ustar: UStar::R2OneMinusR, alpha: -0.5, epsilon: 0.0 };
        // -4 + 9r - 2 alpha + 3 alpha r at r = 1
        assert!((g.value(1.0, 0.0) - (5.0 - 0.5)).abs() < 1e-14);
        assert!(UStar::R2OneMinusR.vanishes_at_origin());
    }

    #[test]
    fn annular_bump_support() {
        let g = SourceProfile::AnnularBump { r_inner: 0.4, r_outer: 0.6, amplitude: 1.0 };
        assert_eq!(g.value(0.4, 0.0), 0.0);
        assert_eq!(g.value(0.6, 1.0), 0.0);
        assert_eq!(g.value(0.1, 1.0), 0.0);
        assert!(g.value(0.5, 0.0) > 0.0);
        assert_eq!(g.origin_exponent(), f64::INFINITY);
    }

    #[test]
    fn neg_laplacian_of_bump_matches_finite_differences() {
        let (x0, y0, width, amplitude) = (0.2, -0.1, 0.4, 1.5);
        let phi = SourceProfile::Bump { x0, y0, width, amplitude };
        let g = SourceProfile::NegLaplacianBump { x0, y0, width, amplitude };
        let at = |x: f64, y: f64| phi.value(math::hypot(x, y), math::atan2(y, x));
        let (x, y) = (0.35, 0.05);
        let h = 1e-4;
        let lap = (at(x + h, y) + at(x - h, y) + at(x, y + h) + at(x, y - h) - 4.0 * at(x, y)) / (h * h);
        let r = math::hypot(x, y);
        let t = math::atan2(y, x);
        assert!((g.value(r, t) + lap).abs() < 1e-4 * lap.abs().max(1.0));

        let flux = FluxProfile::BumpGradient { x0, y0, width, amplitude };
        let (fr, _) = flux.value(r, t);
        let dr = (phi.value(r + h, t) - phi.value(r - h, t)) / (2.0 * h);
        assert!((fr - dr).abs() < 1e-6);
    }

    #[test]
    fn dipole_velocity_is_perp_gradient() {
        let s = StreamProfile::Dipole { amplitude: 1.3 };
        let (r, t) = (0.4, 0.9);
        let h = 1e-5;
        let psi = |r: f64, t: f64| s.psi(r * math::cos(t), r * math::sin(t));
        let psi_r = (psi(r + h, t) - psi(r - h, t)) / (2.0 * h);
        let psi_t = (psi(r, t + h) - psi(r, t - h)) / (2.0 * h);
        let (br, bt) = s.velocity(r, t);
        assert!((br + psi_t / r).abs() < 1e-8);
        assert!((bt - psi_r).abs() < 1e-8);
    }
}
