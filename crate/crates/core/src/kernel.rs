//! Gaussian radial basis functions and their exact partial derivatives.
//!
//! A kernel centred at `c` with width `σ` is `exp(-|x - c|² / (2σ²))`.
//! Derivatives up to total order four are given in closed form through the
//! physicists' Hermite polynomials, which is all a fourth-order operator
//! such as the biharmonic needs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest total derivative order supported by the closed forms.
pub const MAX_ORDER: u8 = 4;

/// Exponent arguments below this evaluate to exactly zero.
const UNDERFLOW_EXPONENT: f64 = -700.0;

/// Per-axis derivative orders of a partial derivative.
///
/// One-dimensional problems only ever use `dx`; `dy` must be zero there.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex {
    pub dx: u8,
    pub dy: u8,
}

impl MultiIndex {
    pub const ZERO: MultiIndex = MultiIndex { dx: 0, dy: 0 };

    pub fn new(dx: u8, dy: u8) -> Result<Self> {
        if dx + dy > MAX_ORDER {
            return Err(Error::invalid(format!("derivative order {} exceeds {MAX_ORDER}", dx + dy)));
        }
        Ok(MultiIndex { dx, dy })
    }

    /// Shorthand for a one-dimensional derivative of order `n`.
    pub fn d1(n: u8) -> Result<Self> {
        MultiIndex::new(n, 0)
    }

    pub fn order(&self) -> u8 {
        self.dx + self.dy
    }
}

#[inline]
fn hermite(n: u8, t: f64) -> f64 {
    let t2 = t * t;
    match n {
        0 => 1.0,
        1 => 2.0 * t,
        2 => 4.0 * t2 - 2.0,
        3 => t * (8.0 * t2 - 12.0),
        4 => 16.0 * t2 * t2 - 48.0 * t2 + 12.0,
        _ => unreachable!("order checked by MultiIndex"),
    }
}

/// The polynomial factor of the `n`-th derivative along one axis, so that
/// `dⁿ/dxⁿ φ = axis_factor(n, x - c, σ) · φ`.
#[inline]
pub(crate) fn axis_factor(n: u8, offset: f64, sigma: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let scale = -1.0 / (sigma * std::f64::consts::SQRT_2);
    let t = offset * -scale;
    scale.powi(n as i32) * hermite(n, t)
}

/// `exp(exponent)` with the underflow cut-off applied.
#[inline]
pub(crate) fn gaussian_envelope(exponent: f64) -> f64 {
    if exponent < UNDERFLOW_EXPONENT {
        0.0
    } else {
        exponent.exp()
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("kernel width must be positive, got {sigma}")))
    }
}

/// `dⁿ/dxⁿ exp(-(x - c)² / (2σ²))` for `n ≤ 4`.
pub fn gauss_deriv_1d(x: f64, center: f64, sigma: f64, order: u8) -> Result<f64> {
    check_sigma(sigma)?;
    if order > MAX_ORDER {
        return Err(Error::invalid(format!("derivative order {order} exceeds {MAX_ORDER}")));
    }
    Ok(gauss_deriv_1d_unchecked(x, center, sigma, order))
}

#[inline]
pub(crate) fn gauss_deriv_1d_unchecked(x: f64, center: f64, sigma: f64, order: u8) -> f64 {
    let r = x - center;
    let env = gaussian_envelope(-r * r / (2.0 * sigma * sigma));
    if env == 0.0 {
        return 0.0;
    }
    axis_factor(order, r, sigma) * env
}

/// Partial derivative of an isotropic 2D Gaussian, as the product of the
/// two 1D factors.
pub fn gauss_partial_2d(p: [f64; 2], center: [f64; 2], sigma: f64, alpha: MultiIndex) -> Result<f64> {
    check_sigma(sigma)?;
    if alpha.order() > MAX_ORDER {
        return Err(Error::invalid(format!("derivative order {} exceeds {MAX_ORDER}", alpha.order())));
    }
    Ok(gauss_partial_2d_unchecked(p, center, sigma, alpha))
}

#[inline]
pub(crate) fn gauss_partial_2d_unchecked(p: [f64; 2], center: [f64; 2], sigma: f64, alpha: MultiIndex) -> f64 {
    let rx = p[0] - center[0];
    let ry = p[1] - center[1];
    let env = gaussian_envelope(-(rx * rx + ry * ry) / (2.0 * sigma * sigma));
    if env == 0.0 {
        return 0.0;
    }
    axis_factor(alpha.dx, rx, sigma) * axis_factor(alpha.dy, ry, sigma) * env
}

/// Magnitude of the Fourier transform of a unit-peak Gaussian of width σ,
/// normalised to one at ω = 0.
pub fn fourier_magnitude(sigma: f64, omega: f64) -> f64 {
    let s = sigma * omega;
    (-0.5 * s * s).exp()
}
