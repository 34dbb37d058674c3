//! Numerical self-checks of a noise model.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::noise::{
    check_inverse_poly_bound, strong_convexity_gamma, BoundPoint, NoiseKind, NoiseModel,
};

pub const SYMMETRY_GRID_POINTS: usize = 1000;
pub const BOUND_GRID_POINTS: usize = 100;
const Z_RANGE: f64 = 10.0;

#[derive(Debug, Clone, Serialize)]
pub struct NoiseReport {
    pub model: String,
    /// `max |F(z) + F(-z) - 1|` over the grid.
    pub symmetry_max_error: f64,
    pub monotone: bool,
    /// `max |F(F^{-1}(p)) - p|` over a grid of `(0, 1)`.
    pub inverse_max_error: f64,
    /// `max (F^{-1}(x) - bound(x))` over `(0, 1/2]`; nonpositive when the bound holds.
    pub max_bound_violation: f64,
    pub bound_table: Vec<BoundPoint>,
    /// `max |F'^2 - F'' F - F^3 (1 - F)|`, standard logistic only.
    pub logistic_identity_max_error: Option<f64>,
    /// Curvature minimum over `[-1, 1]`.
    pub gamma_b1: f64,
}

/// `n` equispaced points of `[-Z_RANGE, Z_RANGE]`.
pub fn z_grid(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| -Z_RANGE + 2.0 * Z_RANGE * k as f64 / (n - 1) as f64)
        .collect()
}

/// `k / (2n)` for `k = 1..=n`.
pub fn half_open_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|k| k as f64 / (2 * n) as f64).collect()
}

pub fn verify_noise(nm: &NoiseModel) -> Result<NoiseReport> {
    if nm.is_zero() {
        return Err(Error::Unsupported(
            "zero noise has no inverse or density to check".into(),
        ));
    }
    let zs = z_grid(SYMMETRY_GRID_POINTS);
    let symmetry_max_error = zs
        .iter()
        .map(|&z| (nm.cdf(z) + nm.cdf(-z) - 1.0).abs())
        .fold(0.0, f64::max);
    let monotone = zs.windows(2).all(|w| nm.cdf(w[0]) <= nm.cdf(w[1]));

    let ps: Vec<f64> = (1..SYMMETRY_GRID_POINTS)
        .map(|k| k as f64 / SYMMETRY_GRID_POINTS as f64)
        .collect();
    let mut inverse_max_error: f64 = 0.0;
    for &p in &ps {
        inverse_max_error = inverse_max_error.max((nm.cdf(nm.inv_cdf(p)?) - p).abs());
    }

    let bound_table = check_inverse_poly_bound(nm, &half_open_grid(BOUND_GRID_POINTS))?;
    let max_bound_violation = bound_table
        .iter()
        .map(|b| b.slack)
        .fold(f64::NEG_INFINITY, f64::max);

    let logistic_identity_max_error = match nm.kind() {
        NoiseKind::Logistic { scale } if *scale == 1.0 => {
            let mut worst: f64 = 0.0;
            for &z in &zs {
                let f = nm.cdf(z);
                let lhs = crate::noise::curvature_term(nm, z)?;
                worst = worst.max((lhs - f * f * f * (1.0 - f)).abs());
            }
            Some(worst)
        }
        _ => None,
    };

    Ok(NoiseReport {
        model: nm.name(),
        symmetry_max_error,
        monotone,
        inverse_max_error,
        max_bound_violation,
        bound_table,
        logistic_identity_max_error,
        gamma_b1: strong_convexity_gamma(nm, 1.0)?,
    })
}
