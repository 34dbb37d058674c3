//! Symmetric difference-noise c.d.f.s `F` for random utility models.
//!
//! A label is `1` with probability `F(w . delta)`. `F(z) + F(-z) = 1` and
//! `F(0) = 1/2` for every kind except [`NoiseKind::Zero`], the point mass at
//! zero, which yields deterministic labels (fair coin on exact ties).

use std::f64::consts::{PI, SQRT_2};
use std::io::Read;
use std::path::Path;

use libm::erfc;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

/// Step for central finite-difference derivatives of tabulated c.d.f.s.
const TABULATED_FD_STEP: f64 = 1e-5;
/// Number of grid points used by [`strong_convexity_gamma`].
const GAMMA_GRID_POINTS: usize = 20_001;

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    Zero,
    /// Bradley-Terry.
    Logistic {
        scale: f64,
    },
    /// Thurstone-Mosteller.
    Gaussian {
        sigma: f64,
    },
    Tabulated(Table),
}

/// Piecewise-linear c.d.f. through `(z, F)` knots, symmetrized on evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    z: Vec<f64>,
    f: Vec<f64>,
}

impl Table {
    pub fn new(z: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        if z.len() != f.len() || z.len() < 2 {
            return Err(Error::Usage(
                "tabulated c.d.f. needs at least two (z, F) rows".into(),
            ));
        }
        if z.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Usage(
                "tabulated z values must be strictly increasing".into(),
            ));
        }
        if f.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Usage("tabulated F values must lie in [0, 1]".into()));
        }
        if f.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Usage(
                "tabulated F values must be nondecreasing".into(),
            ));
        }
        Ok(Self { z, f })
    }

    /// Reads a CSV file with header `z,F`.
    pub fn from_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || headers[0].trim() != "z" || headers[1].trim() != "F" {
            return Err(Error::Usage(format!(
                "expected CSV header `z,F`, got `{}`",
                headers.as_slice()
            )));
        }
        let (mut z, mut f) = (Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Usage(format!("bad number `{s}` in c.d.f. table: {e}")))
            };
            z.push(parse(&rec[0])?);
            f.push(parse(&rec[1])?);
        }
        Self::new(z, f)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?)
    }

    fn interp(&self, x: f64) -> f64 {
        let n = self.z.len();
        if x <= self.z[0] {
            return self.f[0];
        }
        if x >= self.z[n - 1] {
            return self.f[n - 1];
        }
        let k = self.z.partition_point(|&zk| zk <= x);
        let (z0, z1) = (self.z[k - 1], self.z[k]);
        let (f0, f1) = (self.f[k - 1], self.f[k]);
        f0 + (f1 - f0) * (x - z0) / (z1 - z0)
    }

    fn support_bound(&self) -> f64 {
        self.z[0].abs().max(self.z[self.z.len() - 1].abs())
    }
}

/// A symmetric noise c.d.f. with density, inverse and sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    kind: NoiseKind,
}

/// Serialized form of a [`NoiseModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    Zero,
    Logistic {
        #[serde(default = "one")]
        scale: f64,
    },
    Gaussian {
        #[serde(default = "one")]
        sigma: f64,
    },
    /// Path to a `z,F` CSV file.
    Tabulated {
        path: String,
    },
}

fn one() -> f64 {
    1.0
}

impl NoiseSpec {
    pub fn build(&self) -> Result<NoiseModel> {
        match self {
            NoiseSpec::Zero => Ok(NoiseModel::zero()),
            NoiseSpec::Logistic { scale } => NoiseModel::logistic(*scale),
            NoiseSpec::Gaussian { sigma } => NoiseModel::gaussian(*sigma),
            NoiseSpec::Tabulated { path } => Ok(NoiseModel::tabulated(Table::from_csv_path(
                Path::new(path),
            )?)),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

impl NoiseModel {
    pub fn zero() -> Self {
        Self {
            kind: NoiseKind::Zero,
        }
    }

    pub fn logistic(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Domain(format!(
                "logistic scale must be positive, got {scale}"
            )));
        }
        Ok(Self {
            kind: NoiseKind::Logistic { scale },
        })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!(
                "gaussian sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self {
            kind: NoiseKind::Gaussian { sigma },
        })
    }

    pub fn tabulated(table: Table) -> Self {
        Self {
            kind: NoiseKind::Tabulated(table),
        }
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, NoiseKind::Zero)
    }

    pub fn name(&self) -> String {
        match &self.kind {
            NoiseKind::Zero => "zero".into(),
            NoiseKind::Logistic { scale } => format!("logistic(s={scale})"),
            NoiseKind::Gaussian { sigma } => format!("gaussian(sigma={sigma})"),
            NoiseKind::Tabulated(_) => "tabulated".into(),
        }
    }

    /// `F(z)`. For the zero kind this is the step function, with `F(0) = 1/2`.
    pub fn cdf(&self, z: f64) -> f64 {
        match &self.kind {
            NoiseKind::Zero => {
                if z > 0.0 {
                    1.0
                } else if z < 0.0 {
                    0.0
                } else {
                    0.5
                }
            }
            NoiseKind::Logistic { scale } => sigmoid(z / scale),
            NoiseKind::Gaussian { sigma } => std_normal_cdf(z / sigma),
            NoiseKind::Tabulated(t) => 0.5 * (t.interp(z) + 1.0 - t.interp(-z)),
        }
    }

    /// Density `F'(z)`.
    pub fn pdf(&self, z: f64) -> Result<f64> {
        match &self.kind {
            NoiseKind::Zero => Err(Error::Unsupported("zero noise has no density".into())),
            NoiseKind::Logistic { scale } => {
                let u = z / scale;
                Ok(sigmoid(u) * sigmoid(-u) / scale)
            }
            NoiseKind::Gaussian { sigma } => Ok(std_normal_pdf(z / sigma) / sigma),
            NoiseKind::Tabulated(_) => {
                let h = TABULATED_FD_STEP;
                Ok((self.cdf(z + h) - self.cdf(z - h)) / (2.0 * h))
            }
        }
    }

    /// `F''(z)`.
    pub fn pdf_derivative(&self, z: f64) -> Result<f64> {
        match &self.kind {
            NoiseKind::Zero => Err(Error::Unsupported("zero noise has no density".into())),
            NoiseKind::Logistic { scale } => {
                let u = z / scale;
                let (p, q) = (sigmoid(u), sigmoid(-u));
                Ok(p * q * (q - p) / (scale * scale))
            }
            NoiseKind::Gaussian { sigma } => {
                let u = z / sigma;
                Ok(-u * std_normal_pdf(u) / (sigma * sigma))
            }
            NoiseKind::Tabulated(_) => {
                let h = TABULATED_FD_STEP;
                Ok((self.cdf(z + h) - 2.0 * self.cdf(z) + self.cdf(z - h)) / (h * h))
            }
        }
    }

    /// `F^{-1}(p)` for `p` in `(0, 1)`.
    pub fn inv_cdf(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("probability {p} not in (0, 1)")));
        }
        match &self.kind {
            NoiseKind::Zero => Err(Error::Unsupported(
                "zero noise has no inverse c.d.f.".into(),
            )),
            NoiseKind::Logistic { scale } => Ok(scale * (p / (1.0 - p)).ln()),
            NoiseKind::Gaussian { sigma } => {
                let mut z = -SQRT_2 * erfc_inv(2.0 * p);
                // Newton polish on the standard normal
                for _ in 0..3 {
                    let dens = std_normal_pdf(z);
                    if dens <= 0.0 {
                        break;
                    }
                    let step = (std_normal_cdf(z) - p) / dens;
                    z -= step;
                    if step.abs() <= 4.0 * f64::EPSILON * z.abs() {
                        break;
                    }
                }
                Ok(sigma * z)
            }
            NoiseKind::Tabulated(t) => {
                let mut hi = t.support_bound() + 1.0;
                let mut lo = -hi;
                if !(self.cdf(lo) < p && self.cdf(hi) > p) {
                    if self.cdf(lo) == p {
                        return Ok(lo);
                    }
                    if self.cdf(hi) == p {
                        return Ok(hi);
                    }
                    return Err(Error::Domain(format!(
                        "probability {p} outside the range of the tabulated c.d.f."
                    )));
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid) < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
                        break;
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        }
    }

    /// `ln F(z)`, stable in the lower tail for analytic kinds.
    pub fn log_cdf(&self, z: f64) -> f64 {
        match &self.kind {
            NoiseKind::Logistic { scale } => {
                let u = z / scale;
                // -softplus(-u)
                if u >= 0.0 {
                    -(-u).exp().ln_1p()
                } else {
                    u - u.exp().ln_1p()
                }
            }
            _ => self.cdf(z).ln(),
        }
    }

    /// Draws a label that is `1` with probability `F(margin)`.
    ///
    /// Zero noise consumes a random draw only on an exact tie.
    pub fn sample_flip<R: Rng + ?Sized>(&self, margin: f64, rng: &mut R) -> bool {
        match &self.kind {
            NoiseKind::Zero => {
                if margin > 0.0 {
                    true
                } else if margin < 0.0 {
                    false
                } else {
                    rng.random::<bool>()
                }
            }
            _ => rng.random::<f64>() < self.cdf(margin),
        }
    }
}

/// One row of [`check_inverse_poly_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundPoint {
    pub x: f64,
    pub inverse: f64,
    pub bound: f64,
    /// `inverse - bound`; nonpositive when the bound holds.
    pub slack: f64,
}

/// Compares `F^{-1}(x)` with its tangent line at `x = 1/2`: `4x - 2` for the
/// standard logistic and `sqrt(2 pi) (x - 1/2)` for the standard normal.
pub fn check_inverse_poly_bound(nm: &NoiseModel, grid: &[f64]) -> Result<Vec<BoundPoint>> {
    let bound: fn(f64) -> f64 = match nm.kind {
        NoiseKind::Logistic { scale: 1.0 } => |x| 4.0 * x - 2.0,
        NoiseKind::Gaussian { sigma: 1.0 } => |x| (2.0 * PI).sqrt() * x - (2.0 * PI).sqrt() / 2.0,
        _ => {
            return Err(Error::Unsupported(format!(
                "inverse bound is defined for standard logistic and gaussian, not {}",
                nm.name()
            )))
        }
    };
    grid.iter()
        .map(|&x| {
            if !(x > 0.0 && x <= 0.5) {
                return Err(Error::Domain(format!("grid point {x} not in (0, 1/2]")));
            }
            let inverse = nm.inv_cdf(x)?;
            let b = bound(x);
            Ok(BoundPoint {
                x,
                inverse,
                bound: b,
                slack: inverse - b,
            })
        })
        .collect()
}

/// `F'(z)^2 - F''(z) F(z)`, the curvature term of the negative log-likelihood.
pub fn curvature_term(nm: &NoiseModel, z: f64) -> Result<f64> {
    let d1 = nm.pdf(z)?;
    let d2 = nm.pdf_derivative(z)?;
    Ok(d1 * d1 - d2 * nm.cdf(z))
}

/// Minimum of `F'(z)^2 - F''(z) F(z)` over a dense grid of `[-bound, bound]`.
pub fn strong_convexity_gamma(nm: &NoiseModel, bound: f64) -> Result<f64> {
    if nm.is_zero() {
        return Err(Error::Unsupported("zero noise has no density".into()));
    }
    if !(bound > 0.0 && bound.is_finite()) {
        return Err(Error::Domain(format!(
            "margin bound must be positive, got {bound}"
        )));
    }
    let n = GAMMA_GRID_POINTS;
    let mut min = f64::INFINITY;
    for k in 0..n {
        let z = -bound + 2.0 * bound * (k as f64) / ((n - 1) as f64);
        min = min.min(curvature_term(nm, z)?);
    }
    Ok(min)
}
