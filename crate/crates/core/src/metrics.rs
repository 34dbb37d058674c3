//! Error functionals for learned utilities and the covariance seminorm.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Dataset, QueryPair, WeightVector};

/// Off-diagonal Frobenius norm at which Jacobi iteration stops.
pub const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;
const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct E1Estimate {
    pub estimate: f64,
    pub stderr: f64,
}

/// Expected disagreement of the randomized comparison labels of two utilities
/// on one pair: 0 or 1 when both margins are nonzero, 1/2 when either is a
/// tie.
pub fn pair_disagreement(u_hat: &WeightVector, u_star: &WeightVector, pair: &QueryPair) -> f64 {
    let a = u_hat.margin(pair.delta());
    let b = u_star.margin(pair.delta());
    if a == 0.0 || b == 0.0 {
        0.5
    } else if (a > 0.0) == (b > 0.0) {
        0.0
    } else {
        1.0
    }
}

/// Monte Carlo estimate of the probability that the two utilities order a
/// random pair differently, with its binomial standard error.
pub fn estimate_e1<R, S>(
    u_hat: &WeightVector,
    u_star: &WeightVector,
    mut sample_pair: S,
    n_mc: usize,
    rng: &mut R,
) -> Result<E1Estimate>
where
    R: Rng + ?Sized,
    S: FnMut(&mut R) -> Result<QueryPair>,
{
    if n_mc == 0 {
        return Err(Error::Usage(
            "Monte Carlo sample size must be at least 1".into(),
        ));
    }
    if u_hat.dim() != u_star.dim() {
        return Err(Error::DimensionMismatch {
            expected: u_star.dim(),
            got: u_hat.dim(),
        });
    }
    let mut total = 0.0;
    for _ in 0..n_mc {
        let pair = sample_pair(rng)?;
        total += pair_disagreement(u_hat, u_star, &pair);
    }
    let n = n_mc as f64;
    let p = total / n;
    Ok(E1Estimate {
        estimate: p,
        stderr: (p * (1.0 - p) / n).sqrt(),
    })
}

/// Euclidean distance `|w_hat - w_star|_2`.
pub fn e2_distance(w_hat: &WeightVector, w_star: &WeightVector) -> Result<f64> {
    if w_hat.dim() != w_star.dim() {
        return Err(Error::DimensionMismatch {
            expected: w_star.dim(),
            got: w_hat.dim(),
        });
    }
    Ok(w_hat
        .as_slice()
        .iter()
        .zip(w_star.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// `|w_hat - w_star|_p^p`.
pub fn e2_power(w_hat: &WeightVector, w_star: &WeightVector, p: f64) -> Result<f64> {
    if w_hat.dim() != w_star.dim() {
        return Err(Error::DimensionMismatch {
            expected: w_star.dim(),
            got: w_hat.dim(),
        });
    }
    if !(p >= 1.0) {
        return Err(Error::Domain(format!(
            "norm exponent must be >= 1, got {p}"
        )));
    }
    Ok(w_hat
        .as_slice()
        .iter()
        .zip(w_star.as_slice())
        .map(|(a, b)| (a - b).abs().powf(p))
        .sum())
}

/// Symmetric positive-semidefinite second-moment matrix of pair differences.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    sigma: Vec<Vec<f64>>,
    n: usize,
}

impl CovarianceMatrix {
    pub fn new(sigma: Vec<Vec<f64>>, n: usize) -> Result<Self> {
        check_symmetric(&sigma)?;
        let lambda = min_eigenvalue(&sigma)?;
        if lambda < -PSD_TOL {
            return Err(Error::Numerical(format!(
                "matrix is not positive semidefinite (eigenvalue {lambda:e})"
            )));
        }
        Ok(Self { sigma, n })
    }

    /// `(1/n) sum_i delta_i delta_i^T` over a dataset.
    pub fn from_dataset(data: &Dataset) -> Result<Self> {
        let m = data.dim();
        let mut sigma = vec![vec![0.0; m]; m];
        for ex in data.examples() {
            let d = ex.pair.delta();
            for i in 0..m {
                for j in i..m {
                    sigma[i][j] += d[i] * d[j];
                }
            }
        }
        let n = data.len() as f64;
        for i in 0..m {
            for j in i..m {
                sigma[i][j] /= n;
                sigma[j][i] = sigma[i][j];
            }
        }
        Self::new(sigma, data.len())
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.sigma
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        min_eigenvalue(&self.sigma)
    }
}

/// `sqrt(v^T Sigma v)`.
pub fn covariance_seminorm(v: &[f64], sigma: &CovarianceMatrix) -> Result<f64> {
    if v.len() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            got: v.len(),
        });
    }
    let q: f64 = sigma
        .sigma
        .iter()
        .zip(v)
        .map(|(row, vi)| vi * row.iter().zip(v).map(|(s, vj)| s * vj).sum::<f64>())
        .sum();
    if q < -PSD_TOL {
        return Err(Error::Numerical(format!("negative quadratic form {q:e}")));
    }
    Ok(q.max(0.0).sqrt())
}

fn check_symmetric(a: &[Vec<f64>]) -> Result<()> {
    let n = a.len();
    if n == 0 || a.iter().any(|r| r.len() != n) {
        return Err(Error::Domain("matrix must be square and nonempty".into()));
    }
    for i in 0..n {
        for j in 0..i {
            if (a[i][j] - a[j][i]).abs() > SYMMETRY_TOL {
                return Err(Error::Domain(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

fn off_diagonal_norm(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i][j] * a[i][j];
            }
        }
    }
    s.sqrt()
}

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(a: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_symmetric(a)?;
    let n = a.len();
    let mut a: Vec<Vec<f64>> = a.to_vec();
    let mut sweeps = 0;
    while off_diagonal_norm(&a) > JACOBI_TOL {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::Numerical("Jacobi iteration did not converge".into()));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
        sweeps += 1;
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

pub fn min_eigenvalue(a: &[Vec<f64>]) -> Result<f64> {
    Ok(symmetric_eigenvalues(a)?[0])
}
