//! Coordinates on the probability simplex and the box-shaped version space
//! used by the active learners.

use crate::error::{Error, Result};
use crate::model::{dot, make_pair, norm2, norm_inf, Embedding, QueryPair, WeightVector};

/// Orthonormal coordinates for the affine hull of the simplex in `R^m`.
///
/// The basis is modified Gram-Schmidt applied, in order, to
/// `e_1 - e_m, e_2 - e_m, ..., e_{m-1} - e_m`. Every basis vector sums to
/// zero, so `coords(w)_i = b_i . w` for any `w` with unit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexFrame {
    m: usize,
    centroid: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

impl SimplexFrame {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::Domain(format!(
                "simplex dimension must be >= 2, got {m}"
            )));
        }
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m - 1);
        for i in 0..m - 1 {
            let mut u = vec![0.0; m];
            u[i] = 1.0;
            u[m - 1] = -1.0;
            for b in &basis {
                let proj = dot(&u, b);
                u.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
            }
            let n = norm2(&u);
            u.iter_mut().for_each(|x| *x /= n);
            basis.push(u);
        }
        Ok(Self {
            m,
            centroid: vec![1.0 / m as f64; m],
            basis,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn centroid(&self) -> &[f64] {
        &self.centroid
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// Internal `(m-1)`-dimensional coordinates of `w` relative to the centroid.
    pub fn coords(&self, w: &[f64]) -> Vec<f64> {
        let shifted: Vec<f64> = w.iter().zip(&self.centroid).map(|(a, c)| a - c).collect();
        self.basis.iter().map(|b| dot(b, &shifted)).collect()
    }

    /// `centroid + sum_i t_i b_i`.
    pub fn point_from_coords(&self, t: &[f64]) -> Vec<f64> {
        let mut p = self.centroid.clone();
        for (ti, b) in t.iter().zip(&self.basis) {
            p.iter_mut().zip(b).for_each(|(x, y)| *x += ti * y);
        }
        p
    }

    /// Normal `b_axis - c (1, ..., 1)` of the hyperplane through the origin
    /// that meets the simplex in the slice `coords_axis = c`.
    pub fn cut_normal(&self, axis: usize, c: f64) -> Result<Vec<f64>> {
        let b = self
            .basis
            .get(axis)
            .ok_or_else(|| Error::Domain(format!("axis {axis} out of range for m={}", self.m)))?;
        Ok(b.iter().map(|x| x - c).collect())
    }
}

/// Axis-aligned box, in frame coordinates, known to contain the surviving
/// hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct VersionSpace {
    frame: SimplexFrame,
    intervals: Vec<(f64, f64)>,
}

impl VersionSpace {
    /// The exact bounding box of the simplex: per axis, the extreme
    /// projections of the vertices.
    pub fn initial(m: usize) -> Result<Self> {
        let frame = SimplexFrame::new(m)?;
        let intervals = frame
            .basis
            .iter()
            .map(|b| {
                // b . (e_j - centroid) = b_j since b sums to zero
                let lo = b.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            })
            .collect();
        Ok(Self { frame, intervals })
    }

    pub fn frame(&self) -> &SimplexFrame {
        &self.frame
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn width(&self, axis: usize) -> f64 {
        let (lo, hi) = self.intervals[axis];
        hi - lo
    }

    pub fn max_width(&self) -> f64 {
        (0..self.intervals.len())
            .map(|i| self.width(i))
            .fold(0.0, f64::max)
    }

    pub fn midpoint(&self, axis: usize) -> f64 {
        let (lo, hi) = self.intervals[axis];
        0.5 * (lo + hi)
    }

    /// Keeps `[c, hi]` when `upper` is set, `[lo, c]` otherwise.
    pub fn cut(&mut self, axis: usize, c: f64, upper: bool) {
        let iv = &mut self.intervals[axis];
        if upper {
            iv.0 = c;
        } else {
            iv.1 = c;
        }
    }

    pub fn contains_coords(&self, t: &[f64]) -> bool {
        t.iter()
            .zip(&self.intervals)
            .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }
}

/// Smallest `k` with `width / 2^k <= target`, by repeated exact halving.
pub fn halving_steps(width: f64, target: f64) -> u32 {
    let mut w = width;
    let mut k = 0;
    while w > target {
        w /= 2.0;
        k += 1;
    }
    k
}

/// Builds a comparison whose embedded difference points along `v`.
///
/// Both endpoints are anchored around the cube center `(1/2, ..., 1/2)`:
/// `phi(x) = 1/2` and `phi(x') = 1/2 + alpha v / |v|_2` with
/// `alpha = min(|v|_2 / (2 |v|_inf), 1)`, so `phi(x')` stays in `[0,1]^m`.
/// Returns the pair and `alpha`.
pub fn build_query(frame: &SimplexFrame, e: &Embedding, v: &[f64]) -> Result<(QueryPair, f64)> {
    if v.len() != frame.m() {
        return Err(Error::DimensionMismatch {
            expected: frame.m(),
            got: v.len(),
        });
    }
    let n2 = norm2(v);
    let ninf = norm_inf(v);
    if !(n2 > 0.0) {
        return Err(Error::Domain("query direction must be nonzero".into()));
    }
    let alpha = (0.5 * n2 / ninf).min(1.0);
    let anchor = vec![0.5; frame.m()];
    let target: Vec<f64> = v.iter().map(|vi| 0.5 + alpha * vi / n2).collect();
    let x = e.invert(&anchor)?;
    let x_prime = e.invert(&target)?;
    Ok((make_pair(e, &x, &x_prime)?, alpha))
}

/// Euclidean projection onto `{w >= 0, sum w = 1}` (sort and threshold).
pub fn project_to_simplex(p: &[f64]) -> Result<WeightVector> {
    if p.len() < 2 {
        return Err(Error::Domain(
            "projection needs at least 2 components".into(),
        ));
    }
    if p.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("cannot project a non-finite point".into()));
    }
    let mut sorted = p.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    let mut w: Vec<f64> = p.iter().map(|x| (x - theta).max(0.0)).collect();
    // absorb rounding in the sum
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    WeightVector::new(w)
}
