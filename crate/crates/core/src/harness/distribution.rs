//! Samplers for input pairs, including the adversarial constructions used by
//! the impossibility demonstrations.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{make_pair, Embedding, QueryPair};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairDistribution {
    /// `x` and `x'` independent and uniform on the input box.
    #[default]
    UniformBox,
    /// Independent normals around the box center, truncated to the box.
    GaussianTruncated { sigma: f64 },
    /// One fixed pair, given either explicitly or as a margin `mu`: then
    /// `phi(x) = 1/2` and `phi(x') = 1/2 + mu`, which has margin `mu` under
    /// every simplex weight vector.
    SmallMargin {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        margin: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x_prime: Option<Vec<f64>>,
    },
    /// `x' = x + t * direction` with `t > 0`, so every coordinate increases.
    CoordinateDominant { direction: Vec<f64> },
    /// Both points on the ray `lo + s * slopes`.
    AlignedLine { slopes: Vec<f64> },
}

impl PairDistribution {
    pub fn name(&self) -> &'static str {
        match self {
            PairDistribution::UniformBox => "uniform_box",
            PairDistribution::GaussianTruncated { .. } => "gaussian_truncated",
            PairDistribution::SmallMargin { .. } => "small_margin",
            PairDistribution::CoordinateDominant { .. } => "coordinate_dominant",
            PairDistribution::AlignedLine { .. } => "aligned_line",
        }
    }
}

/// A validated distribution bound to an embedding.
#[derive(Debug, Clone)]
pub struct PairSampler {
    dist: PairDistribution,
    embedding: Embedding,
    fixed: Option<QueryPair>,
    line_extent: f64,
}

impl PairSampler {
    pub fn new(dist: PairDistribution, embedding: Embedding) -> Result<Self> {
        let d = embedding.input_dim();
        let mut fixed = None;
        let mut line_extent = 0.0;
        match &dist {
            PairDistribution::UniformBox => {}
            PairDistribution::GaussianTruncated { sigma } => {
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::Usage(format!(
                        "gaussian_truncated sigma must be positive, got {sigma}"
                    )));
                }
            }
            PairDistribution::SmallMargin { margin, x, x_prime } => {
                let pair = match (margin, x, x_prime) {
                    (Some(mu), None, None) => {
                        if !(mu.abs() <= 0.5) {
                            return Err(Error::Usage(format!(
                                "small_margin margin must lie in [-1/2, 1/2], got {mu}"
                            )));
                        }
                        let m = embedding.output_dim();
                        let x = embedding.invert(&vec![0.5; m])?;
                        let xp = embedding.invert(&vec![0.5 + mu; m])?;
                        make_pair(&embedding, &x, &xp)?
                    }
                    (None, Some(x), Some(xp)) => make_pair(&embedding, x, xp)?,
                    _ => {
                        return Err(Error::Usage(
                            "small_margin needs either `margin` or both `x` and `x_prime`".into(),
                        ))
                    }
                };
                fixed = Some(pair);
            }
            PairDistribution::CoordinateDominant { direction } => {
                if direction.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: direction.len(),
                    });
                }
                if direction.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
                    return Err(Error::Usage(
                        "coordinate_dominant direction must be strictly positive".into(),
                    ));
                }
            }
            PairDistribution::AlignedLine { slopes } => {
                if slopes.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: slopes.len(),
                    });
                }
                if slopes.iter().any(|k| !(*k >= 0.0 && k.is_finite()))
                    || slopes.iter().all(|k| *k == 0.0)
                {
                    return Err(Error::Usage(
                        "aligned_line slopes must be nonnegative and not all zero".into(),
                    ));
                }
                let (lo, hi) = embedding.input_box();
                line_extent = slopes
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .filter(|(k, _)| **k > 0.0)
                    .map(|(k, (l, h))| (h - l) / k)
                    .fold(f64::INFINITY, f64::min);
            }
        }
        Ok(Self {
            dist,
            embedding,
            fixed,
            line_extent,
        })
    }

    pub fn distribution(&self) -> &PairDistribution {
        &self.dist
    }

    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    fn uniform_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let (lo, hi) = self.embedding.input_box();
        lo.iter()
            .zip(hi)
            .map(|(l, h)| l + (h - l) * rng.random::<f64>())
            .collect()
    }

    fn truncated_point<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> Vec<f64> {
        let (lo, hi) = self.embedding.input_box();
        lo.iter()
            .zip(hi)
            .map(|(l, h)| {
                let normal = Normal::new(0.5 * (l + h), sigma).expect("validated sigma");
                loop {
                    let v = normal.sample(rng);
                    if v >= *l && v <= *h {
                        break v;
                    }
                }
            })
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<QueryPair> {
        match &self.dist {
            PairDistribution::UniformBox => {
                let x = self.uniform_point(rng);
                let xp = self.uniform_point(rng);
                make_pair(&self.embedding, &x, &xp)
            }
            PairDistribution::GaussianTruncated { sigma } => {
                let x = self.truncated_point(*sigma, rng);
                let xp = self.truncated_point(*sigma, rng);
                make_pair(&self.embedding, &x, &xp)
            }
            PairDistribution::SmallMargin { .. } => Ok(self.fixed.clone().expect("built in new")),
            PairDistribution::CoordinateDominant { direction } => {
                let (_, hi) = self.embedding.input_box();
                loop {
                    let x = self.uniform_point(rng);
                    let room = x
                        .iter()
                        .zip(hi)
                        .zip(direction)
                        .map(|((xj, h), dj)| (h - xj) / dj)
                        .fold(f64::INFINITY, f64::min);
                    if !(room > 0.0) {
                        continue;
                    }
                    // (0, 1]
                    let t = room * (1.0 - rng.random::<f64>());
                    let xp: Vec<f64> = x
                        .iter()
                        .zip(direction)
                        .zip(hi)
                        .map(|((xj, dj), h)| (xj + t * dj).min(*h))
                        .collect();
                    if xp.iter().zip(&x).all(|(a, b)| a > b) {
                        return make_pair(&self.embedding, &x, &xp);
                    }
                }
            }
            PairDistribution::AlignedLine { slopes } => {
                let (lo, hi) = self.embedding.input_box();
                let point = |s: f64| -> Vec<f64> {
                    slopes
                        .iter()
                        .zip(lo.iter().zip(hi))
                        .map(|(k, (l, h))| (l + s * k).min(*h))
                        .collect()
                };
                let s0 = self.line_extent * rng.random::<f64>();
                let s1 = self.line_extent * rng.random::<f64>();
                make_pair(&self.embedding, &point(s0), &point(s1))
            }
        }
    }
}
