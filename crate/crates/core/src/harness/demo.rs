//! Runnable versions of the two impossibility constructions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::distribution::{PairDistribution, PairSampler};
use crate::harness::trial::{build_dataset, splitmix64, stream_seed};
use crate::metrics::e2_distance;
use crate::model::{Embedding, WeightVector};
use crate::noise::NoiseModel;
use crate::oracle::Oracle;
use crate::passive::fit_erm_noise_free;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Serialize)]
pub struct CoordinateDominantDemo {
    pub m: usize,
    pub n: usize,
    pub w_a: WeightVector,
    pub w_b: WeightVector,
    pub w_hat_a: WeightVector,
    pub w_hat_b: WeightVector,
    pub outputs_identical: bool,
    pub e2_a: f64,
    pub e2_b: f64,
    /// `max(e2_a, e2_b)`; at least half of `||w_a - w_b||`.
    pub max_e2: f64,
}

/// Trains the noise-free ERM learner on coordinate-dominant pairs labelled by
/// two different vertices of the simplex. Every label is 1 in both runs.
pub fn demo_coordinate_dominant(m: usize, n: usize, seed: u64) -> Result<CoordinateDominantDemo> {
    if m < 2 || n == 0 {
        return Err(Error::Usage(
            "coordinate-dominant demo needs m >= 2 and n >= 1".into(),
        ));
    }
    let embedding = Embedding::identity(m);
    let sampler = PairSampler::new(
        PairDistribution::CoordinateDominant {
            direction: vec![1.0; m],
        },
        embedding.clone(),
    )?;
    let w_a = WeightVector::vertex(m, 0)?;
    let w_b = WeightVector::vertex(m, 1)?;
    let fit = |w: &WeightVector| -> Result<WeightVector> {
        let mut oracle = Oracle::new(
            w.clone(),
            NoiseModel::zero(),
            embedding.clone(),
            stream_seed(seed, 3),
        )?;
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, 2));
        let data = build_dataset(&sampler, &mut oracle, n, &mut rng, Some(seed))?;
        Ok(fit_erm_noise_free(&data)?.weights)
    };
    let w_hat_a = fit(&w_a)?;
    let w_hat_b = fit(&w_b)?;
    let e2_a = e2_distance(&w_hat_a, &w_a)?;
    let e2_b = e2_distance(&w_hat_b, &w_b)?;
    Ok(CoordinateDominantDemo {
        m,
        n,
        outputs_identical: w_hat_a == w_hat_b,
        max_e2: e2_a.max(e2_b),
        w_a,
        w_b,
        w_hat_a,
        w_hat_b,
        e2_a,
        e2_b,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleNeedRow {
    pub margin: f64,
    /// Smallest odd number of labels whose majority vote recovers the sign in
    /// at least `confidence` of the replicates.
    pub sample_need: u64,
    /// Normal-approximation value `(z / (2 (F(mu) - 1/2)))^2`.
    pub predicted: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SmallMarginDemo {
    pub noise: String,
    pub replicates: u32,
    pub confidence: f64,
    pub rows: Vec<SampleNeedRow>,
    /// `sample_need[i + 1] / sample_need[i]`.
    pub ratios: Vec<f64>,
    /// Each ratio lies within a factor 3 of `(margin[i] / margin[i + 1])^2`.
    pub quadratic_within_factor_3: bool,
}

/// Fraction of replicates in which a majority of `t` labels on `sampler`'s
/// fixed pair is 1.
fn majority_success(
    sampler: &PairSampler,
    noise: &NoiseModel,
    t: u64,
    replicates: u32,
    seed: u64,
) -> Result<f64> {
    let pair = sampler.sample(&mut ChaCha8Rng::seed_from_u64(0))?;
    let m = sampler.embedding().output_dim();
    let mut oracle = Oracle::new(
        WeightVector::uniform(m)?,
        noise.clone(),
        sampler.embedding().clone(),
        stream_seed(seed, t),
    )?;
    let mut wins = 0u32;
    for _ in 0..replicates {
        if 2 * oracle.repeated_query(&pair, t)? > t {
            wins += 1;
        }
    }
    Ok(wins as f64 / replicates as f64)
}

fn sample_need(
    sampler: &PairSampler,
    noise: &NoiseModel,
    replicates: u32,
    confidence: f64,
    seed: u64,
) -> Result<u64> {
    const MAX_LABELS: u64 = 1 << 40;
    let ok = |t: u64| -> Result<bool> {
        Ok(majority_success(sampler, noise, t, replicates, seed)? >= confidence)
    };
    // odd sizes 2^k - 1
    let mut lo = 0u64;
    let mut hi = 1u64;
    while !ok(hi)? {
        lo = hi;
        hi = 2 * hi + 1;
        if hi > MAX_LABELS {
            return Err(Error::Aborted(format!(
                "sign not identified with {MAX_LABELS} labels"
            )));
        }
    }
    // invariant: lo fails (or is 0), hi succeeds, both odd or lo = 0
    while hi - lo > 2 {
        let mid = (lo + (hi - lo) / 2) | 1;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Measures how many labels a majority vote needs to identify the sign of a
/// fixed pair with margin `mu`, for each of `margins`.
pub fn demo_small_margin(
    margins: &[f64],
    noise: &NoiseModel,
    replicates: u32,
    confidence: f64,
    seed: u64,
) -> Result<SmallMarginDemo> {
    if margins.is_empty() || margins.iter().any(|mu| !(*mu > 0.0 && *mu <= 0.5)) {
        return Err(Error::Usage(
            "margins must be nonempty and lie in (0, 1/2]".into(),
        ));
    }
    if replicates == 0 || !(confidence > 0.5 && confidence < 1.0) {
        return Err(Error::Usage(
            "need replicates >= 1 and confidence in (1/2, 1)".into(),
        ));
    }
    if noise.is_zero() {
        return Err(Error::Usage(
            "small-margin demo needs a noisy c.d.f.".into(),
        ));
    }
    let z = NoiseModel::gaussian(1.0)?.inv_cdf(confidence)?;
    let rows = margins
        .iter()
        .enumerate()
        .map(|(i, &mu)| {
            let sampler = PairSampler::new(
                PairDistribution::SmallMargin {
                    margin: Some(mu),
                    x: None,
                    x_prime: None,
                },
                Embedding::identity(3),
            )?;
            let gap = noise.cdf(mu) - 0.5;
            let need = sample_need(
                &sampler,
                noise,
                replicates,
                confidence,
                splitmix64(seed ^ i as u64),
            )?;
            Ok(SampleNeedRow {
                margin: mu,
                sample_need: need,
                predicted: (z / (2.0 * gap)).powi(2),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = rows
        .windows(2)
        .map(|w| w[1].sample_need as f64 / w[0].sample_need as f64)
        .collect();
    let quadratic_within_factor_3 = rows.windows(2).zip(&ratios).all(|(w, r)| {
        let q = (w[0].margin / w[1].margin).powi(2);
        *r >= q / 3.0 && *r <= 3.0 * q
    });
    Ok(SmallMarginDemo {
        noise: noise.name(),
        replicates,
        confidence,
        rows,
        ratios,
        quadratic_within_factor_3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_dominant_outputs_coincide() {
        let d = demo_coordinate_dominant(3, 200, 7).unwrap();
        assert!(d.outputs_identical);
        assert!(d.max_e2 >= 2f64.sqrt() / 2.0 - 1e-12);
    }

    #[test]
    fn majority_need_at_a_large_margin() {
        let d = demo_small_margin(
            &[0.5, 0.25],
            &NoiseModel::logistic(1.0).unwrap(),
            400,
            0.9,
            1,
        )
        .unwrap();
        for r in &d.rows {
            assert_eq!(r.sample_need % 2, 1);
            assert!((r.sample_need as f64) < 3.0 * r.predicted + 5.0, "{r:?}");
        }
        assert!(d.ratios[0] > 1.5);
    }

    #[test]
    fn rejects_bad_arguments() {
        let l = NoiseModel::logistic(1.0).unwrap();
        assert!(demo_small_margin(&[], &l, 10, 0.9, 0).is_err());
        assert!(demo_small_margin(&[0.1], &l, 10, 0.4, 0).is_err());
        assert!(demo_small_margin(&[0.1], &NoiseModel::zero(), 10, 0.9, 0).is_err());
        assert!(demo_coordinate_dominant(3, 0, 0).is_err());
    }
}
