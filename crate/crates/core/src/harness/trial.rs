//! One seeded trial: draw the hidden weights, run the configured learner
//! against a fresh oracle and measure both error functionals.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::active::{self, AxisReport, NOISY_GEOMETRY_SLACK};
use crate::error::{Error, Result};
use crate::harness::config::{Experiment, Mode};
use crate::harness::distribution::PairSampler;
use crate::harness::record::{TrialDetail, TrialRecord};
use crate::metrics::{covariance_seminorm, e2_distance, estimate_e1, CovarianceMatrix};
use crate::model::{Dataset, DatasetMeta, LabeledExample, WeightVector};
use crate::oracle::Oracle;
use crate::passive;

const STREAM_W_STAR: u64 = 1;
const STREAM_DATA: u64 = 2;
const STREAM_ORACLE: u64 = 3;
const STREAM_MONTE_CARLO: u64 = 4;

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(master_seed ^ splitmix64(trial_index))`.
pub fn trial_seed(master_seed: u64, trial_index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(trial_index))
}

/// Seed of an independent named stream inside a trial.
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, tag))
}

/// Uniform draw from the simplex (normalized exponentials).
pub fn sample_simplex<R: rand::Rng + ?Sized>(m: usize, rng: &mut R) -> Result<WeightVector> {
    let e: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = e.iter().sum();
    WeightVector::new(e.into_iter().map(|x| x / s).collect())
}

/// Labels `n` pairs from `sampler` with the oracle.
pub fn build_dataset(
    sampler: &PairSampler,
    oracle: &mut Oracle,
    n: usize,
    rng: &mut ChaCha8Rng,
    seed: Option<u64>,
) -> Result<Dataset> {
    let mut examples = Vec::with_capacity(n);
    for _ in 0..n {
        let pair = sampler.sample(rng)?;
        let y = oracle.query(&pair);
        examples.push(LabeledExample { pair, y });
    }
    Dataset::new(
        examples,
        DatasetMeta {
            distribution: sampler.distribution().name().to_string(),
            seed,
        },
    )
}

/// Override of the swept parameter for one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridPoint {
    N(usize),
    Eps(f64),
}

impl GridPoint {
    pub fn value(self) -> f64 {
        match self {
            GridPoint::N(n) => n as f64,
            GridPoint::Eps(e) => e,
        }
    }
}

struct Learned {
    w_hat: WeightVector,
    per_axis: Vec<AxisReport>,
    sigma: Option<CovarianceMatrix>,
    success: bool,
}

fn is_learner_abort(e: &Error) -> bool {
    matches!(
        e,
        Error::Aborted(_) | Error::Numerical(_) | Error::NoPreimage(_)
    )
}

/// Runs trial `trial_index`. Deterministic given the experiment, the index and
/// the grid point.
pub fn run_trial(
    exp: &Experiment,
    trial_index: u64,
    grid: Option<GridPoint>,
) -> Result<TrialDetail> {
    let start = Instant::now();
    let cfg = &exp.config;
    let seed = trial_seed(cfg.master_seed, trial_index);
    let w_star = match &exp.w_star {
        Some(w) => w.clone(),
        None => sample_simplex(cfg.m, &mut stream(seed, STREAM_W_STAR))?,
    };
    let n = match grid {
        Some(GridPoint::N(n)) => Some(n),
        _ => cfg.n,
    };
    let eps = match grid {
        Some(GridPoint::Eps(e)) => Some(e),
        _ => cfg.eps,
    };
    if cfg.mode.is_passive() && n.unwrap_or(0) == 0 {
        return Err(Error::Usage("passive modes need n >= 1".into()));
    }
    let embedding = exp.sampler.embedding().clone();
    let mut oracle = Oracle::new(
        w_star.clone(),
        exp.noise.clone(),
        embedding,
        stream_seed(seed, STREAM_ORACLE),
    )?;

    let learned: Result<Learned> = (|| match cfg.mode {
        Mode::PassiveErm | Mode::PassiveMle | Mode::ImpossibilityDemo => {
            let n = n.expect("checked above");
            // the demo shares one pair stream across trials so that only w* varies
            let data_seed = if cfg.mode == Mode::ImpossibilityDemo {
                splitmix64(cfg.master_seed)
            } else {
                seed
            };
            let data = build_dataset(
                &exp.sampler,
                &mut oracle,
                n,
                &mut stream(data_seed, STREAM_DATA),
                Some(data_seed),
            )?;
            let sigma = Some(CovarianceMatrix::from_dataset(&data)?);
            let use_erm = cfg.mode == Mode::PassiveErm
                || (cfg.mode == Mode::ImpossibilityDemo && exp.noise.is_zero());
            if use_erm {
                let fit = passive::fit_erm_noise_free(&data)?;
                let success = cfg.mode == Mode::ImpossibilityDemo || fit.consistent;
                Ok(Learned {
                    w_hat: fit.weights,
                    per_axis: vec![],
                    sigma,
                    success,
                })
            } else {
                let fit = passive::fit_mle(&data, &exp.noise, &cfg.mle)?;
                let success =
                    cfg.mode == Mode::ImpossibilityDemo || (fit.converged && !fit.floor_hit);
                Ok(Learned {
                    w_hat: fit.weights,
                    per_axis: vec![],
                    sigma,
                    success,
                })
            }
        }
        Mode::ActiveNoiseFree => {
            let eps = eps.expect("validated");
            let r = active::active_noise_free(&mut oracle, eps)?;
            let success = e2_distance(&r.w_hat, &w_star)? <= eps;
            Ok(Learned {
                w_hat: r.w_hat,
                per_axis: r.per_axis,
                sigma: None,
                success,
            })
        }
        Mode::ActiveNoisy => {
            let eps = eps.expect("validated");
            let delta = cfg.delta.expect("validated");
            let r = active::active_noisy(&mut oracle, eps, delta, &exp.noise)?;
            let success = e2_distance(&r.w_hat, &w_star)? <= NOISY_GEOMETRY_SLACK * eps;
            Ok(Learned {
                w_hat: r.w_hat,
                per_axis: r.per_axis,
                sigma: None,
                success,
            })
        }
    })();

    let mut record = TrialRecord {
        trial_index,
        seed,
        n_or_queries: oracle.query_count(),
        e1_estimate: f64::NAN,
        e1_stderr: f64::NAN,
        e2: f64::NAN,
        seminorm_e2: f64::NAN,
        lambda_min: f64::NAN,
        wall_seconds: 0.0,
        success_flag: false,
    };
    let detail = match learned {
        Ok(l) => {
            let mut mc = stream(seed, STREAM_MONTE_CARLO);
            let e1 = estimate_e1(
                &l.w_hat,
                &w_star,
                |r| exp.sampler.sample(r),
                cfg.n_mc,
                &mut mc,
            )?;
            record.e1_estimate = e1.estimate;
            record.e1_stderr = e1.stderr;
            record.e2 = e2_distance(&l.w_hat, &w_star)?;
            if let Some(sigma) = &l.sigma {
                let diff: Vec<f64> = l
                    .w_hat
                    .as_slice()
                    .iter()
                    .zip(w_star.as_slice())
                    .map(|(a, b)| a - b)
                    .collect();
                record.seminorm_e2 = covariance_seminorm(&diff, sigma)?;
                record.lambda_min = sigma.min_eigenvalue()?;
            }
            record.success_flag = l.success;
            TrialDetail {
                record,
                grid_value: None,
                w_star,
                w_hat: Some(l.w_hat),
                per_axis: l.per_axis,
                diagnostic: None,
            }
        }
        Err(e) if is_learner_abort(&e) => TrialDetail {
            record,
            grid_value: None,
            w_star,
            w_hat: None,
            per_axis: vec![],
            diagnostic: Some(e.to_string()),
        },
        Err(e) => return Err(e),
    };
    let mut detail = detail;
    detail.record.wall_seconds = start.elapsed().as_secs_f64();
    detail.grid_value = grid.map(GridPoint::value);
    Ok(detail)
}

/// All trials of an experiment, in trial order. Trials run in parallel.
pub fn run_experiment(exp: &Experiment) -> Result<Vec<TrialDetail>> {
    (0..exp.config.trials as u64)
        .into_par_iter()
        .map(|i| run_trial(exp, i, None))
        .collect()
}
