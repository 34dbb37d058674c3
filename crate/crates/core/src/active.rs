//! Active learning of the utility weights by query synthesis: a per-axis
//! binary search over the simplex frame, with a majority-vote variant for
//! noisy oracles.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{build_query, halving_steps, project_to_simplex, VersionSpace};
use crate::model::{norm2, WeightVector};
use crate::noise::NoiseModel;
use crate::oracle::Oracle;

/// Repetition counts above this abort the noisy learner.
pub const MAX_REPETITIONS: u64 = 100_000_000;
/// `p0 - 1/2` at or below this is treated as a flat c.d.f.
pub const MIN_VOTE_GAP: f64 = 1e-12;
/// Accuracy slack applied to noisy runs when judging success.
pub const NOISY_GEOMETRY_SLACK: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisReport {
    pub axis: usize,
    pub cuts_made: u32,
    pub stopped_early: bool,
    pub recorded_hyperplane_coordinate: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ActiveRunReport {
    pub w_hat: WeightVector,
    pub queries_used: u64,
    pub per_axis: Vec<AxisReport>,
}

/// Target side length `2 eps / sqrt(m - 1)` of the trapping hypercube.
pub fn target_width(m: usize, eps: f64) -> f64 {
    2.0 * eps / ((m - 1) as f64).sqrt()
}

/// Worst-case number of binary-search cuts: `(m - 1) * ceil(log2(W0 / target))`
/// with `W0` the widest initial interval.
pub fn max_cuts(m: usize, eps: f64) -> Result<u64> {
    let vs = VersionSpace::initial(m)?;
    Ok((m as u64 - 1) * u64::from(halving_steps(vs.max_width(), target_width(m, eps))))
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Usage(format!("eps must lie in (0, 1), got {eps}")));
    }
    Ok(())
}

/// Noise-free binary search. See [`active_noise_free_observed`].
pub fn active_noise_free(oracle: &mut Oracle, eps: f64) -> Result<ActiveRunReport> {
    active_noise_free_observed(oracle, eps, |_, _| {})
}

/// Noise-free binary search. `observe` is called with the version space and
/// axis after every cut.
///
/// Each axis is halved until its width is at most `2 eps / sqrt(m - 1)`, so
/// the center of the final box is within `eps` of any point inside it.
pub fn active_noise_free_observed<F>(
    oracle: &mut Oracle,
    eps: f64,
    mut observe: F,
) -> Result<ActiveRunReport>
where
    F: FnMut(&VersionSpace, usize),
{
    check_eps(eps)?;
    if !oracle.noise().is_zero() {
        return Err(Error::Usage(
            "noise-free active learning needs a zero-noise oracle".into(),
        ));
    }
    let m = oracle.dim();
    let start = oracle.query_count();
    let mut vs = VersionSpace::initial(m)?;
    let target = target_width(m, eps);
    let embedding = oracle.embedding().clone();
    let mut per_axis = Vec::with_capacity(m - 1);

    for axis in 0..m - 1 {
        let mut width = vs.width(axis);
        let mut cuts = 0;
        while width > target {
            let c = vs.midpoint(axis);
            let v = vs.frame().cut_normal(axis, c)?;
            let (pair, _) = build_query(vs.frame(), &embedding, &v)?;
            let y = oracle.query(&pair);
            vs.cut(axis, c, y.is_one());
            width /= 2.0;
            cuts += 1;
            observe(&vs, axis);
        }
        per_axis.push(AxisReport {
            axis,
            cuts_made: cuts,
            stopped_early: false,
            recorded_hyperplane_coordinate: None,
        });
    }

    let center: Vec<f64> = (0..m - 1).map(|i| vs.midpoint(i)).collect();
    let w_hat = project_to_simplex(&vs.frame().point_from_coords(&center))?;
    Ok(ActiveRunReport {
        w_hat,
        queries_used: oracle.query_count() - start,
        per_axis,
    })
}

/// Repetitions `ceil(4 / gap^2 * ln(1 / (1 - q)))` for a vote with
/// `gap = p0 - 1/2` and per-vote confidence `q`.
pub fn repetitions(gap: f64, one_minus_q: f64) -> Result<u64> {
    if !(gap > MIN_VOTE_GAP) {
        return Err(Error::Aborted(format!(
            "flip probability at the accuracy margin is {:.3e} above 1/2; the c.d.f. is too flat",
            gap
        )));
    }
    let t = (4.0 / (gap * gap) * (1.0 / one_minus_q).ln()).ceil();
    if !(t <= MAX_REPETITIONS as f64) {
        return Err(Error::Aborted(format!(
            "{t:e} repetitions per vote exceeds the cap of {MAX_REPETITIONS}"
        )));
    }
    Ok((t as u64).max(1))
}

/// Majority-vote binary search for noisy oracles.
///
/// Every synthesized query is repeated `T` times. A clear majority halves the
/// interval as in the noise-free search; an unclear one stops the axis and
/// records the current cut coordinate. The vote threshold uses the margin a
/// point `eps / sqrt(m - 1)` away from the cut would have under the scaled
/// query, and `T` splits the failure budget `delta` over the worst-case
/// number of votes.
pub fn active_noisy(
    oracle: &mut Oracle,
    eps: f64,
    delta: f64,
    nm: &NoiseModel,
) -> Result<ActiveRunReport> {
    check_eps(eps)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Usage(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if nm.is_zero() {
        return Err(Error::Usage(
            "noisy active learning needs a noise model with a density".into(),
        ));
    }
    let m = oracle.dim();
    let start = oracle.query_count();
    let mut vs = VersionSpace::initial(m)?;
    let target = target_width(m, eps);
    let votes_budget = max_cuts(m, eps)?.max(1);
    // 1 - (1 - delta)^(1/K), computed without cancellation
    let one_minus_q = -((-delta).ln_1p() / votes_budget as f64).exp_m1();
    let sqrt_axes = ((m - 1) as f64).sqrt();
    let embedding = oracle.embedding().clone();
    let mut per_axis = Vec::with_capacity(m - 1);
    let mut center = Vec::with_capacity(m - 1);

    for axis in 0..m - 1 {
        let mut width = vs.width(axis);
        let mut cuts = 0;
        let mut recorded = None;
        while width > target {
            let c = vs.midpoint(axis);
            let v = vs.frame().cut_normal(axis, c)?;
            let (pair, alpha) = build_query(vs.frame(), &embedding, &v)?;
            let margin_threshold = alpha * eps / (sqrt_axes * norm2(&v));
            let gap = nm.cdf(margin_threshold) - 0.5;
            let t = repetitions(gap, one_minus_q)?;
            let s = oracle.repeated_query(&pair, t)?;
            let deviation = s as f64 - t as f64 / 2.0;
            if deviation.abs() > t as f64 * gap / 2.0 {
                vs.cut(axis, c, deviation > 0.0);
                width /= 2.0;
                cuts += 1;
            } else {
                recorded = Some(c);
                break;
            }
        }
        center.push(recorded.unwrap_or_else(|| vs.midpoint(axis)));
        per_axis.push(AxisReport {
            axis,
            cuts_made: cuts,
            stopped_early: recorded.is_some(),
            recorded_hyperplane_coordinate: recorded,
        });
    }

    let w_hat = project_to_simplex(&vs.frame().point_from_coords(&center))?;
    Ok(ActiveRunReport {
        w_hat,
        queries_used: oracle.query_count() - start,
        per_axis,
    })
}
