//! Learners that consume a fixed dataset: noise-free empirical risk
//! minimization and the simplex-constrained maximum-likelihood estimator.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::project_to_simplex;
use crate::model::{dot, norm2, Dataset, Label, WeightVector};
use crate::noise::{NoiseKind, NoiseModel};

/// Floor applied to probabilities inside `ln`.
pub const PROBABILITY_FLOOR: f64 = 1e-300;
/// Optimal margins at or below this are reported as inconsistent data.
pub const ERM_MARGIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ErmFit {
    pub weights: WeightVector,
    /// `min_i s_i w . delta_i` with `s_i = +1` for label 1 and `-1` for label 0.
    pub min_slack: f64,
    /// Whether some simplex point orders every example strictly correctly.
    pub consistent: bool,
}

/// Max-margin ERM over the simplex: maximize `t` subject to
/// `s_i w . delta_i >= t`, `w >= 0`, `sum w = 1`.
///
/// On separable data the result classifies every example; otherwise it is the
/// point minimizing the largest violation and `consistent` is false.
pub fn fit_erm_noise_free(data: &Dataset) -> Result<ErmFit> {
    if data.is_empty() {
        return Err(Error::Usage("cannot fit an empty dataset".into()));
    }
    let m = data.dim();
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let t = lp.add_var(1.0, (-2.0, 2.0));
    let w: Vec<_> = (0..m).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
    lp.add_constraint(
        w.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>(),
        ComparisonOp::Eq,
        1.0,
    );
    for ex in data.examples() {
        let s = ex.y.sign();
        let mut row = vec![(t, 1.0)];
        row.extend(w.iter().zip(ex.pair.delta()).map(|(&v, d)| (v, -s * d)));
        lp.add_constraint(row, ComparisonOp::Le, 0.0);
    }
    let sol = lp
        .solve()
        .map_err(|e| Error::Numerical(format!("max-margin program failed: {e}")))?;
    let raw: Vec<f64> = w.iter().map(|&v| sol[v]).collect();
    let weights = project_to_simplex(&raw)?;
    let min_slack = min_slack(&weights, data);
    Ok(ErmFit {
        weights,
        min_slack,
        consistent: min_slack > ERM_MARGIN_TOL,
    })
}

/// Smallest signed margin of `w` over the dataset.
pub fn min_slack(w: &WeightVector, data: &Dataset) -> f64 {
    data.examples()
        .iter()
        .map(|e| e.y.sign() * w.margin(e.pair.delta()))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MleSettings {
    pub max_iterations: usize,
    /// Stop once the unit-step projected-gradient mapping has this norm.
    pub gradient_tolerance: f64,
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
}

impl Default for MleSettings {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            gradient_tolerance: 1e-8,
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
        }
    }
}

impl MleSettings {
    fn validate(&self) -> Result<()> {
        let ok = self.max_iterations > 0
            && self.gradient_tolerance > 0.0
            && self.initial_step > 0.0
            && self.shrink > 0.0
            && self.shrink < 1.0
            && self.sufficient_decrease > 0.0
            && self.sufficient_decrease < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Usage(format!("invalid MLE settings: {self:?}")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct LossGradient {
    pub loss: f64,
    pub grad: Vec<f64>,
    /// Set when some probability hit [`PROBABILITY_FLOOR`].
    pub floor_hit: bool,
}

/// Per-example `(-ln P(y | z), d/dz of that)` where `z = w . delta`.
fn example_terms(nm: &NoiseModel, z: f64, y: Label) -> (f64, f64, bool) {
    // For label 0 the likelihood is F(-z), so work with the signed margin.
    let s = y.sign();
    let u = s * z;
    let (nll, ratio, floored) = match nm.kind() {
        NoiseKind::Logistic { scale } => {
            let sig_neg = 1.0 / (1.0 + (u / scale).exp());
            (-nm.log_cdf(u), sig_neg / scale, false)
        }
        _ => {
            let p = nm.cdf(u);
            let dens = nm.pdf(u).unwrap_or(0.0);
            if p < PROBABILITY_FLOOR {
                (-PROBABILITY_FLOOR.ln(), dens / PROBABILITY_FLOOR, true)
            } else {
                (-p.ln(), dens / p, false)
            }
        }
    };
    // d/dz [-ln F(s z)] = -s F'(s z) / F(s z)
    (nll, -s * ratio, floored)
}

fn check_model(nm: &NoiseModel) -> Result<()> {
    if nm.is_zero() {
        return Err(Error::Unsupported(
            "maximum likelihood needs a noise model with a density".into(),
        ));
    }
    Ok(())
}

/// Average negative log-likelihood and its gradient at any `w` in `R^m`.
pub fn loss_and_gradient(w: &[f64], data: &Dataset, nm: &NoiseModel) -> Result<LossGradient> {
    check_model(nm)?;
    if w.len() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: w.len(),
        });
    }
    let n = data.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; w.len()];
    let mut floor_hit = false;
    for ex in data.examples() {
        let delta = ex.pair.delta();
        let (nll, dz, floored) = example_terms(nm, dot(w, delta), ex.y);
        loss += nll;
        floor_hit |= floored;
        grad.iter_mut().zip(delta).for_each(|(g, d)| *g += dz * d);
    }
    grad.iter_mut().for_each(|g| *g /= n);
    Ok(LossGradient {
        loss: loss / n,
        grad,
        floor_hit,
    })
}

/// Average negative log-likelihood alone.
pub fn loss(w: &[f64], data: &Dataset, nm: &NoiseModel) -> Result<f64> {
    check_model(nm)?;
    let total: f64 = data
        .examples()
        .iter()
        .map(|ex| example_terms(nm, dot(w, ex.pair.delta()), ex.y).0)
        .sum();
    Ok(total / data.len() as f64)
}

#[derive(Debug, Clone)]
pub struct MleFit {
    pub weights: WeightVector,
    pub loss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub floor_hit: bool,
    /// Loss at the start and after every accepted step.
    pub loss_history: Vec<f64>,
}

/// Barzilai-Borwein step `s.s / s.y`, when the curvature estimate is positive.
fn bb_step(w_prev: &[f64], w: &[f64], g_prev: &[f64], g: &[f64]) -> Option<f64> {
    let s: Vec<f64> = w.iter().zip(w_prev).map(|(a, b)| a - b).collect();
    let y: Vec<f64> = g.iter().zip(g_prev).map(|(a, b)| a - b).collect();
    let sy = dot(&s, &y);
    let step = dot(&s, &s) / sy;
    (sy > 0.0 && step.is_finite()).then_some(step.clamp(1e-10, 1e10))
}

/// Projected gradient descent with Armijo backtracking along the projection
/// arc, started from the centroid. Each iteration tries a Barzilai-Borwein
/// step first and falls back to `initial_step`.
pub fn fit_mle(data: &Dataset, nm: &NoiseModel, settings: &MleSettings) -> Result<MleFit> {
    check_model(nm)?;
    settings.validate()?;
    if data.is_empty() {
        return Err(Error::Usage("cannot fit an empty dataset".into()));
    }
    let m = data.dim();
    let mut w = WeightVector::uniform(m)?;
    let mut current = loss_and_gradient(w.as_slice(), data, nm)?;
    let mut floor_hit = current.floor_hit;
    let mut history = vec![current.loss];
    let mut converged = false;
    let mut iterations = 0;
    let mut previous: Option<(Vec<f64>, Vec<f64>)> = None;

    while iterations < settings.max_iterations {
        let unit: Vec<f64> = w
            .as_slice()
            .iter()
            .zip(&current.grad)
            .map(|(a, g)| a - g)
            .collect();
        let unit = project_to_simplex(&unit)?;
        let mapping: Vec<f64> = w
            .as_slice()
            .iter()
            .zip(unit.as_slice())
            .map(|(a, b)| a - b)
            .collect();
        if norm2(&mapping) <= settings.gradient_tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let mut step = match &previous {
            Some((pw, pg)) => {
                bb_step(pw, w.as_slice(), pg, &current.grad).unwrap_or(settings.initial_step)
            }
            None => settings.initial_step,
        };
        let mut accepted = None;
        while step > 1e-20 {
            let trial: Vec<f64> = w
                .as_slice()
                .iter()
                .zip(&current.grad)
                .map(|(a, g)| a - step * g)
                .collect();
            let trial = project_to_simplex(&trial)?;
            let dir: Vec<f64> = trial
                .as_slice()
                .iter()
                .zip(w.as_slice())
                .map(|(a, b)| a - b)
                .collect();
            let f = loss(trial.as_slice(), data, nm)?;
            if f < current.loss
                && f <= current.loss + settings.sufficient_decrease * dot(&current.grad, &dir)
            {
                accepted = Some(trial);
                break;
            }
            step *= settings.shrink;
        }
        match accepted {
            Some(next) => {
                previous = Some((w.as_slice().to_vec(), current.grad.clone()));
                w = next;
                current = loss_and_gradient(w.as_slice(), data, nm)?;
                floor_hit |= current.floor_hit;
                history.push(current.loss);
            }
            // no decrease available at machine precision
            None => {
                converged = true;
                break;
            }
        }
    }
    Ok(MleFit {
        weights: w,
        loss: current.loss,
        iterations,
        converged,
        floor_hit,
        loss_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_pair, DatasetMeta, Embedding, LabeledExample};
    use approx::assert_abs_diff_eq;

    fn meta() -> DatasetMeta {
        DatasetMeta {
            distribution: "test".into(),
            seed: None,
        }
    }

    /// Example whose embedded difference is exactly `delta`.
    fn ex(delta: &[f64], y: u8) -> LabeledExample {
        let e = Embedding::identity(delta.len());
        let x: Vec<f64> = delta.iter().map(|d| (-d).max(0.0)).collect();
        let xp: Vec<f64> = x.iter().zip(delta).map(|(a, d)| a + d).collect();
        LabeledExample {
            pair: make_pair(&e, &x, &xp).unwrap(),
            y: Label::try_from(y).unwrap(),
        }
    }

    fn ds(v: Vec<LabeledExample>) -> Dataset {
        Dataset::new(v, meta()).unwrap()
    }

    #[test]
    fn erm_single_constraint_goes_to_vertex() {
        let fit = fit_erm_noise_free(&ds(vec![ex(&[1.0, -1.0], 1)])).unwrap();
        assert_abs_diff_eq!(fit.weights.as_slice()[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.min_slack, 1.0, epsilon = 1e-9);
        assert!(fit.consistent);
    }

    #[test]
    fn erm_flags_contradiction() {
        let fit = fit_erm_noise_free(&ds(vec![ex(&[1.0, -1.0], 1), ex(&[-1.0, 1.0], 1)])).unwrap();
        assert!(!fit.consistent);
        assert_abs_diff_eq!(fit.weights.as_slice()[0], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.weights.as_slice()[1], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn erm_minimizes_worst_violation() {
        // slacks 2 w1 - 1 and 0.2 - 1.2 w1 on the simplex cross at w1 = 0.375
        let fit = fit_erm_noise_free(&ds(vec![ex(&[1.0, -1.0], 1), ex(&[-1.0, 0.2], 1)])).unwrap();
        assert!(!fit.consistent);
        assert_abs_diff_eq!(fit.weights.as_slice()[0], 0.375, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.min_slack, -0.25, epsilon = 1e-9);
    }

    #[test]
    fn mle_loss_and_gradient_at_centroid() {
        let data = ds(vec![ex(&[0.4, -0.4], 1)]);
        let nm = NoiseModel::logistic(1.0).unwrap();
        let lg = loss_and_gradient(&[0.5, 0.5], &data, &nm).unwrap();
        assert_abs_diff_eq!(lg.loss, 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(lg.grad[0], -0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(lg.grad[1], 0.2, epsilon = 1e-15);
        assert!(!lg.floor_hit);
    }

    #[test]
    fn zero_delta_dataset() {
        let data = ds(vec![ex(&[0.0, 0.0, 0.0], 1), ex(&[0.0, 0.0, 0.0], 0)]);
        let nm = NoiseModel::gaussian(1.0).unwrap();
        let lg = loss_and_gradient(&[0.2, 0.3, 0.5], &data, &nm).unwrap();
        assert_abs_diff_eq!(lg.loss, 2f64.ln(), epsilon = 1e-15);
        assert!(lg.grad.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn balanced_data_is_stationary_at_centroid() {
        let data = ds(vec![
            ex(&[0.25, -0.125, -0.125], 1),
            ex(&[0.25, -0.125, -0.125], 0),
            ex(&[-0.5, 0.25, 0.25], 1),
            ex(&[-0.5, 0.25, 0.25], 0),
        ]);
        let nm = NoiseModel::logistic(1.0).unwrap();
        let fit = fit_mle(&data, &nm, &MleSettings::default()).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.iterations, 0);
        for w in fit.weights.as_slice() {
            assert_abs_diff_eq!(*w, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn mle_rejects_zero_noise_and_bad_settings() {
        let data = ds(vec![ex(&[0.4, -0.4], 1)]);
        assert!(matches!(
            fit_mle(&data, &NoiseModel::zero(), &MleSettings::default()),
            Err(Error::Unsupported(_))
        ));
        let bad = MleSettings {
            shrink: 1.5,
            ..MleSettings::default()
        };
        assert!(matches!(
            fit_mle(&data, &NoiseModel::logistic(1.0).unwrap(), &bad),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn floor_fires_for_compact_support() {
        use crate::noise::Table;
        // c.d.f. that is exactly 0 below -0.1
        let t = Table::new(vec![-0.1, 0.1], vec![0.0, 1.0]).unwrap();
        let nm = NoiseModel::tabulated(t);
        let data = ds(vec![ex(&[1.0, -1.0], 0)]);
        let lg = loss_and_gradient(&[1.0, 0.0], &data, &nm).unwrap();
        assert!(lg.floor_hit);
        assert_abs_diff_eq!(lg.loss, -PROBABILITY_FLOOR.ln(), epsilon = 1e-9);
    }

    #[test]
    fn mle_settings_json_defaults() {
        let s: MleSettings = serde_json::from_str(r#"{"max_iterations": 10}"#).unwrap();
        assert_eq!(s.max_iterations, 10);
        assert_eq!(s.gradient_tolerance, 1e-8);
    }
}
