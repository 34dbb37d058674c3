use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use preflearn::active::{active_noise_free, active_noise_free_observed, active_noisy, repetitions};
use preflearn::geometry::{project_to_simplex, SimplexFrame};
use preflearn::harness::distribution::{PairDistribution, PairSampler};
use preflearn::harness::trial::{build_dataset, sample_simplex};
use preflearn::metrics::{
    covariance_seminorm, estimate_e1, symmetric_eigenvalues, CovarianceMatrix,
};
use preflearn::model::make_pair;
use preflearn::passive::{fit_erm_noise_free, fit_mle, loss, loss_and_gradient, MleSettings};
use preflearn::{Dataset, Embedding, NoiseModel, Oracle, WeightVector};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn weights(seed: u64, m: usize) -> WeightVector {
    sample_simplex(m, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn uniform_dataset(w: &WeightVector, noise: NoiseModel, n: usize, seed: u64) -> Dataset {
    let m = w.dim();
    let e = Embedding::identity(m);
    let sampler = PairSampler::new(PairDistribution::UniformBox, e.clone()).unwrap();
    let mut oracle = Oracle::new(w.clone(), noise, e, seed ^ 0x5555).unwrap();
    build_dataset(
        &sampler,
        &mut oracle,
        n,
        &mut ChaCha8Rng::seed_from_u64(seed),
        None,
    )
    .unwrap()
}

/// Square affine map whose image of the box `[lo, lo + width]` is
/// `[0.05, 0.95]` in every output coordinate.
fn scaled_affine(a: Vec<Vec<f64>>, lo: Vec<f64>, width: Vec<f64>) -> Option<Embedding> {
    let hi: Vec<f64> = lo.iter().zip(&width).map(|(l, w)| l + w).collect();
    let mut rows = Vec::new();
    let mut b = Vec::new();
    for row in &a {
        let (mut min, mut max) = (0.0, 0.0);
        for j in 0..row.len() {
            let (p, q) = (row[j] * lo[j], row[j] * hi[j]);
            min += p.min(q);
            max += p.max(q);
        }
        if max - min < 1e-3 {
            return None;
        }
        let k = 0.9 / (max - min);
        rows.push(row.iter().map(|x| x * k).collect::<Vec<_>>());
        b.push(0.05 - k * min);
    }
    Embedding::affine(rows, b, lo, hi).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn embed_invert_embed_round_trips(
        m in 2usize..5,
        raw in prop::collection::vec(-1.0..1.0f64, 16),
        lo in prop::collection::vec(-1.0..1.0f64, 4),
        width in prop::collection::vec(0.1..2.0f64, 4),
        seed in any::<u64>(),
    ) {
        let a: Vec<Vec<f64>> = (0..m).map(|i| raw[i * 4..i * 4 + m].to_vec()).collect();
        let e = scaled_affine(a, lo[..m].to_vec(), width[..m].to_vec());
        prop_assume!(e.is_some());
        let e = e.unwrap();
        let (lo, hi) = e.input_box();
        let (lo, hi) = (lo.to_vec(), hi.to_vec());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..1000 {
            let x: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| l + (h - l) * rand::Rng::random::<f64>(&mut rng)).collect();
            let y = e.embed(&x).unwrap();
            let xb = e.invert(&y).unwrap();
            let y2 = e.embed(&xb).unwrap();
            prop_assert!(dist(&y, &y2) <= 1e-9);
        }
    }

    #[test]
    fn identity_deltas_are_bounded(x in prop::collection::vec(0.0..=1.0f64, 1..8), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xp: Vec<f64> = x.iter().map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
        let p = make_pair(&Embedding::identity(x.len()), &x, &xp).unwrap();
        prop_assert!(p.delta().iter().all(|d| (-1.0..=1.0).contains(d)));
    }

    #[test]
    fn cdf_is_symmetric(z in -10.0..10.0f64, scale in 0.1..5.0f64) {
        for nm in [NoiseModel::logistic(scale).unwrap(), NoiseModel::gaussian(scale).unwrap()] {
            prop_assert!((nm.cdf(z) + nm.cdf(-z) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn cdf_is_monotone(mut grid in prop::collection::vec(-20.0..20.0f64, 2..50), scale in 0.1..5.0f64) {
        grid.sort_by(f64::total_cmp);
        for nm in [NoiseModel::logistic(scale).unwrap(), NoiseModel::gaussian(scale).unwrap()] {
            prop_assert!(grid.windows(2).all(|w| nm.cdf(w[0]) <= nm.cdf(w[1])));
        }
    }

    #[test]
    fn inv_cdf_inverts(p in 1e-9..(1.0 - 1e-9f64), scale in 0.1..5.0f64) {
        for nm in [NoiseModel::logistic(scale).unwrap(), NoiseModel::gaussian(scale).unwrap()] {
            prop_assert!((nm.cdf(nm.inv_cdf(p).unwrap()) - p).abs() <= 1e-10);
        }
    }

    #[test]
    fn frame_is_an_isometry(m in 2usize..10, seed in any::<u64>()) {
        let f = SimplexFrame::new(m).unwrap();
        let (u, v) = (weights(seed, m), weights(seed.wrapping_add(1), m));
        let d = dist(&f.coords(u.as_slice()), &f.coords(v.as_slice()));
        prop_assert!((d - dist(u.as_slice(), v.as_slice())).abs() <= 1e-12);
    }

    #[test]
    fn cut_normal_sides_agree_with_coordinates(m in 2usize..10, seed in any::<u64>(), c in -0.8..0.8f64, axis_pick in 0usize..100) {
        let f = SimplexFrame::new(m).unwrap();
        let w = weights(seed, m);
        let axis = axis_pick % (m - 1);
        let side = dot(&f.cut_normal(axis, c).unwrap(), w.as_slice());
        let coord = f.coords(w.as_slice())[axis] - c;
        prop_assume!(coord.abs() > 1e-12);
        prop_assert_eq!(side > 0.0, coord > 0.0);
    }

    #[test]
    fn projection_is_idempotent_and_nonexpansive(
        p in prop::collection::vec(-3.0..3.0f64, 2..10),
        shift in prop::collection::vec(-1.0..1.0f64, 10),
    ) {
        let a = project_to_simplex(&p).unwrap();
        let again = project_to_simplex(a.as_slice()).unwrap();
        prop_assert!(dist(a.as_slice(), again.as_slice()) <= 1e-12);
        let q: Vec<f64> = p.iter().zip(&shift).map(|(x, s)| x + s).collect();
        let b = project_to_simplex(&q).unwrap();
        prop_assert!(dist(a.as_slice(), b.as_slice()) <= dist(&p, &q) + 1e-12);
    }

    #[test]
    fn erm_separates_noise_free_data(m in 2usize..6, n in 1usize..80, seed in any::<u64>()) {
        let w = weights(seed, m);
        let data = uniform_dataset(&w, NoiseModel::zero(), n, seed);
        let fit = fit_erm_noise_free(&data).unwrap();
        for ex in data.examples() {
            prop_assert!(ex.y.sign() * fit.weights.margin(ex.pair.delta()) >= -1e-9);
        }
    }

    #[test]
    fn logistic_loss_is_convex_on_segments(m in 2usize..6, n in 1usize..40, seed in any::<u64>()) {
        let nm = NoiseModel::logistic(1.0).unwrap();
        let data = uniform_dataset(&weights(seed, m), nm.clone(), n, seed);
        let (u, v) = (weights(seed ^ 1, m), weights(seed ^ 2, m));
        let at = |t: f64| -> f64 {
            let p: Vec<f64> = u.as_slice().iter().zip(v.as_slice()).map(|(a, b)| (1.0 - t) * a + t * b).collect();
            loss(&p, &data, &nm).unwrap()
        };
        let h = 0.05;
        for k in 1..20 {
            let t = k as f64 * h;
            prop_assert!(at(t - h) - 2.0 * at(t) + at(t + h) >= -1e-9);
        }
    }

    #[test]
    fn mle_loss_never_increases(m in 2usize..5, n in 5usize..60, seed in any::<u64>()) {
        let nm = NoiseModel::logistic(1.0).unwrap();
        let data = uniform_dataset(&weights(seed, m), nm.clone(), n, seed);
        let fit = fit_mle(&data, &nm, &MleSettings::default()).unwrap();
        prop_assert!(fit.loss_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn noise_free_search_keeps_w_star(m in 2usize..8, eps in 0.001..0.5f64, seed in any::<u64>()) {
        let w = weights(seed, m);
        let f = SimplexFrame::new(m).unwrap();
        let t = f.coords(w.as_slice());
        let mut oracle = Oracle::new(w.clone(), NoiseModel::zero(), Embedding::identity(m), seed).unwrap();
        let mut evicted = false;
        let report = active_noise_free_observed(&mut oracle, eps, |vs, _| {
            evicted |= !t.iter().zip(vs.intervals()).all(|(x, (lo, hi))| *x >= lo - 1e-12 && *x <= hi + 1e-12);
        })
        .unwrap();
        prop_assert!(!evicted);
        let cuts: u64 = report.per_axis.iter().map(|a| u64::from(a.cuts_made)).sum();
        prop_assert_eq!(report.queries_used, cuts);
        prop_assert_eq!(report.queries_used, oracle.query_count());
        prop_assert!(dist(report.w_hat.as_slice(), w.as_slice()) <= eps);
    }

    #[test]
    fn smaller_eps_never_saves_queries(m in 2usize..8, eps in 0.002..0.5f64, ratio in 0.1..1.0f64, seed in any::<u64>()) {
        let w = weights(seed, m);
        let run = |e: f64| {
            let mut o = Oracle::new(w.clone(), NoiseModel::zero(), Embedding::identity(m), seed).unwrap();
            active_noise_free(&mut o, e).unwrap().queries_used
        };
        prop_assert!(run(eps * ratio) >= run(eps));
    }

    #[test]
    fn seminorm_is_sandwiched(m in 2usize..6, entries in prop::collection::vec(-1.0..1.0f64, 36), v in prop::collection::vec(-1.0..1.0f64, 6)) {
        let b: Vec<Vec<f64>> = (0..m).map(|i| entries[i * 6..i * 6 + m].to_vec()).collect();
        let sigma: Vec<Vec<f64>> = (0..m)
            .map(|i| (0..m).map(|j| (0..m).map(|k| b[i][k] * b[j][k]).sum::<f64>() / m as f64).collect())
            .collect();
        let cov = CovarianceMatrix::new(sigma.clone(), m).unwrap();
        let eig = symmetric_eigenvalues(&sigma).unwrap();
        let (lmin, lmax) = (eig[0].max(0.0), eig[m - 1]);
        let v = &v[..m];
        let l2 = dot(v, v).sqrt();
        let s = covariance_seminorm(v, &cov).unwrap();
        prop_assert!(lmin.sqrt() * l2 <= s + 1e-9);
        prop_assert!(s <= lmax.sqrt() * l2 + 1e-9);
    }

    #[test]
    fn jacobi_matches_reference_eigenvalues(m in 2usize..7, entries in prop::collection::vec(-2.0..2.0f64, 49)) {
        let a: Vec<Vec<f64>> = (0..m)
            .map(|i| (0..m).map(|j| { let (p, q) = (i.min(j), i.max(j)); entries[p * 7 + q] }).collect())
            .collect();
        let ours = symmetric_eigenvalues(&a).unwrap();
        let mut theirs: Vec<f64> =
            SymmetricEigen::new(DMatrix::from_fn(m, m, |i, j| a[i][j])).eigenvalues.iter().copied().collect();
        theirs.sort_by(f64::total_cmp);
        for (x, y) in ours.iter().zip(&theirs) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
        if m == 2 {
            let (p, q, r) = (a[0][0], a[0][1], a[1][1]);
            let mid = 0.5 * (p + r);
            let rad = (0.25 * (p - r).powi(2) + q * q).sqrt();
            prop_assert!((ours[0] - (mid - rad)).abs() <= 1e-9);
            prop_assert!((ours[1] - (mid + rad)).abs() <= 1e-9);
        }
    }

    #[test]
    fn e1_is_symmetric(m in 2usize..6, seed in any::<u64>()) {
        let (a, b) = (weights(seed, m), weights(seed ^ 7, m));
        let sampler = PairSampler::new(PairDistribution::UniformBox, Embedding::identity(m)).unwrap();
        let ab = estimate_e1(&a, &b, |r| sampler.sample(r), 500, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let ba = estimate_e1(&b, &a, |r| sampler.sample(r), 500, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(ab.estimate, ba.estimate);
    }

    #[test]
    fn oracles_with_equal_seeds_agree(m in 2usize..6, seed in any::<u64>()) {
        let w = weights(seed, m);
        let nm = NoiseModel::logistic(0.3).unwrap();
        let sampler = PairSampler::new(PairDistribution::UniformBox, Embedding::identity(m)).unwrap();
        let mut a = Oracle::new(w.clone(), nm.clone(), Embedding::identity(m), seed).unwrap();
        let mut b = Oracle::new(w, nm, Embedding::identity(m), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let p = sampler.sample(&mut rng).unwrap();
            prop_assert_eq!(a.query(&p), b.query(&p));
        }
        prop_assert_eq!(a.query_count(), b.query_count());
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 1e-6;
    for instance in 0..100u64 {
        let m = 2 + (instance % 5) as usize;
        let n = 1 + (instance * 7 % 40) as usize;
        let nm = if instance % 2 == 0 {
            NoiseModel::logistic(1.0)
        } else {
            NoiseModel::gaussian(1.0)
        }
        .unwrap();
        let data = uniform_dataset(&weights(instance, m), nm.clone(), n, instance);
        let w = sample_simplex(m, &mut rng).unwrap();
        let g = loss_and_gradient(w.as_slice(), &data, &nm).unwrap().grad;
        let fd: Vec<f64> = (0..m)
            .map(|i| {
                let mut p = w.as_slice().to_vec();
                let mut q = p.clone();
                p[i] += h;
                q[i] -= h;
                (loss(&p, &data, &nm).unwrap() - loss(&q, &data, &nm).unwrap()) / (2.0 * h)
            })
            .collect();
        let rel = dist(&g, &fd) / dot(&g, &g).sqrt().max(1e-12);
        assert!(rel <= 1e-6, "instance {instance}: relative error {rel:e}");
    }
}

#[test]
fn majority_vote_error_is_bounded() {
    let nm = NoiseModel::logistic(1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (g, one_minus_q) in [(0.05, 0.1), (0.2, 0.05), (0.02, 0.2)] {
        let p = nm.cdf(g);
        let gap = p - 0.5;
        let t = repetitions(gap, one_minus_q).unwrap();
        let reps = 20_000;
        let binom = Binomial::new(t, p).unwrap();
        // a vote fails unless it is a clear majority for the true side
        let failures = (0..reps)
            .filter(|_| {
                let s = binom.sample(&mut rng) as f64;
                s - t as f64 / 2.0 <= t as f64 * gap / 2.0
            })
            .count() as f64;
        let freq = failures / reps as f64;
        let bound = (-(t as f64) * gap * gap / 4.0).exp();
        let slack = 3.0 * (bound * (1.0 - bound) / reps as f64).sqrt();
        assert!(freq <= bound + slack, "g={g}: {freq} > {bound}");
        assert!(bound <= one_minus_q + 1e-12);
    }
}

#[test]
fn noisy_queries_match_the_oracle_counter() {
    let nm = NoiseModel::logistic(1.0).unwrap();
    for seed in 0..5 {
        let w = weights(seed, 4);
        let mut o = Oracle::new(w, nm.clone(), Embedding::identity(4), seed).unwrap();
        let before = o.query_count();
        let r = active_noisy(&mut o, 0.1, 0.1, &nm).unwrap();
        assert_eq!(r.queries_used, o.query_count() - before);
        assert!(r.queries_used > 0);
    }
}

#[test]
fn mle_recovers_interior_weights_from_ten_thousand_pairs() {
    let nm = NoiseModel::logistic(1.0).unwrap();
    let w = WeightVector::new(vec![0.2, 0.3, 0.5]).unwrap();
    let data = uniform_dataset(&w, nm.clone(), 10_000, 17);
    let fit = fit_mle(&data, &nm, &MleSettings::default()).unwrap();
    assert!(fit.converged && !fit.floor_hit);
    assert!(
        dist(fit.weights.as_slice(), w.as_slice()) <= 0.1,
        "{:?}",
        fit.weights
    );
}
