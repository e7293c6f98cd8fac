use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use fedrem::fl::*;
use fedrem::gmm::GmmParams;
use fedrem::rem::RemEntry;
use fedrem::rng::{rng_from_seed, SimRng};

fn random_model(rng: &mut SimRng, j: usize) -> GmmParams {
    let mut means: Vec<f64> = (0..j).map(|_| rng.random_range(15.0..45.0)).collect();
    means.sort_by(f64::total_cmp);
    let w: Vec<f64> = (0..j).map(|_| rng.random_range(0.01..1.0)).collect();
    let t: f64 = w.iter().sum();
    GmmParams::new(means, w.iter().map(|v| v / t).collect(), rng.random_range(0.05..3.0)).unwrap()
}

/// Straight weighted average, parameter by parameter.
fn naive(items: &[(GmmParams, u64)]) -> (Vec<f64>, Vec<f64>, f64) {
    let total: f64 = items.iter().map(|(_, w)| *w as f64).sum();
    let j = items[0].0.n_components();
    let mut means = vec![0.0; j];
    let mut weights = vec![0.0; j];
    let mut sigma = 0.0;
    for (m, w) in items {
        let a = *w as f64 / total;
        for i in 0..j {
            means[i] += a * m.means()[i];
            weights[i] += a * m.weights()[i];
        }
        sigma += a * m.sigma();
    }
    (means, weights, sigma)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn merge_matches_brute_force() {
    let mut rng = rng_from_seed(1);
    for _ in 0..1000 {
        let j = rng.random_range(1..8);
        let u = rng.random_range(1..10);
        let items: Vec<(GmmParams, u64)> = (0..u)
            .map(|_| (random_model(&mut rng, j), rng.random_range(0..50_000)))
            .collect();
        if items.iter().all(|(_, w)| *w == 0) {
            assert!(fed_avg_merge(&items).is_err());
            continue;
        }
        let got = fed_avg_merge(&items).unwrap();
        let (means, weights, sigma) = naive(&items);
        for i in 0..j {
            assert!(close(got.means()[i], means[i]), "{} vs {}", got.means()[i], means[i]);
            assert!(close(got.weights()[i], weights[i]));
        }
        assert!(close(got.sigma(), sigma));
        assert!((got.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(got.sigma() > 0.0);
    }
}

#[test]
fn update_matches_brute_force() {
    let mut rng = rng_from_seed(2);
    for _ in 0..1000 {
        let j = rng.random_range(1..8);
        let cfg = LearningConfig {
            k: rng.random_range(1..10),
            n_s: rng.random_range(1..5000),
        };
        let old = RemEntry {
            model: random_model(&mut rng, j),
            n_r: rng.random_range(1..100_000),
        };
        let fresh = random_model(&mut rng, j);
        let got = local_update(Some(&old), &fresh, &cfg).unwrap();
        assert_eq!(got.n_r, old.n_r + cfg.n_s);
        let w_old = old.n_r.min(cfg.k * cfg.n_s);
        let (means, weights, sigma) = naive(&[(old.model.clone(), w_old), (fresh.clone(), cfg.n_s)]);
        for i in 0..j {
            assert!(close(got.model.means()[i], means[i]));
            assert!(close(got.model.weights()[i], weights[i]));
        }
        assert!(close(got.model.sigma(), sigma));
    }
}

#[test]
fn first_capture_is_taken_as_is() {
    let mut rng = rng_from_seed(3);
    let fresh = random_model(&mut rng, 4);
    let cfg = LearningConfig { k: 5, n_s: 1024 };
    let e = local_update(None, &fresh, &cfg).unwrap();
    assert_eq!(e.model, fresh);
    assert_eq!(e.n_r, 1024);
}

#[test]
fn merge_lies_between_its_inputs() {
    let mut rng = rng_from_seed(4);
    for _ in 0..500 {
        let j = rng.random_range(1..6);
        let items: Vec<(GmmParams, u64)> = (0..rng.random_range(1..8))
            .map(|_| (random_model(&mut rng, j), rng.random_range(1..10_000)))
            .collect();
        let got = fed_avg_merge(&items).unwrap();
        for i in 0..j {
            let (lo, hi) = items.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (m, _)| {
                (lo.min(m.means()[i]), hi.max(m.means()[i]))
            });
            assert!(lo <= got.means()[i] && got.means()[i] <= hi);
        }
        let (lo, hi) = items.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (m, _)| {
            (lo.min(m.sigma()), hi.max(m.sigma()))
        });
        assert!(lo <= got.sigma() && got.sigma() <= hi);
    }
}

#[test]
fn merge_ignores_input_order() {
    let mut rng = rng_from_seed(5);
    for _ in 0..200 {
        let j = rng.random_range(1..6);
        let mut items: Vec<(GmmParams, u64)> = (0..rng.random_range(2..10))
            .map(|_| (random_model(&mut rng, j), rng.random_range(1..10_000)))
            .collect();
        let a = fed_avg_merge(&items).unwrap();
        items.shuffle(&mut rng);
        let b = fed_avg_merge(&items).unwrap();
        for i in 0..j {
            assert!(close(a.means()[i], b.means()[i]));
            assert!(close(a.weights()[i], b.weights()[i]));
        }
        assert!(close(a.sigma(), b.sigma()));
    }
}

#[test]
fn single_platoon_and_identical_models_are_fixed_points() {
    let mut rng = rng_from_seed(6);
    let m = random_model(&mut rng, 5);
    assert_eq!(fed_avg_merge(&[(m.clone(), 777)]).unwrap(), m);
    let same: Vec<_> = (1..8).map(|w| (m.clone(), w * 100)).collect();
    assert_eq!(fed_avg_merge(&same).unwrap(), m);
    let cfg = LearningConfig { k: 3, n_s: 256 };
    let e = RemEntry { model: m.clone(), n_r: 10_000 };
    assert_eq!(local_update(Some(&e), &m, &cfg).unwrap().model, m);
}

#[test]
fn memory_is_bounded_by_the_cap() {
    // Feed a constant new model; the step towards it never shrinks below
    // 1/(k+1) of the remaining gap, and equals it once the cap binds.
    for k in 1..8u64 {
        let cfg = LearningConfig { k, n_s: 100 };
        let target = GmmParams::new(vec![10.0], vec![1.0], 1.0).unwrap();
        let mut e = local_update(None, &GmmParams::new(vec![0.0], vec![1.0], 1.0).unwrap(), &cfg).unwrap();
        for _ in 0..15 {
            let before = e.model.means()[0];
            let capped = e.n_r >= k * cfg.n_s;
            e = local_update(Some(&e), &target, &cfg).unwrap();
            let after = e.model.means()[0];
            assert!(after >= before && after <= 10.0);
            let step = (after - before) / (10.0 - before);
            let floor = 1.0 / (k + 1) as f64;
            assert!(step >= floor - 1e-12, "k={k}: step {step}");
            if capped {
                assert!((step - floor).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn mismatched_or_empty_inputs_fail() {
    let mut rng = rng_from_seed(7);
    let a = random_model(&mut rng, 2);
    let b = random_model(&mut rng, 3);
    assert!(fed_avg_merge(&[]).is_err());
    assert!(fed_avg_merge(&[(a.clone(), 1), (b, 1)]).is_err());
    assert!(local_update(None, &a, &LearningConfig { k: 0, n_s: 10 }).is_err());
    assert_eq!(n_th(3, u64::MAX, u64::MAX), 3);
}

proptest! {
    #[test]
    fn capped_weight_never_exceeds_either_bound(n_r: u64, k in 0u64..1000, n_s in 0u64..1_000_000) {
        let t = n_th(n_r, k, n_s);
        prop_assert!(t <= n_r);
        prop_assert!(t as u128 <= k as u128 * n_s as u128);
        prop_assert!(t == n_r || t as u128 == k as u128 * n_s as u128);
    }

    #[test]
    fn merged_weights_stay_on_the_simplex(seed: u64, u in 1usize..12, j in 1usize..8) {
        let mut rng = rng_from_seed(seed);
        let items: Vec<_> = (0..u)
            .map(|_| (random_model(&mut rng, j), rng.random_range(1..1_000_000u64)))
            .collect();
        let got = fed_avg_merge(&items).unwrap();
        prop_assert!((got.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(got.weights().iter().all(|w| *w >= 0.0));
        prop_assert!(got.means().windows(2).all(|p| p[0] <= p[1]));
    }
}
