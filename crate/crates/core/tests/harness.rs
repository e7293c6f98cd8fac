mod common;

use fedrem::cqa::{outage_probability, outage_threshold};
use fedrem::fl::LearningConfig;
use fedrem::harness::*;
use fedrem::rem::RemStore;
use fedrem::scenario::ScenarioConfig;

fn inputs<'a>(s: &'a ScenarioConfig, seeds: &'a [u64]) -> CycleInputs<'a> {
    CycleInputs {
        learning: LearningConfig { k: 5, n_s: 256 },
        components: s.gmm.components,
        em: &s.gmm.em,
        platoon_seeds: seeds,
    }
}

fn spec(mode: Mode, platoons: usize) -> RunSpec {
    RunSpec {
        mode,
        platoons,
        n_s: 256,
        k: 5,
        laps: 3,
    }
}

#[test]
fn one_platoon_cycle_copies_its_model_up() {
    let s = common::tiny_scenario();
    let mut global = RemStore::global();
    let mut locals = vec![RemStore::local(0)];
    let rec = run_fl_cycle(&mut global, &mut locals, &s, 1, &inputs(&s, &[42])).unwrap();
    assert_eq!(rec.temporal.len(), 1);
    assert_eq!(rec.weights, vec![vec![256]; 3]);
    for c in 0..3 {
        let g = global.require(1, c).unwrap();
        let l = locals[0].require(1, c).unwrap();
        assert_eq!(g.model, l.model);
        assert_eq!(l.model, rec.temporal[0][c]);
        assert_eq!(l.n_r, 256);
    }
    assert!(global.get(0, 0).is_none());
}

#[test]
fn platoons_with_equal_seeds_agree() {
    let s = common::tiny_scenario();
    let mut global = RemStore::global();
    let mut locals: Vec<RemStore> = (0..3).map(RemStore::local).collect();
    run_fl_cycle(&mut global, &mut locals, &s, 0, &inputs(&s, &[9, 9, 9])).unwrap();
    for c in 0..3 {
        let m = &locals[0].require(0, c).unwrap().model;
        assert!(locals.iter().all(|l| &l.require(0, c).unwrap().model == m));
        assert_eq!(&global.require(0, c).unwrap().model, m);
    }
}

#[test]
fn merged_means_stay_between_local_means() {
    let s = common::tiny_scenario();
    let mut global = RemStore::global();
    let mut locals: Vec<RemStore> = (0..4).map(RemStore::local).collect();
    for round in 0..2u64 {
        let seeds: Vec<u64> = (0..4).map(|u| 100 * round + u).collect();
        let rec = run_fl_cycle(&mut global, &mut locals, &s, 2, &inputs(&s, &seeds)).unwrap();
        for c in 0..3 {
            let g = &global.require(2, c).unwrap().model;
            for j in 0..g.n_components() {
                let vals: Vec<f64> = locals.iter().map(|l| l.require(2, c).unwrap().model.means()[j]).collect();
                let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                assert!(lo <= g.means()[j] && g.means()[j] <= hi);
            }
            let n_r: u64 = locals.iter().map(|l| l.require(2, c).unwrap().n_r).sum();
            assert_eq!(global.require(2, c).unwrap().n_r, n_r);
            assert_eq!(rec.weights[c].len(), 4);
        }
    }
    // second round: every local had absorbed two captures
    assert!(locals.iter().all(|l| l.require(2, 0).unwrap().n_r == 512));
}

#[test]
fn seed_count_must_match_platoons() {
    let s = common::tiny_scenario();
    let mut global = RemStore::global();
    let mut locals = vec![RemStore::local(0), RemStore::local(1)];
    assert!(run_fl_cycle(&mut global, &mut locals, &s, 0, &inputs(&s, &[1])).is_err());
}

#[test]
fn global_with_one_platoon_is_local() {
    let s = common::tiny_scenario();
    let base = build_baseline(&s, 2000, 1).unwrap();
    let g = run_seed(&s, &base, &spec(Mode::Global, 1), 3).unwrap();
    let l = run_seed(&s, &base, &spec(Mode::Local, 1), 3).unwrap();
    assert_eq!(g.rmse, l.rmse);
    assert_eq!(g.saim_rmse, l.saim_rmse);
    assert!(g.final_store.iter().zip(l.final_store.iter()).all(|(a, b)| a == b));
    assert_eq!(g.final_store.len(), 9);
}

#[test]
fn saim_mode_reports_its_own_curve() {
    let s = common::tiny_scenario();
    let base = build_baseline(&s, 2000, 1).unwrap();
    let r = run_seed(&s, &base, &spec(Mode::Saim, 1), 3).unwrap();
    assert_eq!(r.rmse, r.saim_rmse);
    assert_eq!(r.final_store, r.final_saim);
    assert!(r.final_saim.iter().all(|(_, e)| e.n_r == 256));
}

#[test]
fn invalid_specs_are_rejected() {
    let s = common::tiny_scenario();
    let base = build_baseline(&s, 2000, 1).unwrap();
    assert!(run_seed(&s, &base, &spec(Mode::Local, 2), 0).is_err());
    assert!(run_seed(&s, &base, &RunSpec { laps: 0, ..spec(Mode::Global, 1) }, 0).is_err());
    assert!(run_seed(&s, &base, &RunSpec { k: 0, ..spec(Mode::Global, 1) }, 0).is_err());
    assert!(run_experiment(&s, &base, &[spec(Mode::Global, 1)], &[]).is_err());
}

#[test]
fn reports_are_reproducible_to_the_byte() {
    let s = common::tiny_scenario();
    let base = build_baseline(&s, 2000, 1).unwrap();
    let sweep = [spec(Mode::Global, 2), spec(Mode::Local, 1)];
    let a = run_experiment(&s, &base, &sweep, &[0, 1]).unwrap();
    let b = run_experiment(&s, &base, &sweep, &[0, 1]).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    let dir = tempfile::tempdir().unwrap();
    a.save(dir.path()).unwrap();
    let first = std::fs::read(dir.path().join("report.json")).unwrap();
    b.save(dir.path()).unwrap();
    assert_eq!(first, std::fs::read(dir.path().join("report.json")).unwrap());
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
    let c = run_experiment(&s, &base, &sweep, &[0, 2]).unwrap();
    assert_ne!(a.to_json(), c.to_json());
}

#[test]
fn report_curves_average_the_seeds() {
    let s = common::tiny_scenario();
    let base = build_baseline(&s, 2000, 1).unwrap();
    let rep = run_experiment(&s, &base, &[spec(Mode::Local, 1)], &[4, 5, 6]).unwrap();
    let cfg = &rep.configs[0];
    for r in 0..3 {
        let mean = cfg.rmse_per_seed.iter().map(|v| v[r]).sum::<f64>() / 3.0;
        assert!((cfg.rmse_mean[r] - mean).abs() <= 1e-15 * mean.max(1e-300));
    }
    assert_eq!(cfg.stabilized(1), cfg.rmse_mean[2]);
    assert_eq!(tail_mean(&[1.0, 2.0, 3.0, 4.0], 2), 3.5);
    assert_eq!(rep.meta.baseline_samples, 2000);
}

#[test]
fn rmse_matches_a_direct_computation() {
    let s = common::tiny_scenario();
    let base = build_baseline(&s, 2000, 1).unwrap();
    let other = build_baseline(&s, 1000, 2).unwrap();
    let t = thresholds(&s).unwrap();
    let mut sq = 0.0;
    for l in 0..3 {
        for c in 0..3 {
            let tc = outage_threshold(&s.link_budget(c).unwrap());
            assert_eq!(tc, t[c]);
            let a = outage_probability(&other.require(l, c).unwrap().model, tc);
            let b = outage_probability(&base.require(l, c).unwrap().model, tc);
            sq += (a - b).powi(2);
        }
    }
    let want = (sq / 9.0).sqrt();
    let got = rmse(&outage_pairs(&other, &base, &t, 3).unwrap());
    assert!((got - want).abs() <= 1e-15 * want.max(1e-300));
    assert_eq!(rmse(&outage_pairs(&base, &base, &t, 3).unwrap()), 0.0);
}

#[test]
fn baseline_covers_every_pair() {
    let s = common::tiny_scenario();
    let base = build_baseline(&s, 1500, 7).unwrap();
    assert_eq!(base.len(), 9);
    assert!(base.iter().all(|(_, e)| e.n_r == 1500 && e.model.n_components() == 3));
    assert_eq!(base, build_baseline(&s, 1500, 7).unwrap());
}

#[test]
fn baseline_agrees_with_itself_everywhere() {
    let s = common::tiny_scenario();
    let base = build_baseline(&s, 2000, 1).unwrap();
    let t = channel_selection_table(&s, &base, &base, &base).unwrap();
    assert_eq!(t.global_matches, 3);
    assert_eq!(t.saim_matches, 3);
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
}

#[test]
fn the_silent_channel_is_never_worse() {
    let s = common::tiny_scenario();
    let base = build_baseline(&s, 4000, 3).unwrap();
    let t = thresholds(&s).unwrap();
    for l in 0..3 {
        let p: Vec<f64> = (0..3)
            .map(|c| outage_probability(&base.require(l, c).unwrap().model, t[c]))
            .collect();
        assert!(p[2] <= p[0] && p[2] <= p[1], "location {l}: {p:?}");
    }
    // next to the channel-0 access point that channel is the worst
    let p0: Vec<f64> = (0..3)
        .map(|c| outage_probability(&base.require(0, c).unwrap().model, t[c]))
        .collect();
    assert!(p0[0] > p0[1], "{p0:?}");
}
