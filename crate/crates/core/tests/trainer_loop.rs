mod common;

use specclip::controller::ControllerConfig;
use specclip::dp::{NoisyUpdate, PrivacyParams};
use specclip::linalg::{RngStream, StreamId};
use specclip::model::{Activation, Batch, LayerRef, ProbeSpec};
use specclip::spectral::TailFitRule;
use specclip::trainer::{self, train, train_observed, LrSchedule, Seeds, TrainConfig, TrainObserver};
use specclip::Error;

fn config(seed: u64, q: f64, sigma: f64, steps: usize, c0: f64, lr: f64) -> TrainConfig {
    TrainConfig {
        privacy: PrivacyParams::new(q, sigma, steps, 1e-5).unwrap(),
        controller: ControllerConfig {
            probe_period: 5,
            ..ControllerConfig::default()
        },
        c0,
        lr_schedule: LrSchedule::Constant { lr },
        model: common::small_mlp(6, &[40, 30], 3, Activation::Relu),
        probe: ProbeSpec::single(LayerRef(1)),
        tail_rule: TailFitRule::default(),
        seeds: Seeds::from_base(seed),
        controller_enabled: true,
        eval_every: None,
    }
}

fn data(seed: u64) -> (Batch, Batch) {
    (common::toy_batch(300, 6, 3, seed), common::toy_batch(90, 6, 3, seed + 100))
}

/// Mechanism outputs as seen by the loop.
#[derive(Default)]
struct Tape {
    steps: Vec<usize>,
    record_c: Vec<f64>,
    releases: Vec<Vec<f64>>,
    clips: Vec<f64>,
    noise_stds: Vec<f64>,
}

impl TrainObserver for Tape {
    fn on_release(&mut self, step: usize, record_c: f64, release: &NoisyUpdate) {
        if let NoisyUpdate::Released { g_tilde, clip, noise_std } = release {
            self.steps.push(step);
            self.record_c.push(record_c);
            self.releases.push(g_tilde.clone());
            self.clips.push(*clip);
            self.noise_stds.push(*noise_std);
        }
    }
}

fn random_configs() -> Vec<TrainConfig> {
    let mut rng = RngStream::new(2024, StreamId::Custom(60));
    (0..3)
        .map(|i| {
            let q = 0.02 + 0.1 * rng.uniform();
            let sigma = 0.5 + 2.0 * rng.uniform();
            let c0 = 0.3 + 3.0 * rng.uniform();
            let lr = 0.05 + 0.3 * rng.uniform();
            config(i, q, sigma, 40, c0, lr)
        })
        .collect()
}

#[test]
fn disabled_controller_is_fixed_clip_dp_sgd() {
    for cfg in random_configs() {
        let (train_set, test_set) = data(cfg.seeds.data);
        let fixed = cfg.fixed_clip();
        let mut tape = Tape::default();
        let ours = train_observed(&fixed, &train_set, &test_set, &mut tape).unwrap();
        let reference = common::reference_dp_sgd(&fixed, &train_set, cfg.c0, false);
        assert_eq!(common::bits(&ours.params.flatten()), common::bits(&reference.params.flatten()));
        let released: Vec<&Vec<f64>> = reference.releases.iter().flatten().collect();
        assert_eq!(released.len(), tape.releases.len());
        for (a, b) in tape.releases.iter().zip(released) {
            assert_eq!(common::bits(a), common::bits(b));
        }
        assert!(ours.log.records.iter().all(|r| r.c == cfg.c0));
    }
}

#[test]
fn zero_gain_and_long_period_reduce_to_fixed_clip() {
    for cfg in random_configs() {
        let (train_set, test_set) = data(cfg.seeds.data);
        let fixed = train(&cfg.fixed_clip(), &train_set, &test_set).unwrap();
        let fixed_bits = common::bits(&fixed.params.flatten());

        let mut zero_gain = cfg.clone();
        zero_gain.controller.kappa = 0.0;
        let a = train(&zero_gain, &train_set, &test_set).unwrap();
        assert_eq!(common::bits(&a.params.flatten()), fixed_bits);
        // the probe still ran and logged readings
        assert!(a.log.probe_steps().count() > 0);

        let mut long_period = cfg.clone();
        long_period.controller.probe_period = cfg.privacy.total_steps + 1;
        let b = train(&long_period, &train_set, &test_set).unwrap();
        assert_eq!(common::bits(&b.params.flatten()), fixed_bits);
        assert_eq!(b.log.probe_steps().count(), 0);
    }
}

#[test]
fn state_is_carried_between_probes() {
    let cfg = config(7, 0.1, 1.0, 60, 1.0, 0.2);
    let (train_set, test_set) = data(7);
    let out = train(&cfg, &train_set, &test_set).unwrap();
    let recs = &out.log.records;
    assert_eq!(recs.len(), 60);
    let mut moved = false;
    for t in 0..recs.len() {
        let probe = cfg.controller.is_probe_step(t) && !recs[t].skipped;
        assert_eq!(recs[t].zeta_raw.is_some(), probe && !recs[t].probe_failed, "step {t}");
        let next_c = recs.get(t + 1).map_or(out.log.final_c, |r| r.c);
        if !probe {
            assert_eq!(next_c, recs[t].c, "C moved at step {t}");
            if t > 0 {
                assert_eq!(recs[t].zeta_hat, recs[t - 1].zeta_hat);
            }
        } else if next_c != recs[t].c {
            moved = true;
        }
    }
    assert!(moved, "controller never acted");
}

#[test]
fn noise_uses_the_threshold_of_its_own_step() {
    let mut cfg = config(8, 0.1, 1.3, 50, 0.5, 0.2);
    cfg.controller.probe_period = 3;
    cfg.controller.kappa = 0.3;
    let (train_set, test_set) = data(8);
    let mut tape = Tape::default();
    let out = train_observed(&cfg, &train_set, &test_set, &mut tape).unwrap();
    assert!(!tape.steps.is_empty());
    for i in 0..tape.steps.len() {
        let t = tape.steps[i];
        assert_eq!(tape.record_c[i], out.log.records[t].c);
        assert_eq!(tape.clips[i], tape.record_c[i]);
        assert_eq!(tape.noise_stds[i], cfg.privacy.sigma * tape.record_c[i]);
    }
    let distinct: std::collections::BTreeSet<u64> = tape.clips.iter().map(|c| c.to_bits()).collect();
    assert!(distinct.len() > 1);
    // replaying with the logged thresholds reproduces the run
    let clips = out.log.clip_series();
    assert_eq!(
        common::bits(&common::replay_with_clips(&cfg, &train_set, &clips, false).flatten()),
        common::bits(&out.params.flatten())
    );
}

#[test]
fn epsilon_ignores_the_controller() {
    let cfg = config(9, 0.05, 1.1, 40, 2.0, 0.2);
    let (train_set, test_set) = data(9);
    let ww = train(&cfg, &train_set, &test_set).unwrap();
    let fixed = train(&cfg.fixed_clip(), &train_set, &test_set).unwrap();
    assert_eq!(ww.log.epsilon.to_bits(), fixed.log.epsilon.to_bits());
    assert_eq!(ww.log.best_order, fixed.log.best_order);
    let mut other_c = cfg.clone();
    other_c.c0 = 0.4;
    let other = train(&other_c, &train_set, &test_set).unwrap();
    assert_eq!(other.log.epsilon.to_bits(), ww.log.epsilon.to_bits());
}

#[test]
fn identical_configs_give_identical_logs() {
    let mut cfg = config(10, 0.08, 1.1, 30, 1.0, 0.2);
    cfg.eval_every = Some(10);
    let (train_set, test_set) = data(10);
    let a = train(&cfg, &train_set, &test_set).unwrap();
    let b = train(&cfg, &train_set, &test_set).unwrap();
    assert_eq!(format!("{:?}", a.log.records), format!("{:?}", b.log.records));
    assert_eq!(a.log.evals, b.log.evals);
    assert_eq!(a.log.final_c, b.log.final_c);
    assert_eq!(a.params, b.params);
    assert_eq!(a.log.evals.len(), 3);

    let mut reseeded = cfg.clone();
    reseeded.seeds.noise += 1;
    let c = train(&reseeded, &train_set, &test_set).unwrap();
    assert_ne!(c.params, a.params);
}

#[test]
fn skipped_steps_draw_no_noise() {
    // five examples at q = 0.1: most batches are empty
    let mut cfg = config(11, 0.1, 1.0, 80, 1.0, 0.1);
    cfg.controller.probe_period = 4;
    let train_set = common::toy_batch(5, 6, 3, 11);
    let test_set = common::toy_batch(30, 6, 3, 12);
    let out = train(&cfg, &train_set, &test_set).unwrap();
    let skipped = out.log.records.iter().filter(|r| r.skipped).count();
    assert!(skipped > 20 && skipped < 80, "{skipped}");
    for r in out.log.records.iter().filter(|r| r.skipped) {
        assert_eq!(r.batch_size, 0);
        assert!(r.loss.is_nan());
        assert!(r.zeta_raw.is_none());
    }
    let clips = out.log.clip_series();
    let ours = common::bits(&out.params.flatten());
    assert_eq!(common::bits(&common::replay_with_clips(&cfg, &train_set, &clips, false).flatten()), ours);
    assert_ne!(common::bits(&common::replay_with_clips(&cfg, &train_set, &clips, true).flatten()), ours);

    let fixed = cfg.fixed_clip();
    let fixed_out = train(&fixed, &train_set, &test_set).unwrap();
    let reference = common::reference_dp_sgd(&fixed, &train_set, cfg.c0, false);
    assert_eq!(common::bits(&fixed_out.params.flatten()), common::bits(&reference.params.flatten()));
    let noisy_skip = common::reference_dp_sgd(&fixed, &train_set, cfg.c0, true);
    assert_ne!(common::bits(&fixed_out.params.flatten()), common::bits(&noisy_skip.params.flatten()));
}

#[test]
fn failed_probes_carry_state() {
    // the output layer has only three singular values: every fit fails
    let mut cfg = config(12, 0.1, 1.0, 30, 1.5, 0.2);
    cfg.probe = ProbeSpec::single(LayerRef(2));
    let (train_set, test_set) = data(12);
    let out = train(&cfg, &train_set, &test_set).unwrap();
    assert!(out.log.records.iter().all(|r| r.c == 1.5 && r.zeta_raw.is_none()));
    assert_eq!(out.log.records.iter().filter(|r| r.probe_failed).count(), 6);
    assert!(out.log.records.iter().all(|r| r.zeta_hat == cfg.controller.zeta_star));
}

#[test]
fn divergence_aborts() {
    let cfg = config(13, 0.2, 1.0, 20, 1e6, 1e150);
    let (train_set, test_set) = data(13);
    match train(&cfg.fixed_clip(), &train_set, &test_set) {
        Err(Error::Diverged { loss, .. }) => assert!(!loss.is_finite()),
        other => panic!("expected divergence, got {:?}", other.map(|o| o.log.final_accuracy)),
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let (train_set, test_set) = data(14);
    let mut cfg = config(14, 0.1, 1.0, 10, 1.0, 0.1);
    cfg.c0 = 0.0;
    assert!(matches!(train(&cfg, &train_set, &test_set), Err(Error::Config(_))));
    let mut cfg = config(14, 0.1, 1.0, 10, 1.0, 0.1);
    cfg.probe = ProbeSpec::single(LayerRef(5));
    assert!(train(&cfg, &train_set, &test_set).is_err());
    let cfg = config(14, 0.1, 1.0, 10, 1.0, 0.1);
    assert!(train(&cfg, &Batch::empty(6), &test_set).is_err());
}

#[test]
fn timing_report_without_controller() {
    let cfg = config(15, 0.1, 1.0, 20, 1.0, 0.1);
    let (train_set, test_set) = data(15);
    let fixed = train(&cfg.fixed_clip(), &train_set, &test_set).unwrap();
    let ww = train(&cfg, &train_set, &test_set).unwrap();
    let r = trainer::timing_report(&fixed.log, None);
    assert_eq!(r.probe, 0.0);
    assert_eq!(r.probe_share_pct, 0.0);
    assert!(r.overhead_pct.is_none());
    let r = trainer::timing_report(&ww.log, Some(&fixed.log));
    assert!(r.probe > 0.0);
    let expect = 100.0 * (ww.log.timings.total_secs() / fixed.log.timings.total_secs() - 1.0);
    assert_eq!(r.overhead_pct, Some(expect));
}
