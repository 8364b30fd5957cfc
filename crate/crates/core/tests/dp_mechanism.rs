mod common;

use proptest::prelude::*;
use specclip::dp::{clip_gradient, noisy_average, poisson_subsample, sensitivity_probe, NoisyUpdate};
use specclip::linalg::{RngStream, StreamId};
use specclip::model::PerExampleGrads;

fn rows(dim: usize, n: usize, scale: f64, rng: &mut RngStream) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| scale * rng.standard_normal()).collect())
        .collect()
}

#[test]
fn subsample_size_has_binomial_moments() {
    let mut rng = RngStream::new(1, StreamId::Subsample);
    let (n, q, reps) = (10_000, 0.01, 10_000);
    let sizes: Vec<f64> = (0..reps)
        .map(|_| poisson_subsample(n, q, &mut rng).len() as f64)
        .collect();
    let mean = sizes.iter().sum::<f64>() / reps as f64;
    let var = sizes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    assert!((mean - 100.0).abs() <= 3.0, "mean {mean}");
    assert!((var / 99.0 - 1.0).abs() <= 0.10, "var {var}");
}

#[test]
fn subsample_inclusion_is_uniform_over_indices() {
    let mut rng = RngStream::new(2, StreamId::Subsample);
    let mut hits = [0usize; 20];
    for _ in 0..20_000 {
        for i in poisson_subsample(20, 0.25, &mut rng) {
            hits[i] += 1;
        }
    }
    // each count ~ Bin(20000, 0.25): sd ≈ 61
    for h in hits {
        assert!((h as f64 - 5000.0).abs() < 300.0, "{hits:?}");
    }
}

#[test]
fn clip_bound_fuzz() {
    let mut rng = RngStream::new(3, StreamId::Custom(30));
    for i in 0..10_000 {
        let dim = 1 + ((rng.uniform().powi(3)) * 10_000.0) as usize;
        let scale = 10f64.powf(4.0 * rng.uniform() - 2.0);
        let g: Vec<f64> = (0..dim).map(|_| scale * rng.standard_normal()).collect();
        let c = 10f64.powf(2.0 * rng.uniform() - 1.0);
        let out = clip_gradient(&g, c);
        let norm_in = common::norm_dd(&g);
        let norm_out = common::norm_dd(&out);
        assert!(norm_out <= c + 1e-9, "case {i}: {norm_out} > {c}");
        if norm_in <= c {
            assert_eq!(common::bits(&out), common::bits(&g));
        } else {
            assert!((norm_out - c).abs() <= 1e-9 * c.max(1.0));
            // direction preserved: out is a positive multiple of g
            let ratio = norm_out / norm_in;
            for (a, b) in out.iter().zip(&g) {
                assert!((a - ratio * b).abs() <= 1e-12 * b.abs().max(1e-300) + 1e-15);
            }
        }
    }
}

#[test]
fn plain_mean_without_noise() {
    let g = PerExampleGrads::from_rows(2, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let mut rng = RngStream::new(0, StreamId::Noise);
    let out = noisy_average(&g, 10.0, 0.0, &mut rng);
    assert_eq!(out.g_tilde().unwrap(), &[0.5, 0.5]);
}

#[test]
fn empty_batch_is_a_noop_on_the_noise_stream() {
    let mut rng = RngStream::new(4, StreamId::Noise);
    let empty = PerExampleGrads::new(0, 5, vec![]).unwrap();
    let before = rng.clone();
    assert_eq!(noisy_average(&empty, 1.0, 1.1, &mut rng), NoisyUpdate::Skipped);
    assert_eq!(rng.gaussian_draws(), 0);
    let mut fresh = before;
    assert_eq!(rng.standard_normal().to_bits(), fresh.standard_normal().to_bits());
}

#[test]
fn noise_is_added_to_the_sum() {
    // with one zero row the release is z/1; with four zero rows it is z/4
    let mut a = RngStream::new(5, StreamId::Noise);
    let mut b = RngStream::new(5, StreamId::Noise);
    let one = PerExampleGrads::new(1, 3, vec![0.0; 3]).unwrap();
    let four = PerExampleGrads::new(4, 3, vec![0.0; 12]).unwrap();
    let r1 = noisy_average(&one, 2.0, 1.5, &mut a);
    let r4 = noisy_average(&four, 2.0, 1.5, &mut b);
    for (x, y) in r1.g_tilde().unwrap().iter().zip(r4.g_tilde().unwrap()) {
        assert!((x / 4.0 - y).abs() <= 1e-15 * x.abs().max(1.0));
    }
    match r1 {
        NoisyUpdate::Released { clip, noise_std, .. } => {
            assert_eq!(clip, 2.0);
            assert_eq!(noise_std, 3.0);
        }
        NoisyUpdate::Skipped => panic!(),
    }
}

#[test]
fn noise_std_matches_calibration() {
    let (sigma, c, batch) = (1.1, 2.0, 16);
    let mut g_rng = RngStream::new(6, StreamId::Custom(31));
    let grads = PerExampleGrads::from_rows(4, &rows(4, batch, 3.0, &mut g_rng)).unwrap();
    let mut noise = RngStream::new(7, StreamId::Noise);
    let clean = noisy_average(&grads, c, 0.0, &mut RngStream::new(0, StreamId::Noise));
    let centre = clean.g_tilde().unwrap().to_vec();
    let trials = 100_000;
    let mut sq = [0.0; 4];
    for _ in 0..trials {
        let r = noisy_average(&grads, c, sigma, &mut noise);
        for (k, (v, m)) in r.g_tilde().unwrap().iter().zip(&centre).enumerate() {
            sq[k] += (v - m) * (v - m);
        }
    }
    let target = sigma * c / batch as f64;
    for s in sq {
        let std = (s / trials as f64).sqrt();
        assert!((std / target - 1.0).abs() < 0.02, "{std} vs {target}");
    }
}

#[test]
fn sensitivity_examples() {
    let base = vec![vec![0.1, 0.2], vec![5.0, 5.0], vec![0.0, 0.3]];
    let with = PerExampleGrads::from_rows(2, &base).unwrap();
    let without = PerExampleGrads::from_rows(2, &[base[0].clone(), base[2].clone()]).unwrap();
    let s = sensitivity_probe(&with, &without, 1.0).unwrap();
    assert!((s - 1.0).abs() < 1e-12);

    let zero = vec![vec![0.1, 0.2], vec![0.0, 0.0]];
    let with = PerExampleGrads::from_rows(2, &zero).unwrap();
    let without = PerExampleGrads::from_rows(2, &zero[..1]).unwrap();
    assert_eq!(sensitivity_probe(&with, &without, 1.0).unwrap(), 0.0);

    // two rows differ: not neighbours
    let a = PerExampleGrads::from_rows(1, &[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
    let b = PerExampleGrads::from_rows(1, &[vec![7.0], vec![3.0]]).unwrap();
    assert!(sensitivity_probe(&a, &b, 1.0).is_err());
    let same = PerExampleGrads::from_rows(1, &[vec![1.0], vec![2.0]]).unwrap();
    assert!(sensitivity_probe(&same, &same, 1.0).is_err());
}

#[test]
fn sensitivity_fuzz_small() {
    let mut rng = RngStream::new(8, StreamId::Custom(32));
    for _ in 0..200 {
        let dim = 1 + (rng.uniform() * 500.0) as usize;
        let n = 2 + (rng.uniform() * 8.0) as usize;
        let c = 10f64.powf(2.0 * rng.uniform() - 1.0);
        let all = rows(dim, n, 10f64.powf(2.0 * rng.uniform() - 1.5), &mut rng);
        let drop = (rng.uniform() * n as f64) as usize % n;
        let mut rest = all.clone();
        rest.remove(drop);
        let with = PerExampleGrads::from_rows(dim, &all).unwrap();
        let without = PerExampleGrads::from_rows(dim, &rest).unwrap();
        let s = sensitivity_probe(&with, &without, c).unwrap();
        assert!(s <= c + 1e-9);
    }
}

proptest! {
    #[test]
    fn saturated_release_scales_with_threshold(
        dim in 1usize..50,
        n in 1usize..8,
        k in 0.1f64..10.0,
        seed in 0u64..10_000,
    ) {
        let c = 0.5;
        let mut rng = RngStream::new(seed, StreamId::Custom(33));
        // every row norm ≥ 100 > max(c, k·c)
        let raw = rows(dim, n, 1.0, &mut rng);
        let big: Vec<Vec<f64>> = raw
            .iter()
            .map(|r| {
                let norm = common::norm_dd(r).max(1e-3);
                r.iter().map(|v| v * 100.0 / norm).collect()
            })
            .collect();
        let g = PerExampleGrads::from_rows(dim, &big).unwrap();
        let a = noisy_average(&g, c, 1.3, &mut RngStream::new(seed, StreamId::Noise));
        let b = noisy_average(&g, k * c, 1.3, &mut RngStream::new(seed, StreamId::Noise));
        for (x, y) in a.g_tilde().unwrap().iter().zip(b.g_tilde().unwrap()) {
            // coordinates that cancel to ~0 are compared on the scale of k·c
            prop_assert!((k * x - y).abs() <= 1e-9 * (k * x).abs().max(k * c));
        }
    }
}
