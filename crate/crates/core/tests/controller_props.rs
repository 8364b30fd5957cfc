use proptest::prelude::*;
use specclip::controller::{control_step, init_state, sat, ClampSide, ControllerConfig};

fn pinned_cfg(kappa: f64, c_max: f64) -> ControllerConfig {
    ControllerConfig {
        kappa,
        beta: 0.9,
        c_min: 1e-3,
        c_max,
        ..ControllerConfig::default()
    }
}

#[test]
fn geometric_growth_at_zone_edge() {
    for (c0, kappa, c_max) in [(0.5, 0.1, 5.0), (1.0, 0.05, 3.0), (0.3, 0.3, 1e6)] {
        let cfg = pinned_cfg(kappa, c_max);
        let mut s = init_state(&cfg, c0).unwrap();
        // pin ζ̂ at ζ★ + r: start there and feed the same reading
        s.zeta_hat = cfg.zeta_star + cfg.r;
        for m in 1..=60 {
            let (next, out) = control_step(&s, cfg.zeta_star + cfg.r, &cfg);
            assert_eq!(out.phi, 1.0);
            let expect = (c0 * (kappa * m as f64).exp()).min(c_max);
            assert!((out.c_next - expect).abs() <= 1e-12 * expect, "m={m}: {} vs {expect}", out.c_next);
            s = next;
        }
    }
}

#[test]
fn clamp_stops_growth_and_counts_hits() {
    let cfg = pinned_cfg(0.1, 2.0);
    let mut s = init_state(&cfg, 1.0).unwrap();
    s.zeta_hat = 10.0;
    let mut hits = 0;
    for _ in 0..20 {
        let (next, out) = control_step(&s, 10.0, &cfg);
        if out.clamped == Some(ClampSide::Max) {
            hits += 1;
            assert_eq!(out.c_next, 2.0);
        }
        s = next;
    }
    // ln 2 / 0.1 ≈ 6.9: the seventh step is the first to exceed the bound
    assert_eq!(hits, 14);
    assert_eq!(s.clamp_hits_max, 14);
    assert_eq!(s.clamp_hits_min, 0);
}

fn arb_cfg() -> impl Strategy<Value = ControllerConfig> {
    (
        1.0f64..8.0,
        0.1f64..4.0,
        0.0f64..0.5,
        0.0f64..0.999,
        0.01f64..1.0,
        1.0f64..20.0,
        any::<bool>(),
    )
        .prop_map(|(zeta_star, r, kappa, beta, c_min, span, clamp_enabled)| ControllerConfig {
            zeta_star,
            r,
            kappa,
            beta,
            probe_period: 10,
            c_min,
            c_max: c_min * span,
            clamp_enabled,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn bounded_step_and_positivity(cfg in arb_cfg(), c0 in 0.01f64..10.0, zeta in -50.0f64..50.0, zh in 0.0f64..20.0) {
        let mut s = init_state(&cfg, c0).unwrap();
        s.zeta_hat = zh;
        let (next, out) = control_step(&s, zeta, &cfg);
        prop_assert!(out.c_next > 0.0 && out.c_next.is_finite());
        prop_assert!(out.phi.abs() <= 1.0);
        if out.clamped.is_none() {
            prop_assert_eq!(out.c_next, next.u.exp());
            prop_assert!((next.u - s.u).abs() <= cfg.kappa + 1e-15);
        } else {
            prop_assert_eq!(next.u, out.c_next.ln());
        }
        if cfg.clamp_enabled {
            prop_assert!(out.c_next >= cfg.c_min && out.c_next <= cfg.c_max);
        }
        prop_assert_eq!(next.zeta_hat, cfg.beta * zh + (1.0 - cfg.beta) * zeta);
    }

    #[test]
    fn monotone_response(cfg in arb_cfg(), c0 in 0.01f64..10.0, a in -20.0f64..20.0, b in -20.0f64..20.0) {
        let s = init_state(&cfg, c0).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (_, out_lo) = control_step(&s, lo, &cfg);
        let (_, out_hi) = control_step(&s, hi, &cfg);
        prop_assert!(out_lo.c_next <= out_hi.c_next);
        prop_assert!(out_lo.phi <= out_hi.phi);
    }

    #[test]
    fn clamp_is_idempotent(cfg in arb_cfg(), c in 1e-4f64..1e4) {
        let once = cfg.clamp(c);
        prop_assert_eq!(cfg.clamp(once), once);
        prop_assert!(once >= cfg.c_min && once <= cfg.c_max);
    }

    #[test]
    fn sat_is_bounded_and_monotone(x in -1e6f64..1e6, y in -1e6f64..1e6) {
        prop_assert!(sat(x).abs() <= 1.0);
        if x <= y {
            prop_assert!(sat(x) <= sat(y));
        }
        if x.abs() <= 1.0 {
            prop_assert_eq!(sat(x), x);
        }
    }

    #[test]
    fn zero_gain_never_moves(cfg in arb_cfg(), c0 in 0.01f64..10.0, zeta in -50.0f64..50.0) {
        let cfg = ControllerConfig { kappa: 0.0, clamp_enabled: false, ..cfg };
        let s = init_state(&cfg, c0).unwrap();
        let (next, _) = control_step(&s, zeta, &cfg);
        prop_assert_eq!(next.u, s.u);
    }
}
