use std::time::Instant;

use pmqkd::decoy::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reference_settings() -> DecoySettings {
    DecoySettings::new([0.4, 0.1, 0.007], [0.5, 0.25, 0.25], 0.5).unwrap()
}

/// μ1 > μ2 + μ3, μ2 > μ3 ≥ 0, all at most 1 so the truncation holds.
fn random_settings(rng: &mut ChaCha8Rng) -> DecoySettings {
    let m3: f64 = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..0.1) };
    let m2 = m3 + rng.gen_range(0.01..0.3);
    let m1: f64 = (m2 + m3) * rng.gen_range(1.05..3.0);
    let w: [f64; 3] = [rng.gen_range(0.1..1.0), rng.gen_range(0.1..1.0), rng.gen_range(0.1..1.0)];
    let s: f64 = w.iter().sum();
    let p = [w[0] / s, w[1] / s, 1.0 - w[0] / s - w[1] / s];
    DecoySettings::new([m1.min(1.0), m2, m3], p, rng.gen_range(0.05..0.95)).unwrap()
}

#[test]
fn poisson_and_tau() {
    assert_eq!(poisson_weight(0, 0.0), 1.0);
    assert_eq!(poisson_weight(3, 0.0), 0.0);
    let total: f64 = (0..=S_MAX).map(|s| poisson_weight(s, 0.5)).sum();
    assert!((total - 1.0).abs() < 1e-15, "{total}");
    let s = reference_settings();
    // direct mixture evaluation
    assert!((tau(&s, 1) - 0.15842273743316004).abs() < 1e-15);
    assert!((tau(&s, 0) - 0.8096254882601184).abs() < 1e-15);
    assert!(poisson_tail(S_MAX + 1, 1.0) < 1e-80);
}

#[test]
fn settings_invariants() {
    assert!(matches!(DecoySettings::new([0.4, 0.3, 0.2], [0.5, 0.25, 0.25], 0.5), Err(DecoyError::Ordering(_))));
    assert!(matches!(DecoySettings::new([0.4, 0.05, 0.1], [0.5, 0.25, 0.25], 0.5), Err(DecoyError::Ordering(_))));
    assert!(matches!(DecoySettings::new([0.4, 0.1, 0.0], [0.5, 0.25, 0.3], 0.5), Err(DecoyError::Probabilities(_))));
    assert!(matches!(
        DecoySettings::new([0.4, 0.1, 0.0], [0.5, 0.25, 0.25], 1.0),
        Err(DecoyError::BasisProbability(_))
    ));
}

#[test]
fn mixture_examples() {
    let s = reference_settings();
    let d = 1e-3;
    let mut ch = PhotonChannel::lossy(1.0, 0.0, 0.0);
    ch.x.t[0] = d;
    let g = mixture_gains(&ch, &s).unwrap();
    for i in 0..3 {
        let mu = s.mu[i];
        let expect = d * (-mu).exp() + (1.0 - (-mu).exp());
        assert!((g.x.t[i] - expect).abs() < 1e-15, "{} vs {expect}", g.x.t[i]);
        assert_eq!(g.z.f[i], 0.0);
    }
    // constant channel: every intensity sees the per-photon values
    let flat = PhotonBasis { t: vec![0.3; S_MAX + 1], f: vec![0.1; S_MAX + 1] };
    let ch = PhotonChannel { z: flat.clone(), x: flat };
    let g = mixture_gains(&ch, &s).unwrap();
    for i in 0..3 {
        assert!((g.z.t[i] - 0.3).abs() < 1e-14 && (g.z.f[i] - 0.1).abs() < 1e-14);
    }
    // too short a channel for μ = 0.4
    let short = PhotonBasis { t: vec![0.5; 4], f: vec![0.0; 4] };
    let ch = PhotonChannel { z: short.clone(), x: short };
    assert!(matches!(mixture_gains(&ch, &s), Err(DecoyError::Truncation { .. })));
}

#[test]
fn lossless_channel() {
    let s = reference_settings();
    let g = mixture_gains(&PhotonChannel::lossy(1.0, 0.0, 0.0), &s).unwrap();
    let t0 = bound_t0(&g, &s, Basis::Z);
    let t1 = bound_t1(&g, &s, Basis::Z, t0);
    assert_eq!(bound_f1(&g, &s, Basis::Z, t1), 0.0);
    let b = DecoyBounds::raw(&g, &s).clamped();
    assert_eq!(b.f1, 0.0);
    let h = decoy_entropy_bound(&g, &s);
    assert!((h - (b.tau0 * b.t0 + b.tau1 * b.t1)).abs() < 1e-15);
    // true t0 = 0 and t1 = 1; the estimates are close
    assert!(b.t0.abs() < 1e-12 && b.t1 <= 1.0 && b.t1 > 0.95, "{b:?}");
}

#[test]
fn vacuum_decoy_reduction() {
    // with μ3 = 0 the vacuum estimate collapses to the vacuum pulse's gain,
    // which is exactly t0
    let s = DecoySettings::new([0.5, 0.1, 0.0], [0.6, 0.2, 0.2], 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let ch = PhotonChannel::random(&mut rng);
        let g = mixture_gains(&ch, &s).unwrap();
        for b in Basis::ALL {
            assert!((bound_t0(&g, &s, b) - g.basis(b).t[2]).abs() < 1e-15);
            assert!((bound_t0(&g, &s, b) - ch.basis(b).t[0]).abs() < 1e-15);
        }
    }
}

fn dominance_suite(fixtures: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let tol = 1e-12;
    for _ in 0..fixtures {
        let s = random_settings(&mut rng);
        let ch = PhotonChannel::random(&mut rng);
        let g = mixture_gains(&ch, &s).unwrap();
        for b in Basis::ALL {
            let t0 = bound_t0(&g, &s, b);
            let t1 = bound_t1(&g, &s, b, t0.max(0.0));
            let f1 = bound_f1(&g, &s, b, t1.min(1.0));
            let truth = ch.basis(b);
            violations += usize::from(t0 > truth.t[0] + tol);
            violations += usize::from(t1 > truth.t[1] + tol);
            violations += usize::from(f1 < truth.f[1] - tol);
        }
        violations += usize::from(decoy_entropy_bound(&g, &s) > ch.resolved_entropy(&s) + tol);
    }
    violations
}

#[test]
fn dominance_over_random_channels() {
    let start = Instant::now();
    assert_eq!(dominance_suite(1000, 11), 0);
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn clamping_only_lowers_defined_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    for _ in 0..2000 {
        let s = random_settings(&mut rng);
        let g = mixture_gains(&PhotonChannel::random(&mut rng), &s).unwrap();
        let raw = DecoyBounds::raw(&g, &s);
        let clamped = raw.clamped();
        // the unclamped expression is defined for non-negative yields and f1 ∈ [0, 1]
        if raw.t0 >= 0.0 && raw.t1 >= 0.0 && (0.0..=1.0).contains(&raw.f1) {
            assert!(clamped.entropy() <= raw.entropy() + 1e-15, "{raw:?}");
            checked += 1;
        }
        assert!((0.0..=0.5).contains(&clamped.f1) && (0.0..=1.0).contains(&clamped.t1));
    }
    assert!(checked > 100, "{checked}");
}

#[test]
fn high_error_clamps_to_zero_single_photon_term() {
    let s = reference_settings();
    let mut g = mixture_gains(&PhotonChannel::lossy(0.1, 1e-5, 0.0), &s).unwrap();
    g.z.f = [0.5, 0.9, 0.0];
    let b = DecoyBounds::raw(&g, &s);
    assert!(b.f1 >= 0.5);
    let c = b.clamped();
    assert_eq!(c.f1, 0.5);
    assert!((decoy_entropy_bound(&g, &s) - c.tau0 * c.t0).abs() < 1e-15);
}

#[test]
fn entropy_monotone_in_decoy_error() {
    let s = reference_settings();
    let base = mixture_gains(&PhotonChannel::lossy(0.05, 1e-6, 0.01), &s).unwrap();
    let mut last = f64::INFINITY;
    for k in 0..=200 {
        let mut g = base.clone();
        g.z.f[1] = k as f64 / 200.0;
        let h = decoy_entropy_bound(&g, &s);
        assert!(h <= last + 1e-15, "f = {}: {h} > {last}", g.z.f[1]);
        last = h;
    }
}

#[test]
fn csv_ingest_roundtrip() {
    let s = reference_settings();
    let g = mixture_gains(&PhotonChannel::lossy(0.2, 1e-6, 0.02), &s).unwrap();
    let mut text = String::from("basis,intensity,t,f\n");
    for (name, b) in [("Z", &g.z), ("X", &g.x)] {
        for i in 0..3 {
            text.push_str(&format!("{name},{:?},{:?},{:?}\n", s.mu[i], b.t[i], b.f[i]));
        }
    }
    let back = read_gains_csv(text.as_bytes(), &s).unwrap();
    assert_eq!(back, g);
    let missing: String = text.lines().take(6).collect::<Vec<_>>().join("\n");
    assert!(matches!(read_gains_csv(missing.as_bytes(), &s), Err(DecoyError::Ingest(_))));
    let bad = text.replace("0.007,", "0.008,");
    assert!(matches!(read_gains_csv(bad.as_bytes(), &s), Err(DecoyError::Ingest(_))));
}

#[test]
fn statistics_roundtrip() {
    let s = reference_settings();
    let g = mixture_gains(&PhotonChannel::lossy(0.3, 1e-5, 0.02), &s).unwrap();
    let q = statistics(&g, &s);
    assert_eq!(q.len(), decoy_labels().len());
    assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-15 && q.iter().all(|&x| x >= 0.0));
    let back = gains_from_statistics(&q, &s).unwrap();
    for i in 0..3 {
        assert!((back.x.t[i] - g.x.t[i]).abs() < 1e-12);
        assert!((back.z.t[i] - g.z.t[i]).abs() < 1e-12);
        assert!((back.z.f[i] - g.z.f[i]).abs() < 1e-9);
    }
    let ca = ca_of_statistics(&q, &s).unwrap();
    assert!((ca - 0.25 * decoy_entropy_bound(&g, &s)).abs() < 1e-12);
}

#[test]
fn affinization_is_a_checked_lower_plane() {
    let s = reference_settings();
    let honest = mixture_gains(&PhotonChannel::lossy(0.1, 1e-6, 0.01), &s).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = affinize(&s, &honest, 2000, &mut rng).unwrap();
    assert_eq!(a.tf.labels, decoy_labels());
    a.tf.check().unwrap();
    let at_honest = a.tf.evaluate(&a.honest_stats);
    assert!((at_honest - (a.honest_value - a.max_violation)).abs() < 1e-12);
    assert!(a.honest_value > 0.0);
    // fresh channels: the shifted plane stays below the nonlinear bound
    let mut fresh = ChaCha8Rng::seed_from_u64(10);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..2000 {
        let g = mixture_gains(&PhotonChannel::random(&mut fresh), &s).unwrap();
        let q = statistics(&g, &s);
        worst = worst.max(a.tf.evaluate(&q) - ca_of_statistics(&q, &s).unwrap());
    }
    println!(
        "θ {}, max violation {:e}, fresh worst {worst:e}, honest {} -> {at_honest}",
        a.theta, a.max_violation, a.honest_value
    );
    assert!(at_honest > 0.0);
    assert!(worst <= 1e-9, "{worst}");
}
