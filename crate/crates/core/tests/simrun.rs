use std::sync::OnceLock;

use pmqkd::keyrate::{optimize_keyrate, KeyRateResult, SecurityParams, SolverBudget};
use pmqkd::protocol::{b92_preset, honest_model, ProtocolSpec};
use pmqkd::simrun::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Reference B92 plan at n = 10⁵ and p = 0.02, solved once.
fn reference() -> &'static (ProtocolSpec, SecurityParams, KeyRateResult) {
    static CELL: OnceLock<(ProtocolSpec, SecurityParams, KeyRateResult)> = OnceLock::new();
    CELL.get_or_init(|| {
        let spec = b92_preset(0.5).unwrap();
        let params = SecurityParams::b92_reference(100_000);
        let result = optimize_keyrate(&spec, 0.02, &params, &SolverBudget::default()).unwrap();
        (spec, params, result)
    })
}

fn reference_config(p: f64, n: u64, seed: u64) -> RunConfig {
    let (spec, params, result) = reference();
    let mut params = params.clone();
    params.n = n;
    let mut cfg = RunConfig::from_keyrate(spec, result, &params, seed).unwrap();
    cfg.p = p;
    cfg
}

fn naive_toeplitz(x: &Bits, d: &Bits, l: usize) -> Bits {
    let m = x.len();
    let mut out = Bits::zeros(l);
    for j in 0..l {
        let mut acc = false;
        for k in 0..m {
            acc ^= d.get(k + l - 1 - j) & x.get(k);
        }
        out.set(j, acc);
    }
    out
}

proptest! {
    #[test]
    fn toeplitz_matches_matrix_product(m in 1usize..300, l in 1usize..80, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Bits::random(m, &mut rng);
        let d = Bits::random(m + l - 1, &mut rng);
        prop_assert_eq!(toeplitz_hash(&x, &d, l).unwrap(), naive_toeplitz(&x, &d, l));
    }

    #[test]
    fn extractor_matches_modified_toeplitz(m in 2usize..300, frac in 0.0f64..1.0, seed in any::<u64>()) {
        let l = ((m as f64 * frac) as usize).clamp(1, m - 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Bits::random(m, &mut rng);
        let s = Bits::random(m, &mut rng);
        let head = x.slice(0, m - l);
        let tail = x.slice(m - l, l);
        let expect = naive_toeplitz(&head, &s, l).xor(&tail);
        prop_assert_eq!(toeplitz_extract(&x, &s, l).unwrap(), expect);
    }
}

#[test]
fn hash_linearity_and_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d = Bits::random(200 + 31, &mut rng);
    assert_eq!(toeplitz_hash(&Bits::zeros(200), &d, 32).unwrap(), Bits::zeros(32));
    for _ in 0..50 {
        let x = Bits::random(200, &mut rng);
        let y = Bits::random(200, &mut rng);
        let lhs = toeplitz_hash(&x, &d, 32).unwrap().xor(&toeplitz_hash(&y, &d, 32).unwrap());
        assert_eq!(lhs, toeplitz_hash(&x.xor(&y), &d, 32).unwrap());
    }
    assert!(matches!(toeplitz_hash(&Bits::zeros(200), &Bits::zeros(230), 32), Err(SimError::SeedTooShort { .. })));
    assert!(toeplitz_hash(&Bits::zeros(10), &d, 0).is_err());
}

#[test]
fn hash_collision_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pairs = 200_000u64;
    let mut hits = 0u64;
    for _ in 0..pairs {
        let x = Bits::random(64, &mut rng);
        let mut y = Bits::random(64, &mut rng);
        if x == y {
            y.flip(0);
        }
        let d = Bits::random(64 + 15, &mut rng);
        hits += u64::from(toeplitz_hash(&x, &d, 16).unwrap() == toeplitz_hash(&y, &d, 16).unwrap());
    }
    let p = 2f64.powi(-16);
    let sigma = ((1.0 - p) / (p * pairs as f64)).sqrt();
    assert!((hits as f64 / pairs as f64) <= p * (1.0 + 5.0 * sigma), "{hits}");
}

#[test]
fn extractor_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = Bits::random(40, &mut rng);
    let s = Bits::random(40, &mut rng);
    assert!(toeplitz_extract(&x, &s, 0).unwrap().is_empty());
    assert_eq!(toeplitz_extract(&x, &s, 40).unwrap(), x);
    assert!(matches!(toeplitz_extract(&x, &Bits::zeros(39), 8), Err(SimError::LengthMismatch { .. })));
    assert!(matches!(toeplitz_extract(&x, &s, 41), Err(SimError::LengthMismatch { .. })));
    // flipping any used seed bit changes the output on some input
    for bit in 0..39 {
        let mut s2 = s.clone();
        s2.flip(bit);
        let differs = (0..100).any(|_| {
            let x = Bits::random(40, &mut rng);
            toeplitz_extract(&x, &s, 8).unwrap() != toeplitz_extract(&x, &s2, 8).unwrap()
        });
        assert!(differs, "seed bit {bit}");
    }
}

#[test]
fn extractor_uniformity() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let samples = 100_000;
    let mut counts = [0u64; 256];
    for _ in 0..samples {
        let x = Bits::random(20, &mut rng);
        let s = Bits::random(20, &mut rng);
        let y = toeplitz_extract(&x, &s, 8).unwrap();
        let v = (0..8).fold(0usize, |acc, b| acc | (usize::from(y.get(b)) << b));
        counts[v] += 1;
    }
    let expect = samples as f64 / 256.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
    // 0.999 quantile of χ² with 255 degrees of freedom
    assert!(chi2 < 330.51974363400586, "{chi2}");
}

#[test]
fn wilson_reference_values() {
    let (lo, hi) = wilson_interval(0, 1000, Z95);
    assert!(lo.abs() < 1e-15 && (hi - 0.0038267584855551234).abs() < 1e-15);
    let (lo, hi) = wilson_interval(7, 1000, Z95);
    assert!((lo - 0.0033948684009907646).abs() < 1e-15 && (hi - 0.014378315465766588).abs() < 1e-15);
    let (lo, hi) = wilson_interval(50, 100, Z95);
    assert!((lo - 0.4038315303659956).abs() < 1e-15 && (hi - 0.5961684696340044).abs() < 1e-15);
}

#[test]
fn encoding_widths() {
    assert_eq!(symbol_bits(2), 1);
    assert_eq!(symbol_bits(3), 2);
    assert_eq!(symbol_bits(4), 2);
    assert_eq!(symbol_bits(5), 3);
    let b = encode_symbols(&[0, 1, 2], 3);
    assert_eq!(b.to_string(), "001001");
}

#[test]
fn noiseless_run_agrees() {
    let mut cfg = reference_config(0.0, 20_000, 7);
    cfg.key_length = 256;
    let t = run_protocol(&cfg).unwrap();
    assert!(t.kv_pass && t.stat_pass, "{t:?}");
    assert_eq!(t.key_a, t.key_b);
    assert_eq!(t.key_a.as_ref().unwrap().len(), 256);
    assert_eq!(t.leaked_bits, cfg.plan.lambda_ec + 35);
    assert!(!t.raw_mismatch);
}

#[test]
fn runs_are_deterministic() {
    let cfg = reference_config(0.02, 10_000, 99);
    assert_eq!(run_protocol(&cfg).unwrap(), run_protocol(&cfg).unwrap());
    let a = empirical_completeness(&cfg, 16).unwrap();
    let b = empirical_completeness(&cfg, 16).unwrap();
    assert_eq!(a, b);
    let other = RunConfig { seed: 100, ..cfg.clone() };
    assert_ne!(run_protocol(&cfg).unwrap().freq_c, run_protocol(&other).unwrap().freq_c);
}

#[test]
fn config_guards() {
    assert!(matches!(reference_config(0.0, 2_000_000, 0).validate(), Err(SimError::Rounds(_))));
    assert!(matches!(reference_config(0.0, 0, 0).validate(), Err(SimError::Rounds(_))));
    let mut cfg = reference_config(0.0, 100, 0);
    cfg.key_length = 201;
    assert!(matches!(cfg.validate(), Err(SimError::Config(_))));
    assert!(empirical_completeness(&reference_config(0.0, 100, 0), 0).is_err());
}

#[test]
fn impossible_threshold_always_aborts() {
    let mut cfg = reference_config(0.0, 2_000, 5);
    cfg.plan.k_ca = cfg.tradeoff.max_val + 1.0;
    let r = empirical_completeness(&cfg, 50).unwrap();
    assert_eq!(r.aborts, 50);
    assert_eq!(r.abort_frequency, 1.0);
}

#[test]
fn honest_frequencies_match_the_model() {
    let n = 100_000u64;
    let cfg = reference_config(0.02, n, 11);
    let (stats, _) = honest_model(&cfg.spec, 0.02).unwrap();
    for trial in 0..20 {
        let t = run_trial(&cfg, &EcMode::Oracle, trial).unwrap();
        let tv: f64 = t.freq_c.probs.iter().zip(&stats.probs).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
        assert!(tv <= 5.0 / (n as f64).sqrt(), "trial {trial}: {tv}");
    }
}

#[test]
fn honest_completeness_at_small_scale() {
    let cfg = reference_config(0.02, 100_000, 13);
    let r = empirical_completeness(&cfg, 200).unwrap();
    let (_, _, result) = reference();
    assert_eq!(r.kv_aborts, 0);
    assert_eq!(r.correctness_violations, 0);
    assert!((r.mean_ca_value - result.ca_hon).abs() < 1e-3, "{} vs {}", r.mean_ca_value, result.ca_hon);
    let bound = pmqkd::keyrate::bernstein_abort(cfg.plan.delta, cfg.n, &cfg.tradeoff);
    let sigma = (bound * (1.0 - bound) / 200.0).sqrt();
    assert!(r.abort_frequency <= bound + 3.0 * sigma + 1e-12, "{r:?} vs {bound}");
}

#[test]
fn fault_injection_is_caught_by_verification() {
    let mut cfg = reference_config(0.0, 200, 17);
    cfg.ec = EcMode::Faulty { flip_rate: 0.01 };
    cfg.key_length = 64;
    let trials = 20_000;
    let r = empirical_completeness(&cfg, trials).unwrap();
    let p = 2f64.powi(-(cfg.kv_hash_len() as i32));
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    assert!(r.undetected_mismatches as f64 / trials as f64 <= p + 3.0 * sigma);
    assert!(r.correctness_violations as f64 / trials as f64 <= p + 3.0 * sigma);
    // roughly 1 − 0.99^200 of the runs carry an error and must abort
    assert!(r.kv_aborts as f64 / trials as f64 > 0.8, "{r:?}");
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let flipped = EcMode::Faulty { flip_rate: 1.0 }.estimate(&[0, 1, 2], 3, &mut rng);
    assert!(flipped.iter().zip([0u8, 1, 2]).all(|(a, b)| *a != b && *a < 3));
}
