//! Monte-Carlo runs of the prepare-and-measure protocol: i.i.d. rounds
//! through a depolarising channel, oracle error correction charged at
//! λ_EC bits, Toeplitz key verification, the statistical check and
//! Toeplitz privacy amplification.
//!
//! Randomness is ChaCha8 seeded from `RunConfig::seed`, with trial k drawn
//! from stream k. A trial is a pure function of (config, k).

mod hash;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::keyrate::{CompletenessPlan, KeyRateResult, SecurityParams};
use crate::protocol::{channel_table, ProtocolError, ProtocolSpec, StatisticsVector};
use crate::tradeoff::TradeoffFunction;

pub use hash::{toeplitz_extract, toeplitz_hash, Bits};

/// Largest number of rounds a single run may simulate.
pub const MAX_ROUNDS: u64 = 1_000_000;
/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("n = {0} outside 1..={MAX_ROUNDS}")]
    Rounds(u64),
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("seed has {have} bits, need {need}")]
    SeedTooShort { need: usize, have: usize },
    #[error("{what} has length {found}, expected {expected}")]
    LengthMismatch { what: &'static str, expected: usize, found: usize },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Tradeoff(#[from] crate::tradeoff::TradeoffError),
}

/// How Bob obtains his estimate Ŝ of Alice's raw key.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EcMode {
    /// Bob receives S exactly; λ_EC bits are charged as leakage.
    Oracle,
    /// Oracle copy followed by independent symbol flips at `flip_rate`,
    /// each replacing the symbol by a uniformly chosen different one.
    Faulty { flip_rate: f64 },
}

/// Error-correction hook: produces Bob's Ŝ from Alice's S.
pub trait ErrorCorrector: Sync {
    fn estimate(&self, alice: &[u8], alphabet: usize, rng: &mut ChaCha8Rng) -> Vec<u8>;
}

impl ErrorCorrector for EcMode {
    fn estimate(&self, alice: &[u8], alphabet: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
        match *self {
            EcMode::Oracle => alice.to_vec(),
            EcMode::Faulty { flip_rate } => alice
                .iter()
                .map(|&s| {
                    if alphabet > 1 && rng.gen_bool(flip_rate) {
                        let shift = rng.gen_range(1..alphabet) as u8;
                        ((s as usize + shift as usize) % alphabet) as u8
                    } else {
                        s
                    }
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub spec: ProtocolSpec,
    pub n: u64,
    /// Depolarising probability of the channel.
    pub p: f64,
    pub plan: CompletenessPlan,
    pub params: SecurityParams,
    /// Tradeoff function the statistical check evaluates.
    pub tradeoff: TradeoffFunction,
    /// Final key length l.
    pub key_length: u64,
    pub ec: EcMode,
    pub seed: u64,
}

impl RunConfig {
    /// Configuration matching a key-rate result: the protocol at the chosen γ,
    /// its plan, tradeoff function and key length.
    pub fn from_keyrate(
        spec: &ProtocolSpec,
        result: &KeyRateResult,
        params: &SecurityParams,
        seed: u64,
    ) -> Result<Self, SimError> {
        let spec = crate::keyrate::spec_at_gamma(spec, result.gamma)
            .map_err(|e| SimError::Config(format!("cannot rebuild the protocol at γ = {}: {e}", result.gamma)))?;
        Ok(RunConfig {
            spec,
            n: params.n,
            p: result.p,
            plan: result.plan.clone(),
            params: params.clone(),
            tradeoff: result.tradeoff.clone(),
            key_length: result.key_length.max(0) as u64,
            ec: EcMode::Oracle,
            seed,
        })
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n == 0 || self.n > MAX_ROUNDS {
            return Err(SimError::Rounds(self.n));
        }
        self.spec.validate()?;
        if self.spec.s_labels.len() > 256 || self.spec.c_labels.len() > 256 {
            return Err(SimError::Config("alphabets larger than 256 symbols are not supported".into()));
        }
        if let EcMode::Faulty { flip_rate } = self.ec {
            if !(0.0..=1.0).contains(&flip_rate) {
                return Err(SimError::Config(format!("flip rate {flip_rate} outside [0, 1]")));
            }
        }
        if self.key_length > self.n * u64::from(symbol_bits(self.spec.s_labels.len())) {
            return Err(SimError::Config(format!("key length {} exceeds the raw key", self.key_length)));
        }
        for label in &self.tradeoff.labels {
            if !self.spec.c_labels.contains(label) {
                return Err(SimError::Config(format!("tradeoff symbol '{label}' is not in the statistics alphabet")));
            }
        }
        Ok(())
    }

    /// ⌈log₂(1/ε_KV)⌉, the verification hash length.
    pub fn kv_hash_len(&self) -> usize {
        (1.0 / self.params.eps_kv).log2().ceil().max(1.0) as usize
    }
}

/// Fixed-width binary code length for an alphabet of the given size.
pub fn symbol_bits(alphabet: usize) -> u32 {
    usize::BITS - (alphabet.max(2) - 1).leading_zeros()
}

/// Encodes symbols by declaration index, `symbol_bits` bits each,
/// least significant bit first.
pub fn encode_symbols(symbols: &[u8], alphabet: usize) -> Bits {
    let w = symbol_bits(alphabet) as usize;
    let mut out = Bits::zeros(symbols.len() * w);
    for (k, &s) in symbols.iter().enumerate() {
        for b in 0..w {
            if (s >> b) & 1 == 1 {
                out.set(k * w + b, true);
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub freq_c: StatisticsVector,
    pub kv_pass: bool,
    pub stat_pass: bool,
    /// Empirical tradeoff value compared against k_CA.
    pub ca_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key_a: Option<Bits>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key_b: Option<Bits>,
    /// λ_EC plus the verification hash.
    pub leaked_bits: u64,
    /// Public seed material: hash descriptor and extractor seed.
    pub seed_bits: u64,
    /// Simulator-side knowledge: whether Ŝ differs from S.
    pub raw_mismatch: bool,
}

impl Transcript {
    pub fn aborted(&self) -> bool {
        !(self.kv_pass && self.stat_pass)
    }
}

/// Per-alphabet sampling tables derived once per configuration.
struct Sampler {
    source_cdf: Vec<f64>,
    channel_cdf: Vec<Vec<f64>>,
}

fn cdf(weights: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = weights
        .into_iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = f64::INFINITY;
    }
    out
}

fn draw(cdf: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let x: f64 = rng.gen();
    cdf.partition_point(|&c| c <= x).min(cdf.len() - 1)
}

impl Sampler {
    fn new(config: &RunConfig) -> Result<Self, SimError> {
        let table = channel_table(&config.spec, config.p)?;
        Ok(Sampler {
            source_cdf: cdf(config.spec.source.iter().map(|s| s.prob)),
            channel_cdf: table.into_iter().map(cdf).collect(),
        })
    }
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// One protocol execution using trial stream 0.
pub fn run_protocol(config: &RunConfig) -> Result<Transcript, SimError> {
    run_trial(config, &config.ec, 0)
}

/// One protocol execution on the given trial stream with a caller-supplied
/// error-correction step.
pub fn run_trial(config: &RunConfig, ec: &dyn ErrorCorrector, trial: u64) -> Result<Transcript, SimError> {
    config.validate()?;
    let sampler = Sampler::new(config)?;
    Ok(trial_with(config, &sampler, ec, trial))
}

fn trial_with(config: &RunConfig, sampler: &Sampler, ec: &dyn ErrorCorrector, trial: u64) -> Transcript {
    let spec = &config.spec;
    let n = config.n as usize;
    let (ds, dc) = (spec.s_labels.len(), spec.c_labels.len());
    let mut rng = trial_rng(config.seed, trial);

    let mut s_alice = Vec::with_capacity(n);
    let mut rounds = Vec::with_capacity(n);
    for _ in 0..n {
        let u = draw(&sampler.source_cdf, &mut rng);
        let v = draw(&sampler.channel_cdf[u], &mut rng);
        let i = spec.pd[u][v];
        s_alice.push(spec.rk[u][i] as u8);
        rounds.push((v, i));
    }
    let s_bob = ec.estimate(&s_alice, ds, &mut rng);

    // Bob's statistics use his own key estimate
    let mut counts = vec![0u64; dc];
    for (&(v, i), &s) in rounds.iter().zip(&s_bob) {
        counts[spec.ev[v][i][s as usize]] += 1;
    }
    let freq_c = StatisticsVector {
        labels: spec.c_labels.clone(),
        probs: counts.iter().map(|&k| k as f64 / n as f64).collect(),
    };
    let ca_value = config.tradeoff.evaluate_stats(&freq_c).unwrap_or(f64::NEG_INFINITY);
    let stat_pass = ca_value >= config.plan.k_ca;

    let raw_a = encode_symbols(&s_alice, ds);
    let raw_b = encode_symbols(&s_bob, ds);
    let kv_len = config.kv_hash_len();
    let descriptor = Bits::random(raw_a.len() + kv_len - 1, &mut rng);
    let kv_pass = toeplitz_hash(&raw_a, &descriptor, kv_len).expect("descriptor sized to input")
        == toeplitz_hash(&raw_b, &descriptor, kv_len).expect("descriptor sized to input");

    let l = config.key_length as usize;
    let pa_seed = Bits::random(raw_a.len(), &mut rng);
    let (key_a, key_b) = if kv_pass && stat_pass {
        (
            Some(toeplitz_extract(&raw_a, &pa_seed, l).expect("l checked against raw length")),
            Some(toeplitz_extract(&raw_b, &pa_seed, l).expect("l checked against raw length")),
        )
    } else {
        (None, None)
    };
    Transcript {
        freq_c,
        kv_pass,
        stat_pass,
        ca_value,
        key_a,
        key_b,
        leaked_bits: config.plan.lambda_ec + kv_len as u64,
        seed_bits: (descriptor.len() + pa_seed.len()) as u64,
        raw_mismatch: s_alice != s_bob,
    }
}

/// Wilson score interval for k successes in n trials at normal quantile z.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let phat = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (phat + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (phat * (1.0 - phat) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletenessReport {
    pub trials: u64,
    pub aborts: u64,
    pub kv_aborts: u64,
    pub stat_aborts: u64,
    pub abort_frequency: f64,
    /// 95% Wilson interval on the abort probability.
    pub wilson: (f64, f64),
    /// Trials that did not abort but ended with K ≠ K̂.
    pub correctness_violations: u64,
    /// Trials that did not abort although Ŝ ≠ S.
    pub undetected_mismatches: u64,
    pub mean_ca_value: f64,
}

/// Runs `trials` independent executions (streams 0..trials) in parallel
/// and tallies aborts and correctness failures.
pub fn empirical_completeness(config: &RunConfig, trials: u64) -> Result<CompletenessReport, SimError> {
    if trials == 0 {
        return Err(SimError::Config("need at least one trial".into()));
    }
    config.validate()?;
    let sampler = Sampler::new(config)?;
    let outcomes: Vec<(bool, bool, bool, bool, f64)> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let t = trial_with(config, &sampler, &config.ec, k);
            let wrong_key = !t.aborted() && t.key_a != t.key_b;
            (t.kv_pass, t.stat_pass, wrong_key, !t.aborted() && t.raw_mismatch, t.ca_value)
        })
        .collect();
    let count = |f: &dyn Fn(&(bool, bool, bool, bool, f64)) -> bool| outcomes.iter().filter(|o| f(o)).count() as u64;
    let aborts = count(&|o| !(o.0 && o.1));
    Ok(CompletenessReport {
        trials,
        aborts,
        kv_aborts: count(&|o| !o.0),
        stat_aborts: count(&|o| !o.1),
        abort_frequency: aborts as f64 / trials as f64,
        wilson: wilson_interval(aborts, trials, Z95),
        correctness_violations: count(&|o| o.2),
        undetected_mismatches: count(&|o| o.3),
        mean_ca_value: outcomes.iter().map(|o| o.4).sum::<f64>() / trials as f64,
    })
}
