//! Decoy-state BB84: analytic photon-number bounds and the entropy bound
//! built from them.
//!
//! All gains use the forward mixture convention: for a pulse of intensity μ,
//! t_μ = Σ_s p(s|μ)·t_s with p(s|μ) the Poisson weight, and the failure
//! probability f_μ is conditioned on detection. The vacuum and single-photon
//! estimates below are written in that convention, so the intensity
//! selection probabilities only enter through τ_s.

mod affine;
mod ingest;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qcore::h2;

pub use affine::{affinize, ca_of_statistics, decoy_labels, gains_from_statistics, statistics, DecoyAffinization};
pub use ingest::{read_gains_csv, GainRecord};

/// Photon numbers 0..=S_MAX are summed explicitly.
pub const S_MAX: usize = 60;
/// Largest Poisson mass allowed beyond the truncation point.
pub const TAIL_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DecoyError {
    #[error("intensities must satisfy μ1 > μ2 + μ3 and μ2 > μ3 ≥ 0, got {0:?}")]
    Ordering([f64; 3]),
    #[error("intensity probabilities {0:?} must be non-negative and sum to 1")]
    Probabilities([f64; 3]),
    #[error("basis probability {0} outside (0, 1)")]
    BasisProbability(f64),
    #[error("{what} = {value} outside [0, 1]")]
    OutOfRange { what: String, value: f64 },
    #[error("Poisson tail beyond s = {s_max} at μ = {mu} has mass {tail:e} > {TAIL_TOL:e}")]
    Truncation { s_max: usize, mu: f64, tail: f64 },
    #[error("intensity μ{0} is never selected, its gains cannot be observed")]
    ZeroProbability(usize),
    #[error("statistics vector has {found} entries, expected {expected}")]
    StatisticsLength { expected: usize, found: usize },
    #[error("gains file: {0}")]
    Ingest(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Tradeoff(#[from] crate::tradeoff::TradeoffError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    pub const ALL: [Basis; 2] = [Basis::Z, Basis::X];
}

/// Intensities, their selection probabilities and the X-basis probability
/// (the key basis; Z gets 1 − q_x).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoySettings {
    pub mu: [f64; 3],
    pub p_mu: [f64; 3],
    pub q_x: f64,
}

impl DecoySettings {
    pub fn new(mu: [f64; 3], p_mu: [f64; 3], q_x: f64) -> Result<Self, DecoyError> {
        let s = DecoySettings { mu, p_mu, q_x };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), DecoyError> {
        let [m1, m2, m3] = self.mu;
        if !(m1 > m2 + m3 && m2 > m3 && m3 >= 0.0 && m1.is_finite()) {
            return Err(DecoyError::Ordering(self.mu));
        }
        let total: f64 = self.p_mu.iter().sum();
        if self.p_mu.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (total - 1.0).abs() > 1e-12 {
            return Err(DecoyError::Probabilities(self.p_mu));
        }
        if !(self.q_x > 0.0 && self.q_x < 1.0) {
            return Err(DecoyError::BasisProbability(self.q_x));
        }
        Ok(())
    }

    pub fn q(&self, basis: Basis) -> f64 {
        match basis {
            Basis::X => self.q_x,
            Basis::Z => 1.0 - self.q_x,
        }
    }
}

/// Per-intensity transmission and failure probabilities of one basis,
/// indexed like `DecoySettings::mu`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BasisGains {
    pub t: [f64; 3],
    pub f: [f64; 3],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservedGains {
    pub z: BasisGains,
    pub x: BasisGains,
}

impl ObservedGains {
    pub fn basis(&self, b: Basis) -> &BasisGains {
        match b {
            Basis::Z => &self.z,
            Basis::X => &self.x,
        }
    }

    pub fn basis_mut(&mut self, b: Basis) -> &mut BasisGains {
        match b {
            Basis::Z => &mut self.z,
            Basis::X => &mut self.x,
        }
    }

    pub fn validate(&self) -> Result<(), DecoyError> {
        for b in Basis::ALL {
            let g = self.basis(b);
            for i in 0..3 {
                check_unit(&format!("t[{b:?}, μ{}]", i + 1), g.t[i])?;
                check_unit(&format!("f[{b:?}, μ{}]", i + 1), g.f[i])?;
            }
        }
        Ok(())
    }
}

fn check_unit(what: &str, value: f64) -> Result<(), DecoyError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(DecoyError::OutOfRange { what: what.into(), value })
    }
}

/// Photon-number-resolved channel of one basis: detection probability t_s
/// and error probability given detection f_s, for s = 0..len.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhotonBasis {
    pub t: Vec<f64>,
    pub f: Vec<f64>,
}

/// Test fixture describing the channel photon by photon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhotonChannel {
    pub z: PhotonBasis,
    pub x: PhotonBasis,
}

impl PhotonChannel {
    pub fn basis(&self, b: Basis) -> &PhotonBasis {
        match b {
            Basis::Z => &self.z,
            Basis::X => &self.x,
        }
    }

    /// Threshold detector behind a pure-loss channel: transmittance η,
    /// dark-count probability `dark` (random bit) and misalignment error
    /// `e_mis` on genuine clicks. Both bases behave alike.
    pub fn lossy(eta: f64, dark: f64, e_mis: f64) -> Self {
        let mut t = Vec::with_capacity(S_MAX + 1);
        let mut f = Vec::with_capacity(S_MAX + 1);
        for s in 0..=S_MAX {
            let miss = (1.0 - eta).powi(s as i32);
            let ts = 1.0 - (1.0 - dark) * miss;
            let err = e_mis * (1.0 - miss) + 0.5 * dark * miss;
            t.push(ts);
            f.push(if ts > 0.0 { (err / ts).min(1.0) } else { 0.0 });
        }
        let basis = PhotonBasis { t, f };
        PhotonChannel { z: basis.clone(), x: basis }
    }

    /// Independent uniform t_s and f_s, or a lossy channel with random
    /// parameters, each with probability ½.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.gen_bool(0.5) {
            let eta = 10f64.powf(rng.gen_range(-4.0..0.0));
            let dark = 10f64.powf(rng.gen_range(-8.0..-2.0));
            PhotonChannel::lossy(eta, dark, rng.gen_range(0.0..0.1))
        } else {
            let mut side = || PhotonBasis {
                t: (0..=S_MAX).map(|_| rng.gen::<f64>()).collect(),
                f: (0..=S_MAX).map(|_| rng.gen::<f64>()).collect(),
            };
            PhotonChannel { z: side(), x: side() }
        }
    }

    pub fn validate(&self) -> Result<(), DecoyError> {
        for b in Basis::ALL {
            let pb = self.basis(b);
            if pb.t.len() != pb.f.len() || pb.t.is_empty() {
                return Err(DecoyError::Ingest(format!("{b:?} channel has mismatched t/f lengths")));
            }
            for (s, (&t, &f)) in pb.t.iter().zip(&pb.f).enumerate() {
                check_unit(&format!("t_{s}[{b:?}]"), t)?;
                check_unit(&format!("f_{s}[{b:?}]"), f)?;
            }
        }
        Ok(())
    }

    /// τ₀t₀^X + τ₁t₁^X(1 − h(f₁^Z)) evaluated on the true photon-number
    /// quantities.
    pub fn resolved_entropy(&self, settings: &DecoySettings) -> f64 {
        tau(settings, 0) * self.x.t[0] + tau(settings, 1) * self.x.t[1] * (1.0 - h2(self.z.f[1]))
    }
}

/// Poisson mass e^{−μ} μ^s / s!.
pub fn poisson_weight(s: usize, mu: f64) -> f64 {
    if mu == 0.0 {
        return if s == 0 { 1.0 } else { 0.0 };
    }
    let mut w = (-mu).exp();
    for k in 1..=s {
        w *= mu / k as f64;
        if w == 0.0 {
            break;
        }
    }
    w
}

/// Probability that a pulse carries s photons, averaged over intensities.
pub fn tau(settings: &DecoySettings, s: usize) -> f64 {
    settings.mu.iter().zip(&settings.p_mu).map(|(&m, &p)| p * poisson_weight(s, m)).sum()
}

/// Poisson mass beyond photon number `len − 1`.
pub fn poisson_tail(len: usize, mu: f64) -> f64 {
    let mut w = poisson_weight(len, mu);
    let mut total = 0.0;
    let mut k = len;
    while w > 0.0 && w > total * 1e-17 {
        total += w;
        k += 1;
        w *= mu / k as f64;
    }
    total
}

/// Forward mixtures t_μ = Σ p(s|μ) t_s and the detection-weighted
/// f_μ = Σ p(s|μ) t_s f_s / t_μ.
pub fn mixture_gains(channel: &PhotonChannel, settings: &DecoySettings) -> Result<ObservedGains, DecoyError> {
    channel.validate()?;
    let mut out = ObservedGains::default();
    for b in Basis::ALL {
        let pb = channel.basis(b);
        for (i, &mu) in settings.mu.iter().enumerate() {
            let tail = poisson_tail(pb.t.len(), mu);
            if tail > TAIL_TOL {
                return Err(DecoyError::Truncation { s_max: pb.t.len() - 1, mu, tail });
            }
            let (mut t, mut e) = (0.0, 0.0);
            for (s, (&ts, &fs)) in pb.t.iter().zip(&pb.f).enumerate() {
                let w = poisson_weight(s, mu);
                t += w * ts;
                e += w * ts * fs;
            }
            let g = out.basis_mut(b);
            g.t[i] = t.min(1.0);
            g.f[i] = if t > 0.0 { (e / t).min(1.0) } else { 0.0 };
        }
    }
    Ok(out)
}

/// Vacuum yield lower bound (μ₂e^{μ₃}t_{μ₃} − μ₃e^{μ₂}t_{μ₂})/(μ₂ − μ₃).
pub fn bound_t0(gains: &ObservedGains, settings: &DecoySettings, basis: Basis) -> f64 {
    let [_, m2, m3] = settings.mu;
    let t = &gains.basis(basis).t;
    (m2 * m3.exp() * t[2] - m3 * m2.exp() * t[1]) / (m2 - m3)
}

/// Single-photon yield lower bound. `t0_bound` enters with a positive
/// coefficient, so any lower bound on t₀ keeps the result valid.
pub fn bound_t1(gains: &ObservedGains, settings: &DecoySettings, basis: Basis, t0_bound: f64) -> f64 {
    let [m1, m2, m3] = settings.mu;
    let t = &gains.basis(basis).t;
    let r = (m2 * m2 - m3 * m3) / (m1 * m1);
    m1 / ((m2 - m3) * (m1 - m2 - m3)) * (m2.exp() * t[1] - m3.exp() * t[2] + r * (t0_bound - m1.exp() * t[0]))
}

/// Single-photon error upper bound (e^{μ₂}t_{μ₂}f_{μ₂} − e^{μ₃}t_{μ₃}f_{μ₃})/((μ₂ − μ₃)·t₁),
/// with `t1_bound` a lower bound on t₁ in the same basis. Returns +∞ when
/// that bound is not positive.
pub fn bound_f1(gains: &ObservedGains, settings: &DecoySettings, basis: Basis, t1_bound: f64) -> f64 {
    let [_, m2, m3] = settings.mu;
    let g = gains.basis(basis);
    let num = m2.exp() * g.t[1] * g.f[1] - m3.exp() * g.t[2] * g.f[2];
    if t1_bound <= 0.0 {
        return if num <= 0.0 { 0.0 } else { f64::INFINITY };
    }
    num / ((m2 - m3) * t1_bound)
}

/// Raw and clamped photon-number bounds entering the entropy bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoyBounds {
    pub tau0: f64,
    pub tau1: f64,
    /// X-basis vacuum and single-photon yields.
    pub t0: f64,
    pub t1: f64,
    /// Z-basis single-photon error rate.
    pub f1: f64,
}

impl DecoyBounds {
    pub fn raw(gains: &ObservedGains, settings: &DecoySettings) -> Self {
        let t0x = bound_t0(gains, settings, Basis::X);
        let t0z = bound_t0(gains, settings, Basis::Z).max(0.0);
        let t1z = bound_t1(gains, settings, Basis::Z, t0z).min(1.0);
        DecoyBounds {
            tau0: tau(settings, 0),
            tau1: tau(settings, 1),
            t0: t0x,
            t1: bound_t1(gains, settings, Basis::X, t0x.max(0.0)),
            f1: bound_f1(gains, settings, Basis::Z, t1z),
        }
    }

    /// Yields into [0, 1] and the error rate into [0, ½].
    pub fn clamped(&self) -> Self {
        DecoyBounds {
            t0: self.t0.clamp(0.0, 1.0),
            t1: self.t1.clamp(0.0, 1.0),
            f1: if self.f1.is_nan() { 0.5 } else { self.f1.clamp(0.0, 0.5) },
            ..*self
        }
    }

    /// τ₀t₀ + τ₁t₁(1 − h(f₁)). Meaningful for clamped bounds, or raw ones with
    /// f₁ ∈ [0, 1].
    pub fn entropy(&self) -> f64 {
        self.tau0 * self.t0 + self.tau1 * self.t1 * (1.0 - h2(self.f1))
    }
}

/// Lower bound on the conditional entropy of a sifted X-basis round.
pub fn decoy_entropy_bound(gains: &ObservedGains, settings: &DecoySettings) -> f64 {
    DecoyBounds::raw(gains, settings).clamped().entropy()
}
