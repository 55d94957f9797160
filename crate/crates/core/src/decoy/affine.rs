//! Statistics alphabet of decoy BB84 and a tangent-plane affine bound.
//!
//! Per round the test register records, for each intensity, an X-basis
//! no-click, a Z-basis no-click or a Z-basis error (both parties in Z and a
//! click with mismatched values); everything else is ⊥.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::tradeoff::TradeoffFunction;

use super::{decoy_entropy_bound, mixture_gains, Basis, DecoyError, DecoySettings, ObservedGains, PhotonChannel};

const PER_INTENSITY: usize = 3;
const N_SYMBOLS: usize = 3 * PER_INTENSITY + 1;

pub fn decoy_labels() -> Vec<String> {
    let mut out = Vec::with_capacity(N_SYMBOLS);
    for i in 1..=3 {
        out.push(format!("μ{i}/∅X"));
        out.push(format!("μ{i}/∅Z"));
        out.push(format!("μ{i}/errZ"));
    }
    out.push("⊥".into());
    out
}

/// Per-round distribution over `decoy_labels()` produced by the given gains.
pub fn statistics(gains: &ObservedGains, settings: &DecoySettings) -> Vec<f64> {
    let (qx, qz) = (settings.q(Basis::X), settings.q(Basis::Z));
    let mut out = Vec::with_capacity(N_SYMBOLS);
    for i in 0..3 {
        let p = settings.p_mu[i];
        out.push(p * qx * (1.0 - gains.x.t[i]));
        out.push(p * qz * (1.0 - gains.z.t[i]));
        out.push(p * qz * qz * gains.z.t[i] * gains.z.f[i]);
    }
    out.push(1.0 - out.iter().sum::<f64>());
    out
}

/// Inverts `statistics` on the entries it determines, clipping into
/// [0, 1]. X-basis error rates are not recorded and come back as zero.
pub fn gains_from_statistics(stats: &[f64], settings: &DecoySettings) -> Result<ObservedGains, DecoyError> {
    if stats.len() != N_SYMBOLS {
        return Err(DecoyError::StatisticsLength { expected: N_SYMBOLS, found: stats.len() });
    }
    let (qx, qz) = (settings.q(Basis::X), settings.q(Basis::Z));
    let mut g = ObservedGains::default();
    for i in 0..3 {
        let p = settings.p_mu[i];
        if p <= 0.0 {
            return Err(DecoyError::ZeroProbability(i + 1));
        }
        let k = PER_INTENSITY * i;
        g.x.t[i] = (1.0 - stats[k] / (p * qx)).clamp(0.0, 1.0);
        g.z.t[i] = (1.0 - stats[k + 1] / (p * qz)).clamp(0.0, 1.0);
        g.z.f[i] = if g.z.t[i] > 0.0 { (stats[k + 2] / (p * qz * qz * g.z.t[i])).clamp(0.0, 1.0) } else { 0.0 };
    }
    Ok(g)
}

/// Collective-attack bound per round: only rounds where both parties pick X
/// carry key, so the sifted-round entropy bound is weighted by q_x².
pub fn ca_of_statistics(stats: &[f64], settings: &DecoySettings) -> Result<f64, DecoyError> {
    let g = gains_from_statistics(stats, settings)?;
    Ok(settings.q_x * settings.q_x * decoy_entropy_bound(&g, settings))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecoyAffinization {
    /// Plane through the honest point with slope θ times the tangent,
    /// shifted down by `max_violation`.
    pub tf: TradeoffFunction,
    pub theta: f64,
    pub honest_stats: Vec<f64>,
    pub honest_value: f64,
    /// Largest excess of the unshifted plane over the nonlinear bound seen
    /// on the sampled channels.
    pub max_violation: f64,
    pub samples: usize,
}

/// Affine lower bound on `ca_of_statistics` built from its tangent at the
/// statistics of `honest` (⊥ carries coefficient 0). Validity is checked
/// numerically on `samples` random photon channels plus perturbations of the
/// honest one, and the offset is lowered by the worst excess found. This is
/// evidence, not a proof, that the plane lower-bounds the nonlinear bound
/// everywhere.
pub fn affinize<R: Rng + ?Sized>(
    settings: &DecoySettings,
    honest: &ObservedGains,
    samples: usize,
    rng: &mut R,
) -> Result<DecoyAffinization, DecoyError> {
    settings.validate()?;
    honest.validate()?;
    let q0 = statistics(honest, settings);
    let value = ca_of_statistics(&q0, settings)?;
    let mut lambda = vec![0.0; N_SYMBOLS];
    for k in 0..N_SYMBOLS - 1 {
        let h = 1e-6 * q0[k].max(1e-9);
        let at = |x: f64| {
            let mut q = q0.clone();
            q[k] = x;
            ca_of_statistics(&q, settings)
        };
        lambda[k] =
            if q0[k] > h { (at(q0[k] + h)? - at(q0[k] - h)?) / (2.0 * h) } else { (at(q0[k] + h)? - value) / h };
    }
    let samples_q: Vec<Vec<f64>> = (0..samples)
        .map(|k| {
            let gains =
                if k % 2 == 0 { mixture_gains(&PhotonChannel::random(rng), settings)? } else { perturbed(honest, rng) };
            let q = statistics(&gains, settings);
            let ca = ca_of_statistics(&q, settings)?;
            Ok((q, ca))
        })
        .collect::<Result<Vec<_>, DecoyError>>()?
        .into_iter()
        .map(|(mut q, ca)| {
            q.push(ca);
            q
        })
        .collect();

    // The bound is not concave, so the full tangent slope is usually too
    // steep far from the honest point. Scan shrunken slopes θ·∇ and keep the
    // one whose shifted plane is largest at the honest statistics.
    let mut best: Option<(f64, f64)> = None;
    for k in 0..=12 {
        let theta = if k == 12 { 0.0 } else { 0.5f64.powi(k) };
        let worst = samples_q
            .iter()
            .map(|row| {
                let (q, ca) = row.split_at(N_SYMBOLS);
                let step: f64 = lambda.iter().zip(q).zip(&q0).map(|((l, x), y)| l * (x - y)).sum();
                value + theta * step - ca[0]
            })
            .fold(0.0f64, f64::max);
        if best.map_or(true, |(_, w)| worst < w) {
            best = Some((theta, worst));
        }
    }
    let (theta, worst) = best.expect("non-empty scan");
    let slope: Vec<f64> = lambda.iter().map(|l| theta * l).collect();
    let dot: f64 = slope.iter().zip(&q0).map(|(l, q)| l * q).sum();
    let tf = TradeoffFunction::affine(decoy_labels(), slope, value - dot - worst)?;
    Ok(DecoyAffinization { tf, honest_stats: q0, honest_value: value, theta, max_violation: worst, samples })
}

/// Honest gains with every entry moved by up to ±20% of itself.
fn perturbed<R: Rng + ?Sized>(g: &ObservedGains, rng: &mut R) -> ObservedGains {
    let mut out = g.clone();
    for b in Basis::ALL {
        let gb = out.basis_mut(b);
        for x in gb.t.iter_mut().chain(gb.f.iter_mut()) {
            *x = (*x * (1.0 + rng.gen_range(-0.2..0.2))).clamp(0.0, 1.0);
        }
    }
    out
}
