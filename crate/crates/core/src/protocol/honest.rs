//! Honest implementation: a depolarising channel between Alice and Bob.

use std::collections::BTreeMap;

use crate::qcore::HermitianMatrix;

use super::operators::{source_replacement, StatisticsVector};
use super::spec::ProtocolSpec;
use super::ProtocolError;

/// Bob's outcome distribution P(v|u) when Alice's state passes through
/// ρ ↦ (1−p)ρ + p·I/d.
pub fn channel_table(spec: &ProtocolSpec, p: f64) -> Result<Vec<Vec<f64>>, ProtocolError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ProtocolError::NoiseOutOfRange(p));
    }
    spec.validate()?;
    let dq = spec.dim_q();
    let mixed = HermitianMatrix::identity(dq).scale(1.0 / dq as f64);
    Ok(spec
        .source
        .iter()
        .map(|s| {
            let rho = HermitianMatrix::projector(&s.state).mix(&mixed, p);
            spec.povm.iter().map(|n| n.element.inner_product(&rho).max(0.0)).collect()
        })
        .collect())
}

/// Honest statistics and the error-correction entropy H(S|VI) of one round.
pub fn honest_model(spec: &ProtocolSpec, p: f64) -> Result<(StatisticsVector, f64), ProtocolError> {
    let table = channel_table(spec, p)?;
    let ops = source_replacement(spec)?;
    let stats = ops.statistics(&ops.depolarized_source(p))?;

    // H(S|VI) = H(SVI) − H(VI) from the joint law of (u, v)
    let mut svi: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
    let mut vi: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (u, row) in table.iter().enumerate() {
        for (v, &pv) in row.iter().enumerate() {
            let w = spec.source[u].prob * pv;
            if w <= 0.0 {
                continue;
            }
            let i = spec.pd[u][v];
            let s = spec.rk[u][i];
            *svi.entry((s, v, i)).or_default() += w;
            *vi.entry((v, i)).or_default() += w;
        }
    }
    let shannon = |xs: &mut dyn Iterator<Item = f64>| -> f64 { xs.filter(|&x| x > 0.0).map(|x| -x * x.log2()).sum() };
    let h_sv = shannon(&mut svi.values().copied()) - shannon(&mut vi.values().copied());
    Ok((stats, h_sv.max(0.0)))
}
