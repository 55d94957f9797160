//! Built-in B92 and BB84 descriptions with the test coin folded into Bob's
//! outcome alphabet.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::qcore::{c64, HermitianMatrix, C64};

use super::spec::{Family, PovmElement, ProtocolSpec, SourceState};
use super::ProtocolError;

const BOT: &str = "⊥";

fn ket(re: [f64; 2]) -> Vec<C64> {
    vec![c64(re[0], 0.0), c64(re[1], 0.0)]
}

fn check_gamma(gamma: f64) -> Result<(), ProtocolError> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(ProtocolError::GammaOutOfRange(gamma))
    }
}

/// Splits each physical outcome into an untested copy weighted by 1−γ and
/// a tested copy weighted by γ. Untested copies come first.
fn fold_test_coin(physical: &[(String, HermitianMatrix)], gamma: f64) -> Vec<PovmElement> {
    let mut out = Vec::with_capacity(2 * physical.len());
    for (tag, weight) in [("d", 1.0 - gamma), ("t", gamma)] {
        for (label, n) in physical {
            out.push(PovmElement { label: format!("{label}/{tag}"), element: n.scale(weight) });
        }
    }
    out
}

/// B92: Alice sends |0⟩ or |+⟩; Bob's conclusive outcomes are |−⟩ (meaning 0)
/// and |1⟩ (meaning 1), each with weight ½.
pub fn b92_preset(gamma: f64) -> Result<ProtocolSpec, ProtocolError> {
    check_gamma(gamma)?;
    let s = FRAC_1_SQRT_2;
    let zero = ket([1.0, 0.0]);
    let plus = ket([s, s]);
    let minus = ket([s, -s]);
    let one = ket([0.0, 1.0]);
    let n0 = HermitianMatrix::projector(&minus).scale(0.5);
    let n1 = HermitianMatrix::projector(&one).scale(0.5);
    let nbot = HermitianMatrix::projector(&zero).add(&HermitianMatrix::projector(&plus)).scale(0.5);
    let physical = vec![("0".to_string(), n0), ("1".to_string(), n1), (BOT.to_string(), nbot)];
    let povm = fold_test_coin(&physical, gamma);

    // physical outcome and test flag of each folded index
    let phys = |v: usize| v % 3;
    let tested = |v: usize| v >= 3;
    let (i_bot, i_top) = (0, 1);
    let s_bot = 2;
    let (c_fail, c_inc, c_ok, c_bot) = (0, 1, 2, 3);

    let pd = (0..2).map(|_| (0..6).map(|v| if phys(v) == 2 { i_bot } else { i_top }).collect()).collect();
    let rk = (0..2).map(|u| vec![s_bot, u]).collect();
    let ev = (0..6)
        .map(|v| {
            (0..2)
                .map(|_i| {
                    (0..3)
                        .map(|s| {
                            if !tested(v) {
                                c_bot
                            } else if phys(v) == 2 {
                                c_inc
                            } else if (s == 0 && phys(v) == 1) || (s == 1 && phys(v) == 0) {
                                c_fail
                            } else {
                                c_ok
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    Ok(ProtocolSpec {
        family: Family::B92,
        gamma,
        source: vec![
            SourceState { label: "0".into(), prob: 0.5, state: zero },
            SourceState { label: "1".into(), prob: 0.5, state: plus },
        ],
        povm,
        i_labels: vec![BOT.into(), "⊤".into()],
        s_labels: vec!["0".into(), "1".into(), BOT.into()],
        c_labels: vec!["fail".into(), "inc".into(), "∅".into(), BOT.into()],
        untested: Some(c_bot),
        pd,
        rk,
        ev,
    })
}

/// BB84: Alice sends H^x|a⟩ with uniform (x, a); Bob measures in a uniformly
/// random basis y. Key rounds are those with x = y.
pub fn bb84_preset(gamma: f64) -> Result<ProtocolSpec, ProtocolError> {
    check_gamma(gamma)?;
    let s = FRAC_1_SQRT_2;
    let basis_state = |x: usize, a: usize| -> Vec<C64> {
        match (x, a) {
            (0, 0) => ket([1.0, 0.0]),
            (0, _) => ket([0.0, 1.0]),
            (_, 0) => ket([s, s]),
            _ => ket([s, -s]),
        }
    };
    let source = (0..4)
        .map(|u| SourceState { label: format!("{}{}", u / 2, u % 2), prob: 0.25, state: basis_state(u / 2, u % 2) })
        .collect();
    let physical: Vec<(String, HermitianMatrix)> = (0..4)
        .map(|v| (format!("{}{}", v / 2, v % 2), HermitianMatrix::projector(&basis_state(v / 2, v % 2)).scale(0.5)))
        .collect();
    let povm = fold_test_coin(&physical, gamma);

    let s_bot = 2;
    let (c_pass, c_fail, c_bot) = (0, 1, 2);
    // i encodes (x, y) as 2x + y
    let pd = (0..4).map(|u| (0..8).map(|v| 2 * (u / 2) + (v % 4) / 2).collect()).collect();
    let rk = (0..4).map(|u| (0..4).map(|i| if i / 2 == i % 2 { u % 2 } else { s_bot }).collect()).collect();
    let ev = (0..8)
        .map(|v| {
            let (b, tested) = (v % 2, v >= 4);
            (0..4)
                .map(|i| {
                    (0..3)
                        .map(|s| {
                            if !tested || i / 2 != i % 2 {
                                c_bot
                            } else if s == b {
                                c_pass
                            } else {
                                c_fail
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    Ok(ProtocolSpec {
        family: Family::Bb84,
        gamma,
        source,
        povm,
        i_labels: (0..4).map(|i| format!("{}{}", i / 2, i % 2)).collect(),
        s_labels: vec!["0".into(), "1".into(), BOT.into()],
        c_labels: vec!["1".into(), "0".into(), BOT.into()],
        untested: Some(c_bot),
        pd,
        rk,
        ev,
    })
}
