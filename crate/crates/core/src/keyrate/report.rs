//! CSV rows for key-rate sweeps.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::optimize::{AsymptoticResult, KeyRateResult};
use super::KeyRateError;

pub const KEYRATE_HEADER: [&str; 11] =
    ["p", "n", "s", "rate", "l", "alpha", "gamma", "lambda_ec", "k_ca", "eps_sec", "eps_cor"];

/// Decimal rendering with `digits` significant digits; scientific notation
/// only when the decimal form would be unwieldy.
pub fn format_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-7..=20).contains(&exp) {
        return format!("{:.*e}", digits.saturating_sub(1), x);
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// One output row. Fields are preformatted strings so that failed points can
/// carry NaN and the asymptotic series can leave finite-size columns empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyRateRow {
    pub p: String,
    pub n: String,
    pub s: String,
    pub rate: String,
    pub l: String,
    pub alpha: String,
    pub gamma: String,
    pub lambda_ec: String,
    pub k_ca: String,
    pub eps_sec: String,
    pub eps_cor: String,
}

fn sig(x: f64) -> String {
    format_sig(x, 12)
}

impl KeyRateRow {
    pub fn from_result(r: &KeyRateResult) -> Self {
        KeyRateRow {
            p: sig(r.p),
            n: r.n.to_string(),
            s: r.s.to_string(),
            rate: sig(r.rate),
            l: r.key_length.to_string(),
            alpha: sig(r.breakdown.alpha),
            gamma: sig(r.gamma),
            lambda_ec: r.plan.lambda_ec.to_string(),
            k_ca: sig(r.plan.k_ca),
            eps_sec: sig(r.eps_sec),
            eps_cor: sig(r.eps_cor),
        }
    }

    /// The i.i.d. asymptotic pseudo-row: `n` reads "asymptotic".
    pub fn asymptotic(r: &AsymptoticResult) -> Self {
        KeyRateRow {
            p: sig(r.p),
            n: "asymptotic".into(),
            s: String::new(),
            rate: sig(r.rate),
            l: String::new(),
            alpha: String::new(),
            gamma: String::new(),
            lambda_ec: String::new(),
            k_ca: String::new(),
            eps_sec: String::new(),
            eps_cor: String::new(),
        }
    }

    /// A point whose evaluation failed.
    pub fn failed(p: f64, n: u64, s: u64) -> Self {
        let nan = || "NaN".to_string();
        KeyRateRow {
            p: sig(p),
            n: n.to_string(),
            s: s.to_string(),
            rate: nan(),
            l: nan(),
            alpha: nan(),
            gamma: nan(),
            lambda_ec: nan(),
            k_ca: nan(),
            eps_sec: nan(),
            eps_cor: nan(),
        }
    }
}

pub fn write_keyrate_csv<W: Write>(out: W, rows: &[KeyRateRow]) -> Result<(), KeyRateError> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(KEYRATE_HEADER)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a key-rate CSV, rejecting any header other than `KEYRATE_HEADER`.
pub fn read_keyrate_csv<R: Read>(input: R) -> Result<Vec<KeyRateRow>, KeyRateError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != KEYRATE_HEADER {
        return Err(KeyRateError::Params(format!("unexpected key-rate CSV header {header:?}")));
    }
    Ok(r.deserialize().collect::<Result<Vec<KeyRateRow>, _>>()?)
}
