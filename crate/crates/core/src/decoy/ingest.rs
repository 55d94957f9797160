//! CSV ingest of observed gains: one row per (basis, intensity) with
//! columns `basis,intensity,t,f`.

use std::io::Read;

use serde::Deserialize;

use super::{Basis, DecoyError, DecoySettings, ObservedGains};

#[derive(Clone, Debug, Deserialize)]
pub struct GainRecord {
    pub basis: String,
    pub intensity: f64,
    pub t: f64,
    pub f: f64,
}

fn parse_basis(s: &str) -> Result<Basis, DecoyError> {
    match s.trim() {
        "Z" | "z" => Ok(Basis::Z),
        "X" | "x" => Ok(Basis::X),
        other => Err(DecoyError::Ingest(format!("unknown basis '{other}'"))),
    }
}

/// Reads all six (basis, intensity) rows. Intensities are matched against
/// `settings.mu` with relative tolerance 1e-9.
pub fn read_gains_csv<R: Read>(input: R, settings: &DecoySettings) -> Result<ObservedGains, DecoyError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut out = ObservedGains::default();
    let mut seen = [[false; 3]; 2];
    for row in reader.deserialize() {
        let rec: GainRecord = row?;
        let basis = parse_basis(&rec.basis)?;
        let i = settings.mu.iter().position(|&m| (m - rec.intensity).abs() <= 1e-9 * m.abs().max(1e-12)).ok_or_else(
            || DecoyError::Ingest(format!("intensity {} is not one of {:?}", rec.intensity, settings.mu)),
        )?;
        let slot = &mut seen[basis as usize][i];
        if *slot {
            return Err(DecoyError::Ingest(format!("duplicate row for {basis:?} at intensity {}", rec.intensity)));
        }
        *slot = true;
        let g = out.basis_mut(basis);
        g.t[i] = rec.t;
        g.f[i] = rec.f;
    }
    for b in Basis::ALL {
        for i in 0..3 {
            if !seen[b as usize][i] {
                return Err(DecoyError::Ingest(format!("missing row for {b:?} at intensity {}", settings.mu[i])));
            }
        }
    }
    out.validate()?;
    Ok(out)
}
