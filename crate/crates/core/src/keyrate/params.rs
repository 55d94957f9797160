use serde::{Deserialize, Serialize};

use super::KeyRateError;

/// Round count, error budgets and the sequentiality step of one protocol run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecurityParams {
    pub n: u64,
    pub eps_s: f64,
    pub eps_a: f64,
    pub eps_pa: f64,
    pub eps_kv: f64,
    pub eps_comp_kv: f64,
    pub eps_comp_ev: f64,
    /// Eve may act jointly on at most `s` consecutive rounds; 1 is strict
    /// sequentiality.
    pub s: u64,
}

impl SecurityParams {
    /// The reference B92 parameter table.
    pub fn b92_reference(n: u64) -> Self {
        SecurityParams {
            n,
            eps_s: 2e-10,
            eps_a: 4e-10,
            eps_pa: 1e-10,
            eps_kv: 5e-11,
            eps_comp_kv: 5e-3,
            eps_comp_ev: 5e-3,
            s: 1,
        }
    }

    pub fn with_step(mut self, s: u64) -> Self {
        self.s = s;
        self
    }

    pub fn validate(&self) -> Result<(), KeyRateError> {
        let named = [
            ("eps_s", self.eps_s),
            ("eps_a", self.eps_a),
            ("eps_pa", self.eps_pa),
            ("eps_kv", self.eps_kv),
            ("eps_comp_kv", self.eps_comp_kv),
            ("eps_comp_ev", self.eps_comp_ev),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v < 1.0) {
                return Err(KeyRateError::Params(format!("{name} = {v} outside (0, 1)")));
            }
        }
        if self.n == 0 {
            return Err(KeyRateError::Params("n must be at least 1".into()));
        }
        if self.s == 0 {
            return Err(KeyRateError::Params("s must be at least 1".into()));
        }
        if self.eps_comp_ev <= self.eps_kv {
            return Err(KeyRateError::Threshold { ev: self.eps_comp_ev, kv: self.eps_kv });
        }
        Ok(())
    }

    pub fn eps_cor(&self) -> f64 {
        self.eps_kv
    }

    pub fn eps_sec(&self) -> f64 {
        (self.eps_pa + 4.0 * self.eps_s).max(2.0 * self.eps_a) + 2.0 * self.eps_kv
    }
}
