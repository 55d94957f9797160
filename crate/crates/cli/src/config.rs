//! JSON configuration documents. Error budgets are decimal strings so that
//! the values recorded in a config are exactly the ones typed.

use std::fs;
use std::path::{Path, PathBuf};

use pmqkd::keyrate::{SecurityParams, SolverBudget};
use pmqkd::protocol::{b92_preset, bb84_preset, ProtocolSpec, SpecDocument};
use serde::{Deserialize, Serialize};

use crate::error::{config_error, CliResult, ConfigContext};

/// Error budgets as decimal strings; missing fields take the B92 reference
/// values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsConfig {
    pub eps_s: String,
    pub eps_a: String,
    pub eps_pa: String,
    pub eps_kv: String,
    pub eps_comp_kv: String,
    pub eps_comp_ev: String,
}

impl Default for EpsConfig {
    fn default() -> Self {
        EpsConfig {
            eps_s: "2e-10".into(),
            eps_a: "4e-10".into(),
            eps_pa: "1e-10".into(),
            eps_kv: "5e-11".into(),
            eps_comp_kv: "5e-3".into(),
            eps_comp_ev: "5e-3".into(),
        }
    }
}

fn parse_eps(name: &str, text: &str) -> CliResult<f64> {
    text.trim().parse::<f64>().config(&format!("{name} = '{text}' is not a number"))
}

impl EpsConfig {
    pub fn to_params(&self, n: u64, s: u64) -> CliResult<SecurityParams> {
        let params = SecurityParams {
            n,
            eps_s: parse_eps("eps_s", &self.eps_s)?,
            eps_a: parse_eps("eps_a", &self.eps_a)?,
            eps_pa: parse_eps("eps_pa", &self.eps_pa)?,
            eps_kv: parse_eps("eps_kv", &self.eps_kv)?,
            eps_comp_kv: parse_eps("eps_comp_kv", &self.eps_comp_kv)?,
            eps_comp_ev: parse_eps("eps_comp_ev", &self.eps_comp_ev)?,
            s,
        };
        params.validate().config("security parameters")?;
        Ok(params)
    }
}

/// A built-in protocol or a spec file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolSource {
    Preset(String),
    SpecFile(PathBuf),
}

impl ProtocolSource {
    pub fn from_flags(preset: Option<&str>, spec: Option<&Path>) -> CliResult<Self> {
        match (preset, spec) {
            (Some(_), Some(_)) => Err(config_error("give either --preset or --spec, not both")),
            (Some(p), None) => Ok(ProtocolSource::Preset(p.to_string())),
            (None, Some(f)) => Ok(ProtocolSource::SpecFile(f.to_path_buf())),
            (None, None) => Ok(ProtocolSource::Preset("b92".into())),
        }
    }

    /// Presets are built at `gamma`; spec files carry their own γ.
    pub fn load(&self, gamma: f64) -> CliResult<ProtocolSpec> {
        match self {
            ProtocolSource::Preset(name) => match name.to_ascii_lowercase().as_str() {
                "b92" => b92_preset(gamma).config("B92 preset"),
                "bb84" => bb84_preset(gamma).config("BB84 preset"),
                other => Err(config_error(format!("unknown preset '{other}' (expected b92 or bb84)"))),
            },
            ProtocolSource::SpecFile(path) => load_spec(path),
        }
    }
}

pub fn load_spec(path: &Path) -> CliResult<ProtocolSpec> {
    let text = fs::read_to_string(path).config(&format!("cannot read spec file {}", path.display()))?;
    let doc = SpecDocument::from_json(&text).config(&format!("spec file {}", path.display()))?;
    doc.into_spec().config(&format!("spec file {}", path.display()))
}

/// Solver effort as it appears in configs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub dual_evals: Option<usize>,
    pub finite_evals: Option<usize>,
    pub solve_max_iter: Option<usize>,
    pub gamma_grid: Option<Vec<f64>>,
}

impl BudgetConfig {
    pub fn to_budget(&self, iteration_cap: Option<usize>) -> SolverBudget {
        let mut b = SolverBudget::default();
        if let Some(x) = self.dual_evals {
            b.dual_evals = x;
        }
        if let Some(x) = self.finite_evals {
            b.finite_evals = x;
        }
        if let Some(x) = self.solve_max_iter {
            b.solve_max_iter = x;
        }
        if let Some(g) = &self.gamma_grid {
            b.gamma_grid = g.clone();
        }
        if let Some(cap) = iteration_cap {
            b.solve_max_iter = cap;
        }
        b
    }
}

/// A key-rate sweep over p × n × s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub spec_file: Option<PathBuf>,
    pub p: Vec<f64>,
    pub n: Vec<u64>,
    #[serde(default = "default_s")]
    pub s: Vec<u64>,
    #[serde(default)]
    pub params: EpsConfig,
    #[serde(default)]
    pub budget: BudgetConfig,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Emit the asymptotic pseudo-row for every p.
    #[serde(default = "default_true")]
    pub asymptotic: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            preset: None,
            spec_file: None,
            p: Vec::new(),
            n: Vec::new(),
            s: default_s(),
            params: EpsConfig::default(),
            budget: BudgetConfig::default(),
            output: None,
            seed: 0,
            asymptotic: true,
        }
    }
}

fn default_s() -> Vec<u64> {
    vec![1]
}

fn default_true() -> bool {
    true
}

impl SweepConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).config(&format!("cannot read sweep config {}", path.display()))?;
        let cfg: SweepConfig = serde_json::from_str(&text).config(&format!("sweep config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.p.is_empty() || self.n.is_empty() || self.s.is_empty() {
            return Err(config_error("the p, n and s lists must all be non-empty"));
        }
        if let Some(bad) = self.p.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(config_error(format!("p = {bad} outside [0, 1]")));
        }
        if self.n.contains(&0) || self.s.contains(&0) {
            return Err(config_error("n and s must be positive"));
        }
        Ok(())
    }

    pub fn source(&self) -> CliResult<ProtocolSource> {
        ProtocolSource::from_flags(self.preset.as_deref(), self.spec_file.as_deref())
    }
}
