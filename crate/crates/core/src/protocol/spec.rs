//! Protocol descriptions and their validation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::qcore::{eig_hermitian, HermitianMatrix, C64};

use super::ProtocolError;

/// Which analysis shortcuts apply to a spec. Custom specs get the generic
/// treatment only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    B92,
    Bb84,
    #[default]
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourceState {
    pub label: String,
    pub prob: f64,
    pub state: Vec<C64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PovmElement {
    pub label: String,
    pub element: HermitianMatrix,
}

/// Everything needed to describe one prepare-and-measure protocol: Alice's
/// ensemble, Bob's measurement with the test coin folded into its outcomes,
/// and the classical announcement, key and test maps.
///
/// Tables are dense and indexed by alphabet position:
/// `pd[u][v] = i`, `rk[u][i] = s`, `ev[v][i][s] = c`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolSpec {
    pub family: Family,
    pub gamma: f64,
    pub source: Vec<SourceState>,
    pub povm: Vec<PovmElement>,
    pub i_labels: Vec<String>,
    pub s_labels: Vec<String>,
    pub c_labels: Vec<String>,
    /// Statistics symbol emitted on rounds that are not tested.
    pub untested: Option<usize>,
    pub pd: Vec<Vec<usize>>,
    pub rk: Vec<Vec<usize>>,
    pub ev: Vec<Vec<Vec<usize>>>,
}

/// One violated invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub invariant: &'static str,
    pub detail: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.invariant, self.detail)
    }
}

pub const SOURCE_NORMALIZATION: &str = "source normalization";
pub const STATE_NORMALIZATION: &str = "state normalization";
pub const POVM_COMPLETENESS: &str = "POVM completeness";
pub const POVM_POSITIVITY: &str = "POVM positivity";
pub const TABLE_TOTALITY: &str = "table totality";
pub const GAMMA_RANGE: &str = "testing probability";
pub const DIMENSIONS: &str = "dimension consistency";

impl ProtocolSpec {
    pub fn dim_q(&self) -> usize {
        self.source.first().map_or(0, |s| s.state.len())
    }

    pub fn u_labels(&self) -> Vec<String> {
        self.source.iter().map(|s| s.label.clone()).collect()
    }

    pub fn v_labels(&self) -> Vec<String> {
        self.povm.iter().map(|p| p.label.clone()).collect()
    }

    /// Checks every invariant and reports all violations at once.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut push = |invariant, detail: String| out.push(Diagnostic { invariant, detail });

        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            push(GAMMA_RANGE, format!("gamma = {} must lie in (0, 1]", self.gamma));
        }
        if self.source.is_empty() {
            push(SOURCE_NORMALIZATION, "empty source".into());
        }
        let dq = self.dim_q();
        let total: f64 = self.source.iter().map(|s| s.prob).sum();
        if (total - 1.0).abs() > 1e-12 || self.source.iter().any(|s| s.prob < 0.0) {
            push(SOURCE_NORMALIZATION, format!("probabilities sum to {total}"));
        }
        for s in &self.source {
            if s.state.len() != dq {
                push(DIMENSIONS, format!("state '{}' has dimension {}", s.label, s.state.len()));
                continue;
            }
            let norm: f64 = s.state.iter().map(|x| x.norm_sqr()).sum();
            if (norm - 1.0).abs() > 1e-12 {
                push(STATE_NORMALIZATION, format!("state '{}' has squared norm {norm}", s.label));
            }
        }
        let mut sum = HermitianMatrix::zeros(dq.max(1));
        let mut dims_ok = dq > 0;
        for p in &self.povm {
            if p.element.dim() != dq {
                push(DIMENSIONS, format!("POVM element '{}' has dimension {}", p.label, p.element.dim()));
                dims_ok = false;
                continue;
            }
            let min = eig_hermitian(&p.element).min();
            if min < -1e-10 {
                push(POVM_POSITIVITY, format!("element '{}' has eigenvalue {min}", p.label));
            }
            sum = sum.add(&p.element);
        }
        if dims_ok {
            let dev = sum.max_abs_diff(&HermitianMatrix::identity(dq));
            if dev > 1e-10 {
                push(POVM_COMPLETENESS, format!("sum of elements deviates from identity by {dev:e}"));
            }
        }
        let (nu, nv, ni, ns, nc) =
            (self.source.len(), self.povm.len(), self.i_labels.len(), self.s_labels.len(), self.c_labels.len());
        let table_ok = self.pd.len() == nu
            && self.pd.iter().all(|r| r.len() == nv && r.iter().all(|&i| i < ni))
            && self.rk.len() == nu
            && self.rk.iter().all(|r| r.len() == ni && r.iter().all(|&s| s < ns))
            && self.ev.len() == nv
            && self.ev.iter().all(|r| r.len() == ni && r.iter().all(|q| q.len() == ns && q.iter().all(|&c| c < nc)));
        if !table_ok {
            push(TABLE_TOTALITY, "PD, RK or EV is not a total map over the declared alphabets".into());
        }
        if let Some(u) = self.untested {
            if u >= nc {
                push(TABLE_TOTALITY, format!("untested symbol index {u} outside C"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        let d = self.diagnostics();
        if d.is_empty() {
            Ok(())
        } else {
            Err(ProtocolError::Invalid(d))
        }
    }
}
