//! JSON form of a protocol spec. Complex numbers are `[re, im]` pairs and
//! the classical maps are lists of label tuples.

use serde::{Deserialize, Serialize};

use crate::qcore::{c64, HermitianMatrix};

use super::spec::{Diagnostic, Family, PovmElement, ProtocolSpec, SourceState, TABLE_TOTALITY};
use super::ProtocolError;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SourceEntry {
    pub label: String,
    pub prob: f64,
    pub state: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PovmEntry {
    pub label: String,
    pub element: HermitianMatrix,
}

/// Serialized protocol description.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpecDocument {
    #[serde(default)]
    pub family: Family,
    pub gamma: f64,
    pub source: Vec<SourceEntry>,
    pub povm: Vec<PovmEntry>,
    pub i_labels: Vec<String>,
    pub s_labels: Vec<String>,
    pub c_labels: Vec<String>,
    #[serde(default)]
    pub untested: Option<String>,
    /// `[u, v, i]` triples.
    pub pd: Vec<[String; 3]>,
    /// `[u, i, s]` triples.
    pub rk: Vec<[String; 3]>,
    /// `[v, i, s, c]` quadruples.
    pub ev: Vec<[String; 4]>,
}

fn position(labels: &[String], label: &str, table: &'static str) -> Result<usize, ProtocolError> {
    labels.iter().position(|l| l == label).ok_or_else(|| ProtocolError::UnknownLabel { table, label: label.into() })
}

fn missing(what: &str) -> ProtocolError {
    ProtocolError::Invalid(vec![Diagnostic {
        invariant: TABLE_TOTALITY,
        detail: format!("{what} has missing entries"),
    }])
}

impl SpecDocument {
    pub fn from_json(text: &str) -> Result<Self, ProtocolError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec documents always serialize")
    }

    /// Converts to a dense spec and validates it.
    pub fn into_spec(self) -> Result<ProtocolSpec, ProtocolError> {
        let u_labels: Vec<String> = self.source.iter().map(|s| s.label.clone()).collect();
        let v_labels: Vec<String> = self.povm.iter().map(|p| p.label.clone()).collect();
        let (nu, nv, ni, ns) = (u_labels.len(), v_labels.len(), self.i_labels.len(), self.s_labels.len());

        let mut pd = vec![vec![usize::MAX; nv]; nu];
        for [u, v, i] in &self.pd {
            pd[position(&u_labels, u, "pd")?][position(&v_labels, v, "pd")?] = position(&self.i_labels, i, "pd")?;
        }
        let mut rk = vec![vec![usize::MAX; ni]; nu];
        for [u, i, s] in &self.rk {
            rk[position(&u_labels, u, "rk")?][position(&self.i_labels, i, "rk")?] = position(&self.s_labels, s, "rk")?;
        }
        let mut ev = vec![vec![vec![usize::MAX; ns]; ni]; nv];
        for [v, i, s, c] in &self.ev {
            ev[position(&v_labels, v, "ev")?][position(&self.i_labels, i, "ev")?][position(&self.s_labels, s, "ev")?] =
                position(&self.c_labels, c, "ev")?;
        }
        if pd.iter().flatten().any(|&x| x == usize::MAX) {
            return Err(missing("pd"));
        }
        if rk.iter().flatten().any(|&x| x == usize::MAX) {
            return Err(missing("rk"));
        }
        if ev.iter().flatten().flatten().any(|&x| x == usize::MAX) {
            return Err(missing("ev"));
        }
        let untested = match &self.untested {
            Some(l) => Some(position(&self.c_labels, l, "untested")?),
            None => None,
        };
        let spec = ProtocolSpec {
            family: self.family,
            gamma: self.gamma,
            source: self
                .source
                .into_iter()
                .map(|s| SourceState {
                    label: s.label,
                    prob: s.prob,
                    state: s.state.iter().map(|[re, im]| c64(*re, *im)).collect(),
                })
                .collect(),
            povm: self.povm.into_iter().map(|p| PovmElement { label: p.label, element: p.element }).collect(),
            i_labels: self.i_labels,
            s_labels: self.s_labels,
            c_labels: self.c_labels,
            untested,
            pd,
            rk,
            ev,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_spec(spec: &ProtocolSpec) -> Self {
        let u = spec.u_labels();
        let v = spec.v_labels();
        let mut pd = Vec::new();
        let mut rk = Vec::new();
        let mut ev = Vec::new();
        for (a, row) in spec.pd.iter().enumerate() {
            for (b, &i) in row.iter().enumerate() {
                pd.push([u[a].clone(), v[b].clone(), spec.i_labels[i].clone()]);
            }
        }
        for (a, row) in spec.rk.iter().enumerate() {
            for (i, &s) in row.iter().enumerate() {
                rk.push([u[a].clone(), spec.i_labels[i].clone(), spec.s_labels[s].clone()]);
            }
        }
        for (b, plane) in spec.ev.iter().enumerate() {
            for (i, row) in plane.iter().enumerate() {
                for (s, &c) in row.iter().enumerate() {
                    ev.push([
                        v[b].clone(),
                        spec.i_labels[i].clone(),
                        spec.s_labels[s].clone(),
                        spec.c_labels[c].clone(),
                    ]);
                }
            }
        }
        SpecDocument {
            family: spec.family,
            gamma: spec.gamma,
            source: spec
                .source
                .iter()
                .map(|s| SourceEntry {
                    label: s.label.clone(),
                    prob: s.prob,
                    state: s.state.iter().map(|z| [z.re, z.im]).collect(),
                })
                .collect(),
            povm: spec.povm.iter().map(|p| PovmEntry { label: p.label.clone(), element: p.element.clone() }).collect(),
            i_labels: spec.i_labels.clone(),
            s_labels: spec.s_labels.clone(),
            c_labels: spec.c_labels.clone(),
            untested: spec.untested.map(|k| spec.c_labels[k].clone()),
            pd,
            rk,
            ev,
        }
    }
}
