//! Run configuration: a single JSON document with named preset bundles,
//! field literals, tolerances and output options.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algebroid::{
    build_end_model, build_transitive, product_with_line, tangent_algebroid, ScalarAlgebroid,
    TrivLieAlgebroid,
};
use crate::connection::{canonical_splitting, gauge_connection, LConnection};
use crate::error::Error;
use crate::fields::{ScalarField, TPolyField};
use crate::liealg::{LieStructure, Mat};

/// One Fourier term {index, re, im}; the mirror coefficient at −index is
/// implied, so only one of each ±k pair needs to be given.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LitTerm {
    pub index: Vec<i32>,
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

pub type FieldLit = Vec<LitTerm>;

pub fn field_from_literal(dim: usize, lit: &FieldLit) -> Result<ScalarField, Error> {
    let terms: Vec<(Vec<i32>, f64, f64)> =
        lit.iter().map(|t| (t.index.clone(), t.re, t.im)).collect();
    ScalarField::from_literals(dim, &terms)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum AlgebroidSpec {
    Preset {
        preset: String,
        #[serde(default)]
        base_dim: Option<usize>,
    },
    Explicit {
        base_dim: usize,
        rank: usize,
        anchor: Vec<Vec<FieldLit>>,
        structure: Vec<Vec<Vec<FieldLit>>>,
    },
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct ConnectionSpec {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub k: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub phi: Option<FieldLit>,
    #[serde(default)]
    pub matrix: Option<Vec<Vec<FieldLit>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Tolerances {
    pub structure: f64,
    pub flatness: f64,
    pub commutation: f64,
    pub factorization: f64,
    pub cs_relative: f64,
    pub lemma: f64,
    pub closedness: f64,
    pub relation_k1: f64,
    pub relation_fit: f64,
    pub pointwise: f64,
    pub residual_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            structure: 1e-10,
            flatness: 1e-10,
            commutation: 1e-10,
            factorization: 1e-12,
            cs_relative: 1e-8,
            lemma: 1e-9,
            closedness: 1e-9,
            relation_k1: 1e-10,
            relation_fit: 1e-6,
            pointwise: 1e-12,
            residual_floor: 0.1,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> Result<(), Error> {
        let all = [
            self.structure,
            self.flatness,
            self.commutation,
            self.factorization,
            self.cs_relative,
            self.lemma,
            self.closedness,
            self.relation_k1,
            self.relation_fit,
            self.pointwise,
            self.residual_floor,
        ];
        if all.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::config("tolerances must be positive"));
        }
        Ok(())
    }
}

pub const SCENARIOS: &[&str] = &["validate", "secondary", "crainic", "example", "lemma"];

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Named configuration bundle applied before the explicit fields.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algebroid: Option<AlgebroidSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connection: Option<ConnectionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trunc_cap: Option<usize>,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let mut cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::config(format!("bad config: {e}")))?;
        cfg.apply_preset()?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_preset(&mut self) -> Result<(), Error> {
        let Some(name) = self.preset.clone() else {
            return Ok(());
        };
        match name.as_str() {
            "tangent" => {
                self.scenario.get_or_insert_with(|| "validate".into());
                self.algebroid.get_or_insert(AlgebroidSpec::Preset {
                    preset: "tangent".into(),
                    base_dim: Some(2),
                });
            }
            "example_3_3" => {
                self.scenario.get_or_insert_with(|| "example".into());
                self.algebroid.get_or_insert(AlgebroidSpec::Preset {
                    preset: "example_3_3".into(),
                    base_dim: Some(1),
                });
            }
            "gauge_flat_end2" => {
                self.scenario.get_or_insert_with(|| "crainic".into());
                self.algebroid.get_or_insert(AlgebroidSpec::Preset {
                    preset: "end_model_2".into(),
                    base_dim: Some(3),
                });
                self.connection.get_or_insert(ConnectionSpec {
                    preset: Some("gauge_flat".into()),
                    k: Some(vec![vec![1.0, 0.5], vec![0.5, -0.25]]),
                    phi: Some(vec![LitTerm { index: vec![1, 0, 0], re: 0.0, im: -0.5 }]),
                    matrix: None,
                });
            }
            "gauge_flat_end3" => {
                self.scenario.get_or_insert_with(|| "lemma".into());
                self.algebroid.get_or_insert(AlgebroidSpec::Preset {
                    preset: "end_model_3".into(),
                    base_dim: Some(2),
                });
            }
            other => return Err(Error::config(format!("unknown preset {other:?}"))),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), Error> {
        if let Some(s) = &self.scenario {
            if !SCENARIOS.contains(&s.as_str()) {
                return Err(Error::config(format!(
                    "unknown scenario {s:?}; expected one of {SCENARIOS:?}"
                )));
            }
        }
        self.tolerances.clone().unwrap_or_default().validate()?;
        if let Some(m) = &self.metric {
            let n = m.len();
            if m.iter().any(|row| row.len() != n) {
                return Err(Error::config("metric must be a square matrix"));
            }
        }
        if let Some(v) = self.volume {
            if v == 0.0 {
                return Err(Error::config("volume scalar must be nonzero"));
            }
        }
        Ok(())
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tolerances.clone().unwrap_or_default()
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}

pub enum BuiltAlgebroid {
    Scalar(Arc<ScalarAlgebroid>),
    Product(Arc<TrivLieAlgebroid<TPolyField>>),
}

pub fn build_algebroid(spec: &AlgebroidSpec) -> Result<BuiltAlgebroid, Error> {
    match spec {
        AlgebroidSpec::Preset { preset, base_dim } => {
            let d = base_dim.unwrap_or(1);
            match preset.as_str() {
                "tangent" => Ok(BuiltAlgebroid::Scalar(tangent_algebroid(d))),
                "example_3_3" | "end_model_2" => Ok(BuiltAlgebroid::Scalar(build_end_model(d, 2))),
                "end_model_3" => Ok(BuiltAlgebroid::Scalar(build_end_model(d, 3))),
                "so3_model" => {
                    Ok(BuiltAlgebroid::Scalar(build_transitive(d, &LieStructure::so3())))
                }
                "product_line" => {
                    Ok(BuiltAlgebroid::Product(product_with_line(&tangent_algebroid(d))))
                }
                other => Err(Error::config(format!("unknown algebroid preset {other:?}"))),
            }
        }
        AlgebroidSpec::Explicit { base_dim, rank, anchor, structure } => {
            let d = *base_dim;
            let r = *rank;
            if anchor.len() != r || anchor.iter().any(|row| row.len() != d) {
                return Err(Error::config("anchor must be rank × base_dim"));
            }
            if structure.len() != r
                || structure.iter().any(|a| a.len() != r || a.iter().any(|b| b.len() != r))
            {
                return Err(Error::config("structure must be rank³"));
            }
            let proto = ScalarField::zero(d);
            let mut anchor_fields = Vec::with_capacity(r * d);
            for row in anchor {
                for lit in row {
                    anchor_fields.push(field_from_literal(d, lit)?);
                }
            }
            let mut structure_fields = Vec::with_capacity(r * r * r);
            for a in structure {
                for b in a {
                    for lit in b {
                        structure_fields.push(field_from_literal(d, lit)?);
                    }
                }
            }
            let alg = TrivLieAlgebroid::new_unchecked(
                d,
                r,
                anchor_fields,
                structure_fields,
                proto,
                None,
                None,
            )?;
            Ok(BuiltAlgebroid::Scalar(alg))
        }
    }
}

pub fn build_connection(
    spec: &ConnectionSpec,
    target: &Arc<ScalarAlgebroid>,
) -> Result<LConnection<ScalarField>, Error> {
    match spec.preset.as_deref() {
        Some("identity") => Ok(LConnection::identity(target)),
        Some("canonical") => canonical_splitting(target),
        Some("gauge_flat") => {
            let k = spec
                .k
                .as_ref()
                .ok_or_else(|| Error::config("gauge_flat needs a generator matrix"))?;
            let n = k.len();
            if k.iter().any(|row| row.len() != n) {
                return Err(Error::config("generator must be square"));
            }
            let mut flat = Vec::with_capacity(n * n);
            for row in k {
                flat.extend_from_slice(row);
            }
            let kmat = Mat::from_row_slice(n, n, &flat);
            let phi_lit = spec
                .phi
                .as_ref()
                .ok_or_else(|| Error::config("gauge_flat needs a phase field"))?;
            let phi = field_from_literal(target.base_dim(), phi_lit)?;
            gauge_connection(target, &[(kmat, phi)])
        }
        Some(other) => Err(Error::config(format!("unknown connection preset {other:?}"))),
        None => {
            let rows = spec
                .matrix
                .as_ref()
                .ok_or_else(|| Error::config("connection needs a preset or a matrix"))?;
            let r_t = target.rank();
            if rows.len() != r_t {
                return Err(Error::config("connection matrix must have target-rank rows"));
            }
            let r_s = rows[0].len();
            if rows.iter().any(|row| row.len() != r_s) {
                return Err(Error::config("connection matrix rows differ in length"));
            }
            let source = tangent_algebroid(target.base_dim());
            if r_s != source.rank() {
                return Err(Error::config(
                    "explicit connection matrices are read as maps from the tangent algebroid",
                ));
            }
            let mut mat = Vec::with_capacity(r_t * r_s);
            for row in rows {
                for lit in row {
                    mat.push(field_from_literal(target.base_dim(), lit)?);
                }
            }
            LConnection::new(source, target.clone(), mat)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_bundles_expand() {
        let cfg = RunConfig::from_json(r#"{"preset": "example_3_3"}"#).unwrap();
        assert_eq!(cfg.scenario.as_deref(), Some("example"));
        assert!(cfg.algebroid.is_some());
        let cfg2 = RunConfig::from_json(r#"{"preset": "gauge_flat_end2"}"#).unwrap();
        assert_eq!(cfg2.scenario.as_deref(), Some("crainic"));
        assert!(cfg2.connection.is_some());
    }

    #[test]
    fn unknown_scenario_is_rejected() {
        assert!(RunConfig::from_json(r#"{"scenario": "frobnicate"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"preset": "nope"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"unknown_field": 3}"#).is_err());
    }

    #[test]
    fn bad_tolerances_are_rejected() {
        let bad = r#"{"scenario": "validate", "tolerances": {"structure": 0.0}}"#;
        assert!(RunConfig::from_json(bad).is_err());
    }

    #[test]
    fn explicit_algebroid_builds() {
        // rank-1 tangent algebroid of the circle, written out longhand
        let text = r#"{
            "scenario": "validate",
            "algebroid": {
                "base_dim": 1,
                "rank": 1,
                "anchor": [[[{"index": [0], "re": 1.0}]]],
                "structure": [[[[]]]]
            }
        }"#;
        let cfg = RunConfig::from_json(text).unwrap();
        match build_algebroid(cfg.algebroid.as_ref().unwrap()).unwrap() {
            BuiltAlgebroid::Scalar(a) => {
                assert_eq!(a.rank(), 1);
                assert!(crate::algebroid::validate(&a, 1e-12).pass);
            }
            _ => panic!("expected a scalar algebroid"),
        }
    }

    #[test]
    fn gauge_connection_from_spec() {
        let a = build_end_model(1, 2);
        let spec = ConnectionSpec {
            preset: Some("gauge_flat".into()),
            k: Some(vec![vec![1.0, 0.0], vec![0.0, -1.0]]),
            phi: Some(vec![LitTerm { index: vec![1], re: 0.0, im: -0.5 }]),
            matrix: None,
        };
        let conn = build_connection(&spec, &a).unwrap();
        assert!(conn.validate(1e-12).pass);
        assert!(crate::connection::is_flat(&conn, 1e-12).unwrap().flat);
    }
}
