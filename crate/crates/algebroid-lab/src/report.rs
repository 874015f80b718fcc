//! Machine- and human-readable verification records. JSON rendering is
//! deterministic: sorted keys, floats printed with 17 significant digits,
//! no wall-clock content.

use serde::{Deserialize, Serialize};

use crate::algebroid::LForm;
use crate::classes::CharClass;
use crate::error::Error;
use crate::fields::ScalarField;

/// One verification record; every pass carries its measured defect.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Check {
    pub name: String,
    /// Formula tag naming the identity being checked.
    pub formula: String,
    pub tolerance: f64,
    pub defect: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn measured(
        name: impl Into<String>,
        formula: impl Into<String>,
        tolerance: f64,
        defect: f64,
    ) -> Self {
        assert!(defect.is_finite(), "check defect must be a finite number");
        Check {
            name: name.into(),
            formula: formula.into(),
            tolerance,
            defect,
            pass: defect <= tolerance,
            note: None,
        }
    }

    /// A check that requires the measured value to EXCEED a floor.
    pub fn floor(
        name: impl Into<String>,
        formula: impl Into<String>,
        floor: f64,
        value: f64,
    ) -> Self {
        assert!(value.is_finite(), "check value must be a finite number");
        Check {
            name: name.into(),
            formula: formula.into(),
            tolerance: floor,
            defect: value,
            pass: value >= floor,
            note: Some("lower-bound check: pass iff defect >= tolerance".into()),
        }
    }

    pub fn failed(name: impl Into<String>, formula: impl Into<String>, message: String) -> Self {
        Check {
            name: name.into(),
            formula: formula.into(),
            tolerance: 0.0,
            defect: f64::MAX,
            pass: false,
            note: Some(message),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CoeffRecord {
    pub index: Vec<i32>,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ComboRecord {
    pub frames: Vec<usize>,
    pub coeffs: Vec<CoeffRecord>,
}

/// Serialized characteristic-class record including the representative form.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ClassRecord {
    pub name: String,
    pub degree: usize,
    pub formula: String,
    pub closedness_defect: f64,
    pub representative_norm: f64,
    /// Worst l1 mass discarded by a truncated product while computing the
    /// representative (0 when every product stayed within the cap).
    pub truncation_loss: f64,
    pub representative: Vec<ComboRecord>,
}

fn form_records(form: &LForm<ScalarField>) -> Vec<ComboRecord> {
    let mut out = Vec::new();
    for (combo, val) in form.combos().iter().zip(form.vals()) {
        if val.is_zero() {
            continue;
        }
        let coeffs = val
            .modes()
            .map(|(k, c)| CoeffRecord { index: k.clone(), re: c.re, im: c.im })
            .collect();
        out.push(ComboRecord { frames: combo.clone(), coeffs });
    }
    out
}

impl ClassRecord {
    pub fn from_class(c: &CharClass) -> Self {
        ClassRecord {
            name: c.name.clone(),
            degree: c.degree,
            formula: c.formula.clone(),
            closedness_defect: c.closedness_defect,
            representative_norm: c.representative.norm(),
            truncation_loss: c.representative.trunc_loss(),
            representative: form_records(&c.representative),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub trunc_cap: usize,
    pub config_echo: serde_json::Value,
    pub checks: Vec<Check>,
    pub classes: Vec<ClassRecord>,
    pub pass: bool,
}

impl RunReport {
    pub fn new(
        scenario: impl Into<String>,
        seed: u64,
        trunc_cap: usize,
        config_echo: serde_json::Value,
        checks: Vec<Check>,
        classes: Vec<ClassRecord>,
    ) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        RunReport {
            scenario: scenario.into(),
            seed,
            trunc_cap,
            config_echo,
            checks,
            classes,
            pass,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Text,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "json" => Ok(Format::Json),
            "text" => Ok(Format::Text),
            other => Err(Error::config(format!("unknown format {other:?}"))),
        }
    }
}

/// 17-significant-digit float rendering, a valid JSON number token.
fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn render_value(v: &serde_json::Value, out: &mut String) {
    match v {
        serde_json::Value::Null => out.push_str("null"),
        serde_json::Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                out.push_str(&format_float(n.as_f64().expect("finite float")));
            }
        }
        serde_json::Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string encodes"));
        }
        serde_json::Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                render_value(item, out);
            }
            out.push(']');
        }
        serde_json::Value::Object(map) => {
            // serde_json's default map iterates in key order
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("key encodes"));
                out.push(':');
                render_value(item, out);
            }
            out.push('}');
        }
    }
}

pub fn render_json(report: &RunReport) -> Result<String, Error> {
    let value = serde_json::to_value(report)
        .map_err(|e| Error::config(format!("report serialization failed: {e}")))?;
    let mut out = String::new();
    render_value(&value, &mut out);
    out.push('\n');
    Ok(out)
}

pub fn render_text(report: &RunReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "scenario: {}   seed: {}   trunc cap: {}\n",
        report.scenario, report.seed, report.trunc_cap
    ));
    out.push_str(&format!(
        "{:<44} {:>12} {:>12}  {:<6}\n",
        "check", "tolerance", "defect", "result"
    ));
    out.push_str(&"-".repeat(80));
    out.push('\n');
    for c in &report.checks {
        out.push_str(&format!(
            "{:<44} {:>12.3e} {:>12.3e}  {}\n",
            truncate(&c.name, 44),
            c.tolerance,
            c.defect,
            if c.pass { "pass" } else { "FAIL" }
        ));
        if let Some(note) = &c.note {
            out.push_str(&format!("    note: {note}\n"));
        }
    }
    if !report.classes.is_empty() {
        out.push_str(&format!(
            "\n{:<22} {:>6} {:>14} {:>14} {:>12}\n",
            "class", "degree", "closedness", "norm", "trunc loss"
        ));
        out.push_str(&"-".repeat(74));
        out.push('\n');
        for cl in &report.classes {
            out.push_str(&format!(
                "{:<22} {:>6} {:>14.3e} {:>14.6e} {:>12.3e}\n",
                truncate(&cl.name, 22),
                cl.degree,
                cl.closedness_defect,
                cl.representative_norm,
                cl.truncation_loss
            ));
        }
    }
    out.push_str(&format!("\noverall: {}\n", if report.pass { "pass" } else { "FAIL" }));
    out
}

fn truncate(s: &str, width: usize) -> String {
    if s.chars().count() <= width {
        s.to_string()
    } else {
        s.chars().take(width - 1).chain(std::iter::once('…')).collect()
    }
}

pub fn render(report: &RunReport, format: Format) -> Result<Vec<u8>, Error> {
    Ok(match format {
        Format::Json => render_json(report)?.into_bytes(),
        Format::Text => render_text(report).into_bytes(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunReport {
        RunReport::new(
            "validate",
            42,
            8,
            serde_json::json!({"scenario": "validate"}),
            vec![
                Check::measured("jacobi", "jacobi identity on frames", 1e-10, 3.5e-16),
                Check::measured("anchor", "anchor is a bracket homomorphism", 1e-10, 0.0),
            ],
            vec![],
        )
    }

    #[test]
    fn empty_report_renders() {
        let r = RunReport::new("validate", 1, 8, serde_json::Value::Null, vec![], vec![]);
        let json = render_json(&r).unwrap();
        assert!(json.contains("\"checks\":[]"));
        assert!(r.pass);
    }

    #[test]
    fn json_round_trips() {
        let r = sample();
        let json = render_json(&r).unwrap();
        let back: RunReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn rendering_is_byte_deterministic() {
        let r = sample();
        assert_eq!(render_json(&r).unwrap(), render_json(&r).unwrap());
    }

    #[test]
    fn floats_carry_17_significant_digits() {
        assert_eq!(format_float(1.0), "1.0000000000000000e0");
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(-0.5), "-5.0000000000000000e-1");
        // every rendered float parses back to the identical bits
        for x in [3.5e-16, 1e-10, std::f64::consts::PI, 2.0 / 3.0, 6.02e23] {
            let s = format_float(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn floor_checks_pass_above_the_bound() {
        let c = Check::floor("residual", "lower bound", 0.1, 0.25);
        assert!(c.pass);
        let c2 = Check::floor("residual", "lower bound", 0.1, 1e-15);
        assert!(!c2.pass);
    }

    #[test]
    fn text_rendering_contains_the_table() {
        let t = render_text(&sample());
        assert!(t.contains("jacobi"));
        assert!(t.contains("pass"));
    }
}
