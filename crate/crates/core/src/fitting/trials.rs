//! Raw pointing trials and their CSV form.
//!
//! Header: `participant,W_deg,A_deg,x_deg,y_deg,mt_ms[,success]`.

use std::io::{Read, Write};

use serde::{Deserialize, Deserializer, Serialize};

use super::FitError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub participant: String,
    #[serde(rename = "W_deg")]
    pub w: f64,
    #[serde(rename = "A_deg")]
    pub a: f64,
    #[serde(rename = "x_deg")]
    pub x: f64,
    #[serde(rename = "y_deg")]
    pub y: f64,
    #[serde(rename = "mt_ms")]
    pub movement_time: f64,
    #[serde(default, deserialize_with = "flag", skip_serializing_if = "Option::is_none")]
    pub success: Option<bool>,
}

impl TrialRecord {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.w > 0.0 && self.w.is_finite()) {
            return Err(format!("W_deg must be positive, got {}", self.w));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(format!("A_deg must be positive, got {}", self.a));
        }
        if !(self.x.is_finite() && self.y.is_finite()) {
            return Err("x_deg and y_deg must be finite".into());
        }
        if !(self.movement_time > 0.0 && self.movement_time.is_finite()) {
            return Err(format!("mt_ms must be positive, got {}", self.movement_time));
        }
        Ok(())
    }
}

fn flag<'de, D: Deserializer<'de>>(de: D) -> Result<Option<bool>, D::Error> {
    let raw: Option<String> = Option::deserialize(de)?;
    match raw.as_deref().map(str::trim) {
        None | Some("") => Ok(None),
        Some("1") | Some("true") | Some("TRUE") | Some("True") => Ok(Some(true)),
        Some("0") | Some("false") | Some("FALSE") | Some("False") => Ok(Some(false)),
        Some(other) => Err(serde::de::Error::custom(format!("invalid success flag `{other}`"))),
    }
}

pub fn read_trials<R: Read>(reader: R) -> Result<Vec<TrialRecord>, FitError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| FitError::Csv(e.to_string()))?.clone();
    let expected = ["participant", "W_deg", "A_deg", "x_deg", "y_deg", "mt_ms"];
    let names: Vec<&str> = headers.iter().collect();
    let ok = names.len() >= expected.len()
        && names[..expected.len()] == expected
        && (names.len() == expected.len() || (names.len() == 7 && names[6] == "success"));
    if !ok {
        return Err(FitError::Csv(format!(
            "expected header `participant,W_deg,A_deg,x_deg,y_deg,mt_ms[,success]`, got `{}`",
            names.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<TrialRecord>().enumerate() {
        let line = i + 2;
        let trial = row.map_err(|e| FitError::Csv(format!("line {line}: {e}")))?;
        trial.validate().map_err(|e| FitError::Csv(format!("line {line}: {e}")))?;
        out.push(trial);
    }
    Ok(out)
}

pub fn write_trials<W: Write>(writer: W, trials: &[TrialRecord]) -> Result<(), FitError> {
    let with_success = trials.iter().any(|t| t.success.is_some());
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    let err = |e: csv::Error| FitError::Csv(e.to_string());
    let mut header = vec!["participant", "W_deg", "A_deg", "x_deg", "y_deg", "mt_ms"];
    if with_success {
        header.push("success");
    }
    wtr.write_record(&header).map_err(err)?;
    for t in trials {
        let mut rec = vec![
            t.participant.clone(),
            t.w.to_string(),
            t.a.to_string(),
            t.x.to_string(),
            t.y.to_string(),
            t.movement_time.to_string(),
        ];
        if with_success {
            rec.push(t.success.map(|s| s.to_string()).unwrap_or_default());
        }
        wtr.write_record(&rec).map_err(err)?;
    }
    wtr.flush().map_err(|e| FitError::Csv(e.to_string()))
}
