//! CSV and JSON encodings shared by the CLI and the figure bundles.
//!
//! CSV: comma separated, `.` decimal point, 17 significant digits, one header
//! row, metadata on leading `#` lines.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagator::ChargingTrajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Parse(format!("unknown format {other:?} (csv or json)"))),
        }
    }
}

/// Formats a float with 17 significant digits; non-finite values as `inf`,
/// `-inf` or `nan`.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// A rectangular numeric table with free-form metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            metadata: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| format_number(x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn encode(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => Ok(self.to_csv()),
            Format::Json => self.to_json(),
        }
    }
}

pub const TRAJECTORY_COLUMNS: [&str; 6] = [
    "Omega_tau",
    "re_kappa",
    "im_kappa",
    "population",
    "stored_energy",
    "ergotropy",
];

pub fn trajectory_table(traj: &ChargingTrajectory) -> Table {
    let p = &traj.params;
    let mut table = Table::new(&TRAJECTORY_COLUMNS)
        .meta("tool", format!("cavity-battery {}", crate::VERSION))
        .meta("units", "energy in omega0, time as Omega*tau")
        .meta("omega0", format_number(p.omega0()))
        .meta("Omega", format_number(p.coupling_qb_cavity()))
        .meta("gamma", format_number(p.coupling_cavity_env()))
        .meta("lambda", p.spectral_width().finite().map_or("inf".into(), format_number));
    for k in 0..traj.len() {
        table.push(vec![
            traj.times[k],
            traj.kappa[k].re,
            traj.kappa[k].im,
            traj.population[k],
            traj.stored_energy[k],
            traj.ergotropy[k],
        ]);
    }
    table
}
