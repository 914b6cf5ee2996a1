//! Parameter grids over `(gamma / Omega, lambda / Omega)`.
//!
//! Cells are independent; they are evaluated in parallel and gathered in
//! row-major order (gamma rows, lambda columns), so results do not depend on
//! the worker count.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{self, DEFAULT_BLP_HORIZON, DEFAULT_BLP_SPACING, DEFAULT_MAXIMA_HORIZON};
use crate::model::{InitialState, ModelParams, SpectralWidth};
use crate::output::format_number;
use crate::propagator::{self, ChargingTrajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    StoredEnergyMax,
    ErgotropyMax,
    Nonmarkovianity,
    Trajectory,
}

impl Quantity {
    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::StoredEnergyMax => "stored_energy_max",
            Quantity::ErgotropyMax => "ergotropy_max",
            Quantity::Nonmarkovianity => "nonmarkovianity",
            Quantity::Trajectory => "trajectory",
        }
    }

    /// Default horizon in units of `Omega * tau`.
    pub fn default_horizon(self) -> f64 {
        match self {
            Quantity::Nonmarkovianity => DEFAULT_BLP_HORIZON,
            Quantity::Trajectory => 25.0,
            _ => DEFAULT_MAXIMA_HORIZON,
        }
    }

    /// Default grid: scan intervals for the non-Markovianity, points for a
    /// trajectory. Maxima always use their own fixed coarse scan.
    pub fn default_grid(self, horizon: f64) -> usize {
        match self {
            Quantity::Nonmarkovianity => (horizon / DEFAULT_BLP_SPACING).ceil() as usize,
            Quantity::Trajectory => 1001,
            _ => metrics::MAXIMA_SCAN_POINTS,
        }
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "stored_energy_max" => Ok(Quantity::StoredEnergyMax),
            "ergotropy_max" => Ok(Quantity::ErgotropyMax),
            "nonmarkovianity" => Ok(Quantity::Nonmarkovianity),
            "trajectory" => Ok(Quantity::Trajectory),
            other => Err(Error::Parse(format!(
                "unknown quantity {other:?} (stored_energy_max, ergotropy_max, nonmarkovianity, trajectory)"
            ))),
        }
    }
}

/// Parses an axis: either `start:stop:count[:log|:lin]` or a comma list.
/// List entries may be `inf`. Ranges default to linear spacing.
pub fn parse_axis(text: &str) -> Result<Vec<SpectralWidth>> {
    let text = text.trim();
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').map(str::trim).collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(Error::Parse(format!("axis range {text:?} must be start:stop:count[:log|lin]")));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Parse(format!("invalid number {s:?} in axis {text:?}")))
        };
        let (start, stop) = (num(parts[0])?, num(parts[1])?);
        let count: usize = parts[2]
            .parse()
            .map_err(|_| Error::Parse(format!("invalid count {:?} in axis {text:?}", parts[2])))?;
        let log = match parts.get(3) {
            None | Some(&"lin") => false,
            Some(&"log") => true,
            Some(other) => return Err(Error::Parse(format!("axis spacing {other:?} must be log or lin"))),
        };
        if count == 0 || !start.is_finite() || !stop.is_finite() {
            return Err(Error::Parse(format!("axis {text:?} must have finite ends and count >= 1")));
        }
        if log && (start <= 0.0 || stop <= 0.0) {
            return Err(Error::Parse(format!("log axis {text:?} needs positive ends")));
        }
        Ok(spaced(start, stop, count, log).into_iter().map(SpectralWidth::Finite).collect())
    } else {
        text.split(',').map(|s| s.parse::<SpectralWidth>()).collect()
    }
}

/// `count` points from `start` to `stop`, linear or logarithmic.
pub fn spaced(start: f64, stop: f64, count: usize, log: bool) -> Vec<f64> {
    if count == 1 {
        return vec![start];
    }
    (0..count)
        .map(|k| {
            let f = k as f64 / (count - 1) as f64;
            if k == count - 1 {
                stop
            } else if log {
                (start.ln() + f * (stop.ln() - start.ln())).exp()
            } else {
                start + f * (stop - start)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub gamma_over_omega: Vec<f64>,
    pub lambda_over_omega: Vec<SpectralWidth>,
    pub quantity: Quantity,
    /// Horizon in units of `Omega * tau`.
    pub tmax: f64,
    pub grid: usize,
    pub omega0: f64,
}

impl SweepSpec {
    /// Spec with the quantity's default horizon and grid, `omega0 = 1`.
    pub fn new(gamma_over_omega: Vec<f64>, lambda_over_omega: Vec<SpectralWidth>, quantity: Quantity) -> Self {
        let tmax = quantity.default_horizon();
        Self {
            gamma_over_omega,
            lambda_over_omega,
            quantity,
            tmax,
            grid: quantity.default_grid(tmax),
            omega0: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma_over_omega.is_empty() || self.lambda_over_omega.is_empty() {
            return Err(Error::InvalidParameter("sweep axes must be non-empty".into()));
        }
        if !(self.tmax.is_finite() && self.tmax > 0.0) {
            return Err(Error::InvalidParameter(format!("tmax must be positive, got {}", self.tmax)));
        }
        if self.grid < 2 {
            return Err(Error::InvalidParameter("grid must be at least 2".into()));
        }
        for cell in self.cells() {
            cell?;
        }
        Ok(())
    }

    fn cells(&self) -> impl Iterator<Item = Result<ModelParams>> + '_ {
        self.gamma_over_omega.iter().flat_map(move |&g| {
            self.lambda_over_omega
                .iter()
                .map(move |&l| ModelParams::new(self.omega0, 1.0, g, l))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellFlag {
    Ok,
    /// Closed qubit-cavity system (gamma = 0): the non-Markovianity diverges
    /// with the horizon; the value is the partial sum up to the horizon.
    Divergent,
    /// Trace distance still above threshold at the horizon.
    Truncated,
    /// Optimum found at the horizon.
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub quantity: Quantity,
    pub units: String,
    pub version: String,
    pub omega0: f64,
    #[serde(rename = "Omega")]
    pub omega: f64,
    pub tmax: f64,
    pub grid: usize,
}

/// Values on the axes' cross product, `values[i][j]` at
/// `(gamma_over_omega[i], lambda_over_omega[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub metadata: SweepMetadata,
    pub gamma_over_omega: Vec<f64>,
    pub lambda_over_omega: Vec<SpectralWidth>,
    pub values: Vec<Vec<f64>>,
    pub flags: Vec<Vec<CellFlag>>,
}

fn evaluate_cell(spec: &SweepSpec, params: &ModelParams) -> Result<(f64, CellFlag)> {
    let tmax = spec.tmax / params.coupling_qb_cavity();
    match spec.quantity {
        Quantity::StoredEnergyMax | Quantity::ErgotropyMax => {
            let r = metrics::maximize_over_tau(params, &InitialState::empty_battery(), tmax)?;
            let v = if spec.quantity == Quantity::StoredEnergyMax { r.delta_e_max } else { r.w_max };
            Ok((v, if r.at_boundary { CellFlag::Boundary } else { CellFlag::Ok }))
        }
        Quantity::Nonmarkovianity => {
            let r = metrics::blp_nonmarkovianity(params, tmax, spec.grid)?;
            let flag = if r.divergent {
                CellFlag::Divergent
            } else if r.truncated {
                CellFlag::Truncated
            } else {
                CellFlag::Ok
            };
            Ok((r.measure, flag))
        }
        Quantity::Trajectory => Err(Error::Unsupported(
            "trajectory sweeps produce curves; use run_trajectory_sweep".into(),
        )),
    }
}

/// Evaluates a scalar quantity on every grid cell using the current rayon pool.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let params: Vec<ModelParams> = spec.cells().collect::<Result<_>>()?;
    let cells: Vec<(f64, CellFlag)> = params
        .par_iter()
        .map(|p| evaluate_cell(spec, p))
        .collect::<Result<_>>()?;
    let ncol = spec.lambda_over_omega.len();
    let values = cells.chunks(ncol).map(|row| row.iter().map(|c| c.0).collect()).collect();
    let flags = cells.chunks(ncol).map(|row| row.iter().map(|c| c.1).collect()).collect();
    Ok(SweepResult {
        metadata: SweepMetadata {
            quantity: spec.quantity,
            units: "omega0".into(),
            version: crate::VERSION.into(),
            omega0: spec.omega0,
            omega: 1.0,
            tmax: spec.tmax,
            grid: spec.grid,
        },
        gamma_over_omega: spec.gamma_over_omega.clone(),
        lambda_over_omega: spec.lambda_over_omega.clone(),
        values,
        flags,
    })
}

/// Runs the sweep on a dedicated pool with `threads` workers.
pub fn run_sweep_with_threads(spec: &SweepSpec, threads: usize) -> Result<SweepResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    pool.install(|| run_sweep(spec))
}

/// One empty-battery trajectory per cell, row-major.
pub fn run_trajectory_sweep(spec: &SweepSpec) -> Result<Vec<ChargingTrajectory>> {
    spec.validate()?;
    let params: Vec<ModelParams> = spec.cells().collect::<Result<_>>()?;
    params
        .par_iter()
        .map(|p| {
            propagator::trajectory(
                p,
                &InitialState::empty_battery(),
                spec.tmax / p.coupling_qb_cavity(),
                spec.grid,
            )
        })
        .collect()
}

impl SweepResult {
    pub fn shape(&self) -> (usize, usize) {
        (self.gamma_over_omega.len(), self.lambda_over_omega.len())
    }

    pub fn get(&self, gamma_index: usize, lambda_index: usize) -> f64 {
        self.values[gamma_index][lambda_index]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let out: SweepResult = serde_json::from_str(text)?;
        let (rows, cols) = out.shape();
        if out.values.len() != rows
            || out.flags.len() != rows
            || out.values.iter().any(|r| r.len() != cols)
            || out.flags.iter().any(|r| r.len() != cols)
        {
            return Err(Error::Parse("sweep grid does not match its axes".into()));
        }
        Ok(out)
    }

    /// Wide CSV: one row per gamma, one column per lambda. Flagged cells are
    /// listed on metadata lines.
    pub fn to_csv(&self) -> String {
        let m = &self.metadata;
        let mut out = String::new();
        let _ = writeln!(out, "# tool: cavity-battery {}", m.version);
        let _ = writeln!(out, "# quantity: {}", m.quantity.as_str());
        let _ = writeln!(out, "# units: {}", m.units);
        let _ = writeln!(out, "# omega0: {}", format_number(m.omega0));
        let _ = writeln!(out, "# Omega: {}", format_number(m.omega));
        let _ = writeln!(out, "# tmax (Omega*tau): {}", format_number(m.tmax));
        let _ = writeln!(out, "# grid: {}", m.grid);
        let _ = writeln!(out, "# rows: gamma/Omega, columns: lambda/Omega");
        for (i, row) in self.flags.iter().enumerate() {
            for (j, flag) in row.iter().enumerate() {
                if *flag != CellFlag::Ok {
                    let _ = writeln!(
                        out,
                        "# flag: gamma/Omega={} lambda/Omega={} {}",
                        format_number(self.gamma_over_omega[i]),
                        width_label(self.lambda_over_omega[j]),
                        serde_json::to_value(flag).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
                    );
                }
            }
        }
        out.push_str("gamma_over_omega");
        for l in &self.lambda_over_omega {
            out.push(',');
            out.push_str(&width_label(*l));
        }
        out.push('\n');
        for (g, row) in self.gamma_over_omega.iter().zip(&self.values) {
            out.push_str(&format_number(*g));
            for v in row {
                out.push(',');
                out.push_str(&format_number(*v));
            }
            out.push('\n');
        }
        out
    }
}

pub fn width_label(w: SpectralWidth) -> String {
    match w {
        SpectralWidth::Finite(x) => format_number(x),
        SpectralWidth::Infinite => "inf".into(),
    }
}

/// Long-format CSV for a trajectory sweep: axis values prepended to each row.
pub fn trajectories_csv(spec: &SweepSpec, trajectories: &[ChargingTrajectory]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# tool: cavity-battery {}", crate::VERSION);
    let _ = writeln!(out, "# quantity: trajectory");
    let _ = writeln!(out, "# omega0: {}", format_number(spec.omega0));
    out.push_str("gamma_over_omega,lambda_over_omega,");
    out.push_str(&crate::output::TRAJECTORY_COLUMNS.join(","));
    out.push('\n');
    for traj in trajectories {
        let p = traj.params;
        let prefix = format!(
            "{},{}",
            format_number(p.coupling_cavity_env() / p.coupling_qb_cavity()),
            width_label(p.spectral_width().scaled(1.0 / p.coupling_qb_cavity()))
        );
        for k in 0..traj.len() {
            let cells = [
                traj.times[k],
                traj.kappa[k].re,
                traj.kappa[k].im,
                traj.population[k],
                traj.stored_energy[k],
                traj.ergotropy[k],
            ];
            out.push_str(&prefix);
            for c in cells {
                out.push(',');
                out.push_str(&format_number(c));
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_axes() {
        let a = parse_axis("0.1:10:3:log").unwrap();
        let v: Vec<f64> = a.iter().map(|w| w.finite().unwrap()).collect();
        assert!((v[0] - 0.1).abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-14 && v[2] == 10.0);
        let b = parse_axis("0:1:5").unwrap();
        assert_eq!(b[2], SpectralWidth::Finite(0.5));
        let c = parse_axis("0.1, 1,inf").unwrap();
        assert_eq!(c, vec![SpectralWidth::Finite(0.1), SpectralWidth::Finite(1.0), SpectralWidth::Infinite]);
        assert!(parse_axis("1:2").is_err());
        assert!(parse_axis("0:1:3:log").is_err());
        assert!(parse_axis("1:2:x").is_err());
        assert!(parse_axis("1:2:3:cubic").is_err());
        assert!(parse_axis("a,b").is_err());
    }

    #[test]
    fn rejects_invalid_specs() {
        let mut s = SweepSpec::new(vec![], vec![SpectralWidth::Finite(1.0)], Quantity::StoredEnergyMax);
        assert!(run_sweep(&s).is_err());
        s.gamma_over_omega = vec![0.1];
        s.lambda_over_omega = vec![SpectralWidth::Finite(-1.0)];
        assert!(run_sweep(&s).is_err());
        s.lambda_over_omega = vec![SpectralWidth::Finite(1.0)];
        s.quantity = Quantity::Trajectory;
        assert!(run_sweep(&s).is_err());
    }

    #[test]
    fn single_cell_matches_direct_maxima() {
        let s = SweepSpec::new(vec![0.5], vec![SpectralWidth::Finite(2.0)], Quantity::ErgotropyMax);
        let r = run_sweep(&s).unwrap();
        let p = ModelParams::from_ratios(0.5, SpectralWidth::Finite(2.0)).unwrap();
        assert_eq!(r.get(0, 0), metrics::charging_maxima(&p).unwrap().w_max);
        assert_eq!(r.flags[0][0], CellFlag::Ok);
    }

    #[test]
    fn divergent_cells_are_flagged() {
        let mut s = SweepSpec::new(vec![0.0, 5.0], vec![SpectralWidth::Infinite], Quantity::Nonmarkovianity);
        s.tmax = 50.0;
        s.grid = 5000;
        let r = run_sweep(&s).unwrap();
        assert_eq!(r.flags[0][0], CellFlag::Divergent);
        assert_eq!(r.flags[1][0], CellFlag::Ok);
        assert!(r.values.iter().flatten().all(|v| v.is_finite()));
        assert!(r.to_csv().contains("# flag: gamma/Omega=0.0000000000000000e0 lambda/Omega=inf divergent"));
    }

    #[test]
    fn trajectory_sweep_long_format() {
        let mut s = SweepSpec::new(vec![0.1, 1.0], vec![SpectralWidth::Finite(0.1)], Quantity::Trajectory);
        s.grid = 11;
        let t = run_trajectory_sweep(&s).unwrap();
        assert_eq!(t.len(), 2);
        let csv = trajectories_csv(&s, &t);
        let data_rows = csv.lines().filter(|l| !l.starts_with('#')).count();
        assert_eq!(data_rows, 1 + 22);
    }
}
