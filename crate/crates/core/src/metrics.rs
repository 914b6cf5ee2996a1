//! Figures of merit of the charging process.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{InitialState, ModelParams};
use crate::propagator::Propagator;

/// Slack allowed above unit population from rounding.
const POPULATION_SLACK: f64 = 1e-9;

/// Horizon of the non-Markovianity integral, in units of `1 / Omega`.
pub const DEFAULT_BLP_HORIZON: f64 = 200.0;
/// Scan spacing for backflow detection, in units of `1 / Omega`.
pub const DEFAULT_BLP_SPACING: f64 = 1e-3;
/// Trace distance at the horizon above which the integral is truncated.
pub const TRUNCATION_THRESHOLD: f64 = 1e-6;
/// Charging-time horizon for the maxima, in units of `1 / Omega`.
pub const DEFAULT_MAXIMA_HORIZON: f64 = 50.0;
/// Points of the coarse scan preceding golden-section refinement.
const PEAK_CANDIDATE_MARGIN: f64 = 1e-2;
const PEAK_TIE_TOLERANCE: f64 = 1e-12;

pub const MAXIMA_SCAN_POINTS: usize = 2000;

fn check_population(population: f64) -> Result<()> {
    if population.is_finite() && (0.0..=1.0 + POPULATION_SLACK).contains(&population) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "population must lie in [0, 1], got {population}"
        )))
    }
}

/// Mean battery energy above its ground state, `omega0 * p`.
pub fn stored_energy(params: &ModelParams, population: f64) -> Result<f64> {
    check_population(population)?;
    Ok(params.omega0() * population)
}

/// Ergotropy of a qubit diagonal in its energy basis with excited population `p`:
/// `omega0 (2p - 1)` above half filling, zero otherwise.
pub fn ergotropy_qubit(params: &ModelParams, population: f64) -> Result<f64> {
    check_population(population)?;
    if population > 0.5 {
        Ok(params.omega0() * (2.0 * population - 1.0))
    } else {
        Ok(0.0)
    }
}

fn check_hermitian(m: &DMatrix<Complex64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::InvalidMatrix(format!("{what} is not square")));
    }
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let asym = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if asym > 1e-9 * scale {
        return Err(Error::InvalidMatrix(format!("{what} is not Hermitian")));
    }
    Ok(())
}

/// Ergotropy `tr(rho H) - tr(sigma H)` with `sigma` the passive state of `rho`.
///
/// The passive state puts the eigenvalues of `rho`, in decreasing order, on
/// the energy levels of `H` in increasing order.
pub fn ergotropy_general(rho: &DMatrix<Complex64>, hamiltonian: &DMatrix<Complex64>) -> Result<f64> {
    check_hermitian(rho, "density matrix")?;
    check_hermitian(hamiltonian, "Hamiltonian")?;
    let d = rho.nrows();
    if d < 2 || hamiltonian.nrows() != d {
        return Err(Error::InvalidMatrix(format!(
            "need matching dimensions >= 2, got {} and {}",
            d,
            hamiltonian.nrows()
        )));
    }
    let trace = rho.trace();
    if (trace - Complex64::new(1.0, 0.0)).norm() > 1e-9 {
        return Err(Error::InvalidMatrix(format!("trace of density matrix is {trace}")));
    }
    // Symmetrize before decomposing so rounding asymmetry does not leak in.
    let rho_h = (rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    let h_h = (hamiltonian + hamiltonian.adjoint()) * Complex64::new(0.5, 0.0);

    let mut populations: Vec<f64> = rho_h.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    if populations.iter().any(|&r| r < -1e-9) {
        return Err(Error::InvalidMatrix("density matrix is not positive semidefinite".into()));
    }
    let mut energies: Vec<f64> = h_h.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    populations.sort_by(|a, b| b.total_cmp(a));
    energies.sort_by(f64::total_cmp);

    let mean_energy = (&rho_h * &h_h).trace().re;
    let passive_energy: f64 = populations.iter().zip(&energies).map(|(r, e)| r * e).sum();
    Ok((mean_energy - passive_energy).max(0.0))
}

/// Battery Hamiltonian `omega0 |e><e|` in the basis `(|e>, |g>)`.
pub fn battery_hamiltonian(omega0: f64) -> Matrix2<Complex64> {
    Matrix2::new(
        Complex64::new(omega0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
    )
}

/// Reduced battery state in the basis `(|e>, |g>)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitDensityMatrix {
    matrix: Matrix2<Complex64>,
}

impl QubitDensityMatrix {
    pub fn new(matrix: Matrix2<Complex64>) -> Result<Self> {
        let asym = (matrix - matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if asym > 1e-12 {
            return Err(Error::InvalidMatrix("qubit state is not Hermitian".into()));
        }
        if (matrix.trace() - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
            return Err(Error::InvalidMatrix("qubit state trace is not 1".into()));
        }
        let out = Self { matrix };
        let (lo, hi) = out.eigenvalues();
        if lo < -1e-12 || hi > 1.0 + 1e-12 {
            return Err(Error::InvalidMatrix("qubit state eigenvalues outside [0, 1]".into()));
        }
        Ok(out)
    }

    /// `p |e><e| + (1 - p) |g><g|`.
    pub fn from_population(population: f64) -> Result<Self> {
        check_population(population)?;
        let p = population.min(1.0);
        Self::new(Matrix2::new(
            Complex64::new(p, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0 - p, 0.0),
        ))
    }

    pub fn matrix(&self) -> &Matrix2<Complex64> {
        &self.matrix
    }

    fn eigenvalues(&self) -> (f64, f64) {
        hermitian_2x2_eigenvalues(&self.matrix)
    }

    pub fn excited_population(&self) -> f64 {
        self.matrix[(0, 0)].re
    }

    /// `(1/2) tr |rho - other|`.
    pub fn trace_distance(&self, other: &Self) -> f64 {
        let (lo, hi) = hermitian_2x2_eigenvalues(&(self.matrix - other.matrix));
        0.5 * (lo.abs() + hi.abs())
    }
}

fn hermitian_2x2_eigenvalues(m: &Matrix2<Complex64>) -> (f64, f64) {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = m[(0, 1)].norm();
    let mean = 0.5 * (a + d);
    let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    (mean - radius, mean + radius)
}

/// Information backflow of the battery's reduced dynamics.
///
/// The trace distance is taken between the evolutions of `|e><e|` and
/// `|g><g|`. The ground state is stationary, so the distance is the excited
/// population reached from a fully charged battery, `D(t) = |G(t)|^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonMarkovReport {
    pub measure: f64,
    /// Intervals of increasing trace distance, in units of `Omega * t`.
    pub backflow_intervals: Vec<(f64, f64)>,
    /// Closed qubit-cavity system: recurrences never decay and the measure
    /// grows without bound with the horizon.
    pub divergent: bool,
    /// The trace distance had not decayed below the threshold at the horizon.
    pub truncated: bool,
    /// Trace distance at the horizon.
    pub final_distance: f64,
    /// Horizon in units of `Omega * t`.
    pub horizon: f64,
}

/// Non-Markovianity with the default horizon and scan spacing.
pub fn blp_nonmarkovianity_default(params: &ModelParams) -> Result<NonMarkovReport> {
    let omega = params.coupling_qb_cavity();
    let tmax = DEFAULT_BLP_HORIZON / omega;
    let grid = (DEFAULT_BLP_HORIZON / DEFAULT_BLP_SPACING).round() as usize;
    blp_nonmarkovianity(params, tmax, grid)
}

/// Sums the trace-distance increases on `[0, tmax]`, scanning `grid`
/// intervals for sign changes of the rate and locating each by bisection.
pub fn blp_nonmarkovianity(params: &ModelParams, tmax: f64, grid: usize) -> Result<NonMarkovReport> {
    if !(tmax.is_finite() && tmax > 0.0) {
        return Err(Error::InvalidParameter(format!("tmax must be positive, got {tmax}")));
    }
    if grid < 2 {
        return Err(Error::InvalidParameter("scan grid needs at least 2 intervals".into()));
    }
    let prop = Propagator::new(params)?;
    let omega = params.coupling_qb_cavity();
    let excited = InitialState::excited_battery();
    let distance = |t: f64| prop.amplitudes(&excited, t).c2.norm_sqr();
    // dD/dt = 2 Re(conj(c2) c2') with c2' = -i Omega c1.
    let rate = |t: f64| {
        let a = prop.amplitudes(&excited, t);
        2.0 * omega * (a.c2.conj() * a.c1).im
    };
    let crossing = |mut lo: f64, mut hi: f64, rising: bool| {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if (rate(mid) > 0.0) == rising {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };

    let mut intervals = Vec::new();
    let mut measure = 0.0;
    let mut open: Option<f64> = None;
    let mut prev_t = 0.0;
    let mut prev_up = rate(0.0) > 0.0;
    if prev_up {
        open = Some(0.0);
    }
    for k in 1..=grid {
        let t = tmax * k as f64 / grid as f64;
        let up = rate(t) > 0.0;
        if up && !prev_up {
            open = Some(crossing(prev_t, t, true));
        } else if !up && prev_up {
            let end = crossing(prev_t, t, false);
            if let Some(start) = open.take() {
                push_interval(&mut intervals, &mut measure, start, end, distance, omega);
            }
        }
        prev_t = t;
        prev_up = up;
    }
    if let Some(start) = open {
        push_interval(&mut intervals, &mut measure, start, tmax, distance, omega);
    }
    let final_distance = distance(tmax);
    Ok(NonMarkovReport {
        measure,
        backflow_intervals: intervals,
        divergent: params.coupling_cavity_env() == 0.0,
        truncated: final_distance > TRUNCATION_THRESHOLD,
        final_distance,
        horizon: omega * tmax,
    })
}

fn push_interval(
    intervals: &mut Vec<(f64, f64)>,
    measure: &mut f64,
    start: f64,
    end: f64,
    distance: impl Fn(f64) -> f64,
    omega: f64,
) {
    let gain = distance(end) - distance(start);
    if gain > 0.0 {
        *measure += gain;
        intervals.push((omega * start, omega * end));
    }
}

/// Optimal charging over the charging time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaximaReport {
    pub delta_e_max: f64,
    pub w_max: f64,
    /// Optimal `Omega * tau` for the stored energy.
    pub tau_at_e_max: f64,
    /// Optimal `Omega * tau` for the ergotropy (0 when no ergotropy is reached).
    pub tau_at_w_max: f64,
    /// The best coarse-grid point was the horizon itself.
    pub at_boundary: bool,
}

/// Maximum of `f` on `[lo, hi]` by golden-section search, to bracket width `tol`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Maximizes stored energy and ergotropy over the charging time on `[0, tmax]`.
pub fn maximize_over_tau(params: &ModelParams, init: &InitialState, tmax: f64) -> Result<MaximaReport> {
    if !(tmax.is_finite() && tmax > 0.0) {
        return Err(Error::InvalidParameter(format!("tmax must be positive, got {tmax}")));
    }
    let prop = Propagator::new(params)?;
    let omega = params.coupling_qb_cavity();
    let population = |t: f64| prop.amplitudes(init, t).population();

    let n = MAXIMA_SCAN_POINTS;
    let grid: Vec<f64> = (0..n).map(|k| tmax * k as f64 / (n - 1) as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&t| population(t)).collect();
    let scan_max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    // Refine every local peak of the scan that is near the top, then keep the
    // earliest one that reaches the global value. Undamped Rabi cycles tie.
    let mut peaks: Vec<(usize, f64, f64)> = Vec::new();
    for k in 0..n {
        let left = k == 0 || values[k] >= values[k - 1];
        let right = k == n - 1 || values[k] >= values[k + 1];
        if !(left && right) || values[k] < scan_max - PEAK_CANDIDATE_MARGIN {
            continue;
        }
        let lo = grid[k.saturating_sub(1)];
        let hi = grid[(k + 1).min(n - 1)];
        let (t, p) = golden_section_max(population, lo, hi, 1e-8 / omega);
        peaks.push(if p >= values[k] { (k, t, p) } else { (k, grid[k], values[k]) });
    }
    let top = peaks.iter().map(|x| x.2).fold(f64::NEG_INFINITY, f64::max);
    let &(best, t_opt, p_opt) = peaks
        .iter()
        .find(|x| x.2 >= top - PEAK_TIE_TOLERANCE)
        .expect("scan has at least one local maximum");
    let p_max = p_opt.min(1.0);

    let p0 = init.c2_0().norm_sqr();
    let delta_e_max = params.omega0() * (p_max - p0);
    let w_max = ergotropy_qubit(params, p_max)?;
    Ok(MaximaReport {
        delta_e_max,
        w_max,
        tau_at_e_max: omega * t_opt,
        tau_at_w_max: if w_max > 0.0 { omega * t_opt } else { 0.0 },
        at_boundary: best == n - 1,
    })
}

/// Maxima from an empty battery with the default horizon.
pub fn charging_maxima(params: &ModelParams) -> Result<MaximaReport> {
    maximize_over_tau(
        params,
        &InitialState::empty_battery(),
        DEFAULT_MAXIMA_HORIZON / params.coupling_qb_cavity(),
    )
}
