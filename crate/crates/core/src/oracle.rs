//! Direct time integration of the amplitude equations.
//!
//! The Lorentzian memory integral is closed by the pseudomode variable `z`:
//!
//! ```text
//! c1' = -i Omega c2 - (gamma lambda / 2) z
//! c2' = -i Omega c1
//! z'  = c1 - lambda z
//! ```
//!
//! and in the memoryless limit the kernel becomes local:
//!
//! ```text
//! c1' = -i Omega c2 - (gamma / 2) c1
//! c2' = -i Omega c1
//! ```
//!
//! This path shares nothing with the Laplace-domain propagator and serves as
//! its reference.

use nalgebra::Matrix3;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{AmplitudeState, InitialState, ModelParams};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
const MAX_STEPS: usize = 50_000_000;

/// Amplitudes sampled at the requested output times.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub states: Vec<AmplitudeState>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

/// `n` equally spaced times on `[0, tmax]`.
pub fn uniform_times(tmax: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![tmax],
        _ => (0..n).map(|k| tmax * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Generator of the three-component system `(c1, c2, z)`.
pub fn system_matrix(params: &ModelParams) -> Result<Matrix3<Complex64>> {
    let width = finite_width(params)?;
    let omega = params.coupling_qb_cavity();
    let weight = params.coupling_cavity_env() * width / 2.0;
    let one = Complex64::new(1.0, 0.0);
    Ok(Matrix3::new(
        ZERO,
        -I * omega,
        -weight * one,
        -I * omega,
        ZERO,
        ZERO,
        one,
        ZERO,
        -width * one,
    ))
}

fn finite_width(params: &ModelParams) -> Result<f64> {
    params.spectral_width().finite().ok_or_else(|| {
        Error::Unsupported("memoryless parameters: use integrate_memoryless".into())
    })
}

fn check_inputs(times: &[f64], tol: f64) -> Result<()> {
    if !(1e-12..=1e-6).contains(&tol) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must lie in [1e-12, 1e-6], got {tol}"
        )));
    }
    let mut prev = 0.0;
    for &t in times {
        if !t.is_finite() || t < prev {
            return Err(Error::InvalidParameter(
                "output times must be finite, non-negative and sorted".into(),
            ));
        }
        prev = t;
    }
    Ok(())
}

/// Integrates the pseudomode system with a finite reservoir width.
pub fn integrate(
    params: &ModelParams,
    init: &InitialState,
    times: &[f64],
    tol: f64,
) -> Result<OdeSolution> {
    let width = finite_width(params)?;
    check_inputs(times, tol)?;
    let omega = params.coupling_qb_cavity();
    let weight = params.coupling_cavity_env() * width / 2.0;
    let rhs = move |y: &[Complex64; 3]| {
        [
            -I * omega * y[1] - weight * y[2],
            -I * omega * y[0],
            y[0] - width * y[2],
        ]
    };
    let y0 = [init.c1_0(), init.c2_0(), ZERO];
    let (states, accepted, rejected) = dormand_prince(rhs, y0, times, tol, params.rate_scale())?;
    Ok(OdeSolution {
        times: times.to_vec(),
        states: states
            .into_iter()
            .map(|y| AmplitudeState { c1: y[0], c2: y[1], z: y[2] })
            .collect(),
        accepted_steps: accepted,
        rejected_steps: rejected,
    })
}

/// Integrates the local (memoryless) two-component system.
pub fn integrate_memoryless(
    params: &ModelParams,
    init: &InitialState,
    times: &[f64],
    tol: f64,
) -> Result<OdeSolution> {
    if !params.is_memoryless() {
        return Err(Error::Unsupported(
            "finite spectral width: use integrate".into(),
        ));
    }
    check_inputs(times, tol)?;
    let omega = params.coupling_qb_cavity();
    let drag = params.coupling_cavity_env() / 2.0;
    let rhs = move |y: &[Complex64; 2]| [-I * omega * y[1] - drag * y[0], -I * omega * y[0]];
    let y0 = [init.c1_0(), init.c2_0()];
    let (states, accepted, rejected) = dormand_prince(rhs, y0, times, tol, params.rate_scale())?;
    Ok(OdeSolution {
        times: times.to_vec(),
        states: states
            .into_iter()
            .map(|y| AmplitudeState { c1: y[0], c2: y[1], z: ZERO })
            .collect(),
        accepted_steps: accepted,
        rejected_steps: rejected,
    })
}

// Dormand-Prince 5(4) tableau. The system is autonomous, so the nodes c_i
// are not needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine<const N: usize>(y: &[Complex64; N], h: f64, terms: &[(f64, &[Complex64; N])]) -> [Complex64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = ZERO;
        for (w, k) in terms {
            acc += *w * k[i];
        }
        *o += h * acc;
    }
    out
}

/// Adaptive integration of the autonomous system `y' = f(y)`.
///
/// Steps are clipped so that every requested time is hit exactly; outputs
/// carry full integrator accuracy with no interpolation.
fn dormand_prince<const N: usize>(
    f: impl Fn(&[Complex64; N]) -> [Complex64; N],
    y0: [Complex64; N],
    times: &[f64],
    tol: f64,
    rate_scale: f64,
) -> Result<(Vec<[Complex64; N]>, usize, usize)> {
    let mut out = Vec::with_capacity(times.len());
    let mut t = 0.0;
    let mut y = y0;
    let mut k1 = f(&y);
    let mut h = tol.powf(0.2) * 0.1 / rate_scale.max(1e-3);
    let (mut accepted, mut rejected) = (0usize, 0usize);

    for &target in times {
        while t < target {
            if accepted + rejected > MAX_STEPS {
                return Err(Error::Numerical("integrator exceeded its step budget".into()));
            }
            let unclipped = h;
            let clipped = t + h >= target;
            let step = if clipped { target - t } else { h };

            let k2 = f(&combine(&y, step, &[(A21, &k1)]));
            let k3 = f(&combine(&y, step, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(&combine(&y, step, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(&combine(&y, step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
            let k6 = f(&combine(
                &y,
                step,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ));
            let y_new = combine(
                &y,
                step,
                &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            );
            let k7 = f(&y_new);

            let mut err: f64 = 0.0;
            for i in 0..N {
                let e = step
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let scale = tol + tol * y[i].norm().max(y_new[i].norm());
                err = err.max(e.norm() / scale);
            }

            if err <= 1.0 {
                t = if clipped { target } else { t + step };
                y = y_new;
                k1 = k7;
                accepted += 1;
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h = step * factor;
                if clipped {
                    h = h.max(unclipped);
                }
            } else {
                rejected += 1;
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                if h < 1e-14 * target.max(1.0) {
                    return Err(Error::Numerical("step size underflow".into()));
                }
            }
        }
        out.push(y);
    }
    Ok((out, accepted, rejected))
}
