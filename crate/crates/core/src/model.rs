//! Physical parameters, initial states and the reservoir spectrum.
//!
//! The qubit (battery) and the mediating cavity are always on resonance, so
//! the cavity frequency is not stored. Frequencies share one arbitrary unit;
//! reported energies are multiples of `omega0` and reported times are the
//! dimensionless product `Omega * tau`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Width of the Lorentzian reservoir spectrum.
///
/// `Infinite` selects the memoryless (flat spectrum) limit. Every metric
/// accepts either variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralWidth {
    Finite(f64),
    Infinite,
}

impl SpectralWidth {
    pub fn is_infinite(self) -> bool {
        matches!(self, SpectralWidth::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            SpectralWidth::Finite(w) => Some(w),
            SpectralWidth::Infinite => None,
        }
    }

    /// Multiplies a finite width by `factor`; infinity stays infinite.
    pub fn scaled(self, factor: f64) -> SpectralWidth {
        match self {
            SpectralWidth::Finite(w) => SpectralWidth::Finite(w * factor),
            SpectralWidth::Infinite => SpectralWidth::Infinite,
        }
    }
}

impl From<f64> for SpectralWidth {
    fn from(w: f64) -> Self {
        if w.is_infinite() && w > 0.0 {
            SpectralWidth::Infinite
        } else {
            SpectralWidth::Finite(w)
        }
    }
}

impl fmt::Display for SpectralWidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectralWidth::Finite(w) => write!(f, "{w}"),
            SpectralWidth::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for SpectralWidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(SpectralWidth::Infinite);
        }
        t.parse::<f64>()
            .map(SpectralWidth::from)
            .map_err(|_| Error::Parse(format!("invalid spectral width {s:?}")))
    }
}

// Finite widths serialize as JSON numbers, the memoryless limit as "inf".
impl Serialize for SpectralWidth {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SpectralWidth::Finite(w) => serializer.serialize_f64(*w),
            SpectralWidth::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for SpectralWidth {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(w) => Ok(SpectralWidth::Finite(w)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// One charging scenario: qubit frequency, qubit-cavity coupling `Omega`,
/// cavity-reservoir coupling `gamma` and reservoir width `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    omega0: f64,
    coupling_qb_cavity: f64,
    coupling_cavity_env: f64,
    spectral_width: SpectralWidth,
}

impl ModelParams {
    /// Validates and builds a parameter set.
    pub fn new(
        omega0: f64,
        coupling_qb_cavity: f64,
        coupling_cavity_env: f64,
        spectral_width: impl Into<SpectralWidth>,
    ) -> Result<Self> {
        let spectral_width = spectral_width.into();
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "omega0 must be positive and finite, got {omega0}"
            )));
        }
        if !(coupling_qb_cavity.is_finite() && coupling_qb_cavity > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Omega must be positive and finite, got {coupling_qb_cavity}"
            )));
        }
        if !(coupling_cavity_env.is_finite() && coupling_cavity_env >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be non-negative and finite, got {coupling_cavity_env}"
            )));
        }
        if let SpectralWidth::Finite(w) = spectral_width {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "lambda must be positive or inf, got {w}"
                )));
            }
        }
        Ok(Self {
            omega0,
            coupling_qb_cavity,
            coupling_cavity_env,
            spectral_width,
        })
    }

    /// Parameters given as ratios to `Omega = 1`, with `omega0 = 1`.
    pub fn from_ratios(gamma_over_omega: f64, lambda_over_omega: SpectralWidth) -> Result<Self> {
        Self::new(1.0, 1.0, gamma_over_omega, lambda_over_omega)
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    /// Qubit-cavity coupling `Omega`.
    pub fn coupling_qb_cavity(&self) -> f64 {
        self.coupling_qb_cavity
    }

    /// Cavity-reservoir coupling `gamma`.
    pub fn coupling_cavity_env(&self) -> f64 {
        self.coupling_cavity_env
    }

    /// Reservoir spectral width `lambda`.
    pub fn spectral_width(&self) -> SpectralWidth {
        self.spectral_width
    }

    pub fn is_memoryless(&self) -> bool {
        self.spectral_width.is_infinite()
    }

    /// Largest finite rate among `Omega`, `gamma`, `lambda`.
    pub fn rate_scale(&self) -> f64 {
        let w = self.spectral_width.finite().unwrap_or(0.0);
        self.coupling_qb_cavity.max(self.coupling_cavity_env).max(w)
    }

    pub fn with_omega0(self, omega0: f64) -> Result<Self> {
        Self::new(
            omega0,
            self.coupling_qb_cavity,
            self.coupling_cavity_env,
            self.spectral_width,
        )
    }

    pub fn with_spectral_width(self, width: impl Into<SpectralWidth>) -> Result<Self> {
        Self::new(
            self.omega0,
            self.coupling_qb_cavity,
            self.coupling_cavity_env,
            width,
        )
    }

    pub fn spectral_density(&self) -> Result<SpectralDensity> {
        SpectralDensity::new(self)
    }
}

/// Initial amplitudes of `|g, 1_c>` (`c1`) and `|e, 0_c>` (`c2`), reservoir
/// in vacuum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    c1_0: Complex64,
    c2_0: Complex64,
}

impl InitialState {
    pub fn new(c1_0: Complex64, c2_0: Complex64) -> Result<Self> {
        let norm = c1_0.norm_sqr() + c2_0.norm_sqr();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "initial state must be normalized, |c1|^2 + |c2|^2 = {norm}"
            )));
        }
        Ok(Self { c1_0, c2_0 })
    }

    /// Empty battery: the excitation starts in the cavity.
    pub fn empty_battery() -> Self {
        Self {
            c1_0: Complex64::new(1.0, 0.0),
            c2_0: Complex64::new(0.0, 0.0),
        }
    }

    /// Fully charged battery, cavity empty.
    pub fn excited_battery() -> Self {
        Self {
            c1_0: Complex64::new(0.0, 0.0),
            c2_0: Complex64::new(1.0, 0.0),
        }
    }

    pub fn c1_0(&self) -> Complex64 {
        self.c1_0
    }

    pub fn c2_0(&self) -> Complex64 {
        self.c2_0
    }
}

pub fn empty_battery_state() -> InitialState {
    InitialState::empty_battery()
}

/// Amplitudes of the single-excitation state at one time.
///
/// `z` is the pseudomode variable `int_0^t exp(-lambda (t - t')) c1(t') dt'`
/// that carries the reservoir memory. It is zero in the memoryless limit.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AmplitudeState {
    pub c1: Complex64,
    pub c2: Complex64,
    pub z: Complex64,
}

impl AmplitudeState {
    /// Probability left in the cavity and the battery.
    pub fn retained_norm(&self) -> f64 {
        self.c1.norm_sqr() + self.c2.norm_sqr()
    }

    /// Excited-state population of the battery.
    pub fn population(&self) -> f64 {
        self.c2.norm_sqr()
    }
}

impl std::ops::Sub for AmplitudeState {
    type Output = AmplitudeState;

    fn sub(self, rhs: Self) -> Self {
        AmplitudeState {
            c1: self.c1 - rhs.c1,
            c2: self.c2 - rhs.c2,
            z: self.z - rhs.z,
        }
    }
}

/// Lorentzian reservoir spectrum `J(w) = (gamma / 2 pi) lambda^2 / ((omega0 - w)^2 + lambda^2)`.
///
/// Informational only: the dynamics are driven by the matching correlation
/// kernel `(gamma lambda / 2) exp(-lambda |t|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralDensity {
    omega0: f64,
    gamma: f64,
    width: f64,
}

impl SpectralDensity {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let width = params.spectral_width().finite().ok_or_else(|| {
            Error::Unsupported("the memoryless limit has a flat spectrum".into())
        })?;
        Ok(Self {
            omega0: params.omega0(),
            gamma: params.coupling_cavity_env(),
            width,
        })
    }

    pub fn at(&self, omega: f64) -> f64 {
        let detuning = self.omega0 - omega;
        let w2 = self.width * self.width;
        self.gamma / (2.0 * PI) * w2 / (detuning * detuning + w2)
    }

    pub fn peak(&self) -> f64 {
        self.gamma / (2.0 * PI)
    }
}

pub fn spectral_density_at(params: &ModelParams, omega: f64) -> Result<f64> {
    Ok(SpectralDensity::new(params)?.at(omega))
}
