//! Charging of a qubit battery through a resonant cavity that leaks into a
//! Lorentzian bosonic reservoir, solved exactly in the single-excitation
//! sector.
//!
//! - [`model`]: parameters, initial states and the reservoir spectrum.
//! - [`propagator`]: analytic amplitudes from the Laplace-domain cubic.
//! - [`oracle`]: direct ODE integration used as an independent reference.
//! - [`metrics`]: stored energy, ergotropy, non-Markovianity, optimal charging.
//! - [`sweep`]: parameter grids and their CSV/JSON output.
//! - [`figures`]: datasets and manifests for the named figures.

pub mod error;
pub mod figures;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod output;
pub mod propagator;
pub mod sweep;

pub use error::{Error, Result};
pub use metrics::{MaximaReport, NonMarkovReport, QubitDensityMatrix};
pub use model::{AmplitudeState, InitialState, ModelParams, SpectralDensity, SpectralWidth};
pub use propagator::{ChargingTrajectory, Propagator, PropagatorRoots};
pub use sweep::{Quantity, SweepResult, SweepSpec};

/// Version stamped into every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
