//! Simulation and analysis toolkit for two-photon interference between two
//! remote cavity-enhanced single-photon sources.
//!
//! The crate is organised around the measurement chain of a remote
//! Hong–Ou–Mandel (HOM) experiment:
//!
//! * [`physics`] — emitter/cavity parameters, temporal overlap, mutual
//!   indistinguishability of photons from two emitters, detuning-averaged
//!   bounds, Purcell-modified lifetimes.
//! * [`noise`] — slow spectral diffusion of the emission line: stationary
//!   Gaussian detuning marginal, mean-reverting time traces, photon-count
//!   statistics under resonant excitation, and the inverse fit that recovers
//!   the diffusion amplitude from a count histogram.
//! * [`sim`] — pulse-level Monte Carlo of the two interferometer
//!   configurations (two sources on one beam splitter; one source behind an
//!   unbalanced Mach–Zehnder), producing time-tag streams.
//! * [`analysis`] — time-tag cross-correlation, peak integration, raw and
//!   corrected visibilities, g²(0) extraction, and sanity checks.
//! * [`tuning`] — gate-voltage/strain tuning model, two-dimensional scan
//!   maps, and grid-refinement optimisation of the remote visibility.
//! * [`config`] / [`io`] — run configuration schema, binary time-tag files,
//!   CSV import/export, and report serialisation.
//! * [`selfcheck`] — the built-in acceptance suite shared by the CLI and the
//!   integration tests.
//!
//! Conventions: lifetimes are picoseconds, rates and detunings are angular
//! frequencies in 1/ns, wavelengths are nanometres, timestamps are integer
//! picoseconds. All simulations are reproducible from a single master seed.

pub mod analysis;
pub mod config;
pub mod erfcx;
pub mod error;
pub mod io;
pub mod noise;
pub mod optim;
pub mod physics;
pub mod quad;
pub mod seed;
pub mod selfcheck;
pub mod sim;
pub mod tuning;
pub mod units;

pub use error::{Error, Result};
