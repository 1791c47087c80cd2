//! Unit conventions and conversions.
//!
//! Internally all spectral quantities are angular frequencies in 1/ns, all
//! lifetimes are in ps, wavelengths in nm. A Lorentzian emission line of
//! lifetime τ has natural linewidth (FWHM, angular) γ = 1/τ, so "a detuning
//! of x natural linewidths" translates directly to `x * gamma_per_ns`.

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT_M_PER_S: f64 = 299_792_458.0;

/// Picoseconds per nanosecond.
pub const PS_PER_NS: f64 = 1000.0;

/// Radiative decay rate γ = 1/τ in 1/ns for a lifetime in ps.
pub fn rate_per_ns(tau_ps: f64) -> f64 {
    PS_PER_NS / tau_ps
}

/// Angular-frequency detuning (1/ns) for a wavelength offset in pm around a
/// reference wavelength in nm: Δω = 2πc·Δλ/λ².
pub fn pm_to_angular_per_ns(delta_pm: f64, lambda_nm: f64) -> f64 {
    let lambda_m = lambda_nm * 1e-9;
    let omega_per_s = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT_M_PER_S * (delta_pm * 1e-12)
        / (lambda_m * lambda_m);
    omega_per_s * 1e-9
}

/// Inverse of [`pm_to_angular_per_ns`].
pub fn angular_per_ns_to_pm(delta_per_ns: f64, lambda_nm: f64) -> f64 {
    let lambda_m = lambda_nm * 1e-9;
    delta_per_ns * 1e9 * (lambda_m * lambda_m)
        / (2.0 * std::f64::consts::PI * SPEED_OF_LIGHT_M_PER_S)
        * 1e12
}
