//! Pulse-level Monte Carlo of the two interference experiments.
//!
//! Two configurations share one engine:
//!
//! * **remote** — two sources, one on each input port of a beamsplitter;
//!   photons arriving in the same pulse interfere.
//! * **single** — one source behind an unbalanced Mach–Zehnder whose long
//!   arm delays by one repetition period; consecutive photons interfere.
//!
//! Interference is applied semi-analytically: the pair routing probability
//! at the combining beamsplitter is conditioned on the sampled slow
//! detunings, which is exact for exponential wavepackets with Markovian
//! dephasing and far cheaper than amplitude-level simulation. Timestamps
//! are pulse epoch + exponential emission delay + Gaussian detector jitter;
//! detector efficiency thins clicks after routing (loss downstream of the
//! beamsplitter does not affect interference).
//!
//! Runs are single-threaded over pulses so a fixed seed yields the same
//! stream regardless of worker-thread count; parallelism belongs one level
//! up, across runs or scan points with derived seeds.

mod expected;
mod run;

pub use expected::{
    acquire_remote_areas, mzi_expectation, remote_expectation, side_peak_envelope,
    AreaAcquisition, MziExpectation, RemoteExpectation,
};
pub use run::{simulate_hbt, simulate_remote_hom, simulate_single_hom};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Relative polarization of the two interfering paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    /// Interference enabled.
    Parallel,
    /// Photons made fully distinguishable; calibration configuration.
    Orthogonal,
}

/// How the multi-photon contaminant relates to the main emission mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContaminantKind {
    /// Contaminant photons share the emission mode and interfere like the
    /// primary photon (re-excitation during the same pulse).
    Interfering,
    /// Contaminant photons never interfere (worst case, e.g. uncorrelated
    /// background).
    Distinguishable,
}

/// Two-state brightness intermittency (telegraph) model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlinkModel {
    pub enabled: bool,
    /// Stationary fraction of time in the emitting state.
    pub on_fraction: f64,
    /// Mean dwell time averaged over the two states, µs.
    pub switch_time_us: f64,
}

impl Default for BlinkModel {
    fn default() -> Self {
        BlinkModel { enabled: false, on_fraction: 1.0, switch_time_us: 1.0 }
    }
}

impl BlinkModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.on_fraction > 0.0 && self.on_fraction <= 1.0) {
            return Err(Error::domain("blink on_fraction must be in (0, 1]"));
        }
        if !(self.switch_time_us > 0.0) {
            return Err(Error::domain("blink switch_time_us must be positive"));
        }
        Ok(())
    }

    /// Mean dwell in the emitting state, µs (2·f·s so that the stationary
    /// on-fraction is f and the state-averaged dwell is s).
    pub fn dwell_on_us(&self) -> f64 {
        2.0 * self.on_fraction * self.switch_time_us
    }

    /// Mean dwell in the dark state, µs.
    pub fn dwell_off_us(&self) -> f64 {
        2.0 * (1.0 - self.on_fraction) * self.switch_time_us
    }
}

/// Optical/electronic description of one interference measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterferenceSetup {
    /// Excitation repetition rate, MHz.
    pub rep_rate_mhz: f64,
    /// Long-arm delay of the Mach–Zehnder (single-source mode), ns. Must
    /// match the repetition period to within one histogram bin.
    pub mzi_delay_ns: f64,
    /// Combining-beamsplitter intensity reflectance.
    pub r_bs: f64,
    /// Combining-beamsplitter intensity transmittance (r_bs + t_bs = 1;
    /// losses are folded into brightness).
    pub t_bs: f64,
    /// Detection efficiency per detector.
    pub det_efficiency: f64,
    /// Gaussian timing-jitter std per detector, ps.
    pub det_jitter_ps: f64,
    /// Optional paralyzable dead time per detector, ns.
    pub dead_time_ns: Option<f64>,
    pub polarization: Polarization,
    /// Per-pulse photon delivery probability of source 1 at the setup input
    /// (post-attenuation, pre-detector).
    pub brightness_1: f64,
    /// Same for source 2.
    pub brightness_2: f64,
    /// Correlation-histogram bin width, ps.
    pub bin_ps: u32,
    /// Peak integration window, ns.
    pub window_ns: f64,
    pub contaminant: ContaminantKind,
    pub blink: BlinkModel,
}

impl Default for InterferenceSetup {
    fn default() -> Self {
        InterferenceSetup {
            rep_rate_mhz: 79.3,
            mzi_delay_ns: 12.6,
            r_bs: 0.5,
            t_bs: 0.5,
            det_efficiency: 0.31,
            det_jitter_ps: 30.0,
            dead_time_ns: None,
            polarization: Polarization::Parallel,
            brightness_1: 0.061,
            brightness_2: 0.061,
            bin_ps: 50,
            window_ns: 4.0,
            contaminant: ContaminantKind::Interfering,
            blink: BlinkModel::default(),
        }
    }
}

impl InterferenceSetup {
    pub fn validate(&self) -> Result<()> {
        if !(self.rep_rate_mhz > 0.0) {
            return Err(Error::domain("rep_rate_mhz must be positive"));
        }
        if (self.r_bs + self.t_bs - 1.0).abs() > 1e-9 || self.r_bs < 0.0 || self.t_bs < 0.0 {
            return Err(Error::domain("r_bs + t_bs must equal 1 (lossless convention)"));
        }
        if !(self.det_efficiency > 0.0 && self.det_efficiency <= 1.0) {
            return Err(Error::domain("det_efficiency must be in (0, 1]"));
        }
        if !(self.det_jitter_ps >= 0.0) {
            return Err(Error::domain("det_jitter_ps must be non-negative"));
        }
        if let Some(d) = self.dead_time_ns {
            if !(d > 0.0) {
                return Err(Error::domain("dead_time_ns must be positive when set"));
            }
        }
        for (name, b) in [("brightness_1", self.brightness_1), ("brightness_2", self.brightness_2)]
        {
            if !(0.0..=1.0).contains(&b) {
                return Err(Error::domain(format!("{name} must be in [0, 1]")));
            }
        }
        if self.bin_ps == 0 {
            return Err(Error::domain("bin_ps must be at least 1"));
        }
        if !(self.window_ns > 0.0) {
            return Err(Error::domain("window_ns must be positive"));
        }
        self.blink.validate()
    }

    /// Repetition period in picoseconds.
    pub fn period_ps(&self) -> f64 {
        1e6 / self.rep_rate_mhz
    }

    /// Stationary fraction of pulses spent in the emitting state.
    pub fn duty_factor(&self) -> f64 {
        if self.blink.enabled {
            self.blink.on_fraction
        } else {
            1.0
        }
    }

    /// Number of whole pulses within `duration_s`.
    pub fn pulse_count(&self, duration_s: f64) -> Result<u64> {
        if !(duration_s > 0.0) {
            return Err(Error::domain("duration_s must be positive"));
        }
        let n = (duration_s * self.rep_rate_mhz * 1e6).floor();
        if n < 1.0 {
            return Err(Error::domain("duration must span at least one repetition period"));
        }
        Ok(n as u64)
    }
}

/// One detector click.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TagRecord {
    pub channel: u8,
    pub timestamp_ps: u64,
}

/// Time-ordered click records from one acquisition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeTagStream {
    /// Sorted by (timestamp, channel); per-channel timestamps are therefore
    /// non-decreasing.
    pub records: Vec<TagRecord>,
    pub duration_ps: u64,
    pub seed: u64,
}

impl TimeTagStream {
    /// Timestamps of each channel, preserving order.
    pub fn channel_timestamps(&self) -> (Vec<u64>, Vec<u64>) {
        let mut c0 = Vec::new();
        let mut c1 = Vec::new();
        for r in &self.records {
            match r.channel {
                0 => c0.push(r.timestamp_ps),
                _ => c1.push(r.timestamp_ps),
            }
        }
        (c0, c1)
    }

    pub fn validate(&self) -> Result<()> {
        let mut last = [0u64; 2];
        for (i, r) in self.records.iter().enumerate() {
            if r.channel > 1 {
                return Err(Error::domain(format!("record {i}: channel {} not in {{0,1}}", r.channel)));
            }
            let ch = r.channel as usize;
            if r.timestamp_ps < last[ch] {
                return Err(Error::domain(format!("record {i}: channel {ch} timestamps decrease")));
            }
            last[ch] = r.timestamp_ps;
        }
        Ok(())
    }
}

/// Coincidence probability for one photon in each input port of a
/// beamsplitter: P = R² + T² − 2RT·m, with m the instantaneous mutual
/// indistinguishability.
pub fn central_coincidence_prob(m_inst: f64, r_bs: f64, t_bs: f64) -> f64 {
    r_bs * r_bs + t_bs * t_bs - 2.0 * r_bs * t_bs * m_inst
}

/// Per-pulse contaminant-photon probability that makes the analyzed
/// two-detector g²(0) equal `g2_zero` at the given brightness.
///
/// The analyzed estimator is ĝ = 2bp/(b+p)², whose inversion at p = x·b is
/// x = ((1−g) − √(1−2g))/g. A single extra photon per pulse caps ĝ at 1/2,
/// so g2_zero ≥ 0.5 is not realizable by this mechanism.
pub fn contaminant_probability(brightness: f64, g2_zero: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&g2_zero) {
        return Err(Error::domain("g2_zero must be in [0, 1)"));
    }
    if g2_zero >= 0.5 {
        return Err(Error::domain(
            "g2_zero >= 0.5 cannot be realized by a single contaminant photon per pulse",
        ));
    }
    let x = if g2_zero < 1e-8 {
        0.5 * g2_zero
    } else {
        ((1.0 - g2_zero) - (1.0 - 2.0 * g2_zero).sqrt()) / g2_zero
    };
    Ok(x * brightness)
}

/// Joint routing distribution for one photon in each input port:
/// [both-transmitted coincidence (s1→D0, s2→D1), both-reflected coincidence
/// (s1→D1, s2→D0), both→D0, both→D1].
///
/// The distinguishable fraction (1−m) routes classically; the interfering
/// fraction m contributes (T−R)² coincidence — split across the two
/// assignments in proportion to the classical weights T²:R², since photon
/// identity is not defined within the interfering part — and bunches the
/// rest. Entries are non-negative for all m ∈ [0, 1] and sum to 1; the
/// coincidence total is R²+T²−2RT·m.
pub(crate) fn joint_route_probs(m: f64, r: f64, t: f64) -> [f64; 4] {
    let beta = r * r + t * t;
    let dis = 1.0 - m;
    let coh = m * (t - r) * (t - r) / beta;
    let bunch = r * t * (1.0 + m);
    [dis * t * t + coh * t * t, dis * r * r + coh * r * r, bunch, bunch]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_coincidence_reference_points() {
        assert_eq!(central_coincidence_prob(1.0, 0.5, 0.5), 0.0);
        assert_eq!(central_coincidence_prob(0.0, 0.5, 0.5), 0.5);
        let v = central_coincidence_prob(0.88, 0.46, 0.54);
        assert!((v - 0.066_016).abs() < 1e-12, "v = {v}");
    }

    #[test]
    fn joint_routing_is_a_distribution_matching_the_coincidence_rate() {
        for &(m, r) in &[(0.0, 0.5), (1.0, 0.5), (0.878, 0.46), (0.913, 0.47), (0.5, 0.3)] {
            let t = 1.0 - r;
            let p = joint_route_probs(m, r, t);
            for (i, &q) in p.iter().enumerate() {
                assert!(q >= 0.0, "negative branch {i} at m={m}, r={r}: {q}");
            }
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            let coinc = p[0] + p[1];
            assert!((coinc - central_coincidence_prob(m, r, t)).abs() < 1e-12);
        }
    }

    #[test]
    fn contaminant_probability_round_trips_through_the_estimator() {
        for &(b, g) in &[(0.061, 0.014), (0.061, 0.020), (0.2, 0.014), (0.1, 0.3)] {
            let p = contaminant_probability(b, g).unwrap();
            let est = 2.0 * b * p / ((b + p) * (b + p));
            assert!((est - g).abs() < 1e-12, "g = {g}: estimator gives {est}");
        }
        assert_eq!(contaminant_probability(0.1, 0.0).unwrap(), 0.0);
        // hand-checked calibration points
        let x1 = contaminant_probability(1.0, 0.014).unwrap();
        assert!((x1 - 0.007_099_75).abs() < 5e-8, "x1 = {x1}");
        let x2 = contaminant_probability(1.0, 0.020).unwrap();
        assert!((x2 - 0.010_205_14).abs() < 5e-8, "x2 = {x2}");
        assert!(contaminant_probability(0.1, 0.5).is_err());
        assert!(contaminant_probability(0.1, -0.1).is_err());
    }

    #[test]
    fn setup_validation_rejects_bad_ranges() {
        let mut s = InterferenceSetup::default();
        s.r_bs = 0.4; // t still 0.5
        assert!(s.validate().is_err());
        let mut s = InterferenceSetup::default();
        s.det_efficiency = 0.0;
        assert!(s.validate().is_err());
        let mut s = InterferenceSetup::default();
        s.brightness_1 = 1.5;
        assert!(s.validate().is_err());
        let mut s = InterferenceSetup::default();
        s.blink.on_fraction = 0.0;
        assert!(s.validate().is_err());
        let mut s = InterferenceSetup::default();
        s.dead_time_ns = Some(0.0);
        assert!(s.validate().is_err());
        assert!(InterferenceSetup::default().validate().is_ok());
        let s = InterferenceSetup::default();
        assert!((s.period_ps() - 12610.340479192938).abs() < 1e-6);
        assert_eq!(s.pulse_count(1.0).unwrap(), 79_300_000);
        assert!(s.pulse_count(1e-9).is_err());
    }

    #[test]
    fn blink_dwell_times_preserve_on_fraction_and_mean() {
        let b = BlinkModel { enabled: true, on_fraction: 0.3, switch_time_us: 2.0 };
        let (don, doff) = (b.dwell_on_us(), b.dwell_off_us());
        assert!((don / (don + doff) - 0.3).abs() < 1e-12);
        assert!((0.5 * (don + doff) - 2.0).abs() < 1e-12);
    }
}
