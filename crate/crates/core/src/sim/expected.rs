//! Closed-form per-pulse expectations for both interference experiments,
//! plus an area-level acquisition that draws whole peak areas at once.
//!
//! The pulse walker in this module's sibling is the ground truth; these
//! formulas are its exact per-pulse averages (they are cross-checked against
//! it in tests). Parameter scans use the area-level path because drawing a
//! handful of Poisson peak areas is ~10⁴× cheaper than walking pulses.

use super::{contaminant_probability, ContaminantKind, InterferenceSetup};
use crate::error::{Error, Result};
use crate::physics::{
    averaged_mutual, indistinguishability_upper_bound, mutual_indistinguishability,
    noise_averaged_m12, AveragingMethod, EmitterSpec,
};
use crate::quad;
use crate::seed;
use crate::units::pm_to_angular_per_ns;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

/// Brightness bookkeeping shared by the expectation formulas: per-pulse
/// primary/contaminant occupancies, blinking duty factor, splitter moments.
struct RemoteLoads {
    b1: f64,
    p1: f64,
    big1: f64,
    b2: f64,
    p2: f64,
    big2: f64,
    g1: f64,
    g2: f64,
    f_on: f64,
    alpha: f64,
    beta: f64,
    eta2: f64,
    interfering: bool,
}

impl RemoteLoads {
    fn of(e1: &EmitterSpec, e2: &EmitterSpec, setup: &InterferenceSetup) -> Result<RemoteLoads> {
        e1.validate()?;
        e2.validate()?;
        setup.validate()?;
        let p1 = contaminant_probability(setup.brightness_1, e1.g2_zero)?;
        let p2 = contaminant_probability(setup.brightness_2, e2.g2_zero)?;
        let f_on = if setup.blink.enabled { setup.blink.on_fraction } else { 1.0 };
        Ok(RemoteLoads {
            b1: setup.brightness_1,
            p1,
            big1: setup.brightness_1 + p1,
            b2: setup.brightness_2,
            p2,
            big2: setup.brightness_2 + p2,
            g1: e1.g2_zero,
            g2: e2.g2_zero,
            f_on,
            alpha: 2.0 * setup.r_bs * setup.t_bs,
            beta: setup.r_bs * setup.r_bs + setup.t_bs * setup.t_bs,
            eta2: setup.det_efficiency * setup.det_efficiency,
            interfering: setup.contaminant == ContaminantKind::Interfering,
        })
    }

    /// Central-peak coincidence probability per pulse at pair
    /// indistinguishability `m`. Same-source double emissions land on the
    /// same input port and coincide with probability 2RT regardless of `m`.
    fn central(&self, m: f64) -> f64 {
        let f2 = self.f_on * self.f_on;
        let cross = if self.interfering {
            self.big1 * self.big2 * (self.beta - self.alpha * m)
        } else {
            self.b1 * self.b2 * (self.beta - self.alpha * m)
                + (self.b1 * self.p2 + self.p1 * self.b2 + self.p1 * self.p2) * self.beta
        };
        self.eta2
            * (f2 * cross
                + self.alpha * self.f_on * (self.b1 * self.p1 + self.b2 * self.p2))
    }

    fn singles(&self, r: f64, t: f64) -> (f64, f64) {
        let eta = self.eta2.sqrt();
        let d0 = eta * self.f_on * (self.big1 * t + self.big2 * r);
        let d1 = eta * self.f_on * (self.big1 * r + self.big2 * t);
        (d0, d1)
    }
}

/// Per-pulse observables of the two-source experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RemoteExpectation {
    /// Central coincidence probability per pulse, parallel polarization.
    pub central_parallel_per_pulse: f64,
    /// Central coincidence probability per pulse with interference disabled.
    pub central_orthogonal_per_pulse: f64,
    /// Large-separation side-peak coincidence probability per pulse.
    pub far_per_pulse: f64,
    /// Detector click probabilities per pulse.
    pub singles_d0_per_pulse: f64,
    pub singles_d1_per_pulse: f64,
    /// Noise-averaged mutual indistinguishability entering the central peak.
    pub averaged_mutual: f64,
    /// Two-source visibility 1 − C∥/C⊥.
    pub visibility: f64,
    /// Visibility corrected for splitter imbalance and residual multiphoton
    /// emission, the estimator the analysis pipeline reports.
    pub corrected_m: f64,
}

/// Exact per-pulse averages of the two-source pulse walker.
pub fn remote_expectation(
    e1: &EmitterSpec,
    e2: &EmitterSpec,
    setup: &InterferenceSetup,
) -> Result<RemoteExpectation> {
    let loads = RemoteLoads::of(e1, e2, setup)?;
    let delta_static = pm_to_angular_per_ns(
        (e1.lambda0_nm - e2.lambda0_nm) * 1000.0,
        0.5 * (e1.lambda0_nm + e2.lambda0_nm),
    );
    let m_bar = averaged_mutual(e1, e2, delta_static)?;
    let central_parallel = loads.central(m_bar);
    let central_orthogonal = loads.central(0.0);
    let (d0, d1) = loads.singles(setup.r_bs, setup.t_bs);
    if central_orthogonal <= 0.0 {
        return Err(Error::no_signal(
            "zero orthogonal coincidence rate: no visibility is defined",
        ));
    }
    let visibility = 1.0 - central_parallel / central_orthogonal;
    let corrected_m =
        (loads.beta / loads.alpha) * (1.0 + 0.5 * (loads.g1 + loads.g2)) * visibility;
    Ok(RemoteExpectation {
        central_parallel_per_pulse: central_parallel,
        central_orthogonal_per_pulse: central_orthogonal,
        far_per_pulse: d0 * d1,
        singles_d0_per_pulse: d0,
        singles_d1_per_pulse: d1,
        averaged_mutual: m_bar,
        visibility,
        corrected_m,
    })
}

/// Side-peak coincidence probability per pulse at separation `k` periods.
///
/// Blinking correlates a source with itself across nearby pulses, so peaks
/// at small |k| sit above the far-peak level by the on-state autocovariance
/// f² + f(1−f)·exp(−|k|·period/τ_blink) with 1/τ_blink = 1/dwell_on + 1/dwell_off.
/// The two sources blink independently, so cross terms carry a flat f².
pub fn side_peak_envelope(
    e1: &EmitterSpec,
    e2: &EmitterSpec,
    setup: &InterferenceSetup,
    k: i64,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::domain(
            "side_peak_envelope: k = 0 is the central peak, not a side peak",
        ));
    }
    let loads = RemoteLoads::of(e1, e2, setup)?;
    let f = loads.f_on;
    let cov = if setup.blink.enabled && f < 1.0 {
        let blink = &setup.blink;
        let lambda_per_us = 1.0 / blink.dwell_on_us() + 1.0 / blink.dwell_off_us();
        let sep_us = k.unsigned_abs() as f64 * setup.period_ps() * 1e-6;
        f * f + f * (1.0 - f) * (-lambda_per_us * sep_us).exp()
    } else {
        1.0
    };
    let tr = setup.t_bs * setup.r_bs;
    Ok(loads.eta2
        * (tr * (loads.big1 * loads.big1 + loads.big2 * loads.big2) * cov
            + loads.beta * loads.big1 * loads.big2 * f * f))
}

/// Per-pulse observables of the single-source Mach–Zehnder experiment.
///
/// Blinking dwell times far exceed one period, so an on-fraction < 1 scales
/// every nearby peak by the same duty factor and cancels from all ratios;
/// the expectation applies that uniform factor and nothing finer.
#[derive(Debug, Clone, PartialEq)]
pub struct MziExpectation {
    /// Central coincidence probability per pulse.
    pub central_per_pulse: f64,
    /// Adjacent peaks at +1 and −1 periods: each misses one pairing, so
    /// they sit below the far-peak level by T(1+R)/... combinatorics.
    pub adjacent_up_per_pulse: f64,
    pub adjacent_down_per_pulse: f64,
    /// Peaks at |k| ≥ 2 periods, all equal at B²/4 of a detected pair.
    pub far_per_pulse: f64,
    /// Self-indistinguishability averaged over one-period spectral drift.
    pub averaged_self_mutual: f64,
    /// Raw visibility 1 − 2·central/far.
    pub visibility: f64,
    /// Multiphoton- and splitter-corrected estimate, as the analyzer reports.
    pub corrected_m: f64,
}

/// Exact per-pulse averages of the single-source pulse walker.
pub fn mzi_expectation(e: &EmitterSpec, setup: &InterferenceSetup) -> Result<MziExpectation> {
    e.validate()?;
    setup.validate()?;
    let period_ps = setup.period_ps();
    let delay_ps = setup.mzi_delay_ns * 1000.0;
    if (delay_ps - period_ps).abs() > setup.bin_ps as f64 {
        return Err(Error::config(
            "setup.mzi_delay_ns",
            format!(
                "long-arm delay {delay_ps} ps must match the repetition period {period_ps:.1} ps \
                 within one bin ({} ps)",
                setup.bin_ps
            ),
        ));
    }
    let b = setup.brightness_1;
    let p = contaminant_probability(b, e.g2_zero)?;
    let big = b + p;
    let (r, t) = (setup.r_bs, setup.t_bs);
    let (alpha, beta) = (2.0 * r * t, r * r + t * t);
    let f = if setup.blink.enabled { setup.blink.on_fraction } else { 1.0 };
    let eta2 = setup.det_efficiency * setup.det_efficiency;

    // spectral drift between consecutive pulses: the stationary OU increment
    // over one period, which is tiny for correlation times ≫ the period
    let rho = (-(period_ps * 1e-6) / e.noise_corr_time_us).exp();
    let sigma_rel = e.sigma_noise_per_ns() * (2.0 * (1.0 - rho)).sqrt();
    let m_self = noise_averaged_m12(
        e,
        e,
        sigma_rel / std::f64::consts::SQRT_2,
        AveragingMethod::NumericalAverage,
    )?;

    let cross = if setup.contaminant == ContaminantKind::Interfering {
        big * big * (beta - alpha * m_self)
    } else {
        b * b * (beta - alpha * m_self) + (2.0 * b * p + p * p) * beta
    };
    // a same-pulse double splits S/L half the time (feeding ±1 peaks) and
    // rides the same arm otherwise, coinciding at the same-port rate 2RT
    let central = eta2 * f * (0.25 * cross + 0.5 * b * p * alpha);
    let quarter = 0.25 * big * big;
    let adjacent_up = eta2 * f * (quarter * t * (1.0 + r) + 0.5 * b * p * r * r);
    let adjacent_down = eta2 * f * (quarter * r * (1.0 + t) + 0.5 * b * p * t * t);
    let far = eta2 * f * quarter;
    let visibility = 1.0 - 2.0 * central / far;
    let g = e.g2_zero;
    let corrected_m = (visibility + 2.0 * alpha * (1.0 + g) - 1.0) / (2.0 * alpha * (1.0 - g));
    Ok(MziExpectation {
        central_per_pulse: central,
        adjacent_up_per_pulse: adjacent_up,
        adjacent_down_per_pulse: adjacent_down,
        far_per_pulse: far,
        averaged_self_mutual: m_self,
        visibility,
        corrected_m,
    })
}

/// Peak areas drawn at the ensemble level for one acquisition.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaAcquisition {
    pub pulses: u64,
    pub central_parallel: u64,
    pub central_orthogonal: u64,
    /// Far side peaks at k = 2..=6 periods.
    pub side_counts: Vec<u64>,
    pub singles_d0: u64,
    pub singles_d1: u64,
    /// The run-averaged mutual indistinguishability this acquisition saw.
    pub realized_mutual: f64,
    /// 1 − A∥/A⊥ from the drawn areas.
    pub visibility: f64,
    /// Splitter- and multiphoton-corrected estimate from the drawn areas.
    pub corrected_m: f64,
}

/// Mean and variance of the instantaneous mutual indistinguishability under
/// the pair's combined stationary spectral wandering.
fn mutual_mean_and_var(
    e1: &EmitterSpec,
    e2: &EmitterSpec,
    delta_static: f64,
) -> Result<(f64, f64)> {
    let s1 = e1.sigma_noise_per_ns();
    let s2 = e2.sigma_noise_per_ns();
    let sigma = (s1 * s1 + s2 * s2).sqrt();
    if sigma == 0.0 {
        return Ok((mutual_indistinguishability(e1, e2, delta_static)?, 0.0));
    }
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let moment = |power: i32| -> Result<f64> {
        let f = |x: f64| {
            let pdf = norm * (-0.5 * (x / sigma) * (x / sigma)).exp();
            let m = mutual_indistinguishability(e1, e2, delta_static + x)
                .expect("validated emitters");
            pdf * m.powi(power)
        };
        let half = 8.0 * sigma;
        Ok(quad::integrate(&f, -half, 0.0, 1e-10) + quad::integrate(&f, 0.0, half, 1e-10))
    };
    let mean = moment(1)?;
    let second = moment(2)?;
    Ok((mean, (second - mean * mean).max(0.0)))
}

fn poisson_draw(lambda: f64, rng: &mut impl Rng) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("positive finite rate").sample(rng) as u64
}

/// Draw one acquisition's peak areas directly from their expectations.
///
/// The run-averaged indistinguishability is itself jittered: averaging an
/// exponentially-correlated fluctuation over a run of length T leaves a
/// residual variance of Var[m]·2τ_corr/T around the ensemble mean.
pub fn acquire_remote_areas(
    e1: &EmitterSpec,
    e2: &EmitterSpec,
    setup: &InterferenceSetup,
    duration_s: f64,
    seed: u64,
) -> Result<AreaAcquisition> {
    let loads = RemoteLoads::of(e1, e2, setup)?;
    let pulses = setup.pulse_count(duration_s)?;
    let n = pulses as f64;
    let delta_static = pm_to_angular_per_ns(
        (e1.lambda0_nm - e2.lambda0_nm) * 1000.0,
        0.5 * (e1.lambda0_nm + e2.lambda0_nm),
    );
    let (m_bar, var_m) = mutual_mean_and_var(e1, e2, delta_static)?;
    let mut rng = seed::rng(seed, "areas", 0);
    let corr_us = e1.noise_corr_time_us.max(e2.noise_corr_time_us);
    let run_frac = (2.0 * corr_us / (duration_s * 1e6)).min(1.0);
    let z: f64 = rng.sample(StandardNormal);
    let realized_mutual = (m_bar + (var_m * run_frac).sqrt() * z)
        .clamp(0.0, indistinguishability_upper_bound(e1, e2)?);

    let central_parallel = poisson_draw(n * loads.central(realized_mutual), &mut rng);
    let central_orthogonal = poisson_draw(n * loads.central(0.0), &mut rng);
    let side_counts: Vec<u64> = (2..=6)
        .map(|k| Ok(poisson_draw(n * side_peak_envelope(e1, e2, setup, k)?, &mut rng)))
        .collect::<Result<_>>()?;
    let (d0, d1) = loads.singles(setup.r_bs, setup.t_bs);
    let singles_d0 = poisson_draw(n * d0, &mut rng);
    let singles_d1 = poisson_draw(n * d1, &mut rng);

    if central_orthogonal == 0 {
        return Err(Error::no_signal(
            "no orthogonal-polarization coincidences accumulated; acquisition too short",
        ));
    }
    let visibility = 1.0 - central_parallel as f64 / central_orthogonal as f64;
    let corrected_m =
        (loads.beta / loads.alpha) * (1.0 + 0.5 * (loads.g1 + loads.g2)) * visibility;
    Ok(AreaAcquisition {
        pulses,
        central_parallel,
        central_orthogonal,
        side_counts,
        singles_d0,
        singles_d1,
        realized_mutual,
        visibility,
        corrected_m,
    })
}
