//! Control-knob models for the two sources — bias voltage (Stark shift
//! within a charge plateau) and strain steps — plus the voltage-scan map
//! and the iterative grid-refinement optimizer that runs against simulated
//! acquisitions.
//!
//! The slopes and plateau extents are synthetic configuration, not device
//! measurements; every consumer should label them as such.

use crate::error::{Error, Result};
use crate::physics::{purcell_lifetime, CavitySpec, EmitterSpec};
use crate::seed;
use crate::sim::{
    acquire_remote_areas, contaminant_probability, remote_expectation, side_peak_envelope,
    InterferenceSetup,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Linear response of one emitter to its electrical and mechanical knobs.
///
/// Within the charge plateau the emission line shifts linearly with bias
/// (Stark effect) and with applied strain steps; outside the plateau the
/// relevant charge state is not populated and the source goes dark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuningModel {
    /// Lower charge-plateau edge, mV.
    pub plateau_v_min_mv: f64,
    /// Upper charge-plateau edge, mV.
    pub plateau_v_max_mv: f64,
    /// Stark slope inside the plateau, pm per mV.
    pub stark_pm_per_mv: f64,
    /// Wavelength span of the plateau, pm. Must equal
    /// |stark_pm_per_mv|·(v_max − v_min) within 1%.
    pub plateau_width_pm: f64,
    /// Strain-tuning slope, pm per actuator step.
    pub strain_pm_per_step: f64,
    /// Backlash lost when the strain actuator reverses direction, pm.
    pub strain_hysteresis_pm: f64,
    /// Depth of the indistinguishability penalty in the outer 10% of the
    /// plateau (raised-cosine ramp; 0 disables, 1 would extinguish).
    pub edge_m_penalty: f64,
}

impl Default for TuningModel {
    fn default() -> Self {
        TuningModel {
            plateau_v_min_mv: 300.0,
            plateau_v_max_mv: 400.0,
            stark_pm_per_mv: 0.5,
            plateau_width_pm: 50.0,
            strain_pm_per_step: 2.0,
            strain_hysteresis_pm: 0.0,
            edge_m_penalty: 0.4,
        }
    }
}

impl TuningModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.plateau_v_max_mv > self.plateau_v_min_mv)
            || !self.plateau_v_min_mv.is_finite()
            || !self.plateau_v_max_mv.is_finite()
        {
            return Err(Error::domain("plateau voltage range must be finite with v_max > v_min"));
        }
        for (name, s) in [
            ("stark_pm_per_mv", self.stark_pm_per_mv),
            ("strain_pm_per_step", self.strain_pm_per_step),
        ] {
            if !s.is_finite() {
                return Err(Error::domain(format!("{name} must be finite")));
            }
        }
        if !(self.plateau_width_pm >= 0.0) {
            return Err(Error::domain("plateau_width_pm must be non-negative"));
        }
        let span = self.stark_pm_per_mv.abs() * (self.plateau_v_max_mv - self.plateau_v_min_mv);
        let scale = self.plateau_width_pm.max(span);
        if (self.plateau_width_pm - span).abs() > 0.01 * scale {
            return Err(Error::domain(format!(
                "plateau_width_pm = {} is inconsistent with the Stark span {span:.3} pm \
                 (|slope|·voltage extent); they must agree within 1%",
                self.plateau_width_pm
            )));
        }
        if !(self.strain_hysteresis_pm >= 0.0) {
            return Err(Error::domain("strain_hysteresis_pm must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.edge_m_penalty) {
            return Err(Error::domain("edge_m_penalty must be in [0, 1)"));
        }
        Ok(())
    }

    /// Plateau centre voltage, the Stark reference point.
    pub fn v_mid_mv(&self) -> f64 {
        0.5 * (self.plateau_v_min_mv + self.plateau_v_max_mv)
    }

    /// Whether the bias keeps the emitting charge state populated.
    pub fn is_active(&self, bias_mv: f64) -> bool {
        (self.plateau_v_min_mv..=self.plateau_v_max_mv).contains(&bias_mv)
    }

    /// Indistinguishability retention factor at this bias: 1 across the
    /// inner 80% of the plateau, rolling off as a raised cosine to
    /// 1 − edge_m_penalty at the edges.
    pub fn edge_retention(&self, bias_mv: f64) -> f64 {
        if self.edge_m_penalty == 0.0 || !self.is_active(bias_mv) {
            return 1.0;
        }
        let span = self.plateau_v_max_mv - self.plateau_v_min_mv;
        let u = (bias_mv - self.plateau_v_min_mv) / span;
        let edge = u.min(1.0 - u);
        const ZONE: f64 = 0.1;
        if edge >= ZONE {
            return 1.0;
        }
        let w = 0.5 * (1.0 + (std::f64::consts::PI * edge / ZONE).cos());
        1.0 - self.edge_m_penalty * w
    }
}

/// Stateful strain stepper: each direction reversal loses
/// `strain_hysteresis_pm` of travel before new motion registers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrainActuator {
    steps: i32,
    offset_pm: f64,
    last_direction: i8,
}

impl StrainActuator {
    pub fn new() -> Self {
        StrainActuator { steps: 0, offset_pm: 0.0, last_direction: 0 }
    }

    /// Current accumulated wavelength offset, pm.
    pub fn offset_pm(&self) -> f64 {
        self.offset_pm
    }

    pub fn steps(&self) -> i32 {
        self.steps
    }

    /// Step to an absolute target count, applying backlash on reversal.
    pub fn move_to(&mut self, target_steps: i32, model: &TuningModel) {
        let delta = target_steps - self.steps;
        if delta == 0 {
            return;
        }
        let direction: i8 = if delta > 0 { 1 } else { -1 };
        let mut travel = delta as f64 * model.strain_pm_per_step;
        if self.last_direction != 0 && direction != self.last_direction {
            let backlash = model.strain_hysteresis_pm * direction as f64
                * model.strain_pm_per_step.signum();
            travel -= backlash.clamp(-travel.abs(), travel.abs());
        }
        self.offset_pm += travel;
        self.steps = target_steps;
        self.last_direction = direction;
    }
}

impl Default for StrainActuator {
    fn default() -> Self {
        Self::new()
    }
}

/// Emission wavelength at the given knob settings, or None when the bias
/// sits outside the charge plateau and the source is dark.
pub fn wavelength_from_controls(
    bias_mv: f64,
    strain_steps: i32,
    model: &TuningModel,
    emitter: &EmitterSpec,
) -> Option<f64> {
    if !model.is_active(bias_mv) {
        return None;
    }
    let shift_pm = model.stark_pm_per_mv * (bias_mv - model.v_mid_mv())
        + model.strain_pm_per_step * strain_steps as f64;
    Some(emitter.lambda0_nm + shift_pm * 1e-3)
}

/// Radiative lifetime at this wavelength under the emitter's cavity.
pub fn lifetime_from_wavelength(
    lambda_nm: f64,
    emitter: &EmitterSpec,
    cavity: &CavitySpec,
) -> Result<f64> {
    purcell_lifetime(emitter.tau_bulk_ps, cavity, lambda_nm)
}

/// The emitter as it presents at the given knob settings: wavelength from
/// the tuning model, lifetime from the cavity detuning, and
/// indistinguishability from the fixed pure-dephasing rate re-expressed at
/// the new radiative rate, degraded near the plateau edges. None when dark.
pub fn emitter_at(
    emitter: &EmitterSpec,
    cavity: &CavitySpec,
    model: &TuningModel,
    bias_mv: f64,
    strain_steps: i32,
) -> Result<Option<EmitterSpec>> {
    emitter.validate()?;
    model.validate()?;
    let Some(lambda_nm) = wavelength_from_controls(bias_mv, strain_steps, model, emitter) else {
        return Ok(None);
    };
    let tau_ps = lifetime_from_wavelength(lambda_nm, emitter, cavity)?;
    let gamma_star = emitter.pure_dephasing_per_ns();
    let m = EmitterSpec::m_from_dephasing(tau_ps, gamma_star) * model.edge_retention(bias_mv);
    Ok(Some(EmitterSpec { tau_ps, m_intrinsic: m, lambda0_nm: lambda_nm, ..emitter.clone() }))
}

/// Everything a voltage scan needs: the two devices with their cavities,
/// tuning models, and held strain settings, plus the shared optical setup.
#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub emitter_1: EmitterSpec,
    pub cavity_1: CavitySpec,
    pub tuning_1: TuningModel,
    pub strain_steps_1: i32,
    pub emitter_2: EmitterSpec,
    pub cavity_2: CavitySpec,
    pub tuning_2: TuningModel,
    pub strain_steps_2: i32,
    pub setup: InterferenceSetup,
}

/// One scan point's observables. None marks a flagged value (source dark
/// or no accumulated signal), not a measured zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    /// Two-source visibility; None unless both sources are active.
    pub v_rem: Option<f64>,
    /// Central peak area over the mean side-peak area, parallel.
    pub a_par: Option<f64>,
    /// Central peak area over the mean side-peak area, orthogonal.
    pub a_perp: Option<f64>,
}

/// Highest-visibility point of a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanBest {
    pub v1_mv: f64,
    pub v2_mv: f64,
    pub v_rem: f64,
}

/// A full two-axis voltage scan: indexed `map[i][j]` for `v1_mv[i]`,
/// `v2_mv[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub v1_mv: Vec<f64>,
    pub v2_mv: Vec<f64>,
    pub points: Vec<Vec<ScanPoint>>,
    /// Acquisition time per point, seconds; infinite means the analytic
    /// (noise-free) expectation was used.
    pub dwell_s: f64,
    pub best: Option<ScanBest>,
}

impl ScanResult {
    pub fn point(&self, i: usize, j: usize) -> ScanPoint {
        self.points[i][j]
    }
}

/// Evaluate one voltage pair. Infinite dwell uses the closed-form
/// expectations; finite dwell draws the peak areas with shot noise from a
/// seed derived per point.
fn eval_point(
    config: &ScanConfig,
    v1_mv: f64,
    v2_mv: f64,
    dwell_s: f64,
    point_seed: u64,
) -> Result<ScanPoint> {
    let e1 = emitter_at(&config.emitter_1, &config.cavity_1, &config.tuning_1, v1_mv,
        config.strain_steps_1)?;
    let e2 = emitter_at(&config.emitter_2, &config.cavity_2, &config.tuning_2, v2_mv,
        config.strain_steps_2)?;
    let dark = ScanPoint { v_rem: None, a_par: None, a_perp: None };
    let (e1, e2, both) = match (e1, e2) {
        (None, None) => return Ok(dark),
        (Some(a), Some(b)) => (a, b, true),
        // one dark source: keep the geometry, zero the dark input
        (Some(a), None) => {
            let b = a.clone();
            (a, b, false)
        }
        (None, Some(b)) => {
            let a = b.clone();
            (a, b, false)
        }
    };
    let mut setup = config.setup.clone();
    if !both {
        // the active source keeps its own brightness on its own input port
        let one_active = match (
            config.tuning_1.is_active(v1_mv),
            config.tuning_2.is_active(v2_mv),
        ) {
            (true, false) => 1,
            (false, true) => 2,
            _ => unreachable!("exactly one source is active on this branch"),
        };
        if one_active == 1 {
            setup.brightness_2 = 0.0;
        } else {
            setup.brightness_1 = 0.0;
        }
    }
    if dwell_s.is_infinite() {
        let side_mean = {
            let mut acc = 0.0;
            for k in 2..=6 {
                acc += side_peak_envelope(&e1, &e2, &setup, k)?;
            }
            acc / 5.0
        };
        if !(side_mean > 0.0) {
            return Ok(dark);
        }
        if both {
            let exp = remote_expectation(&e1, &e2, &setup)?;
            return Ok(ScanPoint {
                v_rem: Some(exp.visibility),
                a_par: Some(exp.central_parallel_per_pulse / side_mean),
                a_perp: Some(exp.central_orthogonal_per_pulse / side_mean),
            });
        }
        // autocorrelation stripe: only the active source's same-pulse double
        // emission feeds the central peak
        let (b, g2, f_on) = if setup.brightness_2 == 0.0 {
            (setup.brightness_1, e1.g2_zero, setup.duty_factor())
        } else {
            (setup.brightness_2, e2.g2_zero, setup.duty_factor())
        };
        let p = contaminant_probability(b, g2)?;
        let eta2 = setup.det_efficiency * setup.det_efficiency;
        let central = eta2 * 2.0 * setup.r_bs * setup.t_bs * f_on * b * p;
        let a = central / side_mean;
        return Ok(ScanPoint { v_rem: None, a_par: Some(a), a_perp: Some(a) });
    }
    match acquire_remote_areas(&e1, &e2, &setup, dwell_s, point_seed) {
        Ok(acq) => {
            let side_mean =
                acq.side_counts.iter().sum::<u64>() as f64 / acq.side_counts.len() as f64;
            if !(side_mean > 0.0) {
                return Ok(dark);
            }
            Ok(ScanPoint {
                v_rem: both.then_some(acq.visibility),
                a_par: Some(acq.central_parallel as f64 / side_mean),
                a_perp: Some(acq.central_orthogonal as f64 / side_mean),
            })
        }
        Err(Error::NoSignal(_)) => Ok(dark),
        Err(e) => Err(e),
    }
}

/// Map the two-source visibility and normalized central areas over a
/// voltage grid. Points are independent acquisitions with per-point
/// derived seeds, so the map is reproducible under any parallel schedule.
pub fn scan_map(
    config: &ScanConfig,
    v1_mv: &[f64],
    v2_mv: &[f64],
    dwell_s: f64,
    master_seed: u64,
) -> Result<ScanResult> {
    if v1_mv.is_empty() || v2_mv.is_empty() {
        return Err(Error::domain("scan grids must be non-empty"));
    }
    if !(dwell_s > 0.0) {
        return Err(Error::domain("dwell_s must be positive (infinite selects analytic mode)"));
    }
    let n2 = v2_mv.len();
    let flat: Vec<ScanPoint> = (0..v1_mv.len() * n2)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n2, idx % n2);
            let point_seed = seed::derive(master_seed, "scan", idx as u64);
            eval_point(config, v1_mv[i], v2_mv[j], dwell_s, point_seed)
        })
        .collect::<Result<_>>()?;
    let points: Vec<Vec<ScanPoint>> =
        flat.chunks(n2).map(|row| row.to_vec()).collect();
    let mut best: Option<ScanBest> = None;
    for (i, row) in points.iter().enumerate() {
        for (j, p) in row.iter().enumerate() {
            if let Some(v) = p.v_rem {
                if best.as_ref().is_none_or(|b| v > b.v_rem) {
                    best = Some(ScanBest { v1_mv: v1_mv[i], v2_mv: v2_mv[j], v_rem: v });
                }
            }
        }
    }
    Ok(ScanResult { v1_mv: v1_mv.to_vec(), v2_mv: v2_mv.to_vec(), points, dwell_s, best })
}

/// One optimizer evaluation, in scan order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditPoint {
    /// Refinement stage, starting at 1.
    pub stage: usize,
    pub v1_mv: f64,
    pub v2_mv: f64,
    /// Measured visibility; None where the point gave no two-source signal.
    pub v_rem: Option<f64>,
}

/// Where the optimizer landed, with a fresh confirmation measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub v1_mv: f64,
    pub v2_mv: f64,
    /// Visibility re-measured at the winning point with an independent
    /// seed. Reporting the selection maximum itself would inherit the
    /// winner's-curse bias of the search.
    pub v_rem: f64,
    /// Splitter- and multiphoton-corrected indistinguishability from the
    /// confirmation measurement.
    pub m12: f64,
    pub audit: Vec<AuditPoint>,
}

fn voltage_grid(lo: f64, hi: f64, step_mv: f64) -> Vec<f64> {
    let n = ((hi - lo) / step_mv + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * step_mv).collect()
}

/// Iteratively refine the bias pair toward maximum visibility: stage 1
/// scans the full ranges at the coarsest step, each later stage scans a
/// window of ± the previous step around the running optimum, clamped to
/// the given ranges. Exact ties go to the lowest (V1, V2) pair. The
/// returned optimum is re-measured once with a fresh seed.
pub fn grid_refine_optimize(
    config: &ScanConfig,
    v1_range_mv: (f64, f64),
    v2_range_mv: (f64, f64),
    step_schedule_mv: &[f64],
    dwell_s: f64,
    master_seed: u64,
) -> Result<OptimizeResult> {
    for (name, (lo, hi)) in [("v1_range_mv", v1_range_mv), ("v2_range_mv", v2_range_mv)] {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::domain(format!("{name} must be a finite low..high range")));
        }
    }
    if step_schedule_mv.is_empty()
        || step_schedule_mv.iter().any(|&s| !(s > 0.0))
        || step_schedule_mv.windows(2).any(|w| w[1] > w[0])
    {
        return Err(Error::domain(
            "step schedule must be non-empty, positive, and coarse-to-fine",
        ));
    }
    if !(dwell_s > 0.0) {
        return Err(Error::domain("dwell_s must be positive (infinite selects analytic mode)"));
    }
    let mut audit = Vec::new();
    let mut counter = 0u64;
    let mut best: Option<(f64, f64, f64)> = None;
    for (stage_idx, &step) in step_schedule_mv.iter().enumerate() {
        let (w1, w2) = match (stage_idx, &best) {
            (0, _) | (_, None) => (v1_range_mv, v2_range_mv),
            (_, Some((bv1, bv2, _))) => {
                let prev = step_schedule_mv[stage_idx - 1];
                (
                    ((bv1 - prev).max(v1_range_mv.0), (bv1 + prev).min(v1_range_mv.1)),
                    ((bv2 - prev).max(v2_range_mv.0), (bv2 + prev).min(v2_range_mv.1)),
                )
            }
        };
        let g1 = voltage_grid(w1.0, w1.1, step);
        let g2 = voltage_grid(w2.0, w2.1, step);
        let n2 = g2.len();
        let base = counter;
        let evals: Vec<Option<f64>> = (0..g1.len() * n2)
            .into_par_iter()
            .map(|idx| {
                let point_seed = seed::derive(master_seed, "optimize", base + idx as u64);
                let p =
                    eval_point(config, g1[idx / n2], g2[idx % n2], dwell_s, point_seed)?;
                Ok(p.v_rem)
            })
            .collect::<Result<_>>()?;
        counter += evals.len() as u64;
        for (idx, v_rem) in evals.into_iter().enumerate() {
            let (v1, v2) = (g1[idx / n2], g2[idx % n2]);
            audit.push(AuditPoint { stage: stage_idx + 1, v1_mv: v1, v2_mv: v2, v_rem });
            if let Some(v) = v_rem {
                // ascending scan order + strict inequality = lexicographic ties
                if best.is_none_or(|(.., bv)| v > bv) {
                    best = Some((v1, v2, v));
                }
            }
        }
    }
    let Some((v1, v2, _)) = best else {
        return Err(Error::no_signal(
            "every scanned point left at least one source dark; no optimum exists",
        ));
    };
    // confirmation run, independent of every selection draw
    let confirm_seed = seed::derive(master_seed, "optimize-confirm", 0);
    let confirmed = eval_point(config, v1, v2, dwell_s, confirm_seed)?;
    let Some(v_rem) = confirmed.v_rem else {
        return Err(Error::no_signal("the winning point gave no signal on re-measurement"));
    };
    let alpha = 2.0 * config.setup.r_bs * config.setup.t_bs;
    let beta = 1.0 - alpha;
    let g_sum = config.emitter_1.g2_zero + config.emitter_2.g2_zero;
    let m12 = (beta / alpha) * (1.0 + 0.5 * g_sum) * v_rem;
    Ok(OptimizeResult { v1_mv: v1, v2_mv: v2, v_rem, m12, audit })
}
