//! Run configuration: one structured-text document describing both sources,
//! the shared optical setup, and what to run. Unknown keys are rejected and
//! every nested physical invariant is enforced at load time with the field
//! path in the error.

use crate::error::{Error, Result};
use crate::noise::NoiseProcess;
use crate::physics::{CavitySpec, EmitterSpec};
use crate::sim::{InterferenceSetup, Polarization};
use crate::tuning::{ScanConfig, TuningModel};
use crate::units::angular_per_ns_to_pm;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// One emitter-cavity device with its tuning model and spectral-diffusion
/// description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SourceConfig {
    pub emitter: EmitterSpec,
    pub cavity: CavitySpec,
    pub tuning: TuningModel,
    /// Spectral wandering in physical rate units. When σ > 0 this overrides
    /// the emitter's fractional noise fields, and a nonzero mean detuning
    /// shifts the line centre.
    pub noise: NoiseProcess,
    /// Held strain-actuator position.
    pub strain_steps: i32,
}

impl SourceConfig {
    /// The emitter with the noise-process override folded in.
    pub fn effective_emitter(&self) -> EmitterSpec {
        let mut e = self.emitter.clone();
        if self.noise.sigma_per_ns > 0.0 {
            e.sigma_noise_frac = self.noise.sigma_per_ns / e.gamma_per_ns();
            e.noise_corr_time_us = self.noise.corr_time_us;
        }
        if self.noise.mu_per_ns != 0.0 {
            e.lambda0_nm += angular_per_ns_to_pm(self.noise.mu_per_ns, e.lambda0_nm) * 1e-3;
        }
        e
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Sources {
    pub s1: SourceConfig,
    pub s2: SourceConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    /// Single-source interference through the unbalanced interferometer.
    Single,
    /// Two-source interference.
    Remote,
    /// Voltage-scan map.
    Scan,
    /// Iterative grid-refinement search.
    Optimize,
    /// Resonance-fluorescence intensity trace for noise fitting.
    RfTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub mode: RunMode,
    /// Acquisition length in seconds. At most one of `duration_s` and
    /// `pulses` may be set; with neither, simulation modes run for 1 s.
    pub duration_s: Option<f64>,
    /// Acquisition length in excitation pulses.
    pub pulses: Option<u64>,
    /// Master seed; every internal stream derives from it by label.
    pub seed: u64,
    /// Overrides the setup polarization when present.
    pub polarization: Option<Polarization>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { mode: RunMode::Remote, duration_s: None, pulses: None, seed: 1, polarization: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    /// Tabular artifacts: histograms, scan matrices, traces.
    Csv,
    /// Structured reports and summaries.
    Toml,
    /// Binary time-tag streams.
    Tags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: PathBuf::from("out"),
            formats: vec![OutputFormat::Csv, OutputFormat::Toml, OutputFormat::Tags],
        }
    }
}

impl OutputSection {
    pub fn wants(&self, format: OutputFormat) -> bool {
        self.formats.contains(&format)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    pub v1_start_mv: f64,
    pub v1_stop_mv: f64,
    pub v1_step_mv: f64,
    pub v2_start_mv: f64,
    pub v2_stop_mv: f64,
    pub v2_step_mv: f64,
    /// Seconds per grid point; `inf` selects the closed-form expectation.
    pub dwell_s: f64,
}

impl Default for ScanSection {
    fn default() -> Self {
        ScanSection {
            v1_start_mv: 300.0,
            v1_stop_mv: 400.0,
            v1_step_mv: 5.0,
            v2_start_mv: 300.0,
            v2_stop_mv: 400.0,
            v2_step_mv: 5.0,
            dwell_s: 1.0,
        }
    }
}

impl ScanSection {
    fn axis(start: f64, stop: f64, step: f64) -> Vec<f64> {
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| start + i as f64 * step).collect()
    }

    pub fn v1_axis(&self) -> Vec<f64> {
        Self::axis(self.v1_start_mv, self.v1_stop_mv, self.v1_step_mv)
    }

    pub fn v2_axis(&self) -> Vec<f64> {
        Self::axis(self.v2_start_mv, self.v2_stop_mv, self.v2_step_mv)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (start, stop, step)) in [
            ("v1", (self.v1_start_mv, self.v1_stop_mv, self.v1_step_mv)),
            ("v2", (self.v2_start_mv, self.v2_stop_mv, self.v2_step_mv)),
        ] {
            if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
                return Err(Error::domain(format!(
                    "{name} axis must run start ≤ stop with a positive step"
                )));
            }
        }
        if !(self.dwell_s > 0.0) {
            return Err(Error::domain("dwell_s must be positive (inf = analytic)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeSection {
    pub v1_range_mv: [f64; 2],
    pub v2_range_mv: [f64; 2],
    /// Coarse-to-fine grid steps.
    pub step_schedule_mv: Vec<f64>,
    pub dwell_s: f64,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        OptimizeSection {
            v1_range_mv: [300.0, 400.0],
            v2_range_mv: [300.0, 400.0],
            step_schedule_mv: vec![10.0, 1.0],
            dwell_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RfTraceSection {
    /// Which source to trace: "s1" or "s2".
    pub source: String,
    pub duration_s: f64,
    pub bin_us: f64,
    /// Mean detected counts per bin on resonance.
    pub peak_counts_per_bin: f64,
}

impl Default for RfTraceSection {
    fn default() -> Self {
        RfTraceSection { source: "s1".into(), duration_s: 1.0, bin_us: 1.0, peak_counts_per_bin: 20.0 }
    }
}

impl RfTraceSection {
    pub fn validate(&self) -> Result<()> {
        if self.source != "s1" && self.source != "s2" {
            return Err(Error::domain("source must be \"s1\" or \"s2\""));
        }
        if !(self.duration_s > 0.0 && self.bin_us > 0.0 && self.peak_counts_per_bin > 0.0) {
            return Err(Error::domain(
                "duration_s, bin_us, and peak_counts_per_bin must be positive",
            ));
        }
        Ok(())
    }
}

/// The complete run description. Every section has defaults, so a minimal
/// document is `[run]\nmode = "remote"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub sources: Sources,
    pub setup: InterferenceSetup,
    pub run: RunSection,
    pub output: OutputSection,
    pub scan: ScanSection,
    pub optimize: OptimizeSection,
    pub rf_trace: RfTraceSection,
}

/// Attach a config field path to a nested validation error.
fn at<T>(path: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Domain(msg) => Error::config(path, msg),
        other => other,
    })
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        for (name, source) in [("s1", &self.sources.s1), ("s2", &self.sources.s2)] {
            at(&format!("sources.{name}.emitter"), source.emitter.validate())?;
            at(&format!("sources.{name}.cavity"), source.cavity.validate())?;
            at(&format!("sources.{name}.tuning"), source.tuning.validate())?;
            at(&format!("sources.{name}.noise"), source.noise.validate())?;
            at(&format!("sources.{name}.emitter"), source.effective_emitter().validate())?;
        }
        at("setup", self.setup.validate())?;
        match self.run.mode {
            RunMode::Single | RunMode::Remote => match (self.run.duration_s, self.run.pulses) {
                (Some(d), None) => {
                    if !(d > 0.0) {
                        return Err(Error::config("run.duration_s", "must be positive"));
                    }
                }
                (None, Some(p)) => {
                    if p == 0 {
                        return Err(Error::config("run.pulses", "must be at least 1"));
                    }
                }
                (Some(_), Some(_)) => {
                    return Err(Error::config(
                        "run",
                        "set either duration_s or pulses, not both",
                    ));
                }
                (None, None) => {} // defaults to 1 s
            },
            RunMode::Scan => at("scan", self.scan.validate())?,
            RunMode::Optimize => {
                let o = &self.optimize;
                if o.step_schedule_mv.is_empty()
                    || o.step_schedule_mv.iter().any(|&s| !(s > 0.0))
                    || o.step_schedule_mv.windows(2).any(|w| w[1] > w[0])
                {
                    return Err(Error::config(
                        "optimize.step_schedule_mv",
                        "must be non-empty, positive, coarse-to-fine",
                    ));
                }
                for (name, [lo, hi]) in
                    [("optimize.v1_range_mv", o.v1_range_mv), ("optimize.v2_range_mv", o.v2_range_mv)]
                {
                    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                        return Err(Error::config(name, "must be a finite [low, high] pair"));
                    }
                }
                if !(o.dwell_s > 0.0) {
                    return Err(Error::config("optimize.dwell_s", "must be positive"));
                }
            }
            RunMode::RfTrace => at("rf_trace", self.rf_trace.validate())?,
        }
        if self.output.formats.is_empty() {
            return Err(Error::config("output.formats", "at least one format is required"));
        }
        Ok(())
    }

    /// Acquisition length in seconds, whichever way it was specified.
    pub fn duration_s(&self) -> Result<f64> {
        match (self.run.duration_s, self.run.pulses) {
            (Some(d), None) => Ok(d),
            (None, Some(p)) => Ok(p as f64 / (self.setup.rep_rate_mhz * 1e6)),
            (None, None) => Ok(1.0),
            _ => Err(Error::config("run", "set either duration_s or pulses, not both")),
        }
    }

    /// The setup with the run-level polarization override applied.
    pub fn effective_setup(&self) -> InterferenceSetup {
        let mut setup = self.setup.clone();
        if let Some(p) = self.run.polarization {
            setup.polarization = p;
        }
        setup
    }

    /// Assemble the device-scan description from the source sections.
    pub fn scan_config(&self) -> ScanConfig {
        ScanConfig {
            emitter_1: self.sources.s1.effective_emitter(),
            cavity_1: self.sources.s1.cavity.clone(),
            tuning_1: self.sources.s1.tuning.clone(),
            strain_steps_1: self.sources.s1.strain_steps,
            emitter_2: self.sources.s2.effective_emitter(),
            cavity_2: self.sources.s2.cavity.clone(),
            tuning_2: self.sources.s2.tuning.clone(),
            strain_steps_2: self.sources.s2.strain_steps,
            setup: self.effective_setup(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::ContaminantKind;

    #[test]
    fn defaults_validate_and_round_trip_through_toml() {
        let config = RunConfig::default();
        config.validate().unwrap();
        let text = config.to_toml();
        let back = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn minimal_document_uses_defaults() {
        let config = RunConfig::from_toml_str("[run]\nmode = \"single\"\n").unwrap();
        assert_eq!(config.run.mode, RunMode::Single);
        assert_eq!(config.run.seed, 1);
        assert_eq!(config.setup.r_bs, 0.5);
        assert_eq!(config.sources.s1.emitter.tau_ps, 200.0);
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_name() {
        let err = RunConfig::from_toml_str("[setup]\nbeam_splitter = 0.5\n").unwrap_err();
        assert!(err.to_string().contains("beam_splitter"), "{err}");
        let err = RunConfig::from_toml_str("[sources.s1.emitter]\ntau = 100\n").unwrap_err();
        assert!(err.to_string().contains("tau"), "{err}");
    }

    #[test]
    fn nested_invariant_violations_carry_the_field_path() {
        let err =
            RunConfig::from_toml_str("[sources.s2.emitter]\ntau_ps = -5.0\n").unwrap_err();
        assert!(err.to_string().contains("sources.s2.emitter"), "{err}");
        let err = RunConfig::from_toml_str("[setup]\nr_bs = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("setup"), "{err}");
        let err = RunConfig::from_toml_str(
            "[sources.s1.tuning]\nstark_pm_per_mv = 0.9\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("sources.s1.tuning"), "{err}");
    }

    #[test]
    fn run_length_accepts_one_spelling_at_most() {
        assert!(RunConfig::from_toml_str("[run]\nduration_s = 2.0\npulses = 100\n").is_err());
        assert!(RunConfig::from_toml_str("[run]\nduration_s = 0.0\n").is_err());
        assert!(RunConfig::from_toml_str("[run]\npulses = 0\n").is_err());
        let by_pulses = RunConfig::from_toml_str("[run]\npulses = 79300000\n").unwrap();
        let d = by_pulses.duration_s().unwrap();
        assert!((d - 1.0).abs() < 1e-12, "duration {d}");
        // neither spelled out: the documented 1 s default
        assert_eq!(RunConfig::default().duration_s().unwrap(), 1.0);
    }

    #[test]
    fn mode_specific_sections_are_validated_only_for_their_mode() {
        // a broken optimize schedule passes under remote mode…
        let text = "[run]\nmode = \"remote\"\n[optimize]\nstep_schedule_mv = [1.0, 10.0]\n";
        assert!(RunConfig::from_toml_str(text).is_ok());
        // …and fails under optimize mode
        let text = "[run]\nmode = \"optimize\"\n[optimize]\nstep_schedule_mv = [1.0, 10.0]\n";
        let err = RunConfig::from_toml_str(text).unwrap_err();
        assert!(err.to_string().contains("step_schedule_mv"), "{err}");
        let text = "[run]\nmode = \"rf-trace\"\n[rf_trace]\nsource = \"s3\"\n";
        assert!(RunConfig::from_toml_str(text).is_err());
    }

    #[test]
    fn noise_override_rescales_the_emitter_fraction() {
        let text = "[sources.s1.noise]\nsigma_per_ns = 0.24\ncorr_time_us = 250.0\n";
        let config = RunConfig::from_toml_str(text).unwrap();
        let e = config.sources.s1.effective_emitter();
        // γ = 5/ns at τ = 200 ps, so 0.24/ns is a 4.8% fraction
        assert!((e.sigma_noise_frac - 0.048).abs() < 1e-12, "{}", e.sigma_noise_frac);
        assert_eq!(e.noise_corr_time_us, 250.0);
        // zero-σ default leaves the emitter untouched
        let clean = RunConfig::default().sources.s1.effective_emitter();
        assert_eq!(clean, EmitterSpec::default());
    }

    #[test]
    fn polarization_and_contaminant_enums_use_snake_case_strings() {
        let text = "[run]\npolarization = \"orthogonal\"\n[setup]\ncontaminant = \"distinguishable\"\n";
        let config = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(config.setup.contaminant, ContaminantKind::Distinguishable);
        let setup = config.effective_setup();
        assert_eq!(setup.polarization, Polarization::Orthogonal);
        // the base setup keeps its own polarization
        assert_eq!(config.setup.polarization, Polarization::Parallel);
    }

    #[test]
    fn scan_axes_enumerate_inclusive_grids() {
        let section = ScanSection::default();
        let v1 = section.v1_axis();
        assert_eq!(v1.len(), 21);
        assert_eq!(v1[0], 300.0);
        assert_eq!(*v1.last().unwrap(), 400.0);
    }
}
