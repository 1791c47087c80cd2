//! Coincidence analysis: delay histograms, pulsed peak integration, and the
//! visibility/indistinguishability estimators with Poisson error bars.

use crate::error::{Error, Result};
use crate::sim::TimeTagStream;
use serde::{Deserialize, Serialize};

/// Signed-delay cross-correlation histogram between detector channels 0
/// and 1. Delays are t₁ − t₀ in ps, binned half-open over
/// [−range_ps, +range_ps). Peak integration needs the repetition period,
/// which travels with the histogram as metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationHistogram {
    pub bin_ps: u32,
    pub range_ps: i64,
    /// Laser repetition period; 0 marks "unknown" and blocks peak analysis.
    pub period_ps: f64,
    /// Free-form provenance, e.g. source and polarization of the run.
    pub label: String,
    pub counts: Vec<u64>,
}

impl CorrelationHistogram {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    /// Center of bin `idx` in ps.
    pub fn bin_center(&self, idx: usize) -> f64 {
        -(self.range_ps as f64) + (idx as f64 + 0.5) * self.bin_ps as f64
    }

    /// Bin holding `delay_ps`, or None outside the histogram span.
    pub fn bin_index(&self, delay_ps: i64) -> Option<usize> {
        if delay_ps < -self.range_ps || delay_ps >= self.range_ps {
            return None;
        }
        Some((delay_ps + self.range_ps).div_euclid(self.bin_ps as i64) as usize)
    }

    pub fn total_pairs(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Attach the repetition period and a label after construction.
    pub fn with_metadata(mut self, period_ps: f64, label: impl Into<String>) -> Self {
        self.period_ps = period_ps;
        self.label = label.into();
        self
    }
}

/// Histogram every (channel 0, channel 1) pair with t₁ − t₀ inside the
/// span. Linear in the number of tags thanks to the sorted two-pointer walk.
pub fn build_histogram(
    stream: &TimeTagStream,
    bin_ps: u32,
    range_ps: i64,
) -> Result<CorrelationHistogram> {
    if bin_ps == 0 {
        return Err(Error::domain("histogram bin width must be positive"));
    }
    if range_ps <= 0 || range_ps % bin_ps as i64 != 0 {
        return Err(Error::domain(format!(
            "histogram range {range_ps} ps must be a positive multiple of the bin width {bin_ps} ps"
        )));
    }
    stream.validate()?;
    let (c0, c1) = stream.channel_timestamps();
    let n_bins = (2 * range_ps / bin_ps as i64) as usize;
    let mut counts = vec![0u64; n_bins];
    let mut start = 0usize;
    for &t0 in &c0 {
        let lo = t0 as i64 - range_ps;
        while start < c1.len() && (c1[start] as i64) < lo {
            start += 1;
        }
        for &t1 in &c1[start..] {
            let delay = t1 as i64 - t0 as i64;
            if delay >= range_ps {
                break;
            }
            let idx = (delay + range_ps).div_euclid(bin_ps as i64) as usize;
            counts[idx] += 1;
        }
    }
    Ok(CorrelationHistogram { bin_ps, range_ps, period_ps: 0.0, label: String::new(), counts })
}

/// One integrated pulse peak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SidePeak {
    /// Peak position in repetition periods.
    pub k: i64,
    pub counts: u64,
    /// Whether this peak enters the side-peak mean.
    pub included: bool,
}

/// Integrated areas of the central and side peaks of a pulsed histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub window_ns: f64,
    pub a_central: u64,
    /// Every side peak the span covers, nearest first by |k|.
    pub side_areas: Vec<SidePeak>,
    /// Mean area of the included side peaks (the normalization reference).
    pub a_side_mean: f64,
    /// Mean over the same peaks with the nearest neighbors added back —
    /// kept alongside so the effect of the exclusion stays visible.
    pub a_side_mean_all: f64,
    /// Peaks excluded from the mean by the first-peak rule.
    pub excluded_indices: Vec<i64>,
}

impl PeakReport {
    pub fn included_side_total(&self) -> u64 {
        self.side_areas.iter().filter(|p| p.included).map(|p| p.counts).sum()
    }

    pub fn included_side_count(&self) -> usize {
        self.side_areas.iter().filter(|p| p.included).count()
    }
}

/// Side peaks entering the reference mean, per side of zero delay.
pub const DEFAULT_SIDE_PEAKS_PER_SIDE: usize = 20;

/// Integrate peaks with the default number of reference side peaks.
///
/// An interferometer that pairs consecutive pulses leaves its signature on
/// the |k| = 1 peaks, so those are excluded from the side mean by default;
/// pass `exclude_first_side = false` for plain autocorrelation histograms.
pub fn integrate_peaks(
    h: &CorrelationHistogram,
    window_ns: f64,
    exclude_first_side: bool,
) -> Result<PeakReport> {
    integrate_peaks_limited(h, window_ns, exclude_first_side, DEFAULT_SIDE_PEAKS_PER_SIDE)
}

/// Sum each peak's bins over a window centered on k·period, taking the
/// nearest `per_side` non-excluded peaks on each side into the reference
/// mean. All covered peaks are still integrated and reported.
pub fn integrate_peaks_limited(
    h: &CorrelationHistogram,
    window_ns: f64,
    exclude_first_side: bool,
    per_side: usize,
) -> Result<PeakReport> {
    let period_ps = h.period_ps;
    if !(period_ps > 0.0) {
        return Err(Error::analysis(
            "histogram carries no repetition period; attach metadata before peak integration",
        ));
    }
    let window_ps = window_ns * 1000.0;
    if window_ps < h.bin_ps as f64 {
        return Err(Error::domain(format!(
            "integration window {window_ns} ns is narrower than one {} ps bin",
            h.bin_ps
        )));
    }
    if window_ps >= period_ps {
        return Err(Error::domain(format!(
            "integration window {window_ns} ns must be narrower than the period {period_ps} ps"
        )));
    }
    let half = window_ps / 2.0;
    let k_max = ((h.range_ps as f64 - half) / period_ps).floor() as i64;
    if k_max < 1 {
        return Err(Error::analysis(
            "histogram span covers no complete side peak; widen the range",
        ));
    }
    let mut areas = vec![0u64; (2 * k_max + 1) as usize];
    for (idx, &c) in h.counts.iter().enumerate() {
        let center = h.bin_center(idx);
        let k = (center / period_ps).round() as i64;
        if k.abs() > k_max {
            continue;
        }
        let offset = center - k as f64 * period_ps;
        if offset >= -half && offset < half {
            areas[(k + k_max) as usize] += c;
        }
    }
    let a_central = areas[k_max as usize];
    let mut side_areas: Vec<SidePeak> = (-k_max..=k_max)
        .filter(|&k| k != 0)
        .map(|k| SidePeak { k, counts: areas[(k + k_max) as usize], included: false })
        .collect();
    // nearest peaks first; the reference mean takes per_side from each side
    side_areas.sort_by_key(|p| (p.k.abs(), p.k));
    let mut taken = [0usize; 2];
    for p in side_areas.iter_mut() {
        if exclude_first_side && p.k.abs() == 1 {
            continue;
        }
        let side = usize::from(p.k > 0);
        if taken[side] < per_side {
            p.included = true;
            taken[side] += 1;
        }
    }
    let included: Vec<u64> =
        side_areas.iter().filter(|p| p.included).map(|p| p.counts).collect();
    if included.len() < 5 {
        return Err(Error::analysis(format!(
            "only {} usable side peaks; at least 5 are needed for a stable reference",
            included.len()
        )));
    }
    let a_side_mean = included.iter().sum::<u64>() as f64 / included.len() as f64;
    // the same mean with the |k| = 1 neighbors restored
    let with_first: Vec<u64> = side_areas
        .iter()
        .filter(|p| p.included || (exclude_first_side && p.k.abs() == 1))
        .map(|p| p.counts)
        .collect();
    let a_side_mean_all = with_first.iter().sum::<u64>() as f64 / with_first.len() as f64;
    let excluded_indices = if exclude_first_side {
        side_areas.iter().filter(|p| p.k.abs() == 1).map(|p| p.k).collect()
    } else {
        Vec::new()
    };
    Ok(PeakReport {
        window_ns,
        a_central,
        side_areas,
        a_side_mean,
        a_side_mean_all,
        excluded_indices,
    })
}

/// Raw interference visibility of a single-source (series) measurement:
/// uncorrelated pulses coincide in half the pairings, so the central peak
/// of a fully distinguishable source sits at half the side level.
pub fn vhom(report: &PeakReport) -> Result<f64> {
    if report.a_side_mean <= 0.0 {
        return Err(Error::no_signal("side peaks are empty; no visibility is defined"));
    }
    Ok(1.0 - 2.0 * report.a_central as f64 / report.a_side_mean)
}

/// Two-source visibility: the suppression of the parallel-polarization
/// central peak relative to the orthogonal one, each side-normalized.
pub fn vrem(report_par: &PeakReport, report_perp: &PeakReport) -> Result<f64> {
    if report_par.a_side_mean <= 0.0 || report_perp.a_side_mean <= 0.0 {
        return Err(Error::no_signal("side peaks are empty; no visibility is defined"));
    }
    if report_perp.a_central == 0 {
        return Err(Error::no_signal(
            "orthogonal central peak is empty; cannot normalize the parallel one",
        ));
    }
    let par = report_par.a_central as f64 / report_par.a_side_mean;
    let perp = report_perp.a_central as f64 / report_perp.a_side_mean;
    Ok(1.0 - par / perp)
}

/// Undo splitter imbalance and residual multiphoton emission on a
/// single-source visibility, returning the photon indistinguishability.
pub fn correct_single(v_raw: f64, r_bs: f64, t_bs: f64, g2: f64) -> f64 {
    let four_rt = 4.0 * r_bs * t_bs;
    (v_raw + four_rt * (1.0 + g2) - 1.0) / (four_rt * (1.0 - g2))
}

/// Undo splitter imbalance and both sources' multiphoton emission on a
/// two-source visibility, returning the mutual indistinguishability.
pub fn correct_remote(v_rem: f64, r_bs: f64, t_bs: f64, g2_1: f64, g2_2: f64) -> f64 {
    let alpha = 2.0 * r_bs * t_bs;
    let beta = r_bs * r_bs + t_bs * t_bs;
    (beta / alpha) * (1.0 + 0.5 * (g2_1 + g2_2)) * v_rem
}

/// g²(0) of a pulsed autocorrelation histogram: the central-peak area over
/// the side-peak mean, 4 ns windows, with its Poisson error. Plain
/// autocorrelations carry no interferometric first-peak artifact, so no
/// peaks are excluded.
pub fn g2_extract(hist: &CorrelationHistogram) -> Result<(f64, f64)> {
    let report = integrate_peaks(hist, 4.0, false)?;
    if report.a_side_mean <= 0.0 {
        return Err(Error::no_signal("side peaks are empty; no g² is defined"));
    }
    let g2 = report.a_central as f64 / report.a_side_mean;
    let err = g2.max(1.0 / report.a_side_mean)
        * ratio_rel_err(report.a_central, report.included_side_total());
    Ok((g2, err))
}

/// Outcome of one self-consistency check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagState {
    Pass,
    Fail,
    NotApplicable,
}

/// One dataset self-consistency check with its evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanityFlag {
    pub name: String,
    pub state: FlagState,
    pub measured: f64,
    pub expected: f64,
    /// Acceptance half-width around `expected` (a 3σ band where Poisson
    /// statistics apply).
    pub tolerance: f64,
    pub detail: String,
}

/// Everything the consistency checks can draw on. Optional pieces turn
/// their checks not-applicable instead of failing them.
pub struct SanityInputs<'a> {
    pub parallel: &'a CorrelationHistogram,
    pub orthogonal: Option<&'a CorrelationHistogram>,
    /// Total singles per detector, for recovering the brightness imbalance.
    pub singles: Option<(u64, u64)>,
    pub r_bs: f64,
    pub t_bs: f64,
    /// Measured g²(0) of each source, if calibrations exist.
    pub g2: Option<(f64, f64)>,
    pub window_ns: f64,
}

/// Run the dataset self-consistency checks: the non-interfering central
/// fraction and the side-peak envelope flatness.
pub fn sanity_checks(inputs: &SanityInputs) -> Result<Vec<SanityFlag>> {
    let mut flags = Vec::new();
    flags.push(match inputs.orthogonal {
        None => SanityFlag {
            name: "orthogonal_central_fraction".into(),
            state: FlagState::NotApplicable,
            measured: 0.0,
            expected: 0.0,
            tolerance: 0.0,
            detail: "no orthogonal-polarization histogram provided".into(),
        },
        Some(orth) => {
            let report = integrate_peaks(orth, inputs.window_ns, true)?;
            orthogonal_half_check(&report, inputs)
        }
    });
    flags.push(side_peak_flatness_check(inputs.parallel, inputs.window_ns)?);
    Ok(flags)
}

/// With interference switched off, distinguishable photons still coincide:
/// the central peak must sit at the same-pulse pairing fraction of the side
/// level — one half for a balanced splitter and equal sources, with known
/// corrections for imbalance, brightness asymmetry, and multiphoton noise.
fn orthogonal_half_check(orth: &PeakReport, inputs: &SanityInputs) -> SanityFlag {
    let (r, t) = (inputs.r_bs, inputs.t_bs);
    let alpha = 2.0 * r * t;
    let beta = r * r + t * t;
    // brightness ratio from the singles imbalance, when available
    let rho = inputs.singles.and_then(|(d0, d1)| {
        let num = t * d0 as f64 - r * d1 as f64;
        let den = t * d1 as f64 - r * d0 as f64;
        (num > 0.0 && den > 0.0).then(|| num / den)
    });
    let (g1, g2) = inputs.g2.unwrap_or((0.0, 0.0));
    let rho_v = rho.unwrap_or(1.0);
    let expected = (beta + 0.5 * alpha * (g1 * rho_v + g2 / rho_v))
        / (beta + r * t * (rho_v + 1.0 / rho_v));
    let measured = orth.a_central as f64 / orth.a_side_mean;
    let sigma = measured.max(1.0 / orth.a_side_mean)
        * ratio_rel_err(orth.a_central, orth.included_side_total());
    let tolerance = 3.0 * sigma;
    SanityFlag {
        name: "orthogonal_central_fraction".into(),
        state: if (measured - expected).abs() <= tolerance {
            FlagState::Pass
        } else {
            FlagState::Fail
        },
        measured,
        expected,
        tolerance,
        detail: format!(
            "non-interfering central/side ratio (brightness ratio {}, g2 ({g1}, {g2}))",
            rho.map_or("assumed 1".to_string(), |r| format!("{r:.4}")),
        ),
    }
}

/// Side peaks of a stable source are flat in |k|; intermittency (blinking)
/// raises the near ones with an exponential falloff. Fit a·e^(−λ|k|) + c by
/// weighted least squares over the decay-rate profile and fail the check
/// when both the rate and the elevation are significant.
fn side_peak_flatness_check(
    hist: &CorrelationHistogram,
    window_ns: f64,
) -> Result<SanityFlag> {
    // the envelope lives on many peaks; pull in far more than the reference
    // mean uses, skipping |k| = 1 which interferometers shape separately
    let report = integrate_peaks_limited(hist, window_ns, true, 600)?;
    let pts: Vec<(f64, f64)> = report
        .side_areas
        .iter()
        .filter(|p| p.included)
        .map(|p| (p.k.abs() as f64, p.counts as f64))
        .collect();
    if pts.len() < 20 {
        return Ok(SanityFlag {
            name: "side_peaks_flat".into(),
            state: FlagState::NotApplicable,
            measured: 0.0,
            expected: 0.0,
            tolerance: 0.0,
            detail: format!("only {} side peaks; envelope fit needs at least 20", pts.len()),
        });
    }
    let fit = fit_exponential_elevation(&pts);
    Ok(match fit {
        None => SanityFlag {
            name: "side_peaks_flat".into(),
            state: FlagState::NotApplicable,
            measured: 0.0,
            expected: 0.0,
            tolerance: 0.0,
            detail: "envelope fit is degenerate on this histogram".into(),
        },
        Some(f) => {
            let significant =
                f.amplitude > 2.0 * f.amplitude_err && f.rate > 2.0 * f.rate_err;
            SanityFlag {
                name: "side_peaks_flat".into(),
                state: if significant { FlagState::Fail } else { FlagState::Pass },
                measured: f.rate,
                expected: 0.0,
                tolerance: 2.0 * f.rate_err,
                detail: format!(
                    "near-peak elevation {:.1} ± {:.1} counts decaying at {:.4} ± {:.4} per peak",
                    f.amplitude, f.amplitude_err, f.rate, f.rate_err
                ),
            }
        }
    })
}

struct ElevationFit {
    amplitude: f64,
    amplitude_err: f64,
    rate: f64,
    rate_err: f64,
}

/// Profile the decay rate on a log grid; amplitude and offset are linear at
/// fixed rate, so each grid point is a 2×2 weighted normal solve.
fn fit_exponential_elevation(pts: &[(f64, f64)]) -> Option<ElevationFit> {
    if pts.len() < 6 {
        return None;
    }
    let chi2_at = |lam: f64| -> Option<(f64, f64, f64)> {
        let (mut sxx, mut sx1, mut s11, mut sxy, mut s1y) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(k, y) in pts {
            let w = 1.0 / y.max(1.0);
            let x = (-lam * k).exp();
            sxx += w * x * x;
            sx1 += w * x;
            s11 += w;
            sxy += w * x * y;
            s1y += w * y;
        }
        let det = sxx * s11 - sx1 * sx1;
        if det.abs() < 1e-12 * sxx * s11 {
            return None;
        }
        let a = (sxy * s11 - sx1 * s1y) / det;
        let chi2: f64 = pts
            .iter()
            .map(|&(k, y)| {
                let c = (sxx * s1y - sx1 * sxy) / det;
                let r = y - (a * (-lam * k).exp() + c);
                r * r / y.max(1.0)
            })
            .sum();
        let var_a = s11 / det;
        Some((chi2, a, var_a.max(0.0).sqrt()))
    };
    let grid: Vec<f64> = (0..60).map(|i| 1e-3 * (8.0f64 / 1e-3).powf(i as f64 / 59.0)).collect();
    let evals: Vec<(f64, f64, f64, f64)> = grid
        .iter()
        .filter_map(|&lam| chi2_at(lam).map(|(chi2, a, sa)| (lam, chi2, a, sa)))
        .collect();
    if evals.len() < 3 {
        return None;
    }
    let best = evals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)?;
    let (lam, chi2, a, sa) = evals[best];
    // curvature of χ² across the neighboring grid points gives σ_rate;
    // a minimum at the grid edge means the rate is unconstrained
    if best == 0 || best + 1 == evals.len() {
        return Some(ElevationFit {
            amplitude: a,
            amplitude_err: sa,
            rate: lam,
            rate_err: f64::INFINITY,
        });
    }
    let (l0, c0, ..) = evals[best - 1];
    let (l1, c1, ..) = evals[best + 1];
    let h0 = lam - l0;
    let h1 = l1 - lam;
    let curv = 2.0 * (c0 * h1 + c1 * h0 - chi2 * (h0 + h1)) / (h0 * h1 * (h0 + h1));
    let rate_err = if curv > 0.0 { (2.0 / curv).sqrt() } else { f64::INFINITY };
    Some(ElevationFit { amplitude: a, amplitude_err: sa, rate: lam, rate_err })
}

/// A visibility estimate with Poisson error bars and its sanity flags,
/// ready for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityReport {
    /// "single", "remote", or "hbt".
    pub experiment: String,
    pub v_raw: f64,
    pub v_raw_err: f64,
    /// Indistinguishability after splitter/multiphoton corrections; for an
    /// intensity-correlation run this is the g²(0) estimate instead.
    pub m_corrected: f64,
    pub m_corrected_err: f64,
    pub a_central: u64,
    pub a_side_mean: f64,
    pub side_peaks_used: usize,
    /// Splitter and g² inputs the correction assumed.
    pub r_bs: f64,
    pub t_bs: f64,
    pub g2_applied: [f64; 2],
    #[serde(default)]
    pub flags: Vec<SanityFlag>,
}

/// 1σ relative Poisson error of a peak-over-side ratio. Empty peaks use a
/// one-count floor so the error bar stays finite and honest.
fn ratio_rel_err(peak: u64, side_total: u64) -> f64 {
    (1.0 / peak.max(1) as f64 + 1.0 / side_total.max(1) as f64).sqrt()
}

impl VisibilityReport {
    /// Report for a single-source series interference run.
    pub fn single(report: &PeakReport, r_bs: f64, t_bs: f64, g2: f64) -> Result<VisibilityReport> {
        let v = vhom(report)?;
        let ratio = 2.0 * report.a_central as f64 / report.a_side_mean;
        let sigma_v = ratio.max(2.0 / report.a_side_mean)
            * ratio_rel_err(report.a_central, report.included_side_total());
        let four_rt = 4.0 * r_bs * t_bs;
        Ok(VisibilityReport {
            experiment: "single".into(),
            v_raw: v,
            v_raw_err: sigma_v,
            m_corrected: correct_single(v, r_bs, t_bs, g2),
            m_corrected_err: sigma_v / (four_rt * (1.0 - g2)),
            a_central: report.a_central,
            a_side_mean: report.a_side_mean,
            side_peaks_used: report.included_side_count(),
            r_bs,
            t_bs,
            g2_applied: [g2, g2],
            flags: Vec::new(),
        })
    }

    /// Report for a two-source run from its parallel and orthogonal halves.
    pub fn remote(
        report_par: &PeakReport,
        report_perp: &PeakReport,
        r_bs: f64,
        t_bs: f64,
        g2: [f64; 2],
    ) -> Result<VisibilityReport> {
        let v = vrem(report_par, report_perp)?;
        let q = (1.0 - v).max(1.0 / report_par.a_central.max(1) as f64);
        let sigma_v = q
            * (1.0 / report_par.a_central.max(1) as f64
                + 1.0 / report_perp.a_central.max(1) as f64
                + 1.0 / report_par.included_side_total().max(1) as f64
                + 1.0 / report_perp.included_side_total().max(1) as f64)
                .sqrt();
        let scale = (r_bs * r_bs + t_bs * t_bs) / (2.0 * r_bs * t_bs)
            * (1.0 + 0.5 * (g2[0] + g2[1]));
        Ok(VisibilityReport {
            experiment: "remote".into(),
            v_raw: v,
            v_raw_err: sigma_v,
            m_corrected: correct_remote(v, r_bs, t_bs, g2[0], g2[1]),
            m_corrected_err: scale * sigma_v,
            a_central: report_par.a_central,
            a_side_mean: report_par.a_side_mean,
            side_peaks_used: report_par.included_side_count(),
            r_bs,
            t_bs,
            g2_applied: g2,
            flags: Vec::new(),
        })
    }

    /// Report for an intensity-correlation (blocked-input) run.
    pub fn hbt(hist: &CorrelationHistogram) -> Result<VisibilityReport> {
        let (g2, err) = g2_extract(hist)?;
        let report = integrate_peaks(hist, 4.0, false)?;
        Ok(VisibilityReport {
            experiment: "hbt".into(),
            v_raw: g2,
            v_raw_err: err,
            m_corrected: g2,
            m_corrected_err: err,
            a_central: report.a_central,
            a_side_mean: report.a_side_mean,
            side_peaks_used: report.included_side_count(),
            r_bs: 0.5,
            t_bs: 0.5,
            g2_applied: [0.0, 0.0],
            flags: Vec::new(),
        })
    }

    pub fn with_flags(mut self, flags: Vec<SanityFlag>) -> Self {
        self.flags = flags;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::TagRecord;
    use rand::{Rng, SeedableRng};
    use std::collections::HashMap;

    fn stream_from(pairs: Vec<(u8, u64)>) -> TimeTagStream {
        let mut records: Vec<TagRecord> = pairs
            .into_iter()
            .map(|(channel, timestamp_ps)| TagRecord { channel, timestamp_ps })
            .collect();
        records.sort_by_key(|r| (r.timestamp_ps, r.channel));
        let duration_ps = records.last().map_or(0, |r| r.timestamp_ps + 1);
        TimeTagStream { records, duration_ps, seed: 0 }
    }

    /// Literal all-pairs histogram as an independent oracle.
    fn quadratic_histogram(stream: &TimeTagStream, bin_ps: u32, range_ps: i64) -> Vec<u64> {
        let (c0, c1) = stream.channel_timestamps();
        let mut counts = vec![0u64; (2 * range_ps / bin_ps as i64) as usize];
        for &t0 in &c0 {
            for &t1 in &c1 {
                let d = t1 as i64 - t0 as i64;
                if d >= -range_ps && d < range_ps {
                    counts[((d + range_ps) / bin_ps as i64) as usize] += 1;
                }
            }
        }
        counts
    }

    #[test]
    fn histogram_matches_all_pairs_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let pairs: Vec<(u8, u64)> = (0..600)
            .map(|_| (u8::from(rng.gen::<f64>() < 0.5), rng.gen_range(0..200_000u64)))
            .collect();
        let stream = stream_from(pairs);
        let h = build_histogram(&stream, 130, 13_000).unwrap();
        assert_eq!(h.counts, quadratic_histogram(&stream, 130, 13_000));
        assert_eq!(h.n_bins(), 200);
    }

    #[test]
    fn histogram_places_exact_delays_including_edges() {
        let stream = stream_from(vec![
            (0, 10_000),
            (1, 10_000), // delay 0
            (1, 10_499), // delay +499: last bin inside
            (1, 10_500), // delay +500: excluded (half-open)
            (1, 9_500),  // delay −500: included (left-closed)
            (1, 9_499),  // delay −501: outside
        ]);
        let h = build_histogram(&stream, 100, 500).unwrap();
        let mut expected = HashMap::new();
        expected.insert(h.bin_index(0).unwrap(), 1u64);
        expected.insert(h.bin_index(499).unwrap(), 1);
        *expected.entry(h.bin_index(-500).unwrap()).or_insert(0) += 1;
        for (idx, &c) in h.counts.iter().enumerate() {
            assert_eq!(c, expected.get(&idx).copied().unwrap_or(0), "bin {idx}");
        }
        assert_eq!(h.bin_index(500), None);
        assert_eq!(h.bin_index(-501), None);
        assert_eq!(h.total_pairs(), 3);
    }

    #[test]
    fn histogram_rejects_bad_geometry_and_missing_period() {
        let stream = stream_from(vec![(0, 5), (1, 9)]);
        assert!(build_histogram(&stream, 0, 1000).is_err());
        assert!(build_histogram(&stream, 64, 1000).is_err());
        assert!(build_histogram(&stream, 100, -200).is_err());
        let h = build_histogram(&stream, 100, 1000).unwrap();
        assert!(integrate_peaks(&h, 0.4, true).is_err(), "no period metadata");
    }

    /// A synthetic comb: `level(k)` counts at exact multiples of the period.
    fn comb_histogram(
        period_ps: f64,
        k_max: i64,
        level: &dyn Fn(i64) -> u64,
    ) -> CorrelationHistogram {
        let bin = 50u32;
        let range = ((k_max as f64 + 0.5) * period_ps) as i64;
        let range = range - range % bin as i64;
        let mut h = CorrelationHistogram {
            bin_ps: bin,
            range_ps: range,
            period_ps,
            label: "synthetic comb".into(),
            counts: vec![0; (2 * range / bin as i64) as usize],
        };
        for k in -k_max..=k_max {
            let idx = h.bin_index((k as f64 * period_ps).round() as i64).unwrap();
            h.counts[idx] = level(k);
        }
        h
    }

    #[test]
    fn peak_integration_applies_the_first_peak_exclusion() {
        let period = 12_610.0;
        let h = comb_histogram(period, 6, &|k| match k {
            0 => 70,
            -1 | 1 => 900, // elevated neighbors must not pollute the reference
            _ => 500,
        });
        let report = integrate_peaks(&h, 4.0, true).unwrap();
        assert_eq!(report.a_central, 70);
        assert_eq!(report.included_side_count(), 10);
        assert_eq!(report.a_side_mean, 500.0);
        assert!(report.a_side_mean_all > report.a_side_mean);
        assert_eq!(report.side_areas.len(), 12);
        assert_eq!(report.excluded_indices.len(), 2);
        // with the exclusion off the neighbors enter the mean
        let all = integrate_peaks(&h, 4.0, false).unwrap();
        assert_eq!(all.a_side_mean, (10.0 * 500.0 + 2.0 * 900.0) / 12.0);
        assert!(all.excluded_indices.is_empty());
    }

    #[test]
    fn peak_reference_uses_nearest_twenty_per_side() {
        let period = 12_610.0;
        // distant peaks hold a different level; only |k| ≤ 21 should count
        let h = comb_histogram(period, 30, &|k| match k.abs() {
            0 => 10,
            1 => 900,
            2..=21 => 500,
            _ => 9999,
        });
        let report = integrate_peaks(&h, 4.0, true).unwrap();
        assert_eq!(report.included_side_count(), 40);
        assert_eq!(report.a_side_mean, 500.0);
        assert!(report.side_areas.iter().any(|p| p.counts == 9999 && !p.included));
    }

    #[test]
    fn peak_integration_rejects_degenerate_windows() {
        let period = 12_610.0;
        let h = comb_histogram(period, 6, &|_| 100);
        assert!(integrate_peaks(&h, 13.0, true).is_err());
        assert!(integrate_peaks(&h, 0.02, true).is_err());
        // only ±2 peaks in range → 2 usable side peaks after exclusion
        let narrow = comb_histogram(period, 2, &|_| 100);
        assert!(integrate_peaks(&narrow, 4.0, true).is_err());
    }

    #[test]
    fn visibility_reference_points() {
        let period = 12_610.0;
        let h = comb_histogram(period, 8, &|k| if k == 0 { 0 } else { 1000 });
        let report = integrate_peaks(&h, 4.0, true).unwrap();
        assert_eq!(vhom(&report).unwrap(), 1.0);
        let h = comb_histogram(period, 8, &|k| if k == 0 { 500 } else { 1000 });
        let report = integrate_peaks(&h, 4.0, true).unwrap();
        assert_eq!(vhom(&report).unwrap(), 0.0);
        // published single-source operating point: central at 5.67% of side
        let h = comb_histogram(period, 8, &|k| if k == 0 { 567 } else { 10_000 });
        let report = integrate_peaks(&h, 4.0, true).unwrap();
        let v = vhom(&report).unwrap();
        assert!((v - 0.8866).abs() < 1e-12);
        let m = correct_single(v, 0.47, 0.53, 0.014);
        assert!((m - 0.913).abs() < 1e-3, "m = {m}");
    }

    #[test]
    fn corrections_invert_the_forward_model_exactly_without_multiphoton() {
        for &(m, r) in &[(0.0, 0.5), (0.5, 0.5), (0.913, 0.46), (0.878, 0.3), (1.0, 0.47)] {
            let t = 1.0 - r;
            let (alpha, beta) = (2.0 * r * t, r * r + t * t);
            // series interferometer: central/far = β − α·m, visibility 1−2(β−αm).
            // The standard correction recovers m exactly when balanced; an
            // imbalanced splitter leaves the known (t−r)²/α leakage behind.
            let v_single = 1.0 - 2.0 * (beta - alpha * m);
            let got = correct_single(v_single, r, t, 0.0);
            let leak = (t - r) * (t - r) / alpha;
            assert!((got - (m - leak)).abs() < 1e-12, "single m={m} r={r}: {got}");
            // two-source: V = α·m/β inverts exactly at any split ratio
            let v_remote = alpha * m / beta;
            let got = correct_remote(v_remote, r, t, 0.0, 0.0);
            assert!((got - m).abs() < 1e-12, "remote m={m} r={r}: {got}");
        }
        // published remote operating point
        let m12 = correct_remote(0.853, 0.46, 0.54, 0.014, 0.020);
        assert!((m12 - 0.8787).abs() < 5e-4, "m12 = {m12}");
        // multiplier structure at g² = 0.10 on both sources
        let scaled = correct_remote(1.0, 0.46, 0.54, 0.10, 0.10);
        let beta_over_alpha = (0.46f64 * 0.46 + 0.54 * 0.54) / (2.0 * 0.46 * 0.54);
        assert!((scaled - 1.10 * beta_over_alpha).abs() < 1e-12);
    }

    #[test]
    fn vrem_reference_points() {
        let period = 12_610.0;
        let perp = integrate_peaks(
            &comb_histogram(period, 8, &|k| if k == 0 { 500 } else { 1000 }),
            4.0,
            true,
        )
        .unwrap();
        // identical normalized areas → zero visibility
        assert_eq!(vrem(&perp, &perp).unwrap(), 0.0);
        // empty parallel central peak → full visibility
        let par0 = integrate_peaks(
            &comb_histogram(period, 8, &|k| if k == 0 { 0 } else { 1000 }),
            4.0,
            true,
        )
        .unwrap();
        assert_eq!(vrem(&par0, &perp).unwrap(), 1.0);
        // normalized ratio 0.147 → published visibility
        let par = integrate_peaks(
            &comb_histogram(period, 8, &|k| if k == 0 { 147 } else { 2000 }),
            4.0,
            true,
        )
        .unwrap();
        let v = vrem(&par, &perp).unwrap();
        assert!((v - 0.853).abs() < 1e-12, "v = {v}");
        // empty orthogonal central peak cannot normalize anything
        assert!(vrem(&perp, &par0).is_err());
    }

    #[test]
    fn uncorrelated_tags_give_unity_g2() {
        // two independent Poisson processes: flat correlation at every delay
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let period = 12_610.0;
        let mut pairs = Vec::new();
        for ch in 0..2u8 {
            let mut t = 0.0f64;
            loop {
                t += -(rng.gen::<f64>().max(1e-12)).ln() * 40_000.0;
                if t > 4e9 {
                    break;
                }
                pairs.push((ch, t as u64));
            }
        }
        let stream = stream_from(pairs);
        let h = build_histogram(&stream, 50, 126_100)
            .unwrap()
            .with_metadata(period, "laser-like fixture");
        let (g2, err) = g2_extract(&h).unwrap();
        assert!((g2 - 1.0).abs() < 4.0 * err, "g2 = {g2} ± {err}");
        let report = VisibilityReport::hbt(&h).unwrap();
        assert_eq!(report.experiment, "hbt");
        assert!((report.m_corrected - g2).abs() < 1e-12);
    }

    #[test]
    fn remote_report_propagates_poisson_errors() {
        let period = 12_610.0;
        let par = integrate_peaks(
            &comb_histogram(period, 8, &|k| if k == 0 { 150 } else { 1000 }),
            4.0,
            false,
        )
        .unwrap();
        let perp = integrate_peaks(
            &comb_histogram(period, 8, &|k| if k == 0 { 505 } else { 1000 }),
            4.0,
            false,
        )
        .unwrap();
        let report = VisibilityReport::remote(&par, &perp, 0.46, 0.54, [0.014, 0.020]).unwrap();
        let v = 1.0 - 150.0 / 505.0;
        assert!((report.v_raw - v).abs() < 1e-12);
        let expected_sigma =
            (150.0 / 505.0) * (1.0f64 / 150.0 + 1.0 / 505.0 + 2.0 / 16_000.0).sqrt();
        assert!((report.v_raw_err - expected_sigma).abs() < 1e-12);
        let scale = (0.46f64 * 0.46 + 0.54 * 0.54) / (2.0 * 0.46 * 0.54) * 1.017;
        assert!((report.m_corrected - scale * v).abs() < 1e-12);
        assert!((report.m_corrected_err - scale * expected_sigma).abs() < 1e-12);
        // an empty parallel peak keeps a finite error bar
        let par0 = integrate_peaks(
            &comb_histogram(period, 8, &|k| if k == 0 { 0 } else { 1000 }),
            4.0,
            false,
        )
        .unwrap();
        let r0 = VisibilityReport::remote(&par0, &perp, 0.5, 0.5, [0.0, 0.0]).unwrap();
        assert_eq!(r0.v_raw, 1.0);
        assert!(r0.v_raw_err.is_finite() && r0.v_raw_err > 0.0);
    }

    #[test]
    fn half_check_accounts_for_imbalance_and_multiphoton() {
        let period = 12_610.0;
        // balanced, clean: expected fraction is exactly 1/2
        let orth = comb_histogram(period, 8, &|k| if k == 0 { 501 } else { 1000 });
        let inputs = SanityInputs {
            parallel: &orth,
            orthogonal: Some(&orth),
            singles: None,
            r_bs: 0.5,
            t_bs: 0.5,
            g2: None,
            window_ns: 4.0,
        };
        let flags = sanity_checks(&inputs).unwrap();
        let half = flags.iter().find(|c| c.name == "orthogonal_central_fraction").unwrap();
        assert!((half.expected - 0.5).abs() < 1e-12);
        assert_eq!(half.state, FlagState::Pass, "{half:?}");
        // a grossly elevated central peak fails
        let bad = comb_histogram(period, 8, &|k| if k == 0 { 700 } else { 1000 });
        let inputs = SanityInputs { orthogonal: Some(&bad), ..inputs };
        let flags = sanity_checks(&inputs).unwrap();
        let half = flags.iter().find(|c| c.name == "orthogonal_central_fraction").unwrap();
        assert_eq!(half.state, FlagState::Fail);
        // no orthogonal data: not applicable, never a failure
        let inputs = SanityInputs { orthogonal: None, ..inputs };
        let flags = sanity_checks(&inputs).unwrap();
        let half = flags.iter().find(|c| c.name == "orthogonal_central_fraction").unwrap();
        assert_eq!(half.state, FlagState::NotApplicable);
        // imbalanced splitter with asymmetric brightness shifts the target:
        // a mild singles excess on detector 0 implies sources ~1.8:1 in
        // brightness, pushing the non-interfering fraction below one half
        let inputs = SanityInputs {
            parallel: &orth,
            orthogonal: Some(&orth),
            singles: Some((11_500, 11_000)),
            r_bs: 0.46,
            t_bs: 0.54,
            g2: Some((0.014, 0.020)),
            window_ns: 4.0,
        };
        let flags = sanity_checks(&inputs).unwrap();
        let half = flags.iter().find(|c| c.name == "orthogonal_central_fraction").unwrap();
        assert!(half.expected < 0.5 && half.expected > 0.4, "{}", half.expected);
        assert!(half.detail.contains("1.7"), "rho should be ≈1.77: {}", half.detail);
    }

    #[test]
    fn flatness_check_flags_blinking_combs_only() {
        let period = 12_610.0;
        // flat comb with mild unstructured scatter: must pass
        let flat = comb_histogram(period, 40, &|k| {
            if k == 0 {
                200
            } else {
                10_000 + (k.unsigned_abs().wrapping_mul(2_654_435_761) % 300) as u64
            }
        });
        let check = side_peak_flatness_check(&flat, 4.0).unwrap();
        assert_eq!(check.state, FlagState::Pass, "{check:?}");
        // exponential elevation with a 12-peak scale: must be flagged
        let blinky = comb_histogram(period, 40, &|k| {
            if k == 0 {
                200
            } else {
                (10_000.0 * (1.0 + 0.5 * (-(k.abs() as f64) / 12.0).exp())) as u64
            }
        });
        let check = side_peak_flatness_check(&blinky, 4.0).unwrap();
        assert_eq!(check.state, FlagState::Fail, "{check:?}");
        assert!(check.measured > 0.05 && check.measured < 0.12, "rate {}", check.measured);
        // too few side peaks: not applicable
        let tiny = comb_histogram(period, 8, &|_| 1000);
        let check = side_peak_flatness_check(&tiny, 4.0).unwrap();
        assert_eq!(check.state, FlagState::NotApplicable);
    }
}
