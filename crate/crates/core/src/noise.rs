//! Slow spectral wander and resonance-fluorescence intensity statistics.
//!
//! The detuning Δ(t) of a driven emitter is modelled as a stationary
//! mean-reverting Gaussian (Ornstein–Uhlenbeck) process with marginal
//! N(μ, σ²) and a configurable correlation time. Scanning the laser across
//! the line maps Δ to a Lorentzian mean count rate m(Δ); binned photon
//! counts are then Poisson(m(Δ_bin)), so the stationary count distribution
//! is a Gaussian-weighted Poisson mixture. Fitting that mixture to a
//! time-trace histogram recovers the wander amplitude σ.
//!
//! Identifiability note: the count histogram constrains only m_max and the
//! ratios μ/w and σ/w (substituting u = Δ/w in the mixture integral removes
//! w). Fits therefore report the linewidth at the reference scale 1 and the
//! wander in linewidth units; compare `sigma_hat/linewidth_hat` across
//! datasets, not raw values.

use crate::error::{Error, Result};
use crate::optim::nelder_mead;
use crate::quad;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

/// Stationary Gaussian spectral-diffusion process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseProcess {
    /// Detuning std σ, angular 1/ns.
    pub sigma_per_ns: f64,
    /// Mean detuning μ, angular 1/ns.
    pub mu_per_ns: f64,
    /// Correlation time of the wander, µs.
    pub corr_time_us: f64,
}

impl Default for NoiseProcess {
    fn default() -> Self {
        NoiseProcess { sigma_per_ns: 0.0, mu_per_ns: 0.0, corr_time_us: 1000.0 }
    }
}

impl NoiseProcess {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_per_ns >= 0.0 && self.sigma_per_ns.is_finite()) {
            return Err(Error::domain("sigma_per_ns must be non-negative"));
        }
        if !self.mu_per_ns.is_finite() {
            return Err(Error::domain("mu_per_ns must be finite"));
        }
        if !(self.corr_time_us > 0.0) {
            return Err(Error::domain("corr_time_us must be positive"));
        }
        Ok(())
    }
}

/// Binned photon-count time trace of resonance-fluorescence intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfTrace {
    /// Bin duration, µs.
    pub bin_us: f64,
    /// Photon counts per bin.
    pub counts: Vec<u32>,
    /// Mean counts per bin over the trace.
    pub mean_rate: f64,
}

impl RfTrace {
    pub fn validate(&self) -> Result<()> {
        if !(self.bin_us > 0.0) {
            return Err(Error::domain("bin_us must be positive"));
        }
        if self.counts.is_empty() {
            return Err(Error::domain("trace has no bins"));
        }
        Ok(())
    }
}

/// Result of fitting the count-histogram mixture model.
///
/// `linewidth_hat` is reported at the reference scale 1 (see module note on
/// identifiability); `sigma_hat` and `mu_hat` are in the same units, i.e.
/// fractions of the linewidth. The sign of μ is unobservable (the rate
/// profile is even), so `mu_hat` is non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseFit {
    pub sigma_hat: f64,
    pub mu_hat: f64,
    /// Peak mean rate, counts per bin.
    pub m_max_hat: f64,
    /// Lorentzian FWHM of the rate profile (reference scale).
    pub linewidth_hat: f64,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl NoiseFit {
    /// Wander amplitude as a fraction of the fitted linewidth — the
    /// scale-free quantity the histogram actually determines.
    pub fn sigma_over_linewidth(&self) -> f64 {
        self.sigma_hat / self.linewidth_hat
    }
}

/// Stationary probability density of the detuning: N(μ, σ²).
///
/// σ = 0 is a degenerate (point-mass) distribution and returns an error;
/// callers that support σ = 0 must special-case it.
pub fn detuning_pdf(process: &NoiseProcess, delta_per_ns: f64) -> Result<f64> {
    process.validate()?;
    if process.sigma_per_ns == 0.0 {
        return Err(Error::domain("detuning distribution is degenerate at sigma = 0"));
    }
    let z = (delta_per_ns - process.mu_per_ns) / process.sigma_per_ns;
    Ok((-0.5 * z * z).exp() / (process.sigma_per_ns * (2.0 * std::f64::consts::PI).sqrt()))
}

/// Lorentzian mean count rate at detuning Δ:
/// m(Δ) = m_max·(w/2)² / (Δ² + (w/2)²) with w the FWHM.
pub fn mean_rate(delta_per_ns: f64, m_max: f64, linewidth_fwhm_per_ns: f64) -> f64 {
    let half = 0.5 * linewidth_fwhm_per_ns;
    m_max * half * half / (delta_per_ns * delta_per_ns + half * half)
}

/// ln of the Poisson pmf, stable for large means.
fn poisson_ln_pmf(k: u64, m: f64) -> f64 {
    k as f64 * m.ln() - m - ln_gamma(k as f64 + 1.0)
}

/// Add `weight · Poisson(k; m)` to `out[k]` for every k where the Poisson
/// term is non-negligible. Anchors the recurrence at k₀ = ⌊m⌋ so that large
/// means never underflow.
fn accumulate_poisson_window(weight: f64, m: f64, out: &mut [f64]) {
    if out.is_empty() || weight == 0.0 {
        return;
    }
    let hi_idx = (out.len() - 1) as i64;
    let spread = 12.0 * m.sqrt() + 6.0;
    let lo = ((m - spread).floor().max(0.0) as i64).min(hi_idx);
    let hi = ((m + spread).ceil() as i64).min(hi_idx);
    let anchor = (m.floor() as i64).clamp(lo, hi);
    let p0 = poisson_ln_pmf(anchor as u64, m).exp();
    // downward: P(k-1) = P(k)·k/m
    let mut p = p0;
    out[anchor as usize] += weight * p0;
    let mut k = anchor;
    while k > lo {
        p *= k as f64 / m;
        k -= 1;
        out[k as usize] += weight * p;
    }
    // upward: P(k+1) = P(k)·m/(k+1)
    p = p0;
    k = anchor;
    while k < hi {
        p *= m / (k + 1) as f64;
        k += 1;
        out[k as usize] += weight * p;
    }
}

/// Probability of observing k counts in a bin: the Gaussian-weighted
/// Poisson mixture P(k) = ∫ N(Δ; μ, σ²)·Poisson(k; m(Δ)) dΔ, evaluated by
/// adaptive quadrature (relative tolerance 1e-8). σ = 0 reduces to a pure
/// Poisson at m(μ).
pub fn intensity_pmf(
    process: &NoiseProcess,
    m_max: f64,
    linewidth_per_ns: f64,
    k: u32,
) -> Result<f64> {
    process.validate()?;
    if !(m_max > 0.0 && linewidth_per_ns > 0.0) {
        return Err(Error::domain("m_max and linewidth must be positive"));
    }
    let (mu, sigma) = (process.mu_per_ns, process.sigma_per_ns);
    if sigma == 0.0 {
        return Ok(poisson_ln_pmf(k as u64, mean_rate(mu, m_max, linewidth_per_ns)).exp());
    }
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    Ok(quad::integrate(
        |d| {
            let z = (d - mu) / sigma;
            let m = mean_rate(d, m_max, linewidth_per_ns);
            norm * (-0.5 * z * z).exp() * poisson_ln_pmf(k as u64, m).exp()
        },
        mu - 8.0 * sigma,
        mu + 8.0 * sigma,
        1e-8,
    ))
}

/// The mixture pmf for all k in 0..=k_max at once.
///
/// Shares integrand evaluations across k by walking fixed Gauss–Kronrod
/// panels and filling each node's Poisson window into the output, which is
/// far cheaper than `k_max` independent adaptive integrals. Panel width
/// tracks the narrower of the Gaussian scale and the scale over which the
/// Poisson term moves by one std of its own width.
pub fn intensity_pmf_table(
    process: &NoiseProcess,
    m_max: f64,
    linewidth_per_ns: f64,
    k_max: u32,
) -> Result<Vec<f64>> {
    process.validate()?;
    if !(m_max > 0.0 && linewidth_per_ns > 0.0) {
        return Err(Error::domain("m_max and linewidth must be positive"));
    }
    let (mu, sigma) = (process.mu_per_ns, process.sigma_per_ns);
    let mut out = vec![0.0; k_max as usize + 1];
    if sigma == 0.0 {
        let m = mean_rate(mu, m_max, linewidth_per_ns);
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = poisson_ln_pmf(k as u64, m).exp();
        }
        return Ok(out);
    }
    let (a, b) = (mu - 8.0 * sigma, mu + 8.0 * sigma);
    // |dm/dΔ| ≤ 1.3·m_max/w globally; the Poisson term decorrelates once m
    // moves by ~√m, so resolve scale √m_floor·w/(1.3·m_max) as well as σ.
    let m_floor = mean_rate(a.abs().max(b.abs()), m_max, linewidth_per_ns).max(1.0);
    let poisson_scale = m_floor.sqrt() * linewidth_per_ns / (1.3 * m_max);
    let h = sigma.min(poisson_scale);
    let panels = (((b - a) / h).ceil() as usize).clamp(16, 4096);
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let step = (b - a) / panels as f64;
    for i in 0..panels {
        let lo = a + i as f64 * step;
        for (x, w) in quad::kronrod15_nodes(lo, lo + step) {
            let z = (x - mu) / sigma;
            let weight = w * norm * (-0.5 * z * z).exp();
            accumulate_poisson_window(weight, mean_rate(x, m_max, linewidth_per_ns), &mut out);
        }
    }
    Ok(out)
}

/// Simulate a resonance-fluorescence intensity trace.
///
/// Δ evolves by the exact stationary OU discretization
/// Δ_{n+1} = μ + ρ(Δ_n − μ) + σ√(1−ρ²)·ξ with ρ = exp(−t_bin/t_corr) and
/// Δ_0 ~ N(μ, σ²); each bin's count is Poisson(m(Δ_n)). Deterministic for a
/// fixed seed, independent of thread count.
pub fn simulate_rf_trace(
    process: &NoiseProcess,
    m_max: f64,
    linewidth_per_ns: f64,
    duration_s: f64,
    bin_us: f64,
    seed: u64,
) -> Result<RfTrace> {
    process.validate()?;
    if !(m_max > 0.0 && linewidth_per_ns > 0.0) {
        return Err(Error::domain("m_max and linewidth must be positive"));
    }
    if !(duration_s > 0.0 && bin_us > 0.0) {
        return Err(Error::domain("duration_s and bin_us must be positive"));
    }
    let n_bins = (duration_s * 1e6 / bin_us).floor() as usize;
    if n_bins == 0 {
        return Err(Error::domain("duration shorter than one bin"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mu, sigma) = (process.mu_per_ns, process.sigma_per_ns);
    let rho = (-bin_us / process.corr_time_us).exp();
    let kick = sigma * (1.0 - rho * rho).sqrt();
    let mut delta = mu + sigma * rng.sample::<f64, _>(StandardNormal);
    let mut counts = Vec::with_capacity(n_bins);
    let mut total: u64 = 0;
    for _ in 0..n_bins {
        let m = mean_rate(delta, m_max, linewidth_per_ns);
        let k = Poisson::new(m)
            .map_err(|_| Error::domain("invalid Poisson mean"))?
            .sample(&mut rng) as u64;
        total += k;
        counts.push(k.min(u32::MAX as u64) as u32);
        delta = mu + rho * (delta - mu) + kick * rng.sample::<f64, _>(StandardNormal);
    }
    let mean_rate = total as f64 / n_bins as f64;
    Ok(RfTrace { bin_us, counts, mean_rate })
}

/// Maximum-likelihood fit of the count-histogram mixture model.
///
/// Optimizes (m_max, μ/w, σ/w) — the parameters the histogram determines —
/// by Nelder–Mead on the multinomial negative log-likelihood, starting from
/// a method-of-moments estimate of the excess (super-Poissonian) variance.
/// Non-convergence is flagged on the result rather than raised.
pub fn fit_noise(trace: &RfTrace) -> Result<NoiseFit> {
    trace.validate()?;
    if trace.counts.len() < 10_000 {
        return Err(Error::domain("trace must span at least 10^4 bins for fitting"));
    }
    let n = trace.counts.len() as f64;
    let mean = trace.counts.iter().map(|&k| k as f64).sum::<f64>() / n;
    if mean == 0.0 {
        return Err(Error::no_signal("trace contains no counts"));
    }
    let var = trace
        .counts
        .iter()
        .map(|&k| {
            let d = k as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    let k_top = *trace.counts.iter().max().expect("non-empty") as u32;
    let mut hist = vec![0u64; k_top as usize + 1];
    for &k in &trace.counts {
        hist[k as usize] += 1;
    }

    // Moment start: excess variance over Poisson ≈ 32·m²·(σ/w)⁴ for small
    // σ/w at μ = 0, inverted and clamped to a sane bracket.
    let r0 = (((var - mean).max(0.0)) / (32.0 * mean * mean))
        .powf(0.25)
        .clamp(1e-3, 0.5);
    let x0 = [(mean * (1.0 + 4.0 * r0 * r0)).ln(), 0.0, r0.ln()];

    let nll = |x: &[f64]| -> f64 {
        let m_max = x[0].exp();
        let mu_r = x[1];
        let sigma_r = x[2].clamp(-12.0, 2.0).exp();
        let p = NoiseProcess { sigma_per_ns: sigma_r, mu_per_ns: mu_r, corr_time_us: 1.0 };
        match intensity_pmf_table(&p, m_max, 1.0, k_top) {
            Ok(table) => hist
                .iter()
                .zip(&table)
                .filter(|(&n_k, _)| n_k > 0)
                .map(|(&n_k, &pk)| -(n_k as f64) * pk.max(1e-300).ln())
                .sum(),
            Err(_) => f64::INFINITY,
        }
    };

    let coarse = nelder_mead(nll, &x0, &[0.3, 0.1, 0.5], 1e-9, 400);
    let polish = nelder_mead(nll, &coarse.x, &[0.02, 0.01, 0.03], 1e-10, 300);
    let sigma_hat = polish.x[2].clamp(-12.0, 2.0).exp();
    Ok(NoiseFit {
        sigma_hat,
        mu_hat: polish.x[1].abs(),
        m_max_hat: polish.x[0].exp(),
        linewidth_hat: 1.0,
        log_likelihood: -polish.fx,
        converged: polish.converged,
        iterations: coarse.iterations + polish.iterations,
    })
}
