//! The pulse-walking Monte Carlo behind the `simulate_*` operations.
//!
//! Empty pulses are skipped geometrically: with per-pulse occupancy q the
//! walker jumps ahead by a Geometric(q) draw, so cost scales with the
//! number of photon-carrying pulses, not with total pulses. Slow detunings
//! advance lazily over the skipped span (the OU update over k pulses is a
//! single Gaussian draw), and blinking segments the pulse axis into
//! constant-gate spans. All randomness comes from one sequential ChaCha
//! stream per run, so results are reproducible from the seed alone.

use super::{
    contaminant_probability, joint_route_probs, BlinkModel, ContaminantKind, InterferenceSetup,
    Polarization, TagRecord, TimeTagStream,
};
use crate::error::{Error, Result};
use crate::physics::{mutual_indistinguishability, EmitterSpec};
use crate::seed;
use crate::units::pm_to_angular_per_ns;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

/// Lazily-advanced Ornstein–Uhlenbeck detuning of one source (zero mean;
/// static offsets are handled at the pair level).
struct OuState {
    sigma: f64,
    ln_rho_per_pulse: f64,
    delta: f64,
    last_pulse: u64,
}

impl OuState {
    fn new(e: &EmitterSpec, period_ps: f64, rng: &mut ChaCha8Rng) -> OuState {
        let sigma = e.sigma_noise_per_ns();
        let delta =
            if sigma > 0.0 { sigma * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
        OuState {
            sigma,
            ln_rho_per_pulse: -(period_ps * 1e-6) / e.noise_corr_time_us,
            delta,
            last_pulse: 0,
        }
    }

    /// Detuning at `pulse`, advancing the process exactly over the gap.
    fn at(&mut self, pulse: u64, rng: &mut ChaCha8Rng) -> f64 {
        if self.sigma > 0.0 && pulse > self.last_pulse {
            let k = (pulse - self.last_pulse) as f64;
            let rho_k = (self.ln_rho_per_pulse * k).exp();
            let z: f64 = rng.sample(StandardNormal);
            self.delta = rho_k * self.delta + self.sigma * (1.0 - rho_k * rho_k).sqrt() * z;
            self.last_pulse = pulse;
        }
        self.delta
    }
}

/// Two-state brightness gate. Disabled (or on_fraction = 1) consumes no
/// randomness, so such a run is stream-identical to one without blinking.
struct Telegraph {
    on: bool,
    next_switch: u64,
    dwell_on_pulses: f64,
    dwell_off_pulses: f64,
}

impl Telegraph {
    fn new(blink: &BlinkModel, period_us: f64, rng: &mut ChaCha8Rng) -> Telegraph {
        if !blink.enabled || blink.on_fraction >= 1.0 {
            return Telegraph {
                on: true,
                next_switch: u64::MAX,
                dwell_on_pulses: 0.0,
                dwell_off_pulses: 0.0,
            };
        }
        let mut t = Telegraph {
            on: rng.gen::<f64>() < blink.on_fraction,
            next_switch: 0,
            dwell_on_pulses: blink.dwell_on_us() / period_us,
            dwell_off_pulses: blink.dwell_off_us() / period_us,
        };
        // exponential dwells are memoryless, so the stationary residual
        // dwell has the same distribution as a fresh one
        t.next_switch = t.draw_switch(0, rng);
        t
    }

    fn draw_switch(&self, from: u64, rng: &mut ChaCha8Rng) -> u64 {
        let mean = if self.on { self.dwell_on_pulses } else { self.dwell_off_pulses };
        let d: f64 = rng.sample(Exp1);
        from.saturating_add((d * mean).ceil().max(1.0) as u64)
    }

    fn switch(&mut self, rng: &mut ChaCha8Rng) {
        self.on = !self.on;
        self.next_switch = self.draw_switch(self.next_switch, rng);
    }
}

/// Per-pulse presence distribution over the photon slots
/// [s1 primary, s1 contaminant, s2 primary, s2 contaminant], conditioned on
/// at least one photon.
struct ComboTable {
    q_any: f64,
    cdf: [f64; 16],
}

impl ComboTable {
    fn new(q: [f64; 4]) -> ComboTable {
        let mut cdf = [0.0; 16];
        let mut acc = 0.0;
        for (mask, slot) in cdf.iter_mut().enumerate().skip(1) {
            let mut p = 1.0;
            for (i, &qi) in q.iter().enumerate() {
                p *= if mask >> i & 1 == 1 { qi } else { 1.0 - qi };
            }
            acc += p;
            *slot = acc;
        }
        ComboTable { q_any: acc, cdf }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let u = rng.gen::<f64>() * self.q_any;
        let mut mask = 1;
        while mask < 15 && u > self.cdf[mask] {
            mask += 1;
        }
        mask
    }
}

/// Pulses to skip before the next occupied one.
fn geometric_skip(q_any: f64, rng: &mut ChaCha8Rng) -> u64 {
    if q_any >= 1.0 {
        return 0;
    }
    let u: f64 = rng.gen::<f64>().max(1e-300);
    let k = u.ln() / (1.0 - q_any).ln();
    if k >= 1e18 {
        u64::MAX
    } else {
        k as u64
    }
}

/// Independent routing of one photon: port-a photons go to detector 0 with
/// probability T, port-b photons with probability R.
fn route_one(port_a: bool, r: f64, t: f64, rng: &mut ChaCha8Rng) -> u8 {
    let p0 = if port_a { t } else { r };
    if rng.gen::<f64>() < p0 {
        0
    } else {
        1
    }
}

/// Joint routing of a simultaneous (port a, port b) pair with mutual
/// indistinguishability `m`: returns (channel of a, channel of b).
fn route_joint(m: f64, r: f64, t: f64, rng: &mut ChaCha8Rng) -> (u8, u8) {
    let pr = joint_route_probs(m, r, t);
    let u = rng.gen::<f64>();
    if u < pr[0] {
        (0, 1)
    } else if u < pr[0] + pr[1] {
        (1, 0)
    } else if u < pr[0] + pr[1] + pr[2] {
        (0, 0)
    } else {
        (1, 1)
    }
}

/// Apply jitter, detection thinning, and record a click.
fn detect(
    base_ps: f64,
    channel: u8,
    setup: &InterferenceSetup,
    tags: &mut Vec<(u64, u8)>,
    rng: &mut ChaCha8Rng,
) {
    let jit: f64 = rng.sample::<f64, _>(StandardNormal) * setup.det_jitter_ps;
    let keep = rng.gen::<f64>() < setup.det_efficiency;
    if keep {
        tags.push(((base_ps + jit).max(0.0).round() as u64, channel));
    }
}

/// Sort, apply optional dead time, and package the stream.
fn finalize(
    mut tags: Vec<(u64, u8)>,
    setup: &InterferenceSetup,
    n_pulses: u64,
    period_ps: f64,
    seed: u64,
) -> TimeTagStream {
    tags.sort_unstable();
    let records = match setup.dead_time_ns {
        None => tags
            .into_iter()
            .map(|(timestamp_ps, channel)| TagRecord { channel, timestamp_ps })
            .collect(),
        Some(dead_ns) => {
            // paralyzable: every photon extends the dead window, a click is
            // kept only if nothing arrived within the window before it
            let dead_ps = (dead_ns * 1000.0).round() as u64;
            let mut last: [Option<u64>; 2] = [None, None];
            let mut out = Vec::with_capacity(tags.len());
            for (t, ch) in tags {
                let reg = match last[ch as usize] {
                    None => true,
                    Some(prev) => t.saturating_sub(prev) > dead_ps,
                };
                last[ch as usize] = Some(t);
                if reg {
                    out.push(TagRecord { channel: ch, timestamp_ps: t });
                }
            }
            out
        }
    };
    TimeTagStream {
        records,
        duration_ps: (n_pulses as f64 * period_ps).round() as u64,
        seed,
    }
}

/// Two sources, one per beamsplitter input port; photons of the same pulse
/// interfere according to the pair's instantaneous indistinguishability.
pub fn simulate_remote_hom(
    e1: &EmitterSpec,
    e2: &EmitterSpec,
    setup: &InterferenceSetup,
    duration_s: f64,
    seed: u64,
) -> Result<TimeTagStream> {
    run_two_source(e1, e2, setup, duration_s, seed, "remote")
}

/// One source routed straight to the beamsplitter (the other input blocked):
/// the photon-correlation calibration measurement. No interference occurs;
/// same-pulse photon pairs produce the central g² peak.
pub fn simulate_hbt(
    e: &EmitterSpec,
    setup: &InterferenceSetup,
    duration_s: f64,
    seed: u64,
) -> Result<TimeTagStream> {
    let mut blocked = setup.clone();
    blocked.brightness_2 = 0.0;
    run_two_source(e, e, &blocked, duration_s, seed, "hbt")
}

fn run_two_source(
    e1: &EmitterSpec,
    e2: &EmitterSpec,
    setup: &InterferenceSetup,
    duration_s: f64,
    seed: u64,
    label: &str,
) -> Result<TimeTagStream> {
    e1.validate()?;
    e2.validate()?;
    setup.validate()?;
    let n_pulses = setup.pulse_count(duration_s)?;
    let period_ps = setup.period_ps();
    let (r, t) = (setup.r_bs, setup.t_bs);
    let p1 = contaminant_probability(setup.brightness_1, e1.g2_zero)?;
    let p2 = contaminant_probability(setup.brightness_2, e2.g2_zero)?;
    let taus = [e1.tau_ps, e2.tau_ps];
    let delta_static = pm_to_angular_per_ns(
        (e1.lambda0_nm - e2.lambda0_nm) * 1000.0,
        0.5 * (e1.lambda0_nm + e2.lambda0_nm),
    );
    let interfering_contaminant = setup.contaminant == ContaminantKind::Interfering;
    let parallel = setup.polarization == Polarization::Parallel;

    let mut rng = seed::rng(seed, label, 0);
    let mut tel1 = Telegraph::new(&setup.blink, period_ps * 1e-6, &mut rng);
    let mut tel2 = Telegraph::new(&setup.blink, period_ps * 1e-6, &mut rng);
    let mut ou1 = OuState::new(e1, period_ps, &mut rng);
    let mut ou2 = OuState::new(e2, period_ps, &mut rng);

    let gate_table = |on1: bool, on2: bool| {
        ComboTable::new([
            if on1 { setup.brightness_1 } else { 0.0 },
            if on1 { p1 } else { 0.0 },
            if on2 { setup.brightness_2 } else { 0.0 },
            if on2 { p2 } else { 0.0 },
        ])
    };
    let tables =
        [gate_table(false, false), gate_table(true, false), gate_table(false, true), gate_table(true, true)];

    let mut tags: Vec<(u64, u8)> = Vec::new();
    let mut cursor: u64 = 0;
    while cursor < n_pulses {
        let seg_end = tel1.next_switch.min(tel2.next_switch).min(n_pulses);
        if cursor >= seg_end {
            if seg_end >= n_pulses {
                break;
            }
            if tel1.next_switch == seg_end {
                tel1.switch(&mut rng);
            }
            if tel2.next_switch == seg_end {
                tel2.switch(&mut rng);
            }
            continue;
        }
        let table = &tables[tel1.on as usize | (tel2.on as usize) << 1];
        if table.q_any <= 0.0 {
            cursor = seg_end;
            continue;
        }
        let skip = geometric_skip(table.q_any, &mut rng);
        let j = cursor.saturating_add(skip);
        if j >= seg_end {
            // restart in the next segment; valid by memorylessness
            cursor = seg_end;
            continue;
        }
        cursor = j + 1;

        // photons present this pulse: (source index, is-contaminant)
        let mask = table.sample(&mut rng);
        let mut photons: [(usize, bool); 4] = [(0, false); 4];
        let mut n = 0;
        for (i, who) in [(0, false), (0, true), (1, false), (1, true)].iter().enumerate() {
            if mask >> i & 1 == 1 {
                photons[n] = *who;
                n += 1;
            }
        }
        let n1 = photons[..n].iter().filter(|p| p.0 == 0).count();
        let n2 = n - n1;

        let mut channels = [0u8; 4];
        if parallel && n1 > 0 && n2 > 0 {
            // one representative per source forms the interfering pair;
            // extra photons (rare contaminated pulses) route independently
            let pick = |count: usize, rng: &mut ChaCha8Rng| {
                if count > 1 {
                    rng.gen_range(0..count)
                } else {
                    0
                }
            };
            let r1 = pick(n1, &mut rng);
            let r2 = pick(n2, &mut rng);
            let (mut i1, mut i2) = (usize::MAX, usize::MAX);
            let (mut c1, mut c2) = (0, 0);
            for (i, p) in photons[..n].iter().enumerate() {
                if p.0 == 0 {
                    if c1 == r1 {
                        i1 = i;
                    }
                    c1 += 1;
                } else {
                    if c2 == r2 {
                        i2 = i;
                    }
                    c2 += 1;
                }
            }
            let pair_interferes =
                interfering_contaminant || (!photons[i1].1 && !photons[i2].1);
            let m_pair = if pair_interferes {
                let d1 = ou1.at(j, &mut rng);
                let d2 = ou2.at(j, &mut rng);
                mutual_indistinguishability(e1, e2, delta_static + d1 - d2)?
            } else {
                0.0
            };
            let (ch_a, ch_b) = route_joint(m_pair, r, t, &mut rng);
            for (i, p) in photons[..n].iter().enumerate() {
                channels[i] = if i == i1 {
                    ch_a
                } else if i == i2 {
                    ch_b
                } else {
                    route_one(p.0 == 0, r, t, &mut rng)
                };
            }
        } else {
            for (i, p) in photons[..n].iter().enumerate() {
                channels[i] = route_one(p.0 == 0, r, t, &mut rng);
            }
        }

        let epoch = j as f64 * period_ps;
        for (i, p) in photons[..n].iter().enumerate() {
            let emit: f64 = rng.sample::<f64, _>(Exp1);
            detect(epoch + emit * taus[p.0], channels[i], setup, &mut tags, &mut rng);
        }
    }
    Ok(finalize(tags, setup, n_pulses, period_ps, seed))
}

/// A photon held in the long arm, waiting for the next pulse's slot.
#[derive(Clone, Copy)]
struct CarryPhoton {
    contaminant: bool,
    emit_ps: f64,
    delta: f64,
}

#[derive(Clone, Copy)]
struct Carry {
    pulse: u64,
    n: usize,
    items: [CarryPhoton; 2],
}

/// One source behind an unbalanced Mach–Zehnder: the long arm delays by one
/// repetition period, so consecutive photons meet at the output splitter.
/// The input splitter is balanced; each photon takes the long arm with
/// probability 1/2.
pub fn simulate_single_hom(
    e: &EmitterSpec,
    setup: &InterferenceSetup,
    duration_s: f64,
    seed: u64,
) -> Result<TimeTagStream> {
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
    let n_pulses = setup.pulse_count(duration_s)?;
    let (r, t) = (setup.r_bs, setup.t_bs);
    let p_con = contaminant_probability(setup.brightness_1, e.g2_zero)?;
    let interfering_contaminant = setup.contaminant == ContaminantKind::Interfering;
    let parallel = setup.polarization == Polarization::Parallel;

    let mut rng = seed::rng(seed, "single", 0);
    let mut tel = Telegraph::new(&setup.blink, period_ps * 1e-6, &mut rng);
    let mut ou = OuState::new(e, period_ps, &mut rng);
    let on_table = ComboTable::new([setup.brightness_1, p_con, 0.0, 0.0]);

    let mut tags: Vec<(u64, u8)> = Vec::new();
    let mut carry: Option<Carry> = None;
    let mut cursor: u64 = 0;

    // route and time-stamp carried photons whose slot saw no fresh partner
    let flush = |carry: &mut Option<Carry>,
                 tags: &mut Vec<(u64, u8)>,
                 rng: &mut ChaCha8Rng| {
        if let Some(c) = carry.take() {
            let base = c.pulse as f64 * period_ps + delay_ps;
            for item in &c.items[..c.n] {
                let ch = route_one(true, r, t, rng);
                detect(base + item.emit_ps, ch, setup, tags, rng);
            }
        }
    };

    while cursor < n_pulses {
        let seg_end = tel.next_switch.min(n_pulses);
        if cursor >= seg_end {
            if seg_end >= n_pulses {
                break;
            }
            tel.switch(&mut rng);
            continue;
        }
        if !tel.on {
            cursor = seg_end;
            continue;
        }
        let skip = geometric_skip(on_table.q_any, &mut rng);
        let j = cursor.saturating_add(skip);
        if j >= seg_end {
            cursor = seg_end;
            continue;
        }
        cursor = j + 1;

        let mask = on_table.sample(&mut rng);
        let delta_j = ou.at(j, &mut rng);

        // generate this pulse's photons and split them over the arms
        let mut fresh_s = Carry { pulse: j, n: 0, items: [CarryPhoton { contaminant: false, emit_ps: 0.0, delta: 0.0 }; 2] };
        let mut fresh_l = fresh_s;
        for (i, contaminant) in [(0, false), (1, true)] {
            if mask >> i & 1 == 1 {
                let emit_ps = rng.sample::<f64, _>(Exp1) * e.tau_ps;
                let photon = CarryPhoton { contaminant, emit_ps, delta: delta_j };
                let long_arm = rng.gen::<f64>() < 0.5;
                let dst = if long_arm { &mut fresh_l } else { &mut fresh_s };
                dst.items[dst.n] = photon;
                dst.n += 1;
            }
        }

        let adjacent = carry.as_ref().is_some_and(|c| c.pulse + 1 == j);
        if adjacent && fresh_s.n > 0 && parallel {
            let c = carry.take().expect("adjacent carry");
            let pick = |count: usize, rng: &mut ChaCha8Rng| {
                if count > 1 {
                    rng.gen_range(0..count)
                } else {
                    0
                }
            };
            let ra = pick(c.n, &mut rng);
            let rb = pick(fresh_s.n, &mut rng);
            let (pa, pb) = (c.items[ra], fresh_s.items[rb]);
            let pair_interferes =
                interfering_contaminant || (!pa.contaminant && !pb.contaminant);
            let m_pair = if pair_interferes {
                mutual_indistinguishability(e, e, pa.delta - pb.delta)?
            } else {
                0.0
            };
            let (ch_a, ch_b) = route_joint(m_pair, r, t, &mut rng);
            let base_l = c.pulse as f64 * period_ps + delay_ps;
            for (i, item) in c.items[..c.n].iter().enumerate() {
                let ch = if i == ra { ch_a } else { route_one(true, r, t, &mut rng) };
                detect(base_l + item.emit_ps, ch, setup, &mut tags, &mut rng);
            }
            let base_s = j as f64 * period_ps;
            for (i, item) in fresh_s.items[..fresh_s.n].iter().enumerate() {
                let ch = if i == rb { ch_b } else { route_one(false, r, t, &mut rng) };
                detect(base_s + item.emit_ps, ch, setup, &mut tags, &mut rng);
            }
        } else {
            flush(&mut carry, &mut tags, &mut rng);
            let base_s = j as f64 * period_ps;
            for item in &fresh_s.items[..fresh_s.n] {
                let ch = route_one(false, r, t, &mut rng);
                detect(base_s + item.emit_ps, ch, setup, &mut tags, &mut rng);
            }
        }
        if fresh_l.n > 0 {
            carry = Some(fresh_l);
        }
    }
    flush(&mut carry, &mut tags, &mut rng);
    Ok(finalize(tags, setup, n_pulses, period_ps, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emitter(tau_ps: f64, m: f64, g2: f64, sigma_frac: f64) -> EmitterSpec {
        EmitterSpec {
            tau_ps,
            tau_bulk_ps: 4000.0,
            m_intrinsic: m,
            g2_zero: g2,
            sigma_noise_frac: sigma_frac,
            ..Default::default()
        }
    }

    /// Pairs (t0 ∈ ch0, t1 ∈ ch1) with t1 − t0 within ±half_window of
    /// `center` — a deliberately naive counter used as the oracle here.
    fn coincidences(c0: &[u64], c1: &[u64], center_ps: i64, half_window_ps: i64) -> u64 {
        let mut count = 0;
        let mut start = 0usize;
        for &t0 in c0 {
            let lo = t0 as i64 + center_ps - half_window_ps;
            let hi = t0 as i64 + center_ps + half_window_ps;
            while start < c1.len() && (c1[start] as i64) < lo {
                start += 1;
            }
            let mut k = start;
            while k < c1.len() && (c1[k] as i64) <= hi {
                count += 1;
                k += 1;
            }
        }
        count
    }

    #[test]
    fn identical_seeds_reproduce_streams_and_on_fraction_one_is_transparent() {
        let e = emitter(200.0, 0.9, 0.014, 0.048);
        let mut setup = InterferenceSetup::default();
        setup.brightness_1 = 0.1;
        setup.brightness_2 = 0.1;
        let dur = 2e5 / (setup.rep_rate_mhz * 1e6);
        let a = simulate_remote_hom(&e, &e, &setup, dur, 9).unwrap();
        let b = simulate_remote_hom(&e, &e, &setup, dur, 9).unwrap();
        assert_eq!(a, b);
        let c = simulate_remote_hom(&e, &e, &setup, dur, 10).unwrap();
        assert_ne!(a.records, c.records);
        // enabling blinking with on_fraction = 1 must not perturb the stream
        let mut gated = setup.clone();
        gated.blink = BlinkModel { enabled: true, on_fraction: 1.0, switch_time_us: 1.0 };
        let d = simulate_remote_hom(&e, &e, &gated, dur, 9).unwrap();
        assert_eq!(a, d);
        a.validate().unwrap();
        assert!(!a.records.is_empty());
    }

    #[test]
    fn remote_singles_and_side_peak_rates_match_expectation() {
        let e1 = emitter(200.0, 0.913, 0.014, 0.0);
        let e2 = emitter(200.0, 0.911, 0.020, 0.0);
        let setup = InterferenceSetup::default();
        let n = 10_000_000u64;
        let dur = n as f64 / (setup.rep_rate_mhz * 1e6);
        let stream = simulate_remote_hom(&e1, &e2, &setup, dur, 4).unwrap();
        let (c0, c1) = stream.channel_timestamps();
        // brightness including calibrated contaminant admixture
        let b1 = setup.brightness_1 + contaminant_probability(setup.brightness_1, 0.014).unwrap();
        let b2 = setup.brightness_2 + contaminant_probability(setup.brightness_2, 0.020).unwrap();
        let eta = setup.det_efficiency;
        let d0 = eta * (b1 * setup.t_bs + b2 * setup.r_bs);
        let d1 = eta * (b1 * setup.r_bs + b2 * setup.t_bs);
        let rel0 = c0.len() as f64 / (n as f64 * d0) - 1.0;
        let rel1 = c1.len() as f64 / (n as f64 * d1) - 1.0;
        assert!(rel0.abs() < 0.01, "detector 0 rate off by {rel0}");
        assert!(rel1.abs() < 0.01, "detector 1 rate off by {rel1}");
        // ≈1.5 MHz per detector at the default operating point
        let rate_hz = c0.len() as f64 / dur;
        assert!((1.4e6..1.62e6).contains(&rate_hz), "rate {rate_hz}");
        // side-peak coincidences: k = 2..=6, each ≈ d0·d1 per pulse pair
        let period = setup.period_ps();
        let half_win = 2_000i64;
        let mut side = 0u64;
        for k in 2..=6i64 {
            side += coincidences(&c0, &c1, (k as f64 * period).round() as i64, half_win);
        }
        let expected = 5.0 * n as f64 * d0 * d1;
        let sigma = expected.sqrt();
        assert!(
            ((side as f64) - expected).abs() < 4.0 * sigma,
            "side counts {side} vs {expected}"
        );
        // ≈28 kHz per side peak at the paper operating point
        let per_peak_khz = side as f64 / 5.0 / dur / 1e3;
        assert!((26.0..32.0).contains(&per_peak_khz), "side rate {per_peak_khz} kHz");
    }

    #[test]
    fn ideal_remote_pair_never_coincides_centrally() {
        let e = emitter(180.0, 1.0, 0.0, 0.0);
        let setup = InterferenceSetup::default();
        let n = 2_000_000u64;
        let dur = n as f64 / (setup.rep_rate_mhz * 1e6);
        let stream = simulate_remote_hom(&e, &e, &setup, dur, 77).unwrap();
        let (c0, c1) = stream.channel_timestamps();
        let period = setup.period_ps();
        let central = coincidences(&c0, &c1, 0, 2_000);
        let side = coincidences(&c0, &c1, period.round() as i64, 2_000);
        assert_eq!(central, 0, "perfect interference leaves no central pairs");
        assert!(side > 50, "side peaks must remain");

        // orthogonal photons coincide at half the side-peak level
        let mut perp = setup.clone();
        perp.polarization = Polarization::Orthogonal;
        let stream = simulate_remote_hom(&e, &e, &perp, dur, 78).unwrap();
        let (c0, c1) = stream.channel_timestamps();
        let central = coincidences(&c0, &c1, 0, 2_000) as f64;
        let mut side_sum = 0u64;
        for k in 2..=9i64 {
            side_sum += coincidences(&c0, &c1, (k as f64 * period).round() as i64, 2_000);
        }
        let side_mean = side_sum as f64 / 8.0;
        let ratio = central / side_mean;
        let sigma = ratio * (1.0 / central + 1.0 / side_sum as f64).sqrt();
        assert!(
            (ratio - 0.5).abs() < 4.0 * sigma.max(0.01),
            "orthogonal central/side = {ratio}"
        );
    }

    #[test]
    fn mzi_rejects_delay_period_mismatch() {
        let e = emitter(200.0, 0.913, 0.0, 0.0);
        let mut setup = InterferenceSetup::default();
        setup.mzi_delay_ns = 13.0;
        let err = simulate_single_hom(&e, &setup, 1e-3, 1).unwrap_err();
        assert!(matches!(err, Error::Config { .. }), "got {err:?}");
        // the default 12.6 ns vs the 12.61 ns period is within one 50 ps bin
        let ok = simulate_single_hom(&e, &InterferenceSetup::default(), 1e-3, 1);
        assert!(ok.is_ok());
    }

    #[test]
    fn mzi_combinatorics_shape_the_first_side_peaks() {
        let e = emitter(200.0, 1.0, 0.0, 0.0);
        let mut setup = InterferenceSetup::default();
        setup.brightness_1 = 0.3;
        setup.r_bs = 0.4;
        setup.t_bs = 0.6;
        let n = 2_000_000u64;
        let dur = n as f64 / (setup.rep_rate_mhz * 1e6);
        let stream = simulate_single_hom(&e, &setup, dur, 12).unwrap();
        let (c0, c1) = stream.channel_timestamps();
        let period = setup.period_ps();
        let peak = |k: i64| coincidences(&c0, &c1, (k as f64 * period).round() as i64, 2_000);
        let far: f64 = [2i64, 3, 4, -2, -3, -4].iter().map(|&k| peak(k) as f64).sum::<f64>() / 6.0;
        // perfect interference at a balanced pair: fully distinguishable
        // here is impossible since m = 1 → central = (T−R)² of the far level
        let central = peak(0) as f64;
        let central_expected = (setup.t_bs - setup.r_bs).powi(2) * far;
        assert!(
            (central - central_expected).abs() < 5.0 * central_expected.sqrt().max(3.0),
            "central {central} vs {central_expected}"
        );
        // adjacent peaks: one missing pairing each — T(1+R) and R(1+T) of far
        let up = peak(1) as f64;
        let down = peak(-1) as f64;
        let up_expected = setup.t_bs * (1.0 + setup.r_bs) * far;
        let down_expected = setup.r_bs * (1.0 + setup.t_bs) * far;
        for (got, want, name) in
            [(up, up_expected, "+1"), (down, down_expected, "-1")]
        {
            assert!(
                (got - want).abs() < 5.0 * want.sqrt(),
                "peak {name}: {got} vs {want}"
            );
            assert!(got < far - 3.0 * far.sqrt(), "peak {name} must sit below the far level");
        }
    }

    #[test]
    fn hbt_recovers_injected_g2() {
        let e = emitter(200.0, 0.9, 0.2, 0.0);
        let mut setup = InterferenceSetup::default();
        setup.brightness_1 = 0.3;
        let n = 1_000_000u64;
        let dur = n as f64 / (setup.rep_rate_mhz * 1e6);
        let stream = simulate_hbt(&e, &setup, dur, 3).unwrap();
        let (c0, c1) = stream.channel_timestamps();
        let period = setup.period_ps();
        let central = coincidences(&c0, &c1, 0, 2_000) as f64;
        let mut side = 0u64;
        for k in 2..=9i64 {
            side += coincidences(&c0, &c1, (k as f64 * period).round() as i64, 2_000);
        }
        let g2 = central / (side as f64 / 8.0);
        let sigma = g2 * (1.0 / central + 1.0 / side as f64).sqrt();
        assert!((g2 - 0.2).abs() < 4.0 * sigma, "g2 = {g2} ± {sigma}");
    }
}
