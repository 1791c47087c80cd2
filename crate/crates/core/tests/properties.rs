//! Property suites: algebraic identities, oracle agreement, and format
//! round-trips over randomized inputs.

use proptest::prelude::*;

use homsim_core::analysis::{build_histogram, correct_remote, correct_single};
use homsim_core::erfcx::erfcx;
use homsim_core::io::{read_tag_file, write_tag_file};
use homsim_core::physics::{
    indistinguishability_upper_bound, indistinguishability_upper_bound_split_form,
    mutual_indistinguishability, temporal_overlap, EmitterSpec,
};
use homsim_core::sim::{TagRecord, TimeTagStream};
use homsim_core::units::{angular_per_ns_to_pm, pm_to_angular_per_ns};

fn emitter(tau_ps: f64, m: f64) -> EmitterSpec {
    EmitterSpec { tau_ps, m_intrinsic: m, ..EmitterSpec::default() }
}

fn tag_stream(max_len: usize) -> impl Strategy<Value = TimeTagStream> {
    proptest::collection::vec((0u8..2, 1u64..60_000), 0..max_len).prop_map(|steps| {
        let mut t = 0u64;
        let records: Vec<TagRecord> = steps
            .into_iter()
            .map(|(channel, dt)| {
                t += dt;
                TagRecord { channel, timestamp_ps: t }
            })
            .collect();
        TimeTagStream { records, duration_ps: t + 1, seed: 17 }
    })
}

fn all_pairs(stream: &TimeTagStream, bin_ps: u32, range_ps: i64) -> Vec<u64> {
    let (c0, c1) = stream.channel_timestamps();
    let mut counts = vec![0u64; (2 * range_ps / bin_ps as i64) as usize];
    for &t0 in &c0 {
        for &t1 in &c1 {
            let dt = t1 as i64 - t0 as i64;
            if dt >= -range_ps && dt < range_ps {
                counts[((dt + range_ps) / bin_ps as i64) as usize] += 1;
            }
        }
    }
    counts
}

proptest! {
    /// The splitter/multiphoton correction inverts the visibility model it
    /// is derived from, at any splitting ratio.
    #[test]
    fn remote_correction_round_trips(
        m in 1e-3..0.999f64,
        r in 0.05..0.95f64,
        g1 in 0.0..0.4f64,
        g2 in 0.0..0.4f64,
    ) {
        let t = 1.0 - r;
        let (alpha, beta) = (2.0 * r * t, r * r + t * t);
        let v = alpha * m / (beta * (1.0 + 0.5 * (g1 + g2)));
        prop_assert!((correct_remote(v, r, t, g1, g2) - m).abs() <= 1e-12);
    }

    /// Same for the self-interference correction.
    #[test]
    fn single_correction_round_trips(
        m in 1e-3..0.999f64,
        r in 0.05..0.95f64,
        g in 0.0..0.4f64,
    ) {
        let t = 1.0 - r;
        let v = m * 4.0 * r * t * (1.0 - g) + 1.0 - 4.0 * r * t * (1.0 + g);
        prop_assert!((correct_single(v, r, t, g) - m).abs() <= 1e-12);
    }

    /// The two-pointer correlator matches the all-pairs oracle exactly.
    #[test]
    fn histogram_matches_all_pairs_oracle(
        stream in tag_stream(400),
        bin in 10u32..2000,
        bins_per_side in 1i64..150,
    ) {
        let range = bin as i64 * bins_per_side;
        let fast = build_histogram(&stream, bin, range).unwrap();
        prop_assert_eq!(fast.counts, all_pairs(&stream, bin, range));
    }

    /// The product and split forms of the mutual-indistinguishability bound
    /// agree, and the zero-detuning value meets the bound.
    #[test]
    fn bound_forms_agree(
        tau1 in 1.0..5000.0f64,
        tau2 in 1.0..5000.0f64,
        m1 in 0.01..1.0f64,
        m2 in 0.01..1.0f64,
    ) {
        let (e1, e2) = (emitter(tau1, m1), emitter(tau2, m2));
        let plain = indistinguishability_upper_bound(&e1, &e2).unwrap();
        let split = indistinguishability_upper_bound_split_form(&e1, &e2).unwrap();
        let at_zero = mutual_indistinguishability(&e1, &e2, 0.0).unwrap();
        prop_assert!(((plain - split) / plain).abs() <= 1e-12);
        prop_assert!(((plain - at_zero) / plain).abs() <= 1e-12);
    }

    /// Temporal overlap of two exponential wavepackets is symmetric, lies
    /// in (0, 1], and detuning can only reduce the mutual value below it.
    #[test]
    fn temporal_overlap_symmetric_bounded(
        tau1 in 1.0..5000.0f64,
        tau2 in 1.0..5000.0f64,
        delta in -50.0..50.0f64,
    ) {
        let s12 = temporal_overlap(tau1, tau2).unwrap();
        let s21 = temporal_overlap(tau2, tau1).unwrap();
        prop_assert!((s12 - s21).abs() <= 1e-15);
        prop_assert!(s12 > 0.0 && s12 <= 1.0);
        let (e1, e2) = (emitter(tau1, 0.95), emitter(tau2, 0.95));
        let bound = indistinguishability_upper_bound(&e1, &e2).unwrap();
        let detuned = mutual_indistinguishability(&e1, &e2, delta).unwrap();
        prop_assert!(detuned <= bound * (1.0 + 1e-12));
    }

    /// Wavelength-offset and angular-detuning conversions invert each other.
    #[test]
    fn detuning_units_round_trip(
        pm in 1e-3..1e4f64,
        lambda_nm in 700.0..1600.0f64,
    ) {
        let omega = pm_to_angular_per_ns(pm, lambda_nm);
        prop_assert!((angular_per_ns_to_pm(omega, lambda_nm) / pm - 1.0).abs() <= 1e-12);
    }

    /// erfcx stays inside the classic two-sided rational bounds for x ≥ 0.
    #[test]
    fn erfcx_within_classic_bounds(log_x in -7.0..18.0f64) {
        let x = log_x.exp();
        let y = erfcx(x);
        let lo = 2.0 / ((x + (x * x + 2.0).sqrt()) * std::f64::consts::PI.sqrt());
        let hi = 2.0 / ((x + (x * x + 4.0 / std::f64::consts::PI).sqrt())
            * std::f64::consts::PI.sqrt());
        prop_assert!(y > lo * (1.0 - 1e-12) && y <= hi * (1.0 + 1e-12),
            "x = {x:e}: {lo:e} < {y:e} <= {hi:e} violated");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    /// Binary tag files survive a write→read round trip bit-exactly.
    #[test]
    fn tag_file_round_trips(stream in tag_stream(3000)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stream.ptt");
        write_tag_file(&path, &stream).unwrap();
        let back = read_tag_file(&path).unwrap();
        prop_assert_eq!(back.records, stream.records);
    }
}
