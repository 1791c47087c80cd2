//! `homsim` — simulate, analyze, and tune remote two-photon interference
//! experiments from one TOML configuration.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 failed sanity flag (`analyze --strict`). Errors go to standard error
//! as `error[<category>]: <message>`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use homsim_core::analysis::{
    build_histogram, integrate_peaks, sanity_checks, FlagState, SanityInputs, VisibilityReport,
};
use homsim_core::config::{OutputFormat, RunConfig, RunMode};
use homsim_core::io;
use homsim_core::noise::{fit_noise, simulate_rf_trace, NoiseProcess, RfTrace};
use homsim_core::physics::{
    indistinguishability_upper_bound, mutual_indistinguishability, noise_averaged_both,
    temporal_overlap,
};
use homsim_core::sim::{
    simulate_hbt, simulate_remote_hom, simulate_single_hom, InterferenceSetup, Polarization,
    TimeTagStream,
};
use homsim_core::tuning::{grid_refine_optimize, scan_map, ScanBest};
use homsim_core::units::pm_to_angular_per_ns;
use homsim_core::{seed, selfcheck, Error};

#[derive(Parser)]
#[command(
    name = "homsim",
    version,
    about = "Two-photon interference between remote single-photon sources: \
             simulation, analysis, and device tuning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file (TOML); built-in defaults are used when omitted
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate time-tag streams for the configured run mode
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Run mode, overriding the configuration
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Turn recorded tag streams into a visibility report
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Parallel-polarization tag file (remote analysis)
        #[arg(long, value_name = "PATH", requires = "orthogonal")]
        parallel: Option<PathBuf>,
        /// Orthogonal-polarization tag file (remote analysis)
        #[arg(long, value_name = "PATH", requires = "parallel")]
        orthogonal: Option<PathBuf>,
        /// Self-interference tag file (single-source analysis)
        #[arg(long, value_name = "PATH", conflicts_with_all = ["parallel", "orthogonal"])]
        input: Option<PathBuf>,
        /// Exit with an error when any sanity flag fails
        #[arg(long)]
        strict: bool,
    },
    /// Fit the spectral-wander amplitude of an intensity trace
    FitNoise {
        #[command(flatten)]
        common: Common,
        /// Trace CSV to fit; a trace is simulated from the config when omitted
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
    /// Print the analytic indistinguishability chain for the configured pair
    Bound {
        #[command(flatten)]
        common: Common,
    },
    /// Map the two-source visibility over both bias voltages
    Scan {
        #[command(flatten)]
        common: Common,
    },
    /// Grid-refinement search for the bias pair maximizing indistinguishability
    Optimize {
        #[command(flatten)]
        common: Common,
    },
    /// Simulate a resonance-fluorescence intensity trace
    RfTrace {
        #[command(flatten)]
        common: Common,
    },
    /// Run the built-in acceptance suite (optionally only the named checks)
    Selfcheck {
        #[arg(value_name = "CHECK")]
        names: Vec<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Single,
    Remote,
}

enum Failure {
    Usage(String),
    Core(Error),
    Sanity(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn category(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::Config { .. } => "config",
        Error::Format { .. } => "format",
        Error::Analysis(_) => "analysis",
        Error::NoSignal(_) => "no-signal",
        Error::NoConvergence(_) => "no-convergence",
        Error::Io(_) => "io",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprintln!("error[usage]: {e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error[usage]: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error[{}]: {e}", category(&e));
            ExitCode::from(2)
        }
        Err(Failure::Sanity(msg)) => {
            eprintln!("error[sanity]: {msg}");
            ExitCode::from(3)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate { common, mode } => simulate(&load_config(&common)?, mode),
        Command::Analyze { common, parallel, orthogonal, input, strict } => {
            analyze(&load_config(&common)?, parallel, orthogonal, input, strict)
        }
        Command::FitNoise { common, input } => fit_noise_cmd(&load_config(&common)?, input),
        Command::Bound { common } => bound(&load_config(&common)?).map_err(Into::into),
        Command::Scan { common } => scan(&load_config(&common)?).map_err(Into::into),
        Command::Optimize { common } => optimize(&load_config(&common)?).map_err(Into::into),
        Command::RfTrace { common } => rf_trace(&load_config(&common)?).map_err(Into::into),
        Command::Selfcheck { names } => run_selfcheck(&names),
    }
}

fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.run.seed = s;
    }
    if let Some(dir) = &common.out {
        cfg.output.directory = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Histogram span covering `peaks_per_side` full side peaks plus a half
/// period of margin, rounded down to a whole number of bins.
fn peak_range_ps(setup: &InterferenceSetup, peaks_per_side: f64) -> i64 {
    let bin = setup.bin_ps as i64;
    let raw = (peaks_per_side + 0.5) * setup.period_ps();
    ((raw as i64) / bin).max(1) * bin
}

fn simulate(cfg: &RunConfig, mode: Option<ModeArg>) -> Result<(), Failure> {
    let mode = match (mode, cfg.run.mode) {
        (Some(ModeArg::Single), _) | (None, RunMode::Single) => RunMode::Single,
        (Some(ModeArg::Remote), _) | (None, RunMode::Remote) => RunMode::Remote,
        (None, other) => {
            return Err(Failure::Core(Error::config(
                "run.mode",
                format!("simulate needs mode single or remote, config says {other:?}"),
            )))
        }
    };
    let e1 = cfg.sources.s1.effective_emitter();
    let e2 = cfg.sources.s2.effective_emitter();
    let base = cfg.effective_setup();
    let duration_s = cfg.duration_s()?;
    let master = cfg.run.seed;
    let dir = &cfg.output.directory;

    let mut outputs: Vec<(&str, TimeTagStream)> = Vec::new();
    match mode {
        RunMode::Single => {
            let stream =
                simulate_single_hom(&e1, &base, duration_s, seed::derive(master, "single", 0))?;
            outputs.push(("mzi.ptt", stream));
            let hbt =
                simulate_hbt(&e1, &base, duration_s, seed::derive(master, "hbt-s1", 0))?;
            outputs.push(("hbt_s1.ptt", hbt));
        }
        RunMode::Remote => {
            let want = |p: Polarization| {
                cfg.run.polarization.is_none() || cfg.run.polarization == Some(p)
            };
            if want(Polarization::Parallel) {
                let mut s = base.clone();
                s.polarization = Polarization::Parallel;
                let stream = simulate_remote_hom(
                    &e1,
                    &e2,
                    &s,
                    duration_s,
                    seed::derive(master, "remote-parallel", 0),
                )?;
                outputs.push(("parallel.ptt", stream));
            }
            if want(Polarization::Orthogonal) {
                let mut s = base.clone();
                s.polarization = Polarization::Orthogonal;
                let stream = simulate_remote_hom(
                    &e1,
                    &e2,
                    &s,
                    duration_s,
                    seed::derive(master, "remote-orthogonal", 0),
                )?;
                outputs.push(("orthogonal.ptt", stream));
            }
            let hbt1 = simulate_hbt(&e1, &base, duration_s, seed::derive(master, "hbt-s1", 0))?;
            outputs.push(("hbt_s1.ptt", hbt1));
            let mut swapped = base.clone();
            swapped.brightness_1 = base.brightness_2;
            let hbt2 =
                simulate_hbt(&e2, &swapped, duration_s, seed::derive(master, "hbt-s2", 0))?;
            outputs.push(("hbt_s2.ptt", hbt2));
        }
        _ => unreachable!("narrowed above"),
    }
    for (name, stream) in &outputs {
        let path = dir.join(name);
        io::write_tag_file(&path, stream)?;
        println!("wrote {} ({} records)", path.display(), stream.records.len());
    }
    Ok(())
}

fn analyze(
    cfg: &RunConfig,
    parallel: Option<PathBuf>,
    orthogonal: Option<PathBuf>,
    input: Option<PathBuf>,
    strict: bool,
) -> Result<(), Failure> {
    let setup = cfg.effective_setup();
    let period_ps = setup.period_ps();
    let range_ps = peak_range_ps(&setup, 26.0);
    let dir = &cfg.output.directory;
    let e1 = cfg.sources.s1.effective_emitter();
    let e2 = cfg.sources.s2.effective_emitter();

    let (report, histograms) = match (parallel, orthogonal, input) {
        (Some(par_path), Some(perp_path), None) => {
            let par = io::read_tag_file(&par_path)?;
            let perp = io::read_tag_file(&perp_path)?;
            let h_par = build_histogram(&par, setup.bin_ps, range_ps)?
                .with_metadata(period_ps, "parallel");
            let h_perp = build_histogram(&perp, setup.bin_ps, range_ps)?
                .with_metadata(period_ps, "orthogonal");
            let rep_par = integrate_peaks(&h_par, setup.window_ns, true)?;
            let rep_perp = integrate_peaks(&h_perp, setup.window_ns, true)?;
            let report = VisibilityReport::remote(
                &rep_par,
                &rep_perp,
                setup.r_bs,
                setup.t_bs,
                [e1.g2_zero, e2.g2_zero],
            )?;
            let singles = {
                let (c0, c1) = par.channel_timestamps();
                (c0.len() as u64, c1.len() as u64)
            };
            let flags = sanity_checks(&SanityInputs {
                parallel: &h_par,
                orthogonal: Some(&h_perp),
                singles: Some(singles),
                r_bs: setup.r_bs,
                t_bs: setup.t_bs,
                g2: Some((e1.g2_zero, e2.g2_zero)),
                window_ns: setup.window_ns,
            })?;
            (report.with_flags(flags), vec![h_par, h_perp])
        }
        (None, None, Some(path)) => {
            let stream = io::read_tag_file(&path)?;
            let hist = build_histogram(&stream, setup.bin_ps, range_ps)?
                .with_metadata(period_ps, "mzi");
            let rep = integrate_peaks(&hist, setup.window_ns, true)?;
            let report =
                VisibilityReport::single(&rep, setup.r_bs, setup.t_bs, e1.g2_zero)?;
            let flags = sanity_checks(&SanityInputs {
                parallel: &hist,
                orthogonal: None,
                singles: None,
                r_bs: setup.r_bs,
                t_bs: setup.t_bs,
                g2: None,
                window_ns: setup.window_ns,
            })?;
            (report.with_flags(flags), vec![hist])
        }
        _ => {
            return Err(Failure::Usage(
                "analyze needs either --parallel with --orthogonal, or --input".into(),
            ))
        }
    };

    println!("experiment = {}", report.experiment);
    println!("v_raw = {:.6} ± {:.6}", report.v_raw, report.v_raw_err);
    println!("m_corrected = {:.6} ± {:.6}", report.m_corrected, report.m_corrected_err);
    for flag in &report.flags {
        let state = match flag.state {
            FlagState::Pass => "pass",
            FlagState::Fail => "FAIL",
            FlagState::NotApplicable => "n/a",
        };
        println!("flag {} = {state}", flag.name);
    }
    if cfg.output.wants(OutputFormat::Toml) {
        let path = dir.join("report.toml");
        io::write_toml(&path, &report)?;
        println!("wrote {}", path.display());
    }
    if cfg.output.wants(OutputFormat::Csv) {
        for h in &histograms {
            let path = dir.join(format!("hist_{}.csv", h.label));
            io::write_histogram_csv(&path, h)?;
            println!("wrote {}", path.display());
        }
    }
    let failed: Vec<&str> = report
        .flags
        .iter()
        .filter(|f| f.state == FlagState::Fail)
        .map(|f| f.name.as_str())
        .collect();
    if strict && !failed.is_empty() {
        return Err(Failure::Sanity(format!("failed flags: {}", failed.join(", "))));
    }
    Ok(())
}

fn configured_trace(cfg: &RunConfig) -> Result<RfTrace, Error> {
    let rf = &cfg.rf_trace;
    let source = match rf.source.as_str() {
        "s1" => &cfg.sources.s1,
        "s2" => &cfg.sources.s2,
        other => {
            return Err(Error::config("rf_trace.source", format!("unknown source `{other}`")))
        }
    };
    let e = source.effective_emitter();
    let process = NoiseProcess {
        sigma_per_ns: e.sigma_noise_per_ns(),
        mu_per_ns: 0.0,
        corr_time_us: e.noise_corr_time_us,
    };
    simulate_rf_trace(
        &process,
        rf.peak_counts_per_bin,
        e.coherence_decay_per_ns(),
        rf.duration_s,
        rf.bin_us,
        seed::derive(cfg.run.seed, "rf-trace", 0),
    )
}

fn fit_noise_cmd(cfg: &RunConfig, input: Option<PathBuf>) -> Result<(), Failure> {
    let trace = match input {
        Some(path) => io::read_rf_trace_csv(&path)?,
        None => configured_trace(cfg)?,
    };
    let fit = fit_noise(&trace)?;
    println!("sigma_over_linewidth = {:.6}", fit.sigma_over_linewidth());
    println!("mu_over_linewidth = {:.6}", fit.mu_hat / fit.linewidth_hat);
    println!("peak_counts_per_bin = {:.3}", fit.m_max_hat);
    println!("converged = {}", fit.converged);
    if cfg.output.wants(OutputFormat::Toml) {
        let path = cfg.output.directory.join("noise_fit.toml");
        io::write_toml(&path, &fit)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn bound(cfg: &RunConfig) -> Result<(), Error> {
    let e1 = cfg.sources.s1.effective_emitter();
    let e2 = cfg.sources.s2.effective_emitter();
    let s12 = temporal_overlap(e1.tau_ps, e2.tau_ps)?;
    let delta0 = pm_to_angular_per_ns(
        (e1.lambda0_nm - e2.lambda0_nm) * 1000.0,
        0.5 * (e1.lambda0_nm + e2.lambda0_nm),
    );
    let at_delta = mutual_indistinguishability(&e1, &e2, delta0)?;
    let upper = indistinguishability_upper_bound(&e1, &e2)?;
    // Quadratic-mean per-source wander; the averaging helper applies the
    // √2 relative-detuning factor itself.
    let sigma =
        (0.5 * (e1.sigma_noise_per_ns().powi(2) + e2.sigma_noise_per_ns().powi(2))).sqrt();
    let averaged = noise_averaged_both(&e1, &e2, sigma)?;
    println!("temporal_overlap_s12 = {s12:.6}");
    println!("static_detuning_rad_per_ns = {delta0:.6}");
    println!("m12_at_static_detuning = {at_delta:.6}");
    println!("m12_upper_bound = {upper:.6}");
    println!("m12_noise_averaged_numerical = {:.6}", averaged.numerical_average);
    println!("m12_noise_averaged_closed_form = {:.6}", averaged.closed_form_as_printed);
    Ok(())
}

fn scan(cfg: &RunConfig) -> Result<(), Error> {
    let result = scan_map(
        &cfg.scan_config(),
        &cfg.scan.v1_axis(),
        &cfg.scan.v2_axis(),
        cfg.scan.dwell_s,
        cfg.run.seed,
    )?;
    let dir = &cfg.output.directory;
    if cfg.output.wants(OutputFormat::Csv) {
        for path in io::write_scan_matrices(dir, &result)? {
            println!("wrote {}", path.display());
        }
    }
    if cfg.output.wants(OutputFormat::Toml) {
        #[derive(serde::Serialize)]
        struct ScanSummary {
            v1_points: usize,
            v2_points: usize,
            dwell_s: f64,
            #[serde(skip_serializing_if = "Option::is_none")]
            best: Option<ScanBest>,
        }
        let path = dir.join("scan_summary.toml");
        io::write_toml(
            &path,
            &ScanSummary {
                v1_points: result.v1_mv.len(),
                v2_points: result.v2_mv.len(),
                dwell_s: result.dwell_s,
                best: result.best,
            },
        )?;
        println!("wrote {}", path.display());
    }
    match &result.best {
        Some(b) => println!(
            "best = v1 {} mV, v2 {} mV, v_rem {:.4}",
            b.v1_mv, b.v2_mv, b.v_rem
        ),
        None => println!("best = none (no point with both sources active)"),
    }
    Ok(())
}

fn optimize(cfg: &RunConfig) -> Result<(), Error> {
    let o = &cfg.optimize;
    let result = grid_refine_optimize(
        &cfg.scan_config(),
        (o.v1_range_mv[0], o.v1_range_mv[1]),
        (o.v2_range_mv[0], o.v2_range_mv[1]),
        &o.step_schedule_mv,
        o.dwell_s,
        cfg.run.seed,
    )?;
    println!("v1_mv = {}", result.v1_mv);
    println!("v2_mv = {}", result.v2_mv);
    println!("v_rem = {:.6}", result.v_rem);
    println!("m12 = {:.6}", result.m12);
    println!("points_measured = {}", result.audit.len());
    if cfg.output.wants(OutputFormat::Toml) {
        let path = cfg.output.directory.join("optimize.toml");
        io::write_toml(&path, &result)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn rf_trace(cfg: &RunConfig) -> Result<(), Error> {
    let trace = configured_trace(cfg)?;
    println!("bins = {}", trace.counts.len());
    println!("mean_rate_per_bin = {:.4}", trace.mean_rate);
    let path = cfg.output.directory.join("rf_trace.csv");
    io::write_rf_trace_csv(&path, &trace)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run_selfcheck(names: &[String]) -> Result<(), Failure> {
    let names: Vec<&str> = if names.is_empty() {
        selfcheck::check_names()
    } else {
        names.iter().map(|s| s.as_str()).collect()
    };
    let mut failed = 0usize;
    for name in names {
        let Some(report) = selfcheck::run_named(name) else {
            return Err(Failure::Usage(format!(
                "unknown check `{name}`; available: {}",
                selfcheck::check_names().join(", ")
            )));
        };
        let verdict = if report.passed { "PASS" } else { "FAIL" };
        println!("{}: {verdict} — {} [{:.1} s]", report.name, report.detail, report.seconds);
        if !report.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(Failure::Core(Error::analysis(format!(
            "{failed} acceptance check(s) failed"
        ))));
    }
    Ok(())
}
