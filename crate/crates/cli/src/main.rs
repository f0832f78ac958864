//! `evdetect` - ultrasonic EV detection from the command line.
//!
//! Subcommands compose the library pipeline end to end: `synth` renders
//! ground-truth scenes to WAV, `detect` runs the bandpass/segment/vote
//! detector, `psd` and `spectrogram` export spectral estimates as CSV or
//! JSON, and `summarize` reduces recordings to emission-band tables. Every
//! invocation is deterministic for a fixed `--seed`, numeric output carries
//! nine significant digits, and exit codes are script-friendly: 0 success,
//! 1 unreadable/malformed input, 2 invalid flags, 10 detections present
//! (with `--exit-code-on-detect`).

use clap::{Args, Parser, Subcommand, ValueEnum};
use evdetect_core::clip::AudioClip;
use evdetect_core::detector::{
    decisions_to_csv, events_to_csv, events_to_json, power_series_to_csv, run_detector_trace,
    DetectorConfig,
};
use evdetect_core::filter::design_bandpass;
use evdetect_core::numfmt;
use evdetect_core::report::{
    compare_profiles, summarize_bands, summary_to_text, table_to_text, BandSummary,
};
use evdetect_core::spectral::{
    psd_to_csv, spectrogram_to_csv, stft_spectrogram, welch_psd, PowerSpectralDensity,
    Spectrogram, SpectralError, WindowKind, STFT_FFT_DEFAULT, STFT_HOP_DEFAULT,
    WELCH_FFT_DEFAULT, WELCH_OVERLAP_DEFAULT,
};
use evdetect_core::synth::{
    builtin_profiles, profile_by_name, render_scene, EmissionProfile, TrajectoryScenario,
};
use evdetect_core::wav::{read_wav, write_wav, BitDepth};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Sample rates below this cannot carry the 16-60 kHz detection band.
const MIN_ULTRASONIC_FS: u32 = 120_000;

const EXIT_DETECTED: u8 = 10;

#[derive(Parser)]
#[command(
    name = "evdetect",
    version,
    about = "Detect electric vehicles from their ultrasonic acoustic emissions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Fail (exit 1) instead of warning when an input sample rate is too low
    /// for the ultrasonic band.
    #[arg(long, global = true)]
    fs_check: bool,

    /// Seed for the scene renderer's noise generator.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Write the report to this file instead of stdout (byte-identical).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format; each subcommand has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
}

#[derive(Subcommand)]
enum Command {
    /// Detect vehicle events in a WAV recording.
    Detect(DetectArgs),
    /// Welch power spectral density of a recording.
    Psd(PsdArgs),
    /// STFT spectrogram of a recording.
    Spectrogram(SpectrogramArgs),
    /// Render a synthetic vehicle drive to a WAV file.
    Synth(SynthArgs),
    /// Summarize emission bands of one or more recordings.
    Summarize(SummarizeArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WindowArg {
    Hann,
    Hamming,
    Rectangular,
}

impl From<WindowArg> for WindowKind {
    fn from(w: WindowArg) -> WindowKind {
        match w {
            WindowArg::Hann => WindowKind::Hann,
            WindowArg::Hamming => WindowKind::Hamming,
            WindowArg::Rectangular => WindowKind::Rectangular,
        }
    }
}

#[derive(Args)]
struct DetectArgs {
    /// Input WAV file.
    input: PathBuf,
    /// Bandpass low edge, Hz.
    #[arg(long, default_value_t = 16_000.0)]
    flo: f64,
    /// Bandpass high edge, Hz.
    #[arg(long, default_value_t = 60_000.0)]
    fhi: f64,
    /// FIR filter order (even).
    #[arg(long, default_value_t = 512)]
    order: usize,
    /// Segment length in milliseconds.
    #[arg(long, default_value_t = 0.5)]
    segment_ms: f64,
    /// Segment mean-square power threshold.
    #[arg(long, default_value_t = 3e-4)]
    threshold: f64,
    /// Votes required within the window.
    #[arg(long, default_value_t = 5)]
    votes: usize,
    /// Vote window length in segments.
    #[arg(long, default_value_t = 1000)]
    window: usize,
    /// Merge events closer than this many seconds.
    #[arg(long, default_value_t = 2.5)]
    merge_gap: f64,
    /// Exit with status 10 when at least one event is found.
    #[arg(long)]
    exit_code_on_detect: bool,
    /// Also write the segment power series as CSV.
    #[arg(long)]
    power_out: Option<PathBuf>,
    /// Also write the per-segment threshold decisions as CSV.
    #[arg(long)]
    decisions_out: Option<PathBuf>,
}

#[derive(Args)]
struct PsdArgs {
    /// Input WAV file.
    input: PathBuf,
    /// FFT size (power of two).
    #[arg(long, default_value_t = WELCH_FFT_DEFAULT)]
    fft: usize,
    /// Segment overlap fraction in [0, 1).
    #[arg(long, default_value_t = WELCH_OVERLAP_DEFAULT)]
    overlap: f64,
    /// Analysis window function.
    #[arg(long, value_enum, default_value_t = WindowArg::Hann)]
    window: WindowArg,
    /// Keep only bins at or above this frequency, Hz.
    #[arg(long)]
    flo: Option<f64>,
    /// Keep only bins at or below this frequency, Hz.
    #[arg(long)]
    fhi: Option<f64>,
}

#[derive(Args)]
struct SpectrogramArgs {
    /// Input WAV file.
    input: PathBuf,
    /// FFT size (power of two).
    #[arg(long, default_value_t = STFT_FFT_DEFAULT)]
    fft: usize,
    /// Hop between frames in samples.
    #[arg(long, default_value_t = STFT_HOP_DEFAULT)]
    hop: usize,
    /// Analysis window function.
    #[arg(long, value_enum, default_value_t = WindowArg::Hann)]
    window: WindowArg,
    /// Keep only bins at or above this frequency, Hz.
    #[arg(long)]
    flo: Option<f64>,
    /// Keep only bins at or below this frequency, Hz.
    #[arg(long)]
    fhi: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScenarioArg {
    Circle,
    PassBy,
}

#[derive(Args)]
struct SynthArgs {
    /// Builtin profile name (nissan, bmw, volkswagen, toyota) or an inline
    /// JSON profile document.
    #[arg(long)]
    profile: String,
    /// Trajectory shape, configured by the geometry flags below.
    #[arg(long, value_enum, default_value_t = ScenarioArg::Circle)]
    scenario: ScenarioArg,
    /// Full trajectory as a JSON document; overrides --scenario and the
    /// geometry flags.
    #[arg(long)]
    scenario_json: Option<String>,
    /// Circle radius, m.
    #[arg(long, default_value_t = 10.0)]
    radius: f64,
    /// Circle: closest approach of the near edge, m.
    #[arg(long, default_value_t = 1.0)]
    min_distance: f64,
    /// Circle: number of revolutions.
    #[arg(long, default_value_t = 2.0)]
    revolutions: f64,
    /// Speed, m/s (circle and constant-speed pass-by).
    #[arg(long, default_value_t = 4.0)]
    speed: f64,
    /// Pass-by: distance at the start and end of the run, m.
    #[arg(long, default_value_t = 15.0)]
    start_distance: f64,
    /// Pass-by: closest approach, m.
    #[arg(long, default_value_t = 1.5)]
    closest: f64,
    /// Pass-by: accelerate from standstill at this rate, m/s^2.
    #[arg(long)]
    accel: Option<f64>,
    /// Output sample rate, Hz.
    #[arg(long, default_value_t = 192_000)]
    fs: u32,
    /// Source amplitude at 1 m.
    #[arg(long, default_value_t = 0.12)]
    amplitude: f64,
    /// Background noise RMS.
    #[arg(long, default_value_t = 0.02)]
    noise: f64,
    /// Apply Doppler shifts.
    #[arg(long)]
    doppler: bool,
    /// PCM bit depth: 16 or 24.
    #[arg(long, default_value_t = 16)]
    bit_depth: u32,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Input WAV files; two or more produce a ranked comparison table.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Analysis window low edge, Hz.
    #[arg(long, default_value_t = 15_000.0)]
    flo: f64,
    /// Analysis window high edge, Hz.
    #[arg(long, default_value_t = 60_000.0)]
    fhi: f64,
    /// Signal criterion: PSD must exceed this multiple of the window median.
    #[arg(long, default_value_t = 10.0)]
    prominence: f64,
    /// Welch FFT size (power of two).
    #[arg(long, default_value_t = WELCH_FFT_DEFAULT)]
    fft: usize,
    /// Welch overlap fraction in [0, 1).
    #[arg(long, default_value_t = WELCH_OVERLAP_DEFAULT)]
    overlap: f64,
    /// Analysis window function.
    #[arg(long, value_enum, default_value_t = WindowArg::Hann)]
    window: WindowArg,
}

enum CliError {
    /// Unreadable or malformed input data: exit 1.
    Input(String),
    /// Invalid or inconsistent flags: exit 2.
    Usage(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match &cli.command {
        Command::Detect(args) => cmd_detect(&cli, args),
        Command::Psd(args) => cmd_psd(&cli, args),
        Command::Spectrogram(args) => cmd_spectrogram(&cli, args),
        Command::Synth(args) => cmd_synth(&cli, args),
        Command::Summarize(args) => cmd_summarize(&cli, args),
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

fn emit(out: &Option<PathBuf>, payload: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, payload)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(payload)
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Input(format!("cannot write to stdout: {e}")))
        }
    }
}

fn write_csv_file(path: &Path, payload: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, payload)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn load_clip(path: &Path, fs_check: bool) -> Result<AudioClip, CliError> {
    let clip = read_wav(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    if clip.sample_rate_hz < MIN_ULTRASONIC_FS {
        let note = format!(
            "{}: sample rate {} Hz is below {} Hz; the ultrasonic band is not fully representable",
            path.display(),
            clip.sample_rate_hz,
            MIN_ULTRASONIC_FS
        );
        if fs_check {
            return Err(CliError::Input(note));
        }
        eprintln!("warning: {note}");
    }
    Ok(clip)
}

/// Flag-driven errors are usage errors; anything data-dependent is an input
/// error.
fn classify_spectral(e: SpectralError) -> CliError {
    match e {
        SpectralError::InvalidFftSize { .. }
        | SpectralError::InvalidHop { .. }
        | SpectralError::InvalidOverlap { .. }
        | SpectralError::InvalidLength { .. }
        | SpectralError::BandOutOfRange { .. } => CliError::Usage(e.to_string()),
        SpectralError::ClipTooShort { .. } => CliError::Input(e.to_string()),
    }
}

fn crop_bounds(
    flo: Option<f64>,
    fhi: Option<f64>,
    bin_freqs: &[f64],
) -> Result<(usize, usize), CliError> {
    let max = *bin_freqs.last().expect("spectra always have bins");
    let lo = flo.unwrap_or(0.0);
    let hi = fhi.unwrap_or(max);
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi && hi <= max) {
        return Err(CliError::Usage(format!(
            "crop [{lo}, {hi}] Hz must be increasing and within [0, {max}] Hz"
        )));
    }
    let first = bin_freqs.partition_point(|&f| f < lo);
    let last = bin_freqs.partition_point(|&f| f <= hi);
    if first >= last {
        return Err(CliError::Usage(format!(
            "crop [{lo}, {hi}] Hz contains no frequency bins"
        )));
    }
    Ok((first, last))
}

// ---------------------------------------------------------------------------
// detect
// ---------------------------------------------------------------------------

fn cmd_detect(cli: &Cli, args: &DetectArgs) -> Result<ExitCode, CliError> {
    let format = cli.format.unwrap_or(OutputFormat::Json);
    if format == OutputFormat::Text {
        return Err(CliError::Usage(
            "detect emits json (default) or csv, not text".into(),
        ));
    }
    if !(args.flo.is_finite() && args.fhi.is_finite() && args.flo > 0.0 && args.flo < args.fhi) {
        return Err(CliError::Usage(format!(
            "band [{}, {}] Hz must be increasing and positive",
            args.flo, args.fhi
        )));
    }
    let config = DetectorConfig {
        segment_ms: args.segment_ms,
        threshold: args.threshold,
        votes_required: args.votes,
        vote_window: args.window,
        merge_gap_s: args.merge_gap,
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let clip = load_clip(&args.input, cli.fs_check)?;
    let bandpass = design_bandpass(
        args.flo,
        args.fhi,
        args.order,
        clip.sample_rate_hz as f64,
        WindowKind::Hann,
    )
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let trace = run_detector_trace(&clip, &bandpass, &config)
        .map_err(|e| CliError::Input(e.to_string()))?;

    if let Some(path) = &args.power_out {
        let mut csv = Vec::new();
        power_series_to_csv(&trace.series, &mut csv)
            .map_err(|e| CliError::Input(e.to_string()))?;
        write_csv_file(path, &csv)?;
    }
    if let Some(path) = &args.decisions_out {
        let mut csv = Vec::new();
        decisions_to_csv(&trace.decisions, &trace.series, &mut csv)
            .map_err(|e| CliError::Input(e.to_string()))?;
        write_csv_file(path, &csv)?;
    }

    match format {
        OutputFormat::Json => {
            let payload = format!("{}\n", events_to_json(&trace.events));
            emit(&cli.out, payload.as_bytes())?;
        }
        OutputFormat::Csv => {
            let mut csv = Vec::new();
            events_to_csv(&trace.events, &mut csv).map_err(|e| CliError::Input(e.to_string()))?;
            emit(&cli.out, &csv)?;
        }
        OutputFormat::Text => unreachable!(),
    }

    if args.exit_code_on_detect && !trace.events.is_empty() {
        return Ok(ExitCode::from(EXIT_DETECTED));
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// psd / spectrogram
// ---------------------------------------------------------------------------

fn cmd_psd(cli: &Cli, args: &PsdArgs) -> Result<ExitCode, CliError> {
    let format = cli.format.unwrap_or(OutputFormat::Csv);
    if format == OutputFormat::Text {
        return Err(CliError::Usage(
            "psd emits csv (default) or json, not text".into(),
        ));
    }
    if !(args.overlap.is_finite() && (0.0..1.0).contains(&args.overlap)) {
        return Err(CliError::Usage(format!(
            "overlap {} must lie in [0, 1)",
            args.overlap
        )));
    }

    let clip = load_clip(&args.input, cli.fs_check)?;
    let psd = welch_psd(&clip, args.fft, args.overlap, args.window.into())
        .map_err(classify_spectral)?;
    let (first, last) = crop_bounds(args.flo, args.fhi, &psd.bin_freqs_hz)?;
    let cropped = PowerSpectralDensity {
        psd: psd.psd[first..last].to_vec(),
        bin_freqs_hz: psd.bin_freqs_hz[first..last].to_vec(),
        resolution_hz: psd.resolution_hz,
        n_segments: psd.n_segments,
    };

    let payload = match format {
        OutputFormat::Csv => {
            let mut csv = Vec::new();
            psd_to_csv(&cropped, &mut csv).map_err(|e| CliError::Input(e.to_string()))?;
            csv
        }
        OutputFormat::Json => format!("{}\n", numfmt::to_json(&cropped)).into_bytes(),
        OutputFormat::Text => unreachable!(),
    };
    emit(&cli.out, &payload)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_spectrogram(cli: &Cli, args: &SpectrogramArgs) -> Result<ExitCode, CliError> {
    let format = cli.format.unwrap_or(OutputFormat::Csv);
    if format == OutputFormat::Text {
        return Err(CliError::Usage(
            "spectrogram emits csv (default) or json, not text".into(),
        ));
    }

    let clip = load_clip(&args.input, cli.fs_check)?;
    let gram = stft_spectrogram(&clip, args.fft, args.hop, args.window.into())
        .map_err(classify_spectral)?;
    let (first, last) = crop_bounds(args.flo, args.fhi, &gram.bin_freqs_hz)?;
    let cropped = Spectrogram {
        magnitudes_db: gram
            .magnitudes_db
            .iter()
            .map(|row| row[first..last].to_vec())
            .collect(),
        frame_times_s: gram.frame_times_s.clone(),
        bin_freqs_hz: gram.bin_freqs_hz[first..last].to_vec(),
        fft_size: gram.fft_size,
        hop: gram.hop,
    };

    let payload = match format {
        OutputFormat::Csv => {
            let mut csv = Vec::new();
            spectrogram_to_csv(&cropped, &mut csv).map_err(|e| CliError::Input(e.to_string()))?;
            csv
        }
        OutputFormat::Json => format!("{}\n", numfmt::to_json(&cropped)).into_bytes(),
        OutputFormat::Text => unreachable!(),
    };
    emit(&cli.out, &payload)?;
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

fn cmd_synth(cli: &Cli, args: &SynthArgs) -> Result<ExitCode, CliError> {
    let out = cli
        .out
        .as_ref()
        .ok_or_else(|| CliError::Usage("synth requires --out <wav-path>".into()))?;
    let depth = match args.bit_depth {
        16 => BitDepth::Int16,
        24 => BitDepth::Int24,
        other => {
            return Err(CliError::Usage(format!(
                "bit depth {other} unsupported; use 16 or 24"
            )))
        }
    };

    let profile = parse_profile(&args.profile)?;
    let scenario = match &args.scenario_json {
        Some(text) => {
            TrajectoryScenario::from_json(text).map_err(|e| CliError::Usage(e.to_string()))?
        }
        None => match args.scenario {
            ScenarioArg::Circle => TrajectoryScenario::circle(
                args.radius,
                args.min_distance,
                args.revolutions,
                args.speed,
            ),
            ScenarioArg::PassBy => match args.accel {
                Some(a) => {
                    TrajectoryScenario::pass_by_accelerating(args.start_distance, args.closest, a)
                }
                None => TrajectoryScenario::pass_by_constant(
                    args.start_distance,
                    args.closest,
                    args.speed,
                ),
            },
        },
    };

    let clip = render_scene(
        &profile,
        &scenario,
        args.fs,
        args.amplitude,
        args.noise,
        args.doppler,
        cli.seed,
    )
    .map_err(|e| CliError::Usage(e.to_string()))?;
    write_wav(&clip, out, depth)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", out.display())))?;
    eprintln!(
        "wrote {}: {:.3} s of '{}' at {} Hz, {}-bit",
        out.display(),
        clip.duration_s(),
        profile.name,
        clip.sample_rate_hz,
        depth.bits()
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_profile(text: &str) -> Result<EmissionProfile, CliError> {
    let trimmed = text.trim();
    if trimmed.starts_with('{') {
        return EmissionProfile::from_json(trimmed).map_err(|e| CliError::Usage(e.to_string()));
    }
    profile_by_name(trimmed).ok_or_else(|| {
        let names: Vec<String> = builtin_profiles().into_iter().map(|p| p.name).collect();
        CliError::Usage(format!(
            "unknown profile '{trimmed}'; valid profiles: {} (or an inline JSON document)",
            names.join(", ")
        ))
    })
}

// ---------------------------------------------------------------------------
// summarize
// ---------------------------------------------------------------------------

fn cmd_summarize(cli: &Cli, args: &SummarizeArgs) -> Result<ExitCode, CliError> {
    let format = cli.format.unwrap_or(OutputFormat::Text);
    if format == OutputFormat::Csv {
        return Err(CliError::Usage(
            "summarize emits text (default) or json, not csv".into(),
        ));
    }
    if !(args.overlap.is_finite() && (0.0..1.0).contains(&args.overlap)) {
        return Err(CliError::Usage(format!(
            "overlap {} must lie in [0, 1)",
            args.overlap
        )));
    }

    let mut labeled: Vec<(String, BandSummary)> = Vec::with_capacity(args.inputs.len());
    for path in &args.inputs {
        let clip = load_clip(path, cli.fs_check)?;
        let psd = welch_psd(&clip, args.fft, args.overlap, args.window.into())
            .map_err(classify_spectral)?;
        let summary = summarize_bands(&psd, args.flo, args.fhi, args.prominence)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        labeled.push((label, summary));
    }

    let payload = if labeled.len() == 1 {
        let (_, summary) = &labeled[0];
        match format {
            OutputFormat::Text => summary_to_text(summary),
            OutputFormat::Json => format!("{}\n", summary.to_json()),
            OutputFormat::Csv => unreachable!(),
        }
    } else {
        let table = compare_profiles(&labeled).map_err(|e| CliError::Usage(e.to_string()))?;
        match format {
            OutputFormat::Text => table_to_text(&table),
            OutputFormat::Json => format!("{}\n", table.to_json()),
            OutputFormat::Csv => unreachable!(),
        }
    };
    emit(&cli.out, payload.as_bytes())?;
    Ok(ExitCode::SUCCESS)
}
