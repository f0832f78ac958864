//! Spectral estimation: window functions, STFT spectrograms, Welch power
//! spectral densities, and band power integration.
//!
//! Conventions, fixed so results are comparable across runs and tools:
//!
//! * Windows are generated in periodic form, w[n] = f(2*pi*n/L), the form
//!   that makes averaged overlapping segments unbiased.
//! * Welch PSDs are one-sided densities: each segment periodogram is scaled
//!   by 1/(fs * sum(w^2)) and every bin except DC and Nyquist is doubled, so
//!   sum(psd) * resolution_hz recovers mean-square signal power (Parseval).
//! * Spectrogram cells are 10*log10(|X|^2 / coherent_gain^2) clamped to a
//!   -200 dB floor; zero input renders as the floor, not -inf.
//! * Trailing samples that do not fill a whole segment are dropped.
//! * All averaging runs in a fixed sequential order; outputs are
//!   reproducible to the bit on the same platform.

use crate::clip::AudioClip;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};
use thiserror::Error;

/// Spectrogram defaults: 2048-point FFT, 50% overlap. At 192 kHz this gives
/// 93.75 Hz resolution and 1024 positive-frequency lines.
pub const STFT_FFT_DEFAULT: usize = 2048;
pub const STFT_HOP_DEFAULT: usize = 1024;
/// Welch defaults: 16384-point FFT, 50% overlap; 11.71875 Hz resolution and
/// 8192 positive-frequency lines at 192 kHz.
pub const WELCH_FFT_DEFAULT: usize = 16384;
pub const WELCH_OVERLAP_DEFAULT: f64 = 0.5;

/// Floor applied to every dB conversion.
pub const DB_FLOOR: f64 = -200.0;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("window of length {length} invalid for {kind:?}")]
    InvalidLength { kind: WindowKind, length: usize },
    #[error("fft size {fft_size} must be a power of two and at least 64")]
    InvalidFftSize { fft_size: usize },
    #[error("hop {hop} must satisfy 1 <= hop <= fft size {fft_size}")]
    InvalidHop { hop: usize, fft_size: usize },
    #[error("overlap fraction {overlap} must lie in [0, 1)")]
    InvalidOverlap { overlap: f64 },
    #[error("clip of {len} samples is shorter than one {fft_size}-sample segment")]
    ClipTooShort { len: usize, fft_size: usize },
    #[error("band [{f_lo}, {f_hi}] Hz outside spectrum range [0, {max_hz}] Hz")]
    BandOutOfRange { f_lo: f64, f_hi: f64, max_hz: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hann,
    Hamming,
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub kind: WindowKind,
    pub length: usize,
}

/// Periodic window samples; tapered kinds need length >= 2.
pub fn make_window(spec: WindowSpec) -> Result<Vec<f64>, SpectralError> {
    let WindowSpec { kind, length } = spec;
    let tapered_minimum = match kind {
        WindowKind::Rectangular => 1,
        WindowKind::Hann | WindowKind::Hamming => 2,
    };
    if length < tapered_minimum {
        return Err(SpectralError::InvalidLength { kind, length });
    }
    let l = length as f64;
    Ok((0..length)
        .map(|n| {
            let phase = 2.0 * std::f64::consts::PI * n as f64 / l;
            match kind {
                WindowKind::Hann => 0.5 * (1.0 - phase.cos()),
                WindowKind::Hamming => 0.54 - 0.46 * phase.cos(),
                WindowKind::Rectangular => 1.0,
            }
        })
        .collect())
}

/// Time-frequency magnitude map in dB.
#[derive(Debug, Clone, Serialize)]
pub struct Spectrogram {
    /// magnitudes_db[frame][bin]
    pub magnitudes_db: Vec<Vec<f64>>,
    /// Center time of each frame in seconds.
    pub frame_times_s: Vec<f64>,
    pub bin_freqs_hz: Vec<f64>,
    pub fft_size: usize,
    pub hop: usize,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.magnitudes_db.len()
    }

    pub fn n_bins(&self) -> usize {
        self.bin_freqs_hz.len()
    }

    /// Bin spacing in Hz.
    pub fn resolution_hz(&self) -> f64 {
        self.bin_freqs_hz[1] - self.bin_freqs_hz[0]
    }
}

/// One-sided Welch power spectral density.
#[derive(Debug, Clone, Serialize)]
pub struct PowerSpectralDensity {
    /// Density values, power per Hz, one per bin of [`Self::bin_freqs_hz`].
    pub psd: Vec<f64>,
    pub bin_freqs_hz: Vec<f64>,
    pub resolution_hz: f64,
    /// Number of segments averaged.
    pub n_segments: usize,
}

impl PowerSpectralDensity {
    pub fn n_bins(&self) -> usize {
        self.psd.len()
    }

    pub fn max_freq_hz(&self) -> f64 {
        *self.bin_freqs_hz.last().unwrap()
    }
}

fn check_fft_size(fft_size: usize) -> Result<(), SpectralError> {
    if fft_size < 64 || !fft_size.is_power_of_two() {
        return Err(SpectralError::InvalidFftSize { fft_size });
    }
    Ok(())
}

/// Short-time Fourier transform magnitude spectrogram.
///
/// Frame f covers samples [f*hop, f*hop + fft_size); the frame count is
/// floor((len - fft_size)/hop) + 1.
pub fn stft_spectrogram(
    clip: &AudioClip,
    fft_size: usize,
    hop: usize,
    window: WindowKind,
) -> Result<Spectrogram, SpectralError> {
    check_fft_size(fft_size)?;
    if hop == 0 || hop > fft_size {
        return Err(SpectralError::InvalidHop { hop, fft_size });
    }
    if clip.len() < fft_size {
        return Err(SpectralError::ClipTooShort {
            len: clip.len(),
            fft_size,
        });
    }
    let w = make_window(WindowSpec {
        kind: window,
        length: fft_size,
    })?;
    let coherent_gain: f64 = w.iter().sum();
    let scale = 1.0 / (coherent_gain * coherent_gain);

    let fs = clip.sample_rate_hz as f64;
    let n_frames = (clip.len() - fft_size) / hop + 1;
    let n_bins = fft_size / 2 + 1;

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(fft_size);
    let mut buf = vec![Complex::new(0.0, 0.0); fft_size];

    let mut magnitudes_db = Vec::with_capacity(n_frames);
    let mut frame_times_s = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let start = f * hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = Complex::new(clip.samples[start + i] * w[i], 0.0);
        }
        fft.process(&mut buf);
        let row = buf[..n_bins]
            .iter()
            .map(|c| {
                let p = c.norm_sqr() * scale;
                db_floor(p)
            })
            .collect();
        magnitudes_db.push(row);
        frame_times_s.push((start + fft_size / 2) as f64 / fs);
    }

    Ok(Spectrogram {
        magnitudes_db,
        frame_times_s,
        bin_freqs_hz: bin_freqs(fs, fft_size, n_bins),
        fft_size,
        hop,
    })
}

/// Welch PSD estimate: averaged one-sided periodograms of windowed,
/// overlapping segments.
pub fn welch_psd(
    clip: &AudioClip,
    fft_size: usize,
    overlap: f64,
    window: WindowKind,
) -> Result<PowerSpectralDensity, SpectralError> {
    check_fft_size(fft_size)?;
    if !(0.0..1.0).contains(&overlap) {
        return Err(SpectralError::InvalidOverlap { overlap });
    }
    if clip.len() < fft_size {
        return Err(SpectralError::ClipTooShort {
            len: clip.len(),
            fft_size,
        });
    }
    let w = make_window(WindowSpec {
        kind: window,
        length: fft_size,
    })?;
    let window_energy: f64 = w.iter().map(|v| v * v).sum();

    let fs = clip.sample_rate_hz as f64;
    let hop = ((fft_size as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    let n_segments = (clip.len() - fft_size) / hop + 1;
    let n_bins = fft_size / 2 + 1;
    let scale = 1.0 / (fs * window_energy);

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(fft_size);
    let mut buf = vec![Complex::new(0.0, 0.0); fft_size];
    let mut acc = vec![0.0f64; n_bins];

    for s in 0..n_segments {
        let start = s * hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = Complex::new(clip.samples[start + i] * w[i], 0.0);
        }
        fft.process(&mut buf);
        for (k, slot) in acc.iter_mut().enumerate() {
            // One-sided density: interior bins carry both spectral halves.
            let one_sided = if k == 0 || k == fft_size / 2 { 1.0 } else { 2.0 };
            *slot += buf[k].norm_sqr() * scale * one_sided;
        }
    }
    let inv = 1.0 / n_segments as f64;
    for v in &mut acc {
        *v *= inv;
    }

    Ok(PowerSpectralDensity {
        psd: acc,
        bin_freqs_hz: bin_freqs(fs, fft_size, n_bins),
        resolution_hz: fs / fft_size as f64,
        n_segments,
    })
}

/// Integrates the PSD over [f_lo, f_hi]; both edges inclusive.
pub fn band_power(
    psd: &PowerSpectralDensity,
    f_lo: f64,
    f_hi: f64,
) -> Result<f64, SpectralError> {
    let max_hz = psd.max_freq_hz();
    if !(f_lo.is_finite() && f_hi.is_finite()) || f_lo < 0.0 || f_hi > max_hz || f_lo > f_hi {
        return Err(SpectralError::BandOutOfRange { f_lo, f_hi, max_hz });
    }
    let mut sum = 0.0;
    for (f, p) in psd.bin_freqs_hz.iter().zip(&psd.psd) {
        if *f >= f_lo && *f <= f_hi {
            sum += p;
        }
    }
    Ok(sum * psd.resolution_hz)
}

fn bin_freqs(fs: f64, fft_size: usize, n_bins: usize) -> Vec<f64> {
    (0..n_bins).map(|k| k as f64 * fs / fft_size as f64).collect()
}

fn db_floor(power: f64) -> f64 {
    if power > 0.0 {
        (10.0 * power.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

// ---------------------------------------------------------------------------
// CSV export
// ---------------------------------------------------------------------------

/// Header row of bin frequencies, then one row of dB magnitudes per frame.
pub fn spectrogram_to_csv(spec: &Spectrogram, out: &mut dyn Write) -> io::Result<()> {
    write_csv_row(out, &spec.bin_freqs_hz)?;
    for row in &spec.magnitudes_db {
        write_csv_row(out, row)?;
    }
    Ok(())
}

/// Header row of bin frequencies, then a single row of density values.
pub fn psd_to_csv(psd: &PowerSpectralDensity, out: &mut dyn Write) -> io::Result<()> {
    write_csv_row(out, &psd.bin_freqs_hz)?;
    write_csv_row(out, &psd.psd)
}

fn write_csv_row(out: &mut dyn Write, values: &[f64]) -> io::Result<()> {
    let mut first = true;
    for v in values {
        if !first {
            out.write_all(b",")?;
        }
        out.write_all(crate::numfmt::sig9(*v).as_bytes())?;
        first = false;
    }
    out.write_all(b"\n")
}
