//! Linear-phase FIR bandpass filtering via the windowed-sinc method.
//!
//! A bandpass of order 2M is the difference of two ideal lowpass impulse
//! responses truncated to 2M+1 taps around their center,
//!
//!   h[n] = (2*f_hi/fs) sinc(2 f_hi (n-M)/fs) - (2*f_lo/fs) sinc(2 f_lo (n-M)/fs),
//!
//! tapered by a window. Window values are computed for the first half and
//! mirrored so the coefficient symmetry h[n] = h[2M-n] holds exactly, which
//! is what makes the phase linear and the group delay a constant M samples.
//!
//! Applying a filter runs a full-overlap ("valid") convolution: the output
//! drops M samples at each end, so output sample i corresponds to input
//! sample i + M and downstream timestamps must add that leading trim.

use crate::clip::AudioClip;
use crate::spectral::{WindowKind, DB_FLOOR};
use std::f64::consts::PI;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("band [{f_lo}, {f_hi}] Hz invalid at {fs} Hz (need 0 < f_lo < f_hi < fs/2)")]
    InvalidBand { f_lo: f64, f_hi: f64, fs: f64 },
    #[error("order {order} too small: {reason}")]
    OrderTooSmall { order: usize, reason: String },
    #[error("filter designed for {filter_fs} Hz applied to {clip_fs} Hz clip")]
    SampleRateMismatch { filter_fs: f64, clip_fs: u32 },
    #[error("clip of {clip_len} samples is shorter than the {taps}-tap filter")]
    ClipShorterThanFilter { clip_len: usize, taps: usize },
    #[error("frequency {freq} Hz outside [0, {nyquist}] Hz")]
    FreqOutOfRange { freq: f64, nyquist: f64 },
    #[error("bad coefficient file: {0}")]
    BadCoefficientFile(String),
}

/// FIR filter with its design sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    pub coefficients: Vec<f64>,
    pub fs_hz: f64,
}

impl FirFilter {
    /// Builds a filter from raw taps, e.g. imported coefficients.
    pub fn from_taps(coefficients: Vec<f64>, fs_hz: f64) -> Result<Self, FilterError> {
        if coefficients.is_empty() {
            return Err(FilterError::BadCoefficientFile("no taps".into()));
        }
        if !(fs_hz > 0.0) {
            return Err(FilterError::BadCoefficientFile(
                "sample rate must be positive".into(),
            ));
        }
        Ok(FirFilter {
            coefficients,
            fs_hz,
        })
    }

    pub fn taps(&self) -> usize {
        self.coefficients.len()
    }

    /// Samples dropped from the front of a filtered clip; equals the group
    /// delay for the symmetric designs this crate produces.
    pub fn leading_trim_samples(&self) -> usize {
        (self.taps() - 1) / 2
    }

    /// Magnitude response |H(f)| on a linear scale.
    pub fn magnitude_at(&self, freq_hz: f64) -> f64 {
        let omega = 2.0 * PI * freq_hz / self.fs_hz;
        let (mut re, mut im) = (0.0f64, 0.0f64);
        for (n, h) in self.coefficients.iter().enumerate() {
            let phase = omega * n as f64;
            re += h * phase.cos();
            im -= h * phase.sin();
        }
        (re * re + im * im).sqrt()
    }
}

/// Designs a windowed-sinc bandpass.
///
/// `order` must be even and at least 64 (tap count order+1). The design is
/// checked at the band midpoint: if the realized gain is off unity by more
/// than 1 dB the order cannot support the requested band and the design is
/// rejected.
pub fn design_bandpass(
    f_lo: f64,
    f_hi: f64,
    order: usize,
    fs: f64,
    window: WindowKind,
) -> Result<FirFilter, FilterError> {
    if !(fs > 0.0 && f_lo.is_finite() && f_hi.is_finite()) || f_lo <= 0.0 || f_lo >= f_hi
        || f_hi >= fs / 2.0
    {
        return Err(FilterError::InvalidBand { f_lo, f_hi, fs });
    }
    if order < 64 || order % 2 != 0 {
        return Err(FilterError::OrderTooSmall {
            order,
            reason: "order must be even and at least 64".into(),
        });
    }

    let taps = order + 1;
    let m = order / 2;
    let w = symmetric_window(window, taps);
    let mut coefficients = vec![0.0f64; taps];
    for n in 0..=m {
        // n and taps-1-n share |n-M|; computing once keeps them bit-equal.
        let offset = m as f64 - n as f64;
        let h = 2.0 * f_hi / fs * sinc(2.0 * f_hi * offset / fs)
            - 2.0 * f_lo / fs * sinc(2.0 * f_lo * offset / fs);
        coefficients[n] = h * w[n];
        coefficients[taps - 1 - n] = h * w[n];
    }

    let filter = FirFilter {
        coefficients,
        fs_hz: fs,
    };
    let midband_gain = filter.magnitude_at((f_lo + f_hi) / 2.0);
    let db = 20.0 * midband_gain.max(1e-300).log10();
    if db.abs() > 1.0 {
        return Err(FilterError::OrderTooSmall {
            order,
            reason: format!(
                "midband gain {db:.2} dB misses unity by more than 1 dB for band [{f_lo}, {f_hi}] Hz"
            ),
        });
    }
    Ok(filter)
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Symmetric taper of odd length, mirrored exactly around the center tap.
fn symmetric_window(kind: WindowKind, len: usize) -> Vec<f64> {
    let mut w = vec![1.0f64; len];
    if matches!(kind, WindowKind::Rectangular) || len < 2 {
        return w;
    }
    let denom = (len - 1) as f64;
    for n in 0..=(len - 1) / 2 {
        let phase = 2.0 * PI * n as f64 / denom;
        let v = match kind {
            WindowKind::Hann => 0.5 * (1.0 - phase.cos()),
            WindowKind::Hamming => 0.54 - 0.46 * phase.cos(),
            WindowKind::Rectangular => unreachable!(),
        };
        w[n] = v;
        w[len - 1 - n] = v;
    }
    w
}

/// Full-overlap convolution; output length is clip length minus order.
///
/// Symmetric taps make convolution equal correlation, so the inner product
/// runs forward over the input.
pub fn apply_filter(filter: &FirFilter, clip: &AudioClip) -> Result<AudioClip, FilterError> {
    if filter.fs_hz != clip.sample_rate_hz as f64 {
        return Err(FilterError::SampleRateMismatch {
            filter_fs: filter.fs_hz,
            clip_fs: clip.sample_rate_hz,
        });
    }
    let taps = filter.taps();
    if clip.len() < taps {
        return Err(FilterError::ClipShorterThanFilter {
            clip_len: clip.len(),
            taps,
        });
    }
    // Convolution uses the reversed taps; designs are symmetric so the
    // reversal is precomputed here to keep the hot loop a plain dot product.
    let reversed: Vec<f64> = filter.coefficients.iter().rev().copied().collect();
    let out_len = clip.len() - taps + 1;
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let seg = &clip.samples[i..i + taps];
        let mut acc = 0.0f64;
        for (h, x) in reversed.iter().zip(seg) {
            acc += h * x;
        }
        out.push(acc);
    }
    Ok(AudioClip {
        samples: out,
        sample_rate_hz: clip.sample_rate_hz,
    })
}

/// Gain in dB at each requested frequency, floored at -200 dB.
pub fn frequency_response(filter: &FirFilter, freqs_hz: &[f64]) -> Result<Vec<f64>, FilterError> {
    let nyquist = filter.fs_hz / 2.0;
    let mut out = Vec::with_capacity(freqs_hz.len());
    for &f in freqs_hz {
        if !f.is_finite() || f < 0.0 || f > nyquist {
            return Err(FilterError::FreqOutOfRange { freq: f, nyquist });
        }
        let mag = filter.magnitude_at(f);
        out.push(if mag > 0.0 {
            (20.0 * mag.log10()).max(DB_FLOOR)
        } else {
            DB_FLOOR
        });
    }
    Ok(out)
}

/// One tap per line, 17 significant digits (bit-exact on re-import).
pub fn taps_to_csv(filter: &FirFilter, out: &mut dyn Write) -> io::Result<()> {
    for h in &filter.coefficients {
        writeln!(out, "{}", crate::numfmt::sig17(*h))?;
    }
    Ok(())
}

/// Parses taps written by [`taps_to_csv`].
pub fn taps_from_csv(text: &str, fs_hz: f64) -> Result<FirFilter, FilterError> {
    let mut coefficients = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let value: f64 = line.parse().map_err(|e| {
            FilterError::BadCoefficientFile(format!("line {}: {e}", i + 1))
        })?;
        coefficients.push(value);
    }
    FirFilter::from_taps(coefficients, fs_hz)
}
