//! In-memory audio and its error type.
//!
//! Samples are full-scale normalized: every value a decoder produces lies in
//! [-1.0, 1.0] regardless of the stored bit depth, so analysis code never
//! sees container-dependent scaling. Synthesis may build clips whose samples
//! exceed that range in memory; the WAV writer clamps at quantization time.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    /// Structurally broken container: missing RIFF/WAVE magic, missing or
    /// truncated chunks, nonsensical header fields.
    #[error("malformed container: {0}")]
    MalformedContainer(String),
    /// Well-formed container holding an encoding this crate does not decode.
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    /// A valid file with zero audio frames.
    #[error("audio payload is empty")]
    EmptyAudio,
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
    /// Slice bounds outside the clip or inverted.
    #[error("range [{start_s}, {end_s}) invalid for clip of {duration_s} s")]
    RangeError {
        start_s: f64,
        end_s: f64,
        duration_s: f64,
    },
    #[error("sample rate must be positive")]
    InvalidSampleRate,
}

/// Mono audio at a known sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self, AudioError> {
        if sample_rate_hz == 0 {
            return Err(AudioError::InvalidSampleRate);
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Extracts samples [floor(start_s*fs), floor(end_s*fs)).
    ///
    /// Bounds are checked against the clip: 0 <= start < end <= duration.
    /// slice(0, duration) is the identity.
    pub fn slice(&self, start_s: f64, end_s: f64) -> Result<AudioClip, AudioError> {
        let out_of_range = AudioError::RangeError {
            start_s,
            end_s,
            duration_s: self.duration_s(),
        };
        if !start_s.is_finite() || !end_s.is_finite() || start_s < 0.0 || start_s >= end_s {
            return Err(out_of_range);
        }
        let fs = self.sample_rate_hz as f64;
        // duration_s is len/fs; multiplying back can land one ulp under the
        // integer, so allow a millionth of a sample of slack.
        if end_s * fs > self.samples.len() as f64 + 1e-6 {
            return Err(out_of_range);
        }
        let a = index_floor(start_s * fs).min(self.samples.len());
        let b = index_floor(end_s * fs).min(self.samples.len());
        if a >= b {
            return Err(out_of_range);
        }
        Ok(AudioClip {
            samples: self.samples[a..b].to_vec(),
            sample_rate_hz: self.sample_rate_hz,
        })
    }
}

/// floor(x) with a guard for products that land a hair under an integer.
fn index_floor(x: f64) -> usize {
    let nearest = x.round();
    if (x - nearest).abs() < 1e-6 {
        nearest as usize
    } else {
        x.floor() as usize
    }
}
