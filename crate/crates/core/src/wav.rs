//! WAV (RIFF) reading and writing.
//!
//! Reads PCM 16-bit, PCM 24-bit, and IEEE float 32-bit files, including the
//! WAVE_FORMAT_EXTENSIBLE wrapper, at any channel count (channels are
//! averaged to mono). Unknown chunks (LIST, fact, cue, ...) between fmt and
//! data are skipped, since field recorders routinely insert them. Writing
//! emits canonical mono PCM at 16 or 24 bits with samples clamped to
//! [-1.0, 1.0] before quantization.
//!
//! Normalization divisors are 32768 (16-bit) and 8388608 (24-bit); the
//! round-trip error is therefore at most 2^-15 and 2^-23 respectively (half
//! a step from rounding, a full step only at positive full scale where the
//! clamp to the largest code applies).

use crate::clip::{AudioClip, AudioError};
use std::fs;
use std::io::Write;
use std::path::Path;

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Output bit depth for [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Int16,
    Int24,
}

impl BitDepth {
    pub fn bits(self) -> u16 {
        match self {
            BitDepth::Int16 => 16,
            BitDepth::Int24 => 24,
        }
    }
}

/// Decodes a WAV file to a normalized mono clip.
pub fn read_wav(path: &Path) -> Result<AudioClip, AudioError> {
    decode_wav(&fs::read(path)?)
}

/// Decodes WAV bytes to a normalized mono clip.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    let malformed = |msg: &str| AudioError::MalformedContainer(msg.to_string());
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed("not a RIFF/WAVE file"));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12usize;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        let body_end = body_start.checked_add(size).ok_or_else(|| {
            malformed("chunk size overflows")
        })?;
        if body_end > bytes.len() {
            return Err(malformed("truncated chunk"));
        }
        match id {
            b"fmt " => fmt = Some(parse_fmt(&bytes[body_start..body_end])?),
            b"data" => {
                data = Some(&bytes[body_start..body_end]);
            }
            _ => {} // LIST, fact, cue, bext, ... are skipped
        }
        // RIFF chunks are word-aligned: odd sizes carry one pad byte.
        pos = body_end + (size & 1);
    }

    let fmt = fmt.ok_or_else(|| malformed("missing fmt chunk"))?;
    let data = data.ok_or_else(|| malformed("missing data chunk"))?;

    let bytes_per_sample = (fmt.bits_per_sample / 8) as usize;
    let frame_bytes = bytes_per_sample * fmt.channels as usize;
    let frames = data.len() / frame_bytes;
    if frames == 0 {
        return Err(AudioError::EmptyAudio);
    }

    let mut samples = Vec::with_capacity(frames);
    let ch = fmt.channels as usize;
    for f in 0..frames {
        let mut acc = 0.0f64;
        for c in 0..ch {
            let at = (f * ch + c) * bytes_per_sample;
            acc += match (fmt.format, fmt.bits_per_sample) {
                (FORMAT_PCM, 16) => {
                    i16::from_le_bytes([data[at], data[at + 1]]) as f64 / 32768.0
                }
                (FORMAT_PCM, 24) => {
                    let raw = (data[at] as i32)
                        | (data[at + 1] as i32) << 8
                        | (data[at + 2] as i32) << 16;
                    // sign-extend 24 -> 32 bits
                    ((raw << 8) >> 8) as f64 / 8_388_608.0
                }
                (FORMAT_IEEE_FLOAT, 32) => {
                    let raw = f32::from_le_bytes([
                        data[at],
                        data[at + 1],
                        data[at + 2],
                        data[at + 3],
                    ]);
                    (raw as f64).clamp(-1.0, 1.0)
                }
                _ => unreachable!("rejected by parse_fmt"),
            };
        }
        samples.push(acc / ch as f64);
    }
    AudioClip::new(samples, fmt.sample_rate_hz)
}

struct FmtChunk {
    format: u16,
    channels: u16,
    sample_rate_hz: u32,
    bits_per_sample: u16,
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk, AudioError> {
    let malformed = |msg: &str| AudioError::MalformedContainer(msg.to_string());
    if body.len() < 16 {
        return Err(malformed("fmt chunk shorter than 16 bytes"));
    }
    let mut format = u16::from_le_bytes([body[0], body[1]]);
    let channels = u16::from_le_bytes([body[2], body[3]]);
    let sample_rate_hz = u32::from_le_bytes([body[4], body[5], body[6], body[7]]);
    let bits_per_sample = u16::from_le_bytes([body[14], body[15]]);
    if format == FORMAT_EXTENSIBLE {
        // The real format code is the first word of the SubFormat GUID.
        if body.len() < 40 {
            return Err(malformed("extensible fmt chunk shorter than 40 bytes"));
        }
        format = u16::from_le_bytes([body[24], body[25]]);
    }
    if channels == 0 {
        return Err(malformed("zero channels"));
    }
    if sample_rate_hz == 0 {
        return Err(malformed("zero sample rate"));
    }
    match (format, bits_per_sample) {
        (FORMAT_PCM, 16) | (FORMAT_PCM, 24) | (FORMAT_IEEE_FLOAT, 32) => Ok(FmtChunk {
            format,
            channels,
            sample_rate_hz,
            bits_per_sample,
        }),
        _ => Err(AudioError::UnsupportedEncoding(format!(
            "format code {format}, {bits_per_sample} bits per sample"
        ))),
    }
}

/// Writes a mono PCM WAV file; samples are clamped to [-1, 1] first.
pub fn write_wav(clip: &AudioClip, path: &Path, depth: BitDepth) -> Result<(), AudioError> {
    if clip.is_empty() {
        return Err(AudioError::EmptyAudio);
    }
    let bytes = encode_wav(clip, depth);
    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

/// Encodes a mono PCM WAV byte stream.
pub fn encode_wav(clip: &AudioClip, depth: BitDepth) -> Vec<u8> {
    let bytes_per_sample = (depth.bits() / 8) as u32;
    let data_len = clip.len() as u32 * bytes_per_sample;
    let mut out = Vec::with_capacity(44 + data_len as usize);

    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");

    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&clip.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate_hz * bytes_per_sample).to_le_bytes());
    out.extend_from_slice(&(bytes_per_sample as u16).to_le_bytes());
    out.extend_from_slice(&depth.bits().to_le_bytes());

    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &clip.samples {
        let s = s.clamp(-1.0, 1.0);
        match depth {
            BitDepth::Int16 => {
                let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                out.extend_from_slice(&q.to_le_bytes());
            }
            BitDepth::Int24 => {
                let q = (s * 8_388_608.0).round().clamp(-8_388_608.0, 8_388_607.0) as i32;
                out.extend_from_slice(&q.to_le_bytes()[0..3]);
            }
        }
    }
    out
}
