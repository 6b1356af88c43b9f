//! Mono PCM audio buffers and WAV file I/O.
//!
//! Samples are held as `f64` amplitudes in `[-1, 1]`. Reading accepts 16-bit
//! integer and 32-bit float mono RIFF/WAVE; writing always produces 16-bit
//! integer PCM.

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Scale between 16-bit integer PCM and unit amplitude.
pub const PCM16_SCALE: f64 = 32768.0;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),
    #[error("I/O failure")]
    Io(#[from] io::Error),
    #[error("sample {index} has amplitude {value}, outside [-1, 1]")]
    AmplitudeOutOfRange { index: usize, value: f64 },
    #[error("audio buffer is empty")]
    Empty,
}

/// A mono signal together with its sampling rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Self {
        Self {
            samples,
            sample_rate_hz,
        }
    }

    /// `len` zero samples.
    pub fn silence(len: usize, sample_rate_hz: u32) -> Self {
        Self::new(vec![0.0; len], sample_rate_hz)
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

    /// Largest absolute sample value, 0 for an empty buffer.
    pub fn peak(&self) -> f64 {
        peak_abs(&self.samples)
    }
}

pub(crate) fn peak_abs(samples: &[f64]) -> f64 {
    samples.iter().fold(0.0_f64, |m, s| m.max(s.abs()))
}

/// Divides every sample by the buffer's peak magnitude in place.
/// All-zero input is left untouched.
pub(crate) fn normalize_in_place(samples: &mut [f64]) {
    let peak = peak_abs(samples);
    if peak > 0.0 {
        for s in samples.iter_mut() {
            *s /= peak;
        }
    }
}

/// Scales the buffer so that its largest magnitude is exactly 1.
///
/// Silence passes through unchanged. The operation is idempotent.
pub fn normalize_peak(buffer: &AudioBuffer) -> AudioBuffer {
    let mut out = buffer.clone();
    normalize_in_place(&mut out.samples);
    out
}

fn map_hound(err: hound::Error) -> AudioError {
    match err {
        hound::Error::IoError(e) => AudioError::Io(e),
        hound::Error::FormatError(msg) => AudioError::MalformedHeader(msg.to_string()),
        hound::Error::Unsupported => {
            AudioError::UnsupportedFormat("codec not supported (PCM16 or float32 only)".into())
        }
        other => AudioError::MalformedHeader(other.to_string()),
    }
}

/// Reads a mono 16-bit PCM or 32-bit float WAV file.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, AudioError> {
    let reader = hound::WavReader::open(path.as_ref()).map_err(map_hound)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(AudioError::UnsupportedFormat(format!(
            "{} channels, expected mono",
            spec.channels
        )));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / PCM16_SCALE))
            .collect::<Result<_, _>>()
            .map_err(map_hound)?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<Result<_, _>>()
            .map_err(map_hound)?,
        (fmt, bits) => {
            return Err(AudioError::UnsupportedFormat(format!(
                "{bits}-bit {fmt:?} samples"
            )))
        }
    };
    if samples.is_empty() {
        return Err(AudioError::Empty);
    }
    Ok(AudioBuffer::new(samples, spec.sample_rate))
}

/// Converts a unit amplitude to 16-bit PCM. `+1.0` clamps to 32767.
pub fn to_pcm16(sample: f64) -> i16 {
    (sample * PCM16_SCALE)
        .round()
        .clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

fn write_pcm16(samples: &[f64], rate: u32, path: &Path) -> Result<(), AudioError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(map_hound)?;
    for &s in samples {
        writer.write_sample(to_pcm16(s)).map_err(map_hound)?;
    }
    writer.finalize().map_err(map_hound)
}

/// Writes the buffer as 16-bit mono PCM. Every sample must lie in `[-1, 1]`.
pub fn save_wav(buffer: &AudioBuffer, path: impl AsRef<Path>) -> Result<(), AudioError> {
    if let Some((index, &value)) = buffer
        .samples
        .iter()
        .enumerate()
        .find(|(_, s)| !(s.abs() <= 1.0))
    {
        return Err(AudioError::AmplitudeOutOfRange { index, value });
    }
    write_pcm16(&buffer.samples, buffer.sample_rate_hz, path.as_ref())
}

/// Writes the buffer as 16-bit mono PCM, clamping out-of-range samples.
///
/// Returns how many samples were clipped.
pub fn save_wav_clipped(buffer: &AudioBuffer, path: impl AsRef<Path>) -> Result<usize, AudioError> {
    let mut clipped = 0;
    let samples: Vec<f64> = buffer
        .samples
        .iter()
        .map(|&s| {
            if s.abs() > 1.0 {
                clipped += 1;
                s.clamp(-1.0, 1.0)
            } else if s.is_nan() {
                clipped += 1;
                0.0
            } else {
                s
            }
        })
        .collect();
    write_pcm16(&samples, buffer.sample_rate_hz, path.as_ref())?;
    Ok(clipped)
}
