//! Feature vectors for recognition: the detector's high-band magnitude slice
//! and single-frame MFCCs around a detection.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioBuffer;
use crate::detector::DetectionEvent;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("invalid MFCC configuration: {0}")]
    InvalidConfig(String),
    #[error("feature vectors have mixed lengths ({expected} vs {got})")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("malformed feature CSV: {0}")]
    MalformedCsv(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("I/O failure")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    HfAmplitude,
    Mfcc,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::HfAmplitude => "hf_amplitude",
            FeatureKind::Mfcc => "mfcc",
        })
    }
}

impl FromStr for FeatureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hf" | "hf_amplitude" => Ok(FeatureKind::HfAmplitude),
            "mfcc" => Ok(FeatureKind::Mfcc),
            other => Err(format!("unknown feature kind '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub kind: FeatureKind,
    pub label: Option<String>,
}

impl FeatureVector {
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// The event's high-band magnitudes, unchanged.
pub fn hf_amplitude(event: &DetectionEvent) -> FeatureVector {
    FeatureVector {
        values: event.hf_slice.clone(),
        kind: FeatureKind::HfAmplitude,
        label: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfccConfig {
    /// Samples of audio analysed, centred on the detection window.
    pub context_len: usize,
    pub fft_len: usize,
    pub n_filters: usize,
    /// Coefficients kept, c0 included.
    pub n_coeffs: usize,
    pub log_floor: f64,
    pub pre_emphasis: f64,
    /// Upper edge of the filterbank; `None` means Nyquist.
    pub max_freq_hz: Option<f64>,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            context_len: 512,
            fft_len: 512,
            n_filters: 26,
            n_coeffs: 13,
            log_floor: 1e-10,
            pre_emphasis: 0.97,
            max_freq_hz: None,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        let bad = |m: &str| Err(FeatureError::InvalidConfig(m.into()));
        if self.context_len == 0 || self.context_len > self.fft_len {
            return bad("need 0 < context_len <= fft_len");
        }
        if self.n_filters == 0 || self.n_coeffs == 0 || self.n_coeffs > self.n_filters {
            return bad("need 0 < n_coeffs <= n_filters");
        }
        if !(self.log_floor > 0.0) {
            return bad("log_floor must be positive");
        }
        Ok(())
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters on the mel scale, evaluated on FFT bin frequencies.
///
/// Filter `i` rises from edge `i` to a peak at edge `i + 1` and falls back to
/// zero at edge `i + 2`, where the edges are equally spaced in mel from 0 Hz
/// to the upper frequency.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    pub edges_hz: Vec<f64>,
    /// `n_filters` rows of `fft_len / 2 + 1` weights.
    pub weights: Vec<Vec<f64>>,
}

impl MelFilterbank {
    pub fn new(n_filters: usize, fft_len: usize, rate_hz: f64, max_freq_hz: f64) -> Self {
        let top = hz_to_mel(max_freq_hz);
        let edges_hz: Vec<f64> = (0..n_filters + 2)
            .map(|i| mel_to_hz(top * i as f64 / (n_filters + 1) as f64))
            .collect();
        let n_bins = fft_len / 2 + 1;
        let weights = edges_hz
            .windows(3)
            .map(|e| {
                let (lo, peak, hi) = (e[0], e[1], e[2]);
                (0..n_bins)
                    .map(|k| {
                        let f = k as f64 * rate_hz / fft_len as f64;
                        if f <= lo || f >= hi {
                            0.0
                        } else if f <= peak {
                            (f - lo) / (peak - lo)
                        } else {
                            (hi - f) / (hi - peak)
                        }
                    })
                    .collect()
            })
            .collect();
        Self { edges_hz, weights }
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}

/// Orthonormal DCT-II basis, `rows × n`.
fn dct2_basis(rows: usize, n: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|i| {
            let scale = if i == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            (0..n)
                .map(|m| scale * (std::f64::consts::PI * i as f64 * (m as f64 + 0.5) / n as f64).cos())
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II of `input`.
pub fn dct2(input: &[f64]) -> Vec<f64> {
    dct2_basis(input.len(), input.len())
        .iter()
        .map(|row| row.iter().zip(input).map(|(b, x)| b * x).sum())
        .collect()
}

/// Inverse of [`dct2`] (orthonormal DCT-III).
pub fn idct2(coeffs: &[f64]) -> Vec<f64> {
    let basis = dct2_basis(coeffs.len(), coeffs.len());
    (0..coeffs.len())
        .map(|m| basis.iter().zip(coeffs).map(|(row, c)| row[m] * c).sum())
        .collect()
}

/// Precomputed MFCC pipeline for one sampling rate and configuration.
pub struct MfccExtractor {
    config: MfccConfig,
    window: Vec<f64>,
    filterbank: MelFilterbank,
    dct: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl MfccExtractor {
    pub fn new(config: MfccConfig, rate_hz: u32) -> Result<Self, FeatureError> {
        config.validate()?;
        let rate = rate_hz as f64;
        let top = config.max_freq_hz.unwrap_or(rate / 2.0);
        let l = config.context_len;
        let window = (0..l)
            .map(|n| {
                if l == 1 {
                    1.0
                } else {
                    0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (l - 1) as f64).cos()
                }
            })
            .collect();
        let filterbank = MelFilterbank::new(config.n_filters, config.fft_len, rate, top);
        let dct = dct2_basis(config.n_coeffs, config.n_filters);
        let fft = FftPlanner::new().plan_fft_forward(config.fft_len);
        Ok(Self {
            config,
            window,
            filterbank,
            dct,
            fft,
        })
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// `context_len` samples centred on `center_sample`, zero outside the signal.
    pub fn context(&self, audio: &AudioBuffer, center_sample: usize) -> Vec<f64> {
        let l = self.config.context_len;
        let start = center_sample as isize - (l / 2) as isize;
        (0..l as isize)
            .map(|i| {
                let idx = start + i;
                if idx >= 0 && (idx as usize) < audio.len() {
                    audio.samples[idx as usize]
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Log mel filterbank energies of a context frame.
    pub fn log_mel_energies(&self, frame: &[f64]) -> Vec<f64> {
        let alpha = self.config.pre_emphasis;
        let mut buf: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); self.config.fft_len];
        for (i, slot) in buf.iter_mut().take(frame.len()).enumerate() {
            let prev = if i == 0 { 0.0 } else { frame[i - 1] };
            *slot = Complex64::new((frame[i] - alpha * prev) * self.window[i], 0.0);
        }
        self.fft.process(&mut buf);
        let power: Vec<f64> = buf[..self.config.fft_len / 2 + 1]
            .iter()
            .map(|c| c.norm_sqr())
            .collect();
        self.filterbank
            .apply(&power)
            .into_iter()
            .map(|e| e.max(self.config.log_floor).ln())
            .collect()
    }

    pub fn coefficients(&self, frame: &[f64]) -> Vec<f64> {
        let log_e = self.log_mel_energies(frame);
        self.dct
            .iter()
            .map(|row| row.iter().zip(&log_e).map(|(b, x)| b * x).sum())
            .collect()
    }

    pub fn extract(&self, audio: &AudioBuffer, center_sample: usize) -> FeatureVector {
        FeatureVector {
            values: self.coefficients(&self.context(audio, center_sample)),
            kind: FeatureKind::Mfcc,
            label: None,
        }
    }
}

/// MFCCs of the context centred on `center_sample`.
pub fn mfcc(audio: &AudioBuffer, center_sample: usize, config: &MfccConfig) -> Result<FeatureVector, FeatureError> {
    Ok(MfccExtractor::new(config.clone(), audio.sample_rate_hz)?.extract(audio, center_sample))
}

/// Centre sample of an event's analysis window.
pub fn event_center(event: &DetectionEvent, window_len: usize) -> usize {
    event.start_sample + window_len / 2
}

/// Writes vectors as CSV: header `f0..f{n-1},label`, one row per vector.
pub fn export_features<W: Write>(out: W, vectors: &[FeatureVector]) -> Result<(), FeatureError> {
    let dim = vectors.first().map_or(0, FeatureVector::dim);
    if let Some(v) = vectors.iter().find(|v| v.dim() != dim) {
        return Err(FeatureError::DimensionMismatch {
            expected: dim,
            got: v.dim(),
        });
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..dim).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for v in vectors {
        let mut row: Vec<String> = v.values.iter().map(|x| x.to_string()).collect();
        row.push(v.label.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads vectors written by [`export_features`]. Empty labels become `None`.
pub fn import_features<R: Read>(input: R, kind: FeatureKind) -> Result<Vec<FeatureVector>, FeatureError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let dim = header.len().saturating_sub(1);
    let expected = (0..dim).map(|i| format!("f{i}")).chain(std::iter::once("label".to_string()));
    if header.is_empty() || !header.iter().eq(expected.clone()) {
        return Err(FeatureError::MalformedCsv(format!(
            "header must be f0..f{},label",
            dim.saturating_sub(1)
        )));
    }
    let mut vectors = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let values = record
            .iter()
            .take(dim)
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| FeatureError::MalformedCsv(format!("row {}: bad value '{s}'", line + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let label = record.get(dim).filter(|s| !s.is_empty()).map(str::to_string);
        vectors.push(FeatureVector { values, kind, label });
    }
    Ok(vectors)
}
