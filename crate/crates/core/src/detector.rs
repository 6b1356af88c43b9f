//! Impulsive sound detection by high-band spectral mean and variance.
//!
//! The input is peak-normalized block by block, then cut into short windows.
//! Each window is transformed with a direct DFT and the magnitudes of a fixed
//! high-frequency bin band are summarized by their mean and population
//! variance. A window is reported as impulsive when both statistics exceed
//! their thresholds.
//!
//! With the defaults (16 kHz input, 99-sample windows, bins 30..=49) the band
//! covers roughly 4.85 to 7.92 kHz.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{normalize_in_place, AudioBuffer};
use crate::spectral::{mean_variance, DftPlan, SpectralStats};

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("sample rate {got} Hz not supported: the detector requires {required} Hz input")]
    WrongSampleRate { got: u32, required: u32 },
    #[error("buffer has {len} samples, shorter than one {window_len}-sample window")]
    BufferTooShort { len: usize, window_len: usize },
    #[error("invalid detector configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub window_len: usize,
    pub hop: usize,
    pub bin_lo: usize,
    pub bin_hi: usize,
    pub mean_threshold: f64,
    pub var_threshold: f64,
    pub required_rate_hz: u32,
    /// Peak normalization extent in samples.
    pub norm_block_len: usize,
    /// Normalize the whole input at once instead of per block.
    pub whole_file_norm: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            window_len: 99,
            hop: 99,
            bin_lo: 30,
            bin_hi: 49,
            mean_threshold: 0.5,
            var_threshold: 0.2,
            required_rate_hz: 16_000,
            norm_block_len: 16_000,
            whole_file_norm: false,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        let bad = |m: &str| Err(DetectError::InvalidConfig(m.to_string()));
        if self.window_len == 0 {
            return bad("window_len must be positive");
        }
        if self.hop == 0 || self.hop > self.window_len {
            return bad("hop must satisfy 0 < hop <= window_len");
        }
        if self.bin_lo > self.bin_hi || self.bin_hi >= self.window_len {
            return bad("bins must satisfy bin_lo <= bin_hi < window_len");
        }
        if !(self.mean_threshold > 0.0 && self.var_threshold > 0.0) {
            return bad("thresholds must be positive");
        }
        if self.norm_block_len == 0 {
            return bad("norm_block_len must be positive");
        }
        Ok(())
    }

    pub fn band_len(&self) -> usize {
        self.bin_hi - self.bin_lo + 1
    }

    /// The decision rule: both statistics strictly above threshold.
    pub fn is_impulsive(&self, stats: &SpectralStats) -> bool {
        stats.mean > self.mean_threshold && stats.variance > self.var_threshold
    }
}

/// One window that passed the decision rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub window_index: usize,
    pub start_sample: usize,
    pub start_time_s: f64,
    pub mean: f64,
    pub variance: f64,
    /// `|X[k]|` for `k = bin_lo..=bin_hi`.
    pub hf_slice: Vec<f64>,
}

/// Statistics of a single analysis window, whether or not it fired.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowAnalysis {
    pub window_index: usize,
    pub start_sample: usize,
    pub stats: SpectralStats,
    pub hf_slice: Vec<f64>,
}

impl WindowAnalysis {
    pub fn into_event(self, sample_rate_hz: u32) -> DetectionEvent {
        DetectionEvent {
            window_index: self.window_index,
            start_sample: self.start_sample,
            start_time_s: self.start_sample as f64 / sample_rate_hz as f64,
            mean: self.stats.mean,
            variance: self.stats.variance,
            hf_slice: self.hf_slice,
        }
    }
}

/// Reusable per-window analyzer (holds the DFT plan).
#[derive(Debug, Clone)]
pub struct WindowAnalyzer {
    config: DetectorConfig,
    plan: DftPlan,
}

impl WindowAnalyzer {
    pub fn new(config: DetectorConfig) -> Result<Self, DetectError> {
        config.validate()?;
        let plan = DftPlan::new(config.window_len);
        Ok(Self { config, plan })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    /// Analyzes `window` (already normalized), which must be `window_len` long.
    pub fn analyze(&self, window: &[f64], window_index: usize, start_sample: usize) -> WindowAnalysis {
        let mut hf_slice = Vec::with_capacity(self.config.band_len());
        self.plan
            .band_magnitudes_into(window, self.config.bin_lo, self.config.bin_hi, &mut hf_slice)
            .expect("window length and band validated with config");
        let (mean, variance) = mean_variance(&hf_slice);
        WindowAnalysis {
            window_index,
            start_sample,
            stats: SpectralStats {
                mean,
                variance,
                bin_lo: self.config.bin_lo,
                bin_hi: self.config.bin_hi,
            },
            hf_slice,
        }
    }

    /// Analyzes every window of an already-normalized stream.
    pub fn windows<'a>(&'a self, normalized: &'a [f64]) -> impl Iterator<Item = WindowAnalysis> + 'a {
        let c = &self.config;
        let count = window_count(normalized.len(), c.window_len, c.hop);
        (0..count).map(move |l| {
            let start = l * c.hop;
            self.analyze(&normalized[start..start + c.window_len], l, start)
        })
    }
}

fn window_count(len: usize, window_len: usize, hop: usize) -> usize {
    if len < window_len {
        0
    } else {
        (len - window_len) / hop + 1
    }
}

/// Applies the configured peak normalization to a copy of `samples`.
pub fn normalize_stream(samples: &[f64], config: &DetectorConfig) -> Vec<f64> {
    let mut out = samples.to_vec();
    if config.whole_file_norm {
        normalize_in_place(&mut out);
    } else {
        for block in out.chunks_mut(config.norm_block_len) {
            normalize_in_place(block);
        }
    }
    out
}

fn check_input(buffer: &AudioBuffer, config: &DetectorConfig) -> Result<(), DetectError> {
    config.validate()?;
    if buffer.sample_rate_hz != config.required_rate_hz {
        return Err(DetectError::WrongSampleRate {
            got: buffer.sample_rate_hz,
            required: config.required_rate_hz,
        });
    }
    if buffer.len() < config.window_len {
        return Err(DetectError::BufferTooShort {
            len: buffer.len(),
            window_len: config.window_len,
        });
    }
    Ok(())
}

/// Runs the detector over a whole buffer. Events are ordered by start sample.
pub fn detect(buffer: &AudioBuffer, config: &DetectorConfig) -> Result<Vec<DetectionEvent>, DetectError> {
    Ok(scan(buffer, config)?.events)
}

/// Result of [`scan`]: the events plus per-file extremes over all windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub events: Vec<DetectionEvent>,
    pub windows: usize,
    pub max_mean: f64,
    pub max_variance: f64,
}

/// Like [`detect`], also reporting the largest window mean and variance seen.
pub fn scan(buffer: &AudioBuffer, config: &DetectorConfig) -> Result<ScanSummary, DetectError> {
    check_input(buffer, config)?;
    let analyzer = WindowAnalyzer::new(config.clone())?;
    let normalized = normalize_stream(&buffer.samples, config);
    let mut summary = ScanSummary {
        events: Vec::new(),
        windows: 0,
        max_mean: 0.0,
        max_variance: 0.0,
    };
    for w in analyzer.windows(&normalized) {
        summary.windows += 1;
        summary.max_mean = summary.max_mean.max(w.stats.mean);
        summary.max_variance = summary.max_variance.max(w.stats.variance);
        if config.is_impulsive(&w.stats) {
            summary.events.push(w.into_event(buffer.sample_rate_hz));
        }
    }
    Ok(summary)
}

/// Incremental detector: feed chunks in order, collect events as soon as the
/// normalization block that completes their window has been seen.
///
/// Produces exactly the events [`detect`] would on the concatenated input.
/// In whole-file mode nothing can be normalized before the end, so all events
/// arrive from [`StreamDetector::finish`].
#[derive(Debug)]
pub struct StreamDetector {
    analyzer: WindowAnalyzer,
    sample_rate_hz: u32,
    pending: Vec<f64>,
    normalized: Vec<f64>,
    normalized_base: usize,
    next_window: usize,
}

impl StreamDetector {
    pub fn new(config: DetectorConfig, sample_rate_hz: u32) -> Result<Self, DetectError> {
        if sample_rate_hz != config.required_rate_hz {
            return Err(DetectError::WrongSampleRate {
                got: sample_rate_hz,
                required: config.required_rate_hz,
            });
        }
        Ok(Self {
            analyzer: WindowAnalyzer::new(config)?,
            sample_rate_hz,
            pending: Vec::new(),
            normalized: Vec::new(),
            normalized_base: 0,
            next_window: 0,
        })
    }

    pub fn push(&mut self, chunk: &[f64]) -> Vec<DetectionEvent> {
        let block = self.analyzer.config().norm_block_len;
        let whole_file = self.analyzer.config().whole_file_norm;
        let mut events = Vec::new();
        let mut rest = chunk;
        while !rest.is_empty() {
            if whole_file {
                self.pending.extend_from_slice(rest);
                break;
            }
            let take = (block - self.pending.len()).min(rest.len());
            self.pending.extend_from_slice(&rest[..take]);
            rest = &rest[take..];
            if self.pending.len() == block {
                self.flush_block(&mut events);
            }
        }
        events
    }

    pub fn finish(mut self) -> Vec<DetectionEvent> {
        let mut events = Vec::new();
        if !self.pending.is_empty() {
            self.flush_block(&mut events);
        }
        events
    }

    fn flush_block(&mut self, events: &mut Vec<DetectionEvent>) {
        normalize_in_place(&mut self.pending);
        self.normalized.append(&mut self.pending);
        let c = self.analyzer.config();
        let (window_len, hop) = (c.window_len, c.hop);
        let available = self.normalized_base + self.normalized.len();
        while self.next_window * hop + window_len <= available {
            let start = self.next_window * hop;
            let local = start - self.normalized_base;
            let w = self
                .analyzer
                .analyze(&self.normalized[local..local + window_len], self.next_window, start);
            if self.analyzer.config().is_impulsive(&w.stats) {
                events.push(w.into_event(self.sample_rate_hz));
            }
            self.next_window += 1;
        }
        let keep_from = (self.next_window * hop).min(available);
        let drop = keep_from - self.normalized_base;
        self.normalized.drain(..drop);
        self.normalized_base = keep_from;
    }
}

/// Runs [`StreamDetector`] over an ordered feed of chunks.
pub fn detect_stream<I, C>(
    chunks: I,
    sample_rate_hz: u32,
    config: &DetectorConfig,
) -> Result<impl Iterator<Item = DetectionEvent>, DetectError>
where
    I: IntoIterator<Item = C>,
    C: AsRef<[f64]>,
{
    let mut det = Some(StreamDetector::new(config.clone(), sample_rate_hz)?);
    let mut chunks = chunks.into_iter();
    let mut ready = std::collections::VecDeque::new();
    Ok(std::iter::from_fn(move || loop {
        if let Some(ev) = ready.pop_front() {
            return Some(ev);
        }
        let d = det.as_mut()?;
        match chunks.next() {
            Some(c) => ready.extend(d.push(c.as_ref())),
            None => ready.extend(det.take()?.finish()),
        }
    }))
}

/// Among events starting within `tolerance` samples of `sample`, the one with
/// the largest mean.
pub fn event_near(events: &[DetectionEvent], sample: usize, tolerance: usize) -> Option<&DetectionEvent> {
    events
        .iter()
        .filter(|e| e.start_sample.abs_diff(sample) <= tolerance)
        .max_by(|a, b| a.mean.total_cmp(&b.mean).then(b.start_sample.cmp(&a.start_sample)))
}

/// The detection event for an impulse known to start at `sample`: the
/// strongest fired window within one hop, or, when none fired, the strongest
/// window within one hop regardless of the decision rule.
pub fn event_for_onset(
    buffer: &AudioBuffer,
    config: &DetectorConfig,
    sample: usize,
) -> Result<(DetectionEvent, bool), DetectError> {
    check_input(buffer, config)?;
    let analyzer = WindowAnalyzer::new(config.clone())?;
    let normalized = normalize_stream(&buffer.samples, config);
    let near: Vec<WindowAnalysis> = analyzer
        .windows(&normalized)
        .filter(|w| w.start_sample.abs_diff(sample) <= config.hop)
        .collect();
    let strongest = |fired_only: bool| {
        near.iter()
            .filter(|w| !fired_only || config.is_impulsive(&w.stats))
            .max_by(|a, b| a.stats.mean.total_cmp(&b.stats.mean).then(b.start_sample.cmp(&a.start_sample)))
            .cloned()
    };
    if let Some(w) = strongest(true) {
        return Ok((w.into_event(buffer.sample_rate_hz), true));
    }
    let w = strongest(false).unwrap_or_else(|| {
        let l = (sample / config.hop).min(window_count(normalized.len(), config.window_len, config.hop) - 1);
        analyzer.analyze(&normalized[l * config.hop..l * config.hop + config.window_len], l, l * config.hop)
    });
    Ok((w.into_event(buffer.sample_rate_hz), false))
}

/// Writes events as newline-delimited JSON.
pub fn write_events_jsonl<W: Write>(mut out: W, events: &[DetectionEvent]) -> io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Reads newline-delimited JSON events; blank lines are skipped.
pub fn read_events_jsonl<R: BufRead>(input: R) -> io::Result<Vec<DetectionEvent>> {
    let mut events = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ev = serde_json::from_str(&line).map_err(|e| {
            io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1))
        })?;
        events.push(ev);
    }
    Ok(events)
}
