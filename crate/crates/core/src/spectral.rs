//! Arbitrary-length DFT and the energy/variance statistics built on it.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("frame has {frame} samples but the transform expects {expected}")]
    LengthMismatch { frame: usize, expected: usize },
    #[error("bin range {lo}..={hi} invalid for {len} bins")]
    RangeOutOfBounds { lo: usize, hi: usize, len: usize },
}

/// Complex spectrum `X[k]`, `k = 0..n_points`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    pub bins: Vec<Complex64>,
    pub n_points: usize,
}

/// Mean and population variance of spectral magnitudes over `bin_lo..=bin_hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralStats {
    pub mean: f64,
    pub variance: f64,
    pub bin_lo: usize,
    pub bin_hi: usize,
}

/// Precomputed twiddle factors for a direct `N`-point DFT.
///
/// The transform is the plain O(N·K) sum; exponents are reduced modulo `N`
/// so every bin reads from a single table of `N` roots of unity. Any subset of
/// bins may be evaluated and yields exactly the values the full transform
/// would.
#[derive(Debug, Clone)]
pub struct DftPlan {
    n: usize,
    twiddles: Vec<Complex64>,
}

impl DftPlan {
    pub fn new(n_points: usize) -> Self {
        assert!(n_points >= 1, "DFT length must be positive");
        let twiddles = (0..n_points)
            .map(|m| Complex64::from_polar(1.0, -2.0 * PI * m as f64 / n_points as f64))
            .collect();
        Self {
            n: n_points,
            twiddles,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn check(&self, frame: &[f64]) -> Result<(), SpectralError> {
        if frame.len() != self.n {
            return Err(SpectralError::LengthMismatch {
                frame: frame.len(),
                expected: self.n,
            });
        }
        Ok(())
    }

    #[inline]
    fn bin_unchecked(&self, frame: &[f64], k: usize) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut idx = 0usize;
        for &x in frame {
            acc += self.twiddles[idx] * x;
            idx += k;
            if idx >= self.n {
                idx -= self.n;
            }
        }
        acc
    }

    /// All `N` bins.
    pub fn transform(&self, frame: &[f64]) -> Result<ComplexSpectrum, SpectralError> {
        self.check(frame)?;
        let bins = (0..self.n).map(|k| self.bin_unchecked(frame, k)).collect();
        Ok(ComplexSpectrum {
            bins,
            n_points: self.n,
        })
    }

    /// Magnitudes `|X[k]|` for `k` in `lo..=hi` only, written into `out`.
    pub fn band_magnitudes_into(
        &self,
        frame: &[f64],
        lo: usize,
        hi: usize,
        out: &mut Vec<f64>,
    ) -> Result<(), SpectralError> {
        self.check(frame)?;
        if lo > hi || hi >= self.n {
            return Err(SpectralError::RangeOutOfBounds {
                lo,
                hi,
                len: self.n,
            });
        }
        out.clear();
        out.extend((lo..=hi).map(|k| self.bin_unchecked(frame, k).norm()));
        Ok(())
    }
}

/// `X[k] = Σ frame[n]·e^{−j2πnk/N}` for any `N ≥ 1`.
pub fn dft(frame: &[f64], n_points: usize) -> Result<ComplexSpectrum, SpectralError> {
    if frame.len() != n_points || n_points == 0 {
        return Err(SpectralError::LengthMismatch {
            frame: frame.len(),
            expected: n_points,
        });
    }
    DftPlan::new(n_points).transform(frame)
}

pub fn magnitudes(spectrum: &ComplexSpectrum) -> Vec<f64> {
    spectrum.bins.iter().map(|c| c.norm()).collect()
}

/// Time-domain energy `Σ|x[n]|²`.
pub fn energy_time(frame: &[f64]) -> f64 {
    frame.iter().map(|x| x * x).sum()
}

/// Frequency-domain energy `(1/N)·Σ|X[k]|²`.
pub fn energy_freq(spectrum: &ComplexSpectrum) -> f64 {
    if spectrum.n_points == 0 {
        return 0.0;
    }
    spectrum.bins.iter().map(|c| c.norm_sqr()).sum::<f64>() / spectrum.n_points as f64
}

/// Mean and population variance of `mags[bin_lo..=bin_hi]`.
///
/// Variance is `E[X²] − E[X]²`, clamped at zero against round-off.
pub fn spectral_stats(
    mags: &[f64],
    bin_lo: usize,
    bin_hi: usize,
) -> Result<SpectralStats, SpectralError> {
    if bin_lo > bin_hi || bin_hi >= mags.len() {
        return Err(SpectralError::RangeOutOfBounds {
            lo: bin_lo,
            hi: bin_hi,
            len: mags.len(),
        });
    }
    let (mean, variance) = mean_variance(&mags[bin_lo..=bin_hi]);
    Ok(SpectralStats {
        mean,
        variance,
        bin_lo,
        bin_hi,
    })
}

pub(crate) fn mean_variance(values: &[f64]) -> (f64, f64) {
    let count = values.len() as f64;
    let (sum, sum_sq) = values
        .iter()
        .fold((0.0, 0.0), |(s, q), &v| (s + v, q + v * v));
    let mean = sum / count;
    let variance = (sum_sq / count - mean * mean).max(0.0);
    (mean, variance)
}
