//! Filtering, segmentation, tachogram resampling and Welch spectra.

use std::f64::consts::{PI, SQRT_2};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Activity, EcgRecord, Label};
use crate::rpeaks::RrSeries;

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("cutoff {cutoff} Hz must lie strictly between 0 and fs/2 = {nyquist} Hz")]
    InvalidCutoff { cutoff: f64, nyquist: f64 },
    #[error("record of {len} samples is too short (need more than {needed})")]
    RecordTooShort { len: usize, needed: usize },
    #[error("cannot cut {len} samples into {n} segments")]
    TooFewSamples { len: usize, n: usize },
    #[error("tachogram needs at least 4 intervals, got {0}")]
    TooFewBeats(usize),
    #[error("beat times are not strictly increasing")]
    NonMonotoneTimes,
    #[error("window of {window} samples exceeds signal length {len}")]
    WindowTooLong { window: usize, len: usize },
    #[error("invalid Welch parameters: {0}")]
    InvalidWindow(String),
    #[error("invalid band [{lo}, {hi}] Hz")]
    InvalidBand { lo: f64, hi: f64 },
}

/// Second-order IIR section, `a[0]` normalized to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn check_cutoff(cutoff: f64, fs: f64) -> Result<f64, DspError> {
        let nyquist = fs / 2.0;
        if !(cutoff > 0.0 && cutoff < nyquist) {
            return Err(DspError::InvalidCutoff { cutoff, nyquist });
        }
        Ok((PI * cutoff / fs).tan())
    }

    /// 2nd-order Butterworth high-pass (bilinear transform, prewarped).
    pub fn butter_highpass(cutoff: f64, fs: f64) -> Result<Self, DspError> {
        let k = Self::check_cutoff(cutoff, fs)?;
        let norm = 1.0 / (1.0 + SQRT_2 * k + k * k);
        Ok(Biquad {
            b: [norm, -2.0 * norm, norm],
            a: [1.0, 2.0 * (k * k - 1.0) * norm, (1.0 - SQRT_2 * k + k * k) * norm],
        })
    }

    /// 2nd-order Butterworth low-pass (bilinear transform, prewarped).
    pub fn butter_lowpass(cutoff: f64, fs: f64) -> Result<Self, DspError> {
        let k = Self::check_cutoff(cutoff, fs)?;
        let norm = 1.0 / (1.0 + SQRT_2 * k + k * k);
        let b0 = k * k * norm;
        Ok(Biquad {
            b: [b0, 2.0 * b0, b0],
            a: [1.0, 2.0 * (k * k - 1.0) * norm, (1.0 - SQRT_2 * k + k * k) * norm],
        })
    }

    /// Notch at `freq` with quality factor `q`.
    pub fn notch(freq: f64, q: f64, fs: f64) -> Result<Self, DspError> {
        Self::check_cutoff(freq, fs)?;
        let w0 = 2.0 * PI * freq / fs;
        let alpha = w0.sin() / (2.0 * q);
        let a0 = 1.0 + alpha;
        Ok(Biquad {
            b: [1.0 / a0, -2.0 * w0.cos() / a0, 1.0 / a0],
            a: [1.0, -2.0 * w0.cos() / a0, (1.0 - alpha) / a0],
        })
    }

    /// Steady-state transposed direct-form II state for a unit step input.
    fn step_state(&self) -> [f64; 2] {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        let gain = (b0 + b1 + b2) / (1.0 + a1 + a2);
        let z2 = b2 - a2 * gain;
        let z1 = b1 - a1 * gain + z2;
        [z1, z2]
    }

    fn run(&self, x: &mut [f64], state: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        let [mut z1, mut z2] = state;
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + z1;
            z1 = b1 * input - a1 * y + z2;
            z2 = b2 * input - a2 * y;
            *v = y;
        }
    }

    /// Zero-phase forward-backward filtering with odd-extension padding.
    pub fn filtfilt(&self, x: &[f64], padlen: usize) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = padlen.min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let zi = self.step_state();
        let first = ext[0];
        self.run(&mut ext, [zi[0] * first, zi[1] * first]);
        ext.reverse();
        let first = ext[0];
        self.run(&mut ext, [zi[0] * first, zi[1] * first]);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }

    /// Squared magnitude of the frequency response at `freq`.
    pub fn magnitude_squared(&self, freq: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * freq / fs;
        let z1 = Complex::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let num = self.b[0] + self.b[1] * z1 + self.b[2] * z2;
        let den = self.a[0] + self.a[1] * z1 + self.a[2] * z2;
        (num / den).norm_sqr()
    }
}

fn default_padlen(cutoff: f64, fs: f64) -> usize {
    ((3.0 * fs / cutoff).ceil() as usize).max(9)
}

/// Zero-phase 2nd-order Butterworth high-pass of raw samples.
pub fn highpass_samples(x: &[f64], fs: f64, cutoff: f64) -> Result<Vec<f64>, DspError> {
    let section = Biquad::butter_highpass(cutoff, fs)?;
    Ok(section.filtfilt(x, default_padlen(cutoff, fs)))
}

/// Zero-phase 2nd-order Butterworth low-pass of raw samples.
pub fn lowpass_samples(x: &[f64], fs: f64, cutoff: f64) -> Result<Vec<f64>, DspError> {
    let section = Biquad::butter_lowpass(cutoff, fs)?;
    Ok(section.filtfilt(x, default_padlen(cutoff, fs)))
}

/// Zero-phase band-pass built from a high-pass and a low-pass section.
pub fn bandpass_samples(x: &[f64], fs: f64, lo: f64, hi: f64) -> Result<Vec<f64>, DspError> {
    let y = highpass_samples(x, fs, lo)?;
    lowpass_samples(&y, fs, hi)
}

/// Default high-pass cutoff for baseline suppression, Hz.
pub const DEFAULT_HIGHPASS_HZ: f64 = 0.5;

/// Zero-phase 2nd-order Butterworth high-pass filter.
pub fn highpass(record: &EcgRecord, cutoff: f64) -> Result<EcgRecord, DspError> {
    Ok(record.with_samples(highpass_samples(&record.samples, record.fs, cutoff)?))
}

/// Zero-phase power-line notch.
pub fn notch(record: &EcgRecord, freq: f64, q: f64) -> Result<EcgRecord, DspError> {
    let section = Biquad::notch(freq, q, record.fs)?;
    let padlen = ((3.0 * q * record.fs / freq).ceil() as usize).max(9);
    Ok(record.with_samples(section.filtfilt(&record.samples, padlen)))
}

/// Running median with a centered window that shrinks at the edges.
pub fn median_filter(x: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let mut buf = Vec::with_capacity(window);
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            buf.clear();
            buf.extend_from_slice(&x[lo..hi]);
            let mid = buf.len() / 2;
            let (_, m, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
            *m
        })
        .collect()
}

fn odd_window(seconds: f64, fs: f64) -> usize {
    let w = (seconds * fs).round().max(1.0) as usize;
    if w % 2 == 0 {
        w + 1
    } else {
        w
    }
}

/// Subtracts a baseline estimated by a 200 ms median followed by a 600 ms median.
pub fn remove_baseline(record: &EcgRecord) -> Result<EcgRecord, DspError> {
    let needed = (0.6 * record.fs).ceil() as usize;
    if record.len() <= needed {
        return Err(DspError::RecordTooShort {
            len: record.len(),
            needed,
        });
    }
    let first = median_filter(&record.samples, odd_window(0.2, record.fs));
    let baseline = median_filter(&first, odd_window(0.6, record.fs));
    Ok(record.with_samples(
        record
            .samples
            .iter()
            .zip(&baseline)
            .map(|(x, b)| x - b)
            .collect(),
    ))
}

/// One of the equal-length batches a record is cut into.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub samples: Vec<f64>,
    pub fs: f64,
    pub subject_id: String,
    pub activity: Activity,
    pub label: Label,
    pub index: usize,
    /// Offset of the first sample in the parent record.
    pub start: usize,
}

impl Segment {
    /// Midpoint of the segment within the parent record, seconds.
    pub fn midpoint_time(&self) -> f64 {
        (self.start as f64 + self.samples.len() as f64 / 2.0) / self.fs
    }
}

/// Default number of batches per record.
pub const DEFAULT_SEGMENTS: usize = 100;

/// Cuts a record into `n` consecutive segments of `len / n` samples. Trailing
/// remainder samples are dropped.
pub fn segment(record: &EcgRecord, n: usize) -> Result<Vec<Segment>, DspError> {
    let len = record.len();
    if n == 0 || len < n {
        return Err(DspError::TooFewSamples { len, n });
    }
    let width = len / n;
    Ok((0..n)
        .map(|index| {
            let start = index * width;
            Segment {
                samples: record.samples[start..start + width].to_vec(),
                fs: record.fs,
                subject_id: record.subject_id.clone(),
                activity: record.activity.clone(),
                label: record.label,
                index,
                start,
            }
        })
        .collect())
}

/// Natural cubic spline through `(x, y)` knots.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    /// `x` must be strictly increasing with at least two knots.
    pub fn natural(x: &[f64], y: &[f64]) -> Result<Self, DspError> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(DspError::TooFewBeats(n.saturating_sub(1)));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(DspError::NonMonotoneTimes);
        }
        let mut m = vec![0.0; n];
        if n > 2 {
            // Tridiagonal system for interior second derivatives (Thomas algorithm).
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                diag[i - 1] = 2.0 * (h0 + h1);
                upper[i - 1] = h1;
                rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            for i in 1..k {
                let lower = x[i + 1] - x[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Ok(CubicSpline {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let h = x1 - x0;
        let a = (x1 - t) / h;
        let b = (t - x0) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

/// Default tachogram resampling rate, Hz.
pub const TACHOGRAM_FS: f64 = 4.0;

/// Cubic-spline interpolation of the RR tachogram onto a uniform grid.
///
/// Each interval is placed at the time of the beat that closes it. The grid
/// runs from the first to the last knot at `target_fs`.
pub fn resample_tachogram(rr: &RrSeries, target_fs: f64) -> Result<Vec<f64>, DspError> {
    if rr.len() < 4 {
        return Err(DspError::TooFewBeats(rr.len()));
    }
    let spline = CubicSpline::natural(rr.end_times(), rr.intervals())?;
    let t0 = rr.end_times()[0];
    let span = rr.end_times()[rr.len() - 1] - t0;
    let count = (span * target_fs + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|k| spline.eval(t0 + k as f64 / target_fs))
        .collect())
}

/// One-sided power spectral density on a uniform grid starting at 0 Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
}

impl PsdEstimate {
    pub fn resolution(&self) -> f64 {
        self.freqs.get(1).copied().unwrap_or(0.0)
    }

    pub fn max_freq(&self) -> f64 {
        self.freqs.last().copied().unwrap_or(0.0)
    }

    /// Trapezoidal integral over the full grid.
    pub fn total_power(&self) -> f64 {
        self.freqs
            .windows(2)
            .zip(self.power.windows(2))
            .map(|(f, p)| (f[1] - f[0]) * (p[0] + p[1]) / 2.0)
            .sum()
    }

    /// Frequency of the largest bin inside `[lo, hi]`.
    pub fn peak_in(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        self.freqs
            .iter()
            .zip(&self.power)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(f, p)| (*f, *p))
    }
}

fn hann_periodic(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Welch averaged periodogram.
///
/// Segments of `window_len` samples overlap by `overlap` (fraction), have their
/// mean removed, and are Hann-windowed. The result is density-scaled and
/// one-sided so that integrating it over `[0, fs/2]` recovers the variance.
pub fn welch_psd(
    signal: &[f64],
    fs: f64,
    window_len: usize,
    overlap: f64,
) -> Result<PsdEstimate, DspError> {
    if window_len > signal.len() {
        return Err(DspError::WindowTooLong {
            window: window_len,
            len: signal.len(),
        });
    }
    if window_len < 2 {
        return Err(DspError::InvalidWindow(format!(
            "window must hold at least 2 samples, got {window_len}"
        )));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(DspError::InvalidWindow(format!(
            "overlap must be in [0, 1), got {overlap}"
        )));
    }
    if !(fs.is_finite() && fs > 0.0) {
        return Err(DspError::InvalidWindow(format!("fs must be positive, got {fs}")));
    }

    let n = window_len;
    let step = (n - (overlap * n as f64).floor() as usize).max(1);
    let window = hann_periodic(n);
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let bins = n / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut count = 0usize;

    let mut start = 0;
    while start + n <= signal.len() {
        let chunk = &signal[start..start + n];
        let mean = chunk.iter().sum::<f64>() / n as f64;
        for ((b, x), w) in buf.iter_mut().zip(chunk).zip(&window) {
            *b = Complex::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        count += 1;
        start += step;
    }

    let scale = 1.0 / (fs * window_power * count as f64);
    let power = acc
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let nyquist_bin = n % 2 == 0 && k == n / 2;
            let one_sided = if k == 0 || nyquist_bin { 1.0 } else { 2.0 };
            p * scale * one_sided
        })
        .collect();
    let freqs = (0..bins).map(|k| k as f64 * fs / n as f64).collect();
    Ok(PsdEstimate { freqs, power })
}

/// Welch with the default parameters: window of `min(256, len)` samples, 50% overlap.
pub fn welch_default(signal: &[f64], fs: f64) -> Result<PsdEstimate, DspError> {
    welch_psd(signal, fs, signal.len().min(256), 0.5)
}

/// Trapezoidal integral of the PSD over `[lo, hi]`, interpolating linearly at
/// the band edges.
pub fn band_power(psd: &PsdEstimate, lo: f64, hi: f64) -> Result<f64, DspError> {
    if !(lo >= 0.0 && lo < hi && hi <= psd.max_freq()) {
        return Err(DspError::InvalidBand { lo, hi });
    }
    let f = &psd.freqs;
    let p = &psd.power;
    let interp = |i: usize, x: f64| {
        let t = (x - f[i]) / (f[i + 1] - f[i]);
        p[i] + t * (p[i + 1] - p[i])
    };
    let mut total = 0.0;
    for i in 0..f.len().saturating_sub(1) {
        let a = f[i].max(lo);
        let b = f[i + 1].min(hi);
        if b <= a {
            continue;
        }
        total += (b - a) * (interp(i, a) + interp(i, b)) / 2.0;
    }
    Ok(total)
}

/// Standard HRV bands, Hz.
pub mod bands {
    pub const VLF: (f64, f64) = (0.003, 0.04);
    pub const LF: (f64, f64) = (0.04, 0.15);
    pub const HF: (f64, f64) = (0.15, 0.40);
}
