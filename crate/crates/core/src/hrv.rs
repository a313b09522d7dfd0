//! The 17-feature HRV vector and per-segment feature extraction.
//!
//! Conventions worth knowing when comparing against other tools:
//!
//! * NN50 is a count of successive differences above 50 ms.
//! * The Baevsky stress index uses AMo as a fraction (0–1), not a percentage,
//!   so values are 100× smaller than percent-based implementations. Histogram
//!   bins are 50 ms wide and centered on multiples of 50 ms.
//! * Kurtosis is Pearson (non-excess): a normal distribution gives 3.
//! * VLF is computed on whatever window is available. From a 60 s window it
//!   resolves at most one or two spectral bins and should be read as a trend
//!   indicator only.
//! * PNS/SNS/CAB/VSE are z-score composites against [`NormParams`]; CAB and
//!   VSE take logarithms of band powers expressed in ms².

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{self, bands, DspError, Segment};
use crate::ingest::{Activity, EcgRecord, Label};
use crate::rpeaks::{self, RpeakError, RrSeries};

#[derive(Debug, Error, PartialEq)]
pub enum HrvError {
    #[error("need at least {needed} intervals, got {got}")]
    TooFewIntervals { needed: usize, got: usize },
    #[error("NN range is zero; stress index undefined")]
    DegenerateRange,
    #[error("HF power is zero; LF/HF undefined")]
    ZeroHfPower,
    #[error("PNS index is zero; SNS/PNS ratio undefined")]
    ZeroPnsIndex,
    #[error("band power must be positive to take its logarithm")]
    NonPositiveBandPower,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("segment has zero variance")]
    ZeroVariance,
    #[error("invalid norm parameters: {0}")]
    InvalidNorms(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Rpeak(#[from] RpeakError),
}

/// Successive-difference threshold for NN50, seconds.
pub const NN50_THRESHOLD: f64 = 0.050;
/// Histogram bin width for the stress index, seconds.
pub const SI_BIN_WIDTH: f64 = 0.050;
/// NN ranges below this (s) count as zero for the stress index.
pub const RANGE_FLOOR: f64 = 1e-9;
/// HF power below this (s²) is treated as zero.
pub const HF_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeDomain {
    pub n_beats_per_min: f64,
    pub hr_bpm: f64,
    pub sdnn_s: f64,
    pub rmssd_s: f64,
    pub nn50: usize,
    pub mean_nn_s: f64,
}

pub fn time_domain(rr: &RrSeries) -> Result<TimeDomain, HrvError> {
    let nn = rr.intervals();
    if nn.len() < 2 {
        return Err(HrvError::TooFewIntervals {
            needed: 2,
            got: nn.len(),
        });
    }
    let n = nn.len() as f64;
    // Duration is the summed NN time, so cleaning gaps do not dilute the rate
    // and a shift of all beat times leaves every output bit-identical.
    let total = nn.iter().sum::<f64>();
    let mean = total / n;
    let sdnn = (nn.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let diffs: Vec<f64> = nn.windows(2).map(|w| w[1] - w[0]).collect();
    let rmssd = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt();
    let nn50 = diffs.iter().filter(|d| d.abs() > NN50_THRESHOLD).count();
    Ok(TimeDomain {
        n_beats_per_min: (n + 1.0) * 60.0 / total,
        hr_bpm: 60.0 / mean,
        sdnn_s: sdnn,
        rmssd_s: rmssd,
        nn50,
        mean_nn_s: mean,
    })
}

/// Intermediate values of the Baevsky index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baevsky {
    /// Midpoint of the modal bin, seconds.
    pub mode: f64,
    /// Fraction of intervals in the modal bin.
    pub amplitude_of_mode: f64,
    /// max(NN) - min(NN), seconds.
    pub range: f64,
    pub index: f64,
}

pub fn baevsky(rr: &RrSeries) -> Result<Baevsky, HrvError> {
    let nn = rr.intervals();
    if nn.len() < 10 {
        return Err(HrvError::TooFewIntervals {
            needed: 10,
            got: nn.len(),
        });
    }
    let (lo, hi) = nn
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = hi - lo;
    // Intervals rebuilt from summed beat times carry rounding noise.
    if range <= RANGE_FLOOR {
        return Err(HrvError::DegenerateRange);
    }
    let mut counts = std::collections::BTreeMap::<i64, usize>::new();
    for v in nn {
        *counts.entry((v / SI_BIN_WIDTH).round() as i64).or_default() += 1;
    }
    // Lowest bin wins a tie.
    let (bin, count) = counts
        .iter()
        .fold((0i64, 0usize), |best, (&b, &c)| if c > best.1 { (b, c) } else { best });
    let mode = bin as f64 * SI_BIN_WIDTH;
    let amplitude_of_mode = count as f64 / nn.len() as f64;
    Ok(Baevsky {
        mode,
        amplitude_of_mode,
        range,
        index: amplitude_of_mode / (2.0 * mode * range),
    })
}

/// Baevsky stress index `AMo / (2·Mo·MxDMn)`, 1/s².
pub fn stress_index(rr: &RrSeries) -> Result<f64, HrvError> {
    baevsky(rr).map(|b| b.index)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyDomain {
    pub vlf: f64,
    pub lf: f64,
    pub hf: f64,
    pub lf_hf: f64,
    /// The tachogram covered less than 60 s, so LF is poorly resolved.
    pub short_window: bool,
}

/// Band powers from a 4 Hz cubic-spline tachogram and a Welch PSD.
pub fn frequency_domain(rr: &RrSeries) -> Result<FrequencyDomain, HrvError> {
    let psd = tachogram_psd(rr)?;
    let vlf = dsp::band_power(&psd, bands::VLF.0, bands::VLF.1)?;
    let lf = dsp::band_power(&psd, bands::LF.0, bands::LF.1)?;
    let hf = dsp::band_power(&psd, bands::HF.0, bands::HF.1)?;
    if hf <= HF_FLOOR {
        return Err(HrvError::ZeroHfPower);
    }
    Ok(FrequencyDomain {
        vlf,
        lf,
        hf,
        lf_hf: lf / hf,
        short_window: rr.span() < 60.0,
    })
}

/// Welch PSD of the resampled tachogram with default window settings.
pub fn tachogram_psd(rr: &RrSeries) -> Result<dsp::PsdEstimate, HrvError> {
    let tachogram = dsp::resample_tachogram(rr, dsp::TACHOGRAM_FS)?;
    Ok(dsp::welch_default(&tachogram, dsp::TACHOGRAM_FS)?)
}

/// Poincaré descriptors derived from SDNN and RMSSD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Poincare {
    pub sd1: f64,
    pub sd2: f64,
    pub sd1_pct: f64,
    pub sd2_pct: f64,
}

impl Poincare {
    pub fn from_sdnn_rmssd(sdnn: f64, rmssd: f64) -> Self {
        let sd1 = rmssd / std::f64::consts::SQRT_2;
        let sd2 = (2.0 * sdnn * sdnn - sd1 * sd1).max(0.0).sqrt();
        let total = sd1 + sd2;
        let (sd1_pct, sd2_pct) = if total > 0.0 {
            (sd1 / total, sd2 / total)
        } else {
            (0.0, 0.0)
        };
        Poincare {
            sd1,
            sd2,
            sd1_pct,
            sd2_pct,
        }
    }
}

/// Population mean and standard deviation of one index constituent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norm {
    pub mean: f64,
    pub sd: f64,
}

impl Norm {
    pub const fn new(mean: f64, sd: f64) -> Self {
        Norm { mean, sd }
    }

    pub fn z(&self, value: f64) -> f64 {
        (value - self.mean) / self.sd
    }
}

/// Reference values for the autonomic composites (resting adults).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormParams {
    /// Mean NN, seconds.
    pub mean_rr: Norm,
    /// Seconds.
    pub rmssd: Norm,
    pub sd1_pct: Norm,
    /// Beats per minute.
    pub hr: Norm,
    /// Baevsky index with fractional AMo.
    pub stress_index: Norm,
    pub sd2_pct: Norm,
    /// ln of LF power in ms².
    pub ln_lf: Norm,
    /// ln of HF power in ms².
    pub ln_hf: Norm,
}

impl Default for NormParams {
    fn default() -> Self {
        NormParams {
            mean_rr: Norm::new(0.926, 0.090),
            rmssd: Norm::new(0.042, 0.015),
            sd1_pct: Norm::new(0.35, 0.10),
            hr: Norm::new(65.0, 6.0),
            stress_index: Norm::new(7.0, 3.0),
            sd2_pct: Norm::new(0.65, 0.10),
            ln_lf: Norm::new(6.0, 1.0),
            ln_hf: Norm::new(5.5, 1.2),
        }
    }
}

impl NormParams {
    pub fn validate(&self) -> Result<(), HrvError> {
        let all = [
            ("mean_rr", self.mean_rr),
            ("rmssd", self.rmssd),
            ("sd1_pct", self.sd1_pct),
            ("hr", self.hr),
            ("stress_index", self.stress_index),
            ("sd2_pct", self.sd2_pct),
            ("ln_lf", self.ln_lf),
            ("ln_hf", self.ln_hf),
        ];
        for (name, n) in all {
            if !(n.mean.is_finite() && n.sd.is_finite() && n.sd > 0.0) {
                return Err(HrvError::InvalidNorms(format!(
                    "{name}: need finite mean and positive sd"
                )));
            }
        }
        Ok(())
    }

    /// Loads overrides from a TOML file such as
    /// `hr = { mean = 70.0, sd = 8.0 }`; unspecified entries keep defaults.
    pub fn from_toml(text: &str) -> Result<Self, HrvError> {
        let norms: NormParams =
            toml::from_str(text).map_err(|e| HrvError::InvalidNorms(e.to_string()))?;
        norms.validate()?;
        Ok(norms)
    }

    pub fn load(path: &Path) -> Result<Self, HrvError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HrvError::InvalidNorms(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

/// Everything the autonomic composites are computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutonomicInputs {
    pub mean_rr: f64,
    pub hr: f64,
    pub sdnn: f64,
    pub rmssd: f64,
    pub stress_index: f64,
    /// s².
    pub lf: f64,
    /// s².
    pub hf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutonomicIndices {
    pub pns_index: f64,
    pub sns_index: f64,
    pub sns_pns_ratio: f64,
    pub cab: f64,
    pub vse: f64,
}

const S2_TO_MS2: f64 = 1e6;

pub fn autonomic_from_inputs(
    inputs: &AutonomicInputs,
    norms: &NormParams,
) -> Result<AutonomicIndices, HrvError> {
    let poincare = Poincare::from_sdnn_rmssd(inputs.sdnn, inputs.rmssd);
    let pns_index = (norms.mean_rr.z(inputs.mean_rr)
        + norms.rmssd.z(inputs.rmssd)
        + norms.sd1_pct.z(poincare.sd1_pct))
        / 3.0;
    let sns_index = (norms.hr.z(inputs.hr)
        + norms.stress_index.z(inputs.stress_index)
        + norms.sd2_pct.z(poincare.sd2_pct))
        / 3.0;
    if pns_index == 0.0 {
        return Err(HrvError::ZeroPnsIndex);
    }
    if !(inputs.lf > 0.0 && inputs.hf > 0.0) {
        return Err(HrvError::NonPositiveBandPower);
    }
    let z_lf = norms.ln_lf.z((inputs.lf * S2_TO_MS2).ln());
    let z_hf = norms.ln_hf.z((inputs.hf * S2_TO_MS2).ln());
    Ok(AutonomicIndices {
        pns_index,
        sns_index,
        sns_pns_ratio: sns_index / pns_index,
        cab: z_hf - z_lf,
        vse: z_hf + z_lf,
    })
}

pub fn autonomic_indices(
    rr: &RrSeries,
    freq: &FrequencyDomain,
    norms: &NormParams,
) -> Result<AutonomicIndices, HrvError> {
    let td = time_domain(rr)?;
    let si = stress_index(rr)?;
    autonomic_from_inputs(
        &AutonomicInputs {
            mean_rr: td.mean_nn_s,
            hr: td.hr_bpm,
            sdnn: td.sdnn_s,
            rmssd: td.rmssd_s,
            stress_index: si,
            lf: freq.lf,
            hf: freq.hf,
        },
        norms,
    )
}

/// Pearson skewness and (non-excess) kurtosis of raw samples.
pub fn shape_stats_samples(x: &[f64]) -> Result<(f64, f64), HrvError> {
    if x.len() < 4 {
        return Err(HrvError::TooFewSamples {
            needed: 4,
            got: x.len(),
        });
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let scale = mean.abs().max(x.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    if m2 <= (f64::EPSILON * scale).powi(2) * 16.0 || m2 == 0.0 {
        return Err(HrvError::ZeroVariance);
    }
    Ok((m3 / m2.powf(1.5), m4 / (m2 * m2)))
}

/// `(skewness, kurtosis)` of a segment's samples.
pub fn shape_stats(segment: &Segment) -> Result<(f64, f64), HrvError> {
    shape_stats_samples(&segment.samples)
}

/// Canonical feature column names, in table order.
pub const FEATURE_NAMES: [&str; 17] = [
    "No. Beats/min",
    "HR (bpm)",
    "SDNN (sec)",
    "RMSSD (sec)",
    "NN50 (sec)",
    "Stress Index (mv/sec^2)",
    "VLF",
    "LF",
    "HF",
    "LF to HF ratio",
    "PNS Index",
    "SNS Index",
    "SNS to PNS ratio",
    "CAB",
    "VSE",
    "Kurtosis",
    "Skewness",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrvFeatureVector {
    pub n_beats_per_min: f64,
    pub hr_bpm: f64,
    pub sdnn_s: f64,
    pub rmssd_s: f64,
    pub nn50: f64,
    pub stress_index: f64,
    pub vlf: f64,
    pub lf: f64,
    pub hf: f64,
    pub lf_hf: f64,
    pub pns_index: f64,
    pub sns_index: f64,
    pub sns_pns_ratio: f64,
    pub cab: f64,
    pub vse: f64,
    pub kurtosis: f64,
    pub skewness: f64,
}

impl HrvFeatureVector {
    pub fn to_array(&self) -> [f64; 17] {
        [
            self.n_beats_per_min,
            self.hr_bpm,
            self.sdnn_s,
            self.rmssd_s,
            self.nn50,
            self.stress_index,
            self.vlf,
            self.lf,
            self.hf,
            self.lf_hf,
            self.pns_index,
            self.sns_index,
            self.sns_pns_ratio,
            self.cab,
            self.vse,
            self.kurtosis,
            self.skewness,
        ]
    }

    pub fn from_array(v: [f64; 17]) -> Self {
        HrvFeatureVector {
            n_beats_per_min: v[0],
            hr_bpm: v[1],
            sdnn_s: v[2],
            rmssd_s: v[3],
            nn50: v[4],
            stress_index: v[5],
            vlf: v[6],
            lf: v[7],
            hf: v[8],
            lf_hf: v[9],
            pns_index: v[10],
            sns_index: v[11],
            sns_pns_ratio: v[12],
            cab: v[13],
            vse: v[14],
            kurtosis: v[15],
            skewness: v[16],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// HRV features of a beat window plus shape statistics of a segment.
pub fn feature_vector(
    rr: &RrSeries,
    segment_samples: &[f64],
    norms: &NormParams,
) -> Result<HrvFeatureVector, HrvError> {
    let td = time_domain(rr)?;
    let si = stress_index(rr)?;
    let fd = frequency_domain(rr)?;
    let auto = autonomic_from_inputs(
        &AutonomicInputs {
            mean_rr: td.mean_nn_s,
            hr: td.hr_bpm,
            sdnn: td.sdnn_s,
            rmssd: td.rmssd_s,
            stress_index: si,
            lf: fd.lf,
            hf: fd.hf,
        },
        norms,
    )?;
    let (skewness, kurtosis) = shape_stats_samples(segment_samples)?;
    Ok(HrvFeatureVector {
        n_beats_per_min: td.n_beats_per_min,
        hr_bpm: td.hr_bpm,
        sdnn_s: td.sdnn_s,
        rmssd_s: td.rmssd_s,
        nn50: td.nn50 as f64,
        stress_index: si,
        vlf: fd.vlf,
        lf: fd.lf,
        hf: fd.hf,
        lf_hf: fd.lf_hf,
        pns_index: auto.pns_index,
        sns_index: auto.sns_index,
        sns_pns_ratio: auto.sns_pns_ratio,
        cab: auto.cab,
        vse: auto.vse,
        kurtosis,
        skewness,
    })
}

/// One row of the feature table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub subject_id: String,
    pub activity: Activity,
    pub segment: usize,
    pub label: Label,
    pub features: HrvFeatureVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractOptions {
    pub remove_baseline: bool,
    pub highpass_cutoff: f64,
    /// Power-line notch frequency, off by default.
    pub notch: Option<f64>,
    pub n_segments: usize,
    /// Length of the beat window each segment draws its HRV features from, seconds.
    pub hrv_window: f64,
    pub min_intervals: usize,
    pub norms: NormParams,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            remove_baseline: true,
            highpass_cutoff: dsp::DEFAULT_HIGHPASS_HZ,
            notch: None,
            n_segments: dsp::DEFAULT_SEGMENTS,
            hrv_window: 60.0,
            min_intervals: 10,
            norms: NormParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExtraction {
    pub rows: Vec<FeatureRow>,
    /// Segments that produced no row (too few beats or undefined features).
    pub skipped: usize,
    pub n_beats: usize,
}

/// Baseline removal, high-pass and optional notch, in that order.
pub fn preprocess(record: &EcgRecord, opts: &ExtractOptions) -> Result<EcgRecord, HrvError> {
    let mut rec = if opts.remove_baseline {
        dsp::remove_baseline(record)?
    } else {
        record.clone()
    };
    rec = dsp::highpass(&rec, opts.highpass_cutoff)?;
    if let Some(freq) = opts.notch {
        rec = dsp::notch(&rec, freq, 30.0)?;
    }
    Ok(rec)
}

/// `[lo, hi]` of a `width`-second window centered on `mid`, shifted to stay
/// inside `[0, duration]`.
pub fn centered_window(mid: f64, width: f64, duration: f64) -> (f64, f64) {
    if width >= duration {
        return (0.0, duration);
    }
    let lo = (mid - width / 2.0).clamp(0.0, duration - width);
    (lo, lo + width)
}

/// Runs the full per-record pipeline and emits one row per usable segment.
///
/// R peaks and the NN series are computed once on the whole preprocessed
/// record. Each segment then takes its HRV features from the NN intervals in a
/// window of `hrv_window` seconds centered on the segment midpoint, and its
/// skewness/kurtosis from its own samples.
pub fn extract_features(
    record: &EcgRecord,
    opts: &ExtractOptions,
) -> Result<FeatureExtraction, HrvError> {
    let clean = preprocess(record, opts)?;
    let peaks = rpeaks::detect_rpeaks(&clean)?;
    let segments = dsp::segment(&clean, opts.n_segments)?;
    let rr = match rpeaks::to_rr(&peaks, clean.fs) {
        Ok(rr) => rr,
        Err(RpeakError::TooFewPeaks(n)) => {
            log::warn!(
                "{}/{}: only {n} beats detected, no feature rows",
                record.subject_id,
                record.activity
            );
            return Ok(FeatureExtraction {
                rows: Vec::new(),
                skipped: segments.len(),
                n_beats: n,
            });
        }
        Err(e) => return Err(e.into()),
    };
    let duration = clean.duration();

    let results: Vec<Option<FeatureRow>> = segments
        .par_iter()
        .map(|seg| {
            let (lo, hi) = centered_window(seg.midpoint_time(), opts.hrv_window, duration);
            let window = rr.window(lo, hi);
            if window.len() < opts.min_intervals {
                return None;
            }
            feature_vector(&window, &seg.samples, &opts.norms)
                .ok()
                .filter(HrvFeatureVector::is_finite)
                .map(|features| FeatureRow {
                    subject_id: record.subject_id.clone(),
                    activity: record.activity.clone(),
                    segment: seg.index,
                    label: record.label,
                    features,
                })
        })
        .collect();
    let skipped = results.iter().filter(|r| r.is_none()).count();
    if skipped > 0 {
        log::warn!(
            "{}/{}: skipped {skipped} of {} segments",
            record.subject_id,
            record.activity,
            segments.len()
        );
    }
    Ok(FeatureExtraction {
        rows: results.into_iter().flatten().collect(),
        skipped,
        n_beats: peaks.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(nn: &[f64]) -> RrSeries {
        let mut times = vec![0.0];
        for v in nn {
            times.push(times.last().unwrap() + v);
        }
        RrSeries::from_beat_times(&times).unwrap()
    }

    #[test]
    fn time_domain_constant() {
        let td = time_domain(&series(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(td.hr_bpm, 60.0);
        assert_eq!(td.sdnn_s, 0.0);
        assert_eq!(td.rmssd_s, 0.0);
        assert_eq!(td.nn50, 0);
        assert!((td.n_beats_per_min - 80.0).abs() < 1e-12);
    }

    #[test]
    fn time_domain_small_series() {
        let td = time_domain(&series(&[0.8, 0.9, 0.8])).unwrap();
        assert!((td.hr_bpm - 72.0).abs() < 1e-9);
        assert!((td.rmssd_s - 0.1).abs() < 1e-12);
        assert_eq!(td.nn50, 2);
        let td = time_domain(&series(&[0.8, 0.86])).unwrap();
        assert_eq!(td.nn50, 1);
        assert!(time_domain(&series(&[0.8])).is_err());
    }

    #[test]
    fn stress_index_single_bin() {
        let mut nn = vec![0.8; 9];
        nn.push(0.81);
        let b = baevsky(&series(&nn)).unwrap();
        assert_eq!(b.amplitude_of_mode, 1.0);
        assert!((b.mode - 0.8).abs() < 1e-12);
        assert!((b.range - 0.01).abs() < 1e-12);
        assert!((b.index - 62.5).abs() < 1e-6);
    }

    #[test]
    fn stress_index_uniform_spread() {
        let nn: Vec<f64> = (0..40).map(|i| 0.7 + 0.4 * i as f64 / 39.0).collect();
        let b = baevsky(&series(&nn)).unwrap();
        assert!((b.amplitude_of_mode - 0.125).abs() < 1e-12);
        assert!((b.range - 0.4).abs() < 1e-12);
    }

    #[test]
    fn stress_index_errors() {
        assert_eq!(
            stress_index(&series(&[0.8; 12])),
            Err(HrvError::DegenerateRange)
        );
        assert!(matches!(
            stress_index(&series(&[0.8; 5])),
            Err(HrvError::TooFewIntervals { needed: 10, got: 5 })
        ));
    }

    #[test]
    fn frequency_domain_constant_rr() {
        let rr = series(&[1.0; 120]);
        assert_eq!(frequency_domain(&rr), Err(HrvError::ZeroHfPower));
        let psd = tachogram_psd(&rr).unwrap();
        for band in [bands::VLF, bands::LF, bands::HF] {
            assert!(dsp::band_power(&psd, band.0, band.1).unwrap() < 1e-10);
        }
    }

    fn at_norms(norms: &NormParams) -> AutonomicInputs {
        let rmssd = norms.rmssd.mean;
        let sd1 = rmssd / std::f64::consts::SQRT_2;
        let sd2 = sd1 * norms.sd2_pct.mean / norms.sd1_pct.mean;
        AutonomicInputs {
            mean_rr: norms.mean_rr.mean,
            hr: norms.hr.mean,
            sdnn: ((sd1 * sd1 + sd2 * sd2) / 2.0).sqrt(),
            rmssd,
            stress_index: norms.stress_index.mean,
            lf: norms.ln_lf.mean.exp() / 1e6,
            hf: norms.ln_hf.mean.exp() / 1e6,
        }
    }

    #[test]
    fn composites_at_norm_means() {
        let norms = NormParams::default();
        let inputs = at_norms(&norms);
        let p = Poincare::from_sdnn_rmssd(inputs.sdnn, inputs.rmssd);
        assert!((p.sd1_pct - 0.35).abs() < 1e-12);
        // pns is exactly 0 here, so the ratio is undefined.
        assert_eq!(
            autonomic_from_inputs(&inputs, &norms).map(|a| a.pns_index.abs() < 1e-12),
            Err(HrvError::ZeroPnsIndex)
        );
        let shifted = AutonomicInputs {
            mean_rr: inputs.mean_rr + norms.mean_rr.sd,
            ..inputs
        };
        let a = autonomic_from_inputs(&shifted, &norms).unwrap();
        assert!((a.pns_index - 1.0 / 3.0).abs() < 1e-12);
        assert!(a.sns_index.abs() < 1e-12);
        assert!(a.cab.abs() < 1e-12 && a.vse.abs() < 1e-12);
    }

    #[test]
    fn poincare_equal_sdnn_rmssd() {
        let p = Poincare::from_sdnn_rmssd(0.05, 0.05);
        let expect = 0.05 / std::f64::consts::SQRT_2;
        assert!((p.sd1 - expect).abs() < 1e-15);
        assert!((p.sd2 - (2.0 * 0.05f64.powi(2) - expect * expect).sqrt()).abs() < 1e-15);
        assert!((p.sd2 - 0.05 * 1.5f64.sqrt()).abs() < 1e-15);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((p.sd1_pct - r / (r + 1.5f64.sqrt())).abs() < 1e-15);
        assert!((p.sd1_pct + p.sd2_pct - 1.0).abs() < 1e-15);
    }

    #[test]
    fn composites_reject_bad_power() {
        let norms = NormParams::default();
        let inputs = AutonomicInputs {
            mean_rr: 1.0,
            lf: 0.0,
            ..at_norms(&norms)
        };
        assert_eq!(
            autonomic_from_inputs(&inputs, &norms),
            Err(HrvError::NonPositiveBandPower)
        );
    }

    #[test]
    fn shape_stats_basics() {
        let (s, _) = shape_stats_samples(&[-1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(s, 0.0);
        assert_eq!(shape_stats_samples(&[2.5; 10]), Err(HrvError::ZeroVariance));
        assert!(matches!(
            shape_stats_samples(&[1.0, 2.0]),
            Err(HrvError::TooFewSamples { .. })
        ));
        // Two-point symmetric distribution: kurtosis 1.
        let (s, k) = shape_stats_samples(&[-1.0, 1.0, -1.0, 1.0]).unwrap();
        assert_eq!((s, k), (0.0, 1.0));
    }

    #[test]
    fn norms_from_toml() {
        let n = NormParams::from_toml("hr = { mean = 70.0, sd = 8.0 }\n").unwrap();
        assert_eq!(n.hr, Norm::new(70.0, 8.0));
        assert_eq!(n.rmssd, NormParams::default().rmssd);
        assert!(NormParams::from_toml("hr = { mean = 70.0, sd = 0.0 }\n").is_err());
    }

    #[test]
    fn window_clamping() {
        assert_eq!(centered_window(10.0, 60.0, 120.0), (0.0, 60.0));
        assert_eq!(centered_window(110.0, 60.0, 120.0), (60.0, 120.0));
        assert_eq!(centered_window(60.0, 60.0, 120.0), (30.0, 90.0));
        assert_eq!(centered_window(5.0, 60.0, 40.0), (0.0, 40.0));
    }
}
